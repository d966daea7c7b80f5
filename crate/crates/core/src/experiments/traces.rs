use std::path::PathBuf;

use crate::error::Result;
use crate::gd::{GdProblem, GdState};
use crate::linalg::Vector;
use crate::randgen::{gen_fixed_design, DropoutMask, RngStream, StreamSample};
use crate::sgd::{AsgdState, SgdState};

use super::config::{equidistant_beta, ExperimentConfig};
use super::csv::CsvWriter;

/// Points recorded per trace, besides the final step.
pub const TRACE_POINTS: u64 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algo {
    /// Averaged GD over a fixed design.
    Agd,
    /// Averaged SGD over a fresh sample each step.
    Asgd,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Agd => "agd",
            Algo::Asgd => "asgd",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub k: u64,
    pub algo: Algo,
    /// 1-based coordinate.
    pub coord: usize,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct TraceSpec {
    pub d: usize,
    pub p: f64,
    pub alpha: f64,
    pub steps: u64,
    pub design_rows: usize,
    pub beta_star: Vector,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct TraceRun {
    pub rows: Vec<TraceRow>,
    /// Regularized fixed-design target the averaged GD iterates approach.
    pub gd_target: Vector,
    pub gd_admissible: bool,
    pub agd_final: Vector,
    pub asgd_final: Vector,
}

fn record(rows: &mut Vec<TraceRow>, k: u64, algo: Algo, avg: &Vector) {
    rows.extend(avg.iter().enumerate().map(|(j, &value)| TraceRow { k, algo, coord: j + 1, value }));
}

/// One run of each averaged algorithm from zero, recorded on a regular grid.
pub fn trace_run(spec: &TraceSpec) -> Result<TraceRun> {
    let d = spec.d;
    let stride = (spec.steps / TRACE_POINTS).max(1);
    let keep = |k: u64| k % stride == 0 || k == spec.steps;
    let mut rows = Vec::new();

    let mut rng = RngStream::new(spec.seed, 0);
    let data = gen_fixed_design(spec.design_rows, &spec.beta_star, &mut rng)?;
    let problem = GdProblem::new(data.x, data.y, spec.p, spec.alpha)?;
    let mut gd = GdState::zeros(d);
    let mut agd = AsgdState::new(d);
    let mut mask = DropoutMask::all(d, spec.p)?;
    for k in 1..=spec.steps {
        mask.resample(&mut rng);
        gd.step(&problem, &mask)?;
        agd.update(&gd.beta)?;
        if keep(k) {
            record(&mut rows, k, Algo::Agd, agd.mean());
        }
    }

    let mut rng = RngStream::new(spec.seed, 1);
    let mut sgd = SgdState::zeros(d);
    let mut asgd = AsgdState::new(d);
    let mut sample = StreamSample::zeros(d);
    for k in 1..=spec.steps {
        sample.redraw(&spec.beta_star, &mut rng);
        mask.resample(&mut rng);
        sgd.step(spec.alpha, &sample, &mask)?;
        asgd.update(&sgd.beta)?;
        if keep(k) {
            record(&mut rows, k, Algo::Asgd, asgd.mean());
        }
    }

    Ok(TraceRun {
        rows,
        gd_target: problem.target().clone(),
        gd_admissible: problem.admissible(),
        agd_final: agd.mean().clone(),
        asgd_final: asgd.mean().clone(),
    })
}

pub fn cmd_traces(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let d = config.d.unwrap_or(10);
    let spec = TraceSpec {
        d,
        p: config.p.unwrap_or(0.9),
        alpha: config.alpha.as_ref().map_or(0.01, |a| a[0]),
        steps: config.scaled(config.n.unwrap_or(100_000)),
        design_rows: config.design_rows.unwrap_or(100).max(d),
        beta_star: Vector::new(equidistant_beta(d))?,
        seed: config.seed,
    };
    let run = trace_run(&spec)?;
    if !run.gd_admissible {
        eprintln!("warning: alpha * ||X^T X|| >= 2 for the fixed design; the GD trace may diverge");
    }
    let path = config.out_dir.join("traces.csv");
    let mut w = CsvWriter::create(&path, &["k", "algo", "coord", "value"])?;
    for row in &run.rows {
        w.row(&[row.k.into(), row.algo.name().into(), row.coord.into(), row.value.into()])?;
    }
    Ok(vec![w.finish()?])
}
