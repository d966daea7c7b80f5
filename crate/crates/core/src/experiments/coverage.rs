use std::path::PathBuf;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inference::{ci_coordinate, ci_projection, JointRegion, JointThreshold};
use crate::linalg::Vector;
use crate::longrun::{BlockSchedule, CovState};
use crate::randgen::{DropoutMask, RngStream, StreamSample};
use crate::sgd::{lr_admissible_q2, Admissibility, SgdConfig, SgdState};

use super::config::{equidistant_beta, ExperimentConfig};
use super::csv::{CsvWriter, Field};

/// Design draws used for the learning-rate admissibility check.
pub const ADMISSIBILITY_DRAWS: usize = 5000;
const ADMISSIBILITY_STREAM: u64 = u64::MAX;

const GRID_FAST: [u64; 5] = [100_000, 150_000, 180_000, 190_000, 200_000];
const GRID_SLOW: [u64; 5] = [200_000, 250_000, 280_000, 290_000, 300_000];

/// Default checkpoints: the 200k-step grid for light dropout (`p > 0.7`), the
/// 300k-step grid otherwise. A configured `n` outside those grids keeps the
/// same relative spacing as the 200k grid.
pub fn default_checkpoints(p: f64, n: Option<u64>) -> Vec<u64> {
    let grid = if p > 0.7 { GRID_FAST } else { GRID_SLOW };
    match n {
        None => grid.to_vec(),
        Some(n) if n == grid[4] => grid.to_vec(),
        Some(n) if n == GRID_FAST[4] => GRID_FAST.to_vec(),
        Some(n) if n == GRID_SLOW[4] => GRID_SLOW.to_vec(),
        Some(n) => {
            let mut cps: Vec<u64> = [0.5, 0.75, 0.9, 0.95, 1.0].iter().map(|f| ((f * n as f64) as u64).max(1)).collect();
            cps.dedup();
            cps
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoverageMode {
    /// Per-coordinate intervals, coverage averaged over coordinates.
    Coordinate,
    /// Interval for the projection on `(1, ..., 1) / sqrt(d)`.
    Projection,
    /// Ellipsoidal region for the whole vector.
    Joint,
}

impl CoverageMode {
    pub const ALL: [CoverageMode; 3] = [CoverageMode::Coordinate, CoverageMode::Projection, CoverageMode::Joint];

    pub fn name(self) -> &'static str {
        match self {
            CoverageMode::Coordinate => "coordinate",
            CoverageMode::Projection => "projection",
            CoverageMode::Joint => "joint",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CoverageSpec {
    pub d: usize,
    pub p: f64,
    pub alpha: f64,
    pub checkpoints: Vec<u64>,
    pub runs: u64,
    pub schedule: BlockSchedule,
    pub omega: f64,
    pub seed: u64,
    pub joint_threshold: JointThreshold,
}

impl CoverageSpec {
    /// A single cell with the defaults used for the coverage tables.
    pub fn table_cell(d: usize, p: f64, alpha: f64, checkpoints: Vec<u64>, runs: u64, seed: u64) -> Self {
        Self {
            d,
            p,
            alpha,
            checkpoints,
            runs,
            schedule: BlockSchedule::squares(),
            omega: 0.05,
            seed,
            joint_threshold: JointThreshold::HalfOmega,
        }
    }

    pub fn beta_star(&self) -> Vector {
        Vector::new(equidistant_beta(self.d)).expect("finite grid")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageRow {
    pub checkpoint_n: u64,
    pub mode: CoverageMode,
    pub coverage: f64,
    pub se: f64,
}

#[derive(Clone, Debug)]
pub struct CoverageReport {
    pub rows: Vec<CoverageRow>,
    pub admissibility: Admissibility,
}

impl CoverageReport {
    pub fn coverage(&self, mode: CoverageMode) -> Vec<(u64, f64)> {
        self.rows.iter().filter(|r| r.mode == mode).map(|r| (r.checkpoint_n, r.coverage)).collect()
    }
}

/// Per-checkpoint outcome of one replication.
#[derive(Clone, Copy, Debug)]
struct Hit {
    coordinate_fraction: f64,
    projection: bool,
    joint: bool,
}

fn replicate(spec: &CoverageSpec, beta_star: &Vector, v: &Vector, rep: u64) -> Result<Vec<Hit>> {
    let d = spec.d;
    let mut rng = RngStream::new(spec.seed, rep);
    let mut sgd = SgdState::zeros(d);
    let mut cov = CovState::new(d, spec.schedule);
    let mut sample = StreamSample::zeros(d);
    let mut mask = DropoutMask::all(d, spec.p)?;
    let truth_proj = v.dot(beta_star);
    let mut hits = Vec::with_capacity(spec.checkpoints.len());
    let mut k = 0u64;
    for &cp in &spec.checkpoints {
        while k < cp {
            sample.redraw(beta_star, &mut rng);
            mask.resample(&mut rng);
            sgd.step(spec.alpha, &sample, &mask)?;
            cov.update(&sgd.beta)?;
            k += 1;
        }
        let sigma = cov.finalize()?;
        let mean = cov.mean();
        // a diverged chain covers nothing
        if !mean.iter().chain(sigma.as_slice()).all(|x| x.is_finite()) {
            hits.push(Hit { coordinate_fraction: 0.0, projection: false, joint: false });
            continue;
        }
        let mut covered = 0usize;
        for j in 0..d {
            if ci_coordinate(mean[j], sigma[(j, j)], cp, spec.omega)?.contains(beta_star[j]) {
                covered += 1;
            }
        }
        let projection = ci_projection(mean, &sigma, cp, spec.omega, v)?.contains(truth_proj);
        let joint = match JointRegion::new(mean.clone(), sigma, cp, spec.omega, spec.joint_threshold) {
            Ok(region) => match region.contains(beta_star) {
                Ok((inside, _)) => inside,
                Err(Error::Singular(_)) => false,
                Err(e) => return Err(e),
            },
            Err(Error::Singular(_)) => false,
            Err(e) => return Err(e),
        };
        hits.push(Hit { coordinate_fraction: covered as f64 / d as f64, projection, joint });
    }
    Ok(hits)
}

/// Runs `spec.runs` independent replications (in parallel, merged in
/// replication order) and tallies coverage at every checkpoint.
pub fn simulate_coverage(spec: &CoverageSpec) -> Result<CoverageReport> {
    if spec.d == 0 || spec.runs == 0 {
        return Err(Error::Parameter("d and runs must be positive".into()));
    }
    if spec.checkpoints.is_empty() || spec.checkpoints[0] == 0 || spec.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parameter(format!(
            "checkpoints must be positive and strictly increasing, got {:?}",
            spec.checkpoints
        )));
    }
    let beta_star = spec.beta_star();
    let config = SgdConfig::new(spec.p, spec.alpha, beta_star.clone())?;
    let mut adm_rng = RngStream::new(spec.seed, ADMISSIBILITY_STREAM);
    let draws: Vec<Vector> = (0..ADMISSIBILITY_DRAWS)
        .map(|_| Vector::from_fn(spec.d, |_| adm_rng.standard_normal()))
        .collect();
    let admissibility = lr_admissible_q2(&config, &draws)?;

    let v = Vector::from_fn(spec.d, |_| 1.0 / (spec.d as f64).sqrt());
    let per_rep: Vec<Vec<Hit>> = (0..spec.runs)
        .into_par_iter()
        .map(|rep| replicate(spec, &beta_star, &v, rep))
        .collect::<Result<_>>()?;

    let r = spec.runs as f64;
    let mut rows = Vec::new();
    for (i, &cp) in spec.checkpoints.iter().enumerate() {
        for mode in CoverageMode::ALL {
            let rate = per_rep
                .iter()
                .map(|hits| match mode {
                    CoverageMode::Coordinate => hits[i].coordinate_fraction,
                    CoverageMode::Projection => hits[i].projection as u8 as f64,
                    CoverageMode::Joint => hits[i].joint as u8 as f64,
                })
                .sum::<f64>()
                / r;
            let se = (rate * (1.0 - rate) / r).sqrt();
            rows.push(CoverageRow { checkpoint_n: cp, mode, coverage: rate, se });
        }
    }
    Ok(CoverageReport { rows, admissibility })
}

fn fmt_param(x: f64) -> String {
    format!("{x}")
}

/// One CSV per learning rate, `coverage_d{d}_p{p}_alpha{alpha}.csv`.
pub fn cmd_coverage(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let d = config.d.unwrap_or(3);
    let p = config.p.unwrap_or(0.9);
    let alphas = config.alpha.clone().unwrap_or_else(|| vec![0.01]);
    let checkpoints: Vec<u64> = config
        .checkpoints
        .clone()
        .unwrap_or_else(|| default_checkpoints(p, config.n))
        .iter()
        .map(|&c| config.scaled(c))
        .collect();
    let mut checkpoints = checkpoints;
    checkpoints.dedup();
    let mut written = Vec::new();
    for alpha in alphas {
        let spec = CoverageSpec {
            d,
            p,
            alpha,
            checkpoints: checkpoints.clone(),
            runs: config.runs.unwrap_or(200),
            schedule: config.schedule(2.0)?,
            omega: config.omega,
            seed: config.seed,
            joint_threshold: config.joint_threshold,
        };
        let report = simulate_coverage(&spec)?;
        let path = config
            .out_dir
            .join(format!("coverage_d{d}_p{}_alpha{}.csv", fmt_param(p), fmt_param(alpha)));
        let mut w = CsvWriter::create(&path, &["checkpoint_n", "mode", "coverage", "se"])?;
        if !report.admissibility.admissible {
            eprintln!(
                "warning: alpha = {alpha} exceeds the estimated admissible threshold {:.4}; running anyway",
                report.admissibility.threshold
            );
            w.row(&[0u64.into(), "warning_inadmissible_alpha".into(), Field::Float(f64::NAN), Field::Float(f64::NAN)])?;
        }
        for row in &report.rows {
            w.row(&[row.checkpoint_n.into(), row.mode.name().into(), row.coverage.into(), row.se.into()])?;
        }
        written.push(w.finish()?);
    }
    Ok(written)
}
