use std::path::PathBuf;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inference::ci_projection;
use crate::linalg::{Matrix, Vector};
use crate::longrun::{BlockSchedule, CovState};
use crate::randgen::{DropoutMask, RngStream, StreamSample};
use crate::sgd::SgdState;

use super::config::{equidistant_beta, ExperimentConfig};
use super::csv::CsvWriter;

/// `{1, 2, 5} x 10^k` between `lo` and `n`, always ending at `n`.
pub fn decade_grid(lo: u64, n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut base = 1u64;
    'outer: loop {
        for m in [1, 2, 5] {
            let v = m * base;
            if v >= n {
                break 'outer;
            }
            if v >= lo {
                out.push(v);
            }
        }
        base *= 10;
    }
    out.push(n);
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesPoint {
    pub checkpoint_n: u64,
    pub series: String,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct SgdCovSpec {
    pub p: f64,
    pub alpha: f64,
    pub beta_star: Vector,
    pub checkpoints: Vec<u64>,
    pub schedule: BlockSchedule,
    pub omega: f64,
    pub seed: u64,
}

fn check_checkpoints(cps: &[u64]) -> Result<()> {
    if cps.is_empty() || cps[0] == 0 || cps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parameter(format!("checkpoints must be positive and strictly increasing, got {cps:?}")));
    }
    Ok(())
}

/// Single SGD run: diagonal of the estimated long-run covariance
/// (`sigma_1`, ..., `sigma_d`) and the projection interval length
/// (`ci_length`) at each checkpoint.
pub fn sgd_cov_trace(spec: &SgdCovSpec) -> Result<Vec<SeriesPoint>> {
    check_checkpoints(&spec.checkpoints)?;
    let d = spec.beta_star.dim();
    let v = Vector::from_fn(d, |_| 1.0 / (d as f64).sqrt());
    let mut rng = RngStream::new(spec.seed, 0);
    let mut sgd = SgdState::zeros(d);
    let mut cov = CovState::new(d, spec.schedule);
    let mut sample = StreamSample::zeros(d);
    let mut mask = DropoutMask::all(d, spec.p)?;
    let mut out = Vec::new();
    let mut k = 0;
    for &cp in &spec.checkpoints {
        while k < cp {
            sample.redraw(&spec.beta_star, &mut rng);
            mask.resample(&mut rng);
            sgd.step(spec.alpha, &sample, &mask)?;
            cov.update(&sgd.beta)?;
            k += 1;
        }
        let sigma = cov.finalize()?;
        for j in 0..d {
            out.push(SeriesPoint { checkpoint_n: cp, series: format!("sigma_{}", j + 1), value: sigma[(j, j)] });
        }
        let ci = ci_projection(cov.mean(), &sigma, cp, spec.omega, &v)?;
        out.push(SeriesPoint { checkpoint_n: cp, series: "ci_length".into(), value: ci.length() });
    }
    Ok(out)
}

/// Operator-norm error of the estimator fed i.i.d. standard normal vectors
/// (true long-run covariance `I`), at each checkpoint, for one replication.
pub fn oracle_errors(d: usize, checkpoints: &[u64], schedule: BlockSchedule, seed: u64, rep: u64) -> Result<Vec<f64>> {
    check_checkpoints(checkpoints)?;
    let mut rng = RngStream::new(seed, rep);
    let mut cov = CovState::new(d, schedule);
    let mut x = Vector::zeros(d);
    let eye = Matrix::identity(d);
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut k = 0;
    for &cp in checkpoints {
        while k < cp {
            for xi in x.as_mut_slice() {
                *xi = rng.standard_normal();
            }
            cov.update(&x)?;
            k += 1;
        }
        out.push((&cov.finalize()? - &eye).operator_norm());
    }
    Ok(out)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Median over `runs` replications of [`oracle_errors`], as series `oracle_error`.
pub fn oracle_error_medians(d: usize, checkpoints: &[u64], schedule: BlockSchedule, runs: u64, seed: u64) -> Result<Vec<SeriesPoint>> {
    if runs == 0 {
        return Err(Error::Parameter("runs must be positive".into()));
    }
    let per_rep: Vec<Vec<f64>> = (0..runs)
        .into_par_iter()
        .map(|rep| oracle_errors(d, checkpoints, schedule, seed, rep))
        .collect::<Result<_>>()?;
    Ok(checkpoints
        .iter()
        .enumerate()
        .map(|(i, &cp)| SeriesPoint {
            checkpoint_n: cp,
            series: "oracle_error".into(),
            value: median(per_rep.iter().map(|r| r[i]).collect()),
        })
        .collect())
}

pub fn cmd_cov_convergence(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let (points, name) = if config.oracle {
        let n = config.scaled(config.n.unwrap_or(1_000_000));
        let cps = match &config.checkpoints {
            Some(c) => c.iter().map(|&c| config.scaled(c)).collect(),
            None => decade_grid(config.scaled(10_000), n),
        };
        let d = config.d.unwrap_or(3);
        let pts = oracle_error_medians(d, &cps, config.schedule(1.5)?, config.runs.unwrap_or(50), config.seed)?;
        (pts, "cov_convergence_oracle.csv")
    } else {
        let n = config.scaled(config.n.unwrap_or(100_000));
        let cps = match &config.checkpoints {
            Some(c) => c.iter().map(|&c| config.scaled(c)).collect(),
            None => decade_grid(100.min(n), n),
        };
        let d = config.d.unwrap_or(10);
        let spec = SgdCovSpec {
            p: config.p.unwrap_or(0.9),
            alpha: config.alpha.as_ref().map_or(0.01, |a| a[0]),
            beta_star: Vector::new(equidistant_beta(d))?,
            checkpoints: cps,
            schedule: config.schedule(2.0)?,
            omega: config.omega,
            seed: config.seed,
        };
        (sgd_cov_trace(&spec)?, "cov_convergence.csv")
    };
    let path = config.out_dir.join(name);
    let mut w = CsvWriter::create(&path, &["checkpoint_n", "series", "value"])?;
    for pt in &points {
        w.row(&[pt.checkpoint_n.into(), pt.series.as_str().into(), pt.value.into()])?;
    }
    Ok(vec![w.finish()?])
}
