use std::path::PathBuf;

use crate::error::Result;
use crate::gd::{empirical_contraction_sq, lr_bound_gd};
use crate::linalg::Matrix;
use crate::randgen::RngStream;

use super::config::ExperimentConfig;
use super::csv::CsvWriter;

/// Multiples of the learning-rate bound probed on each side of it.
pub const BOUNDARY_FACTORS: [f64; 2] = [0.99, 1.02];
pub const CONTRACTION_DRAWS: usize = 500;

/// `(n, d, p)` settings probed when no dimension is configured.
pub const DEFAULT_GRID: [(usize, usize, f64); 5] =
    [(100, 5, 0.9), (100, 50, 0.9), (100, 50, 0.8), (100, 100, 0.9), (100, 100, 0.5)];

#[derive(Clone, Debug, PartialEq)]
pub struct ContractionRow {
    pub n: usize,
    pub d: usize,
    pub p: f64,
    pub alpha: f64,
    pub bound: f64,
    pub r2_hat: f64,
}

/// One repetition: a fresh Gaussian `n x d` design, its bound `2 / lambda_max`,
/// and the sampled contraction constant at each boundary factor.
pub fn contraction_probe(n: usize, d: usize, p: f64, draws: usize, rng: &mut RngStream) -> Result<Vec<ContractionRow>> {
    let x = Matrix::from_fn(n, d, |_, _| rng.standard_normal());
    let gram = x.gram();
    let bound = lr_bound_gd(&gram)?;
    BOUNDARY_FACTORS
        .iter()
        .map(|f| {
            let alpha = f * bound;
            let r2_hat = empirical_contraction_sq(&gram, p, alpha, draws, rng)?;
            Ok(ContractionRow { n, d, p, alpha, bound, r2_hat })
        })
        .collect()
}

pub fn cmd_contraction_table(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let grid: Vec<(usize, usize, f64)> = match config.d {
        Some(d) => vec![(config.n.map_or(100, |n| n as usize), d, config.p.unwrap_or(0.9))],
        None => DEFAULT_GRID.to_vec(),
    };
    let reps = config.runs.unwrap_or(1);
    let path = config.out_dir.join("contraction.csv");
    let mut w = CsvWriter::create(&path, &["n", "d", "p", "alpha", "bound", "r2_hat"])?;
    for (cell, &(n, d, p)) in grid.iter().enumerate() {
        for rep in 0..reps {
            let mut rng = RngStream::new(config.seed, ((cell as u64) << 32) | rep);
            for row in contraction_probe(n, d, p, CONTRACTION_DRAWS, &mut rng)? {
                w.row(&[row.n.into(), row.d.into(), row.p.into(), row.alpha.into(), row.bound.into(), row.r2_hat.into()])?;
            }
        }
    }
    Ok(vec![w.finish()?])
}
