//! The batch-means long-run covariance estimator on an AR(1) sequence with
//! a known long-run variance, online versus recomputed from the stored
//! sequence, under two block schedules.

use dropout_sgd::{offline_nbm, BlockSchedule, CovState, RngStream, Vector};

pub fn run_example() -> Result<f64, Box<dyn std::error::Error>> {
    // x_k = rho x_{k-1} + e_k has long-run variance 1 / (1 - rho)^2.
    let rho: f64 = 0.5;
    let truth = 1.0 / (1.0 - rho).powi(2);
    let mut worst_gap = 0.0f64;
    for (name, schedule) in [("eta_m = m^2", BlockSchedule::squares()), ("eta_m = m^1.5", BlockSchedule::three_halves())] {
        let mut rng = RngStream::new(3, 0);
        let mut state = CovState::new(1, schedule);
        let mut stored = Vec::new();
        let mut x = 0.0;
        for k in 1..=200_000u64 {
            x = rho * x + rng.standard_normal();
            let v = Vector::new(vec![x])?;
            state.update(&v)?;
            if k <= 2_000 {
                stored.push(v);
                if k == 2_000 {
                    let online = state.finalize()?[(0, 0)];
                    let offline = offline_nbm(&stored, &schedule)?[(0, 0)];
                    worst_gap = worst_gap.max((online - offline).abs() / offline.abs());
                }
            }
        }
        println!(
            "{name:<14} blocks {:>4}  estimate {:.3}  (truth {truth:.3})",
            state.block_index(),
            state.finalize()?[(0, 0)]
        );
    }
    println!("online vs offline at n = 2000: relative gap {worst_gap:.1e}");
    Ok(worst_gap)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
