//! Which constant learning rates keep streaming dropout SGD contracting in
//! mean square, and several rates run in lockstep on one data stream.

use dropout_sgd::sgd::{lr_admissible_q2, parallel_run};
use dropout_sgd::{RngStream, SgdConfig, Vector};

pub fn run_example() -> Result<f64, Box<dyn std::error::Error>> {
    let mut rng = RngStream::new(5, 0);
    let mut threshold_d1 = 0.0;
    for (d, p) in [(1, 1.0), (1, 0.5), (3, 0.9), (10, 0.9)] {
        let draws: Vec<Vector> = (0..100_000).map(|_| Vector::from_fn(d, |_| rng.standard_normal())).collect();
        let config = SgdConfig::new(p, 0.1, Vector::zeros(d))?;
        let adm = lr_admissible_q2(&config, &draws)?;
        println!(
            "d = {d:>2}, p = {p}: threshold {:.4}; alpha = 0.1 admissible: {}, sufficient condition: {}",
            adm.threshold, adm.admissible, adm.sufficient_pd
        );
        if d == 1 && p == 1.0 {
            threshold_d1 = adm.threshold;
        }
    }

    let beta_star = Vector::new(vec![0.0, 0.5, 1.0])?;
    let config = SgdConfig::new(0.9, 0.01, beta_star.clone())?;
    let rates = [0.005, 0.01, 0.05];
    let run = parallel_run(&rates, &config, 50_000, &mut rng)?;
    for (alpha, avg) in run.rates().iter().zip(run.averages()) {
        println!("alpha = {alpha:<5}: averaged iterate error {:.4}", (avg.mean() - &beta_star).norm());
    }
    Ok(threshold_d1)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
