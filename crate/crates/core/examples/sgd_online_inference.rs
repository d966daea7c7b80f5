//! Streaming SGD with dropout and fully online inference: the averaged
//! iterate, the batch-means covariance estimate and three kinds of
//! confidence statements, all updated in O(d) per observation.

use dropout_sgd::inference::joint_region_contains;
use dropout_sgd::{
    ci_coordinate, ci_projection, BlockSchedule, CovState, DropoutMask, JointRegion, JointThreshold, RngStream,
    SgdState, Vector,
};
use dropout_sgd::randgen::StreamSample;

pub fn run_example() -> Result<usize, Box<dyn std::error::Error>> {
    let d = 5;
    let (p, alpha, omega) = (0.9, 0.02, 0.05);
    let beta_star = Vector::from_fn(d, |j| j as f64 / (d - 1) as f64);
    let mut rng = RngStream::new(99, 0);

    let mut sgd = SgdState::zeros(d);
    let mut cov = CovState::new(d, BlockSchedule::squares());
    let mut sample = StreamSample::zeros(d);
    let mut mask = DropoutMask::all(d, p)?;
    let n = 100_000u64;
    for _ in 0..n {
        sample.redraw(&beta_star, &mut rng);
        mask.resample(&mut rng);
        sgd.step(alpha, &sample, &mask)?;
        cov.update(&sgd.beta)?;
    }
    let sigma = cov.finalize()?;
    let mean = cov.mean();
    println!("after n = {n} steps ({} batch-means blocks):", cov.block_index());

    let mut covered = 0;
    for j in 0..d {
        let ci = ci_coordinate(mean[j], sigma[(j, j)], n, omega)?;
        let hit = ci.contains(beta_star[j]);
        covered += hit as usize;
        println!("  beta*_{j} = {:.3}  CI [{:.4}, {:.4}]  {}", beta_star[j], ci.lower, ci.upper, if hit { "covers" } else { "misses" });
    }

    let v = Vector::from_fn(d, |_| 1.0 / (d as f64).sqrt());
    let proj = ci_projection(mean, &sigma, n, omega, &v)?;
    println!("  projection v^T beta* = {:.4}  CI [{:.4}, {:.4}]", v.dot(&beta_star), proj.lower, proj.upper);

    let region = JointRegion::new(mean.clone(), sigma, n, omega, JointThreshold::HalfOmega)?;
    let (inside, stat) = joint_region_contains(&region, &beta_star)?;
    println!("  joint region: statistic {stat:.3} vs threshold {:.3} -> {}", region.threshold, if inside { "inside" } else { "outside" });
    Ok(covered)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
