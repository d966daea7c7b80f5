//! How sharp the learning-rate bound `2 / ||X^T X||` is for dropout GD:
//! the second-moment contraction constant just below and just above it,
//! and coupled chains forgetting their starting points.

use dropout_sgd::gd::{coupled_gmc_run, empirical_contraction_sq, geometric_ratio, lr_bound_gd};
use dropout_sgd::randgen::gen_fixed_design;
use dropout_sgd::{exact_contraction_sq, GdProblem, RngStream, Vector};

pub fn run_example() -> Result<(f64, f64), Box<dyn std::error::Error>> {
    let (n, d, p) = (100, 5, 0.9);
    let mut rng = RngStream::new(2024, 0);
    let beta_star = Vector::from_fn(d, |j| j as f64 / (d - 1) as f64);
    let data = gen_fixed_design(n, &beta_star, &mut rng)?;
    let gram = data.x.gram();
    let bound = lr_bound_gd(&gram)?;
    println!("n = {n}, d = {d}, p = {p}: bound 2/lambda_max = {bound:.5}");

    let mut below_above = (0.0, 0.0);
    for factor in [0.5, 0.99, 1.02, 1.2] {
        let alpha = factor * bound;
        let exact = exact_contraction_sq(&gram, p, alpha)?;
        let sampled = empirical_contraction_sq(&gram, p, alpha, 500, &mut rng)?;
        println!("alpha = {factor:>4} x bound: exact r^2 = {exact:.4}, sampled (N=500) = {sampled:.4}");
        if factor == 0.99 {
            below_above.0 = sampled;
        } else if factor == 1.02 {
            below_above.1 = sampled;
        }
    }

    let problem = GdProblem::new(data.x, data.y, p, 0.5 * bound)?;
    let rate = exact_contraction_sq(problem.gram(), p, problem.alpha())?.sqrt();
    let logs = coupled_gmc_run(&problem, &Vector::from_fn(d, |_| 10.0), &Vector::zeros(d), 400, &mut rng)?;
    println!(
        "coupled chains at alpha = bound/2: per-step ratio {:.4} (bound {rate:.4}), distance after 400 steps {:.2e}",
        geometric_ratio(&logs, 100, 400)?,
        logs[399].exp()
    );
    Ok(below_above)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
