//! Stationary covariance of the dropout GD iterates, `Xi = V0 + alpha B`,
//! from two Lyapunov solves, checked against a long simulated chain.

use dropout_sgd::gd::{noise_covariance, solve_lyapunov};
use dropout_sgd::randgen::gen_fixed_design;
use dropout_sgd::{asymptotic_cov_xi, DropoutMask, GdProblem, GdState, Matrix, RngStream, Vector};

pub fn run_example() -> Result<f64, Box<dyn std::error::Error>> {
    let (n, p, alpha) = (20, 0.8, 0.01);
    let beta_star = Vector::new(vec![0.0, 0.5, 1.0])?;
    let mut rng = RngStream::new(7, 0);
    let data = gen_fixed_design(n, &beta_star, &mut rng)?;
    let cov = asymptotic_cov_xi(&data.x, &beta_star, p, alpha)?;

    let m = data.x.gram().p_rescale(p)?.scale(p);
    let resid = &(&(&cov.v0 * &m) + &(&m * &cov.v0)) - &cov.s;
    println!("Lyapunov residual / ||S|| = {:.2e}", resid.operator_norm() / cov.s.operator_norm());
    println!("Xi(alpha = {alpha}):");
    for i in 0..3 {
        println!("  [{:>9.5} {:>9.5} {:>9.5}]", cov.xi[(i, 0)], cov.xi[(i, 1)], cov.xi[(i, 2)]);
    }

    // For a single noise draw the target is fixed, and the same two solves with
    // S0 replaced by target target^T give the conditional fluctuation covariance
    // of alpha^{-1/2}(beta_k - target). A long chain should reproduce it.
    let problem = GdProblem::new(data.x.clone(), data.y.clone(), p, alpha)?;
    let target = problem.target().clone();
    let gram_p = problem.gram().p_rescale(p)?;
    let s_cond = noise_covariance(problem.gram(), &target.outer(&target), p)?;
    let v0 = solve_lyapunov(&m, &s_cond)?;
    let bp = solve_lyapunov(&m, &(&(&gram_p * &v0) * &gram_p).scale(p * p))?;
    let predicted = &v0 + &bp.scale(alpha);

    let mut state = GdState::new(target.clone());
    let mut mask = DropoutMask::all(3, p)?;
    let mut second = Matrix::zeros(3, 3);
    let (burn, keep) = (2_000, 400_000);
    for k in 0..burn + keep {
        mask.resample(&mut rng);
        state.step(&problem, &mask)?;
        if k >= burn {
            let dev = (&state.beta - &target).scale(alpha.powf(-0.5));
            second = &second + &dev.outer(&dev);
        }
    }
    let simulated = second.scale(1.0 / keep as f64);
    let rel = (&simulated - &predicted).operator_norm() / predicted.operator_norm();
    println!(
        "fixed noise draw: trace predicted {:.5}, simulated {:.5}, relative gap {rel:.3}",
        predicted.trace(),
        simulated.trace()
    );
    Ok(resid.operator_norm() / cov.s.operator_norm())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
