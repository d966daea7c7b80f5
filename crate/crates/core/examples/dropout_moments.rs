//! Closed-form expectations of dropout products against brute-force
//! enumeration over every mask.

use dropout_sgd::moments::enumerate_expectation;
use dropout_sgd::{e_dad, e_dadbd, e_dadbdcd, Matrix, RngStream};

pub fn run_example() -> Result<f64, Box<dyn std::error::Error>> {
    let d = 4;
    let p = 0.7;
    let mut rng = RngStream::new(1, 0);
    let mut random = || Matrix::from_fn(d, d, |_, _| rng.standard_normal());
    let (a, b, c) = (random(), random(), random());

    let closed = [e_dad(&a, p)?, e_dadbd(&a, &b, p)?, e_dadbdcd(&a, &b, &c, p)?];
    let brute = [
        enumerate_expectation(|m| { let dm = m.to_matrix(); &(&dm * &a) * &dm }, d, p)?,
        enumerate_expectation(|m| { let dm = m.to_matrix(); &(&(&(&dm * &a) * &dm) * &b) * &dm }, d, p)?,
        enumerate_expectation(
            |m| {
                let dm = m.to_matrix();
                &(&(&(&(&(&dm * &a) * &dm) * &b) * &dm) * &c) * &dm
            },
            d,
            p,
        )?,
    ];
    let mut worst = 0.0f64;
    for (name, (x, y)) in ["E[DAD]", "E[DADBD]", "E[DADBDCD]"].iter().zip(closed.iter().zip(&brute)) {
        let gap = (x - y).max_abs();
        println!("{name:<11} max |closed form - enumeration| = {gap:.2e}");
        worst = worst.max(gap);
    }

    // the p-rescaling shrinks off-diagonal entries only
    let ap = a.p_rescale(p)?;
    println!("A[0][1] = {:.4}, A_p[0][1] = {:.4}, A[0][0] = A_p[0][0] = {:.4}", a[(0, 1)], ap[(0, 1)], ap[(0, 0)]);
    Ok(worst)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
