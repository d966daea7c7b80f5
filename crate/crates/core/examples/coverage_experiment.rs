//! A small coverage study: independent replications of streaming SGD, each
//! building confidence intervals online, tallied at several checkpoints.
//! The same harness backs `dropout-sgd-infer coverage`, which writes CSV.

use dropout_sgd::experiments::{cmd_coverage, simulate_coverage, CoverageMode, CoverageSpec, ExperimentConfig};

pub fn run_example() -> Result<f64, Box<dyn std::error::Error>> {
    let spec = CoverageSpec::table_cell(3, 0.5, 0.1, vec![2_000, 5_000, 20_000], 100, 1);
    let report = simulate_coverage(&spec)?;
    println!(
        "d = 3, p = 0.5, alpha = 0.1, {} runs (admissible up to alpha ~ {:.3})",
        spec.runs, report.admissibility.threshold
    );
    for mode in CoverageMode::ALL {
        let line: Vec<String> = report.coverage(mode).iter().map(|(n, c)| format!("n={n}: {c:.2}")).collect();
        println!("  {:<10} {}", mode.name(), line.join("  "));
    }

    let out = std::env::temp_dir().join("dropout-sgd-coverage-example");
    let mut config = ExperimentConfig::parse_str("d=2\np=0.9\nalpha=0.05\nruns=20\ncheckpoints=1000,4000\n")?;
    config.out_dir = out;
    for path in cmd_coverage(&config)? {
        println!("wrote {}", path.display());
    }
    let last = report.coverage(CoverageMode::Projection).last().map(|&(_, c)| c).unwrap_or(0.0);
    Ok(last)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
