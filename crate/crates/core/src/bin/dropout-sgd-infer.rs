use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dropout_sgd::experiments::{cmd_contraction_table, cmd_cov_convergence, cmd_coverage, cmd_traces, ExperimentConfig};

#[derive(Parser)]
#[command(name = "dropout-sgd-infer", version, about = "Dropout GD/SGD simulations written as CSV")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand)]
enum Command {
    /// Sampled contraction constant just below and above the learning-rate bound.
    Contraction,
    /// Coverage of the online confidence intervals over replications.
    Coverage,
    /// Averaged GD and SGD iterates along a single run.
    Traces,
    /// Long-run covariance estimates and interval length over a run.
    CovConvergence,
}

#[derive(clap::Args)]
struct Opts {
    #[arg(long, global = true)]
    d: Option<String>,
    #[arg(long, global = true)]
    p: Option<String>,
    /// One or more learning rates, comma separated.
    #[arg(long, global = true)]
    alpha: Option<String>,
    #[arg(long, global = true)]
    n: Option<String>,
    #[arg(long, global = true)]
    runs: Option<String>,
    #[arg(long, global = true)]
    c: Option<String>,
    #[arg(long, global = true)]
    zeta: Option<String>,
    #[arg(long, global = true)]
    omega: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Divide every sample size by this.
    #[arg(long, global = true)]
    scale: Option<String>,
    #[arg(long, global = true)]
    checkpoints: Option<String>,
    #[arg(long, global = true)]
    design_rows: Option<String>,
    /// Feed i.i.d. normals with known covariance to the estimator (cov-convergence).
    #[arg(long, global = true)]
    oracle: bool,
    /// half_omega or conventional.
    #[arg(long, global = true)]
    joint_threshold: Option<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Flat key=value file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

fn build_config(opts: &Opts) -> dropout_sgd::Result<ExperimentConfig> {
    let mut cfg = match &opts.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    let pairs = [
        ("d", &opts.d),
        ("p", &opts.p),
        ("alpha", &opts.alpha),
        ("n", &opts.n),
        ("runs", &opts.runs),
        ("c", &opts.c),
        ("zeta", &opts.zeta),
        ("omega", &opts.omega),
        ("seed", &opts.seed),
        ("scale", &opts.scale),
        ("checkpoints", &opts.checkpoints),
        ("design_rows", &opts.design_rows),
        ("joint_threshold", &opts.joint_threshold),
    ];
    for (key, value) in pairs {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    if opts.oracle {
        cfg.oracle = true;
    }
    if let Some(out) = &opts.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = build_config(&cli.opts).and_then(|cfg| match cli.command {
        Command::Contraction => cmd_contraction_table(&cfg),
        Command::Coverage => cmd_coverage(&cfg),
        Command::Traces => cmd_traces(&cfg),
        Command::CovConvergence => cmd_cov_convergence(&cfg),
    });
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
