use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use percsim_cli::config::BoundsSection;
use percsim_cli::{run, Command, ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(
    name = "percsim",
    version,
    about = "Percolation of Boolean models over clustered point processes"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Side of the square window `[0, W]^2`.
    #[arg(long, global = true)]
    window: Option<f64>,
    /// CSV output path; a `<out>.config.toml` sidecar is written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample one pattern in the window.
    Generate,
    /// Component statistics of one realisation over the r grid.
    Percolate,
    /// Mean component fractions and spanning probability over the r grid.
    SweepR,
    /// Bisection for the radius at which spanning reaches the target.
    EstimateRc,
    /// Percolation of the k-covered set.
    Kperc,
    /// Peierls contour sums and the upper radius surrogate.
    Rbar,
    /// Expected open-path counts and the lower radius surrogate.
    Rpaths,
    /// SINR-graph spanning over the gamma grid.
    SinrSweep,
    /// Analytic radius bounds.
    Bounds {
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Convex order along a chain of integer distributions.
    CxCheck,
    /// Directionally convex test battery on count vectors.
    CountsDcx,
    /// Ripley's K, void probabilities and product moments.
    Stats,
    /// Binomial-perturbed lattices against Poisson.
    Figure2,
    /// Negative-binomial-perturbed lattices against Poisson.
    Figure4,
}

fn execute(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: cli.seed,
        reps: cli.reps,
        window: cli.window,
        out: cli.out.as_ref().map(|p| p.display().to_string()),
        threads: cli.threads,
    });
    let cmd = match cli.cmd {
        Cmd::Generate => Command::Generate,
        Cmd::Percolate => Command::Percolate,
        Cmd::SweepR => Command::SweepR,
        Cmd::EstimateRc => Command::EstimateRc,
        Cmd::Kperc => Command::Kperc,
        Cmd::Rbar => Command::Rbar,
        Cmd::Rpaths => Command::Rpaths,
        Cmd::SinrSweep => Command::SinrSweep,
        Cmd::Bounds { lambda, d, k } => {
            if lambda.is_some() || d.is_some() || k.is_some() {
                let base = cfg.bounds.take();
                let lambda = lambda
                    .or(base.as_ref().map(|b| b.lambda))
                    .context("bounds: --lambda or [bounds].lambda required")?;
                cfg.bounds = Some(BoundsSection {
                    lambda,
                    d: d.or(base.as_ref().map(|b| b.d)).unwrap_or(2),
                    k: k.or(base.as_ref().map(|b| b.k)).unwrap_or(1),
                });
            }
            Command::Bounds
        }
        Cmd::CxCheck => Command::CxCheck,
        Cmd::CountsDcx => Command::CountsDcx,
        Cmd::Stats => Command::Stats,
        Cmd::Figure2 => Command::Figure2,
        Cmd::Figure4 => Command::Figure4,
    };
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("threads")?;
    }
    let out = cfg.out.clone();
    let artifact = run(cmd, cfg)?;
    let stdout = std::io::stdout();
    let mut stdout = stdout.lock();
    if let Some(text) = &artifact.text {
        stdout.write_all(text.as_bytes())?;
    }
    match out {
        Some(path) => {
            std::fs::write(&path, &artifact.csv).with_context(|| format!("writing {path}"))?;
            let sidecar = format!("{path}.config.toml");
            std::fs::write(&sidecar, artifact.config.to_toml()?)
                .with_context(|| format!("writing {sidecar}"))?;
        }
        None => {
            if artifact.text.is_some() {
                stdout.write_all(b"\n")?;
            }
            stdout.write_all(artifact.csv.as_bytes())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
