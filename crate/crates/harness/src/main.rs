use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};

use anderson_levels::config::parse_config;
use anderson_levels::experiments::execute;
use anderson_levels::output::write_outputs;
use anderson_levels::selftest::{determinism_check, trivial_checks};

#[derive(Parser)]
#[command(
    name = "anderson-levels",
    version,
    about = "Level statistics of the Anderson model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "ANDERSON_LEVELS_WORKERS")]
        workers: Option<usize>,
        /// Output directory; defaults to the config's output_dir, then
        /// `out/<experiment>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form checks and the worker-count determinism check.
    Selftest,
}

fn run(
    config: PathBuf,
    seed: Option<u64>,
    workers: Option<usize>,
    out: Option<PathBuf>,
) -> anyhow::Result<bool> {
    let text = std::fs::read_to_string(&config)
        .with_context(|| format!("reading {}", config.display()))?;
    let mut cfg =
        parse_config(&text).with_context(|| format!("invalid config {}", config.display()))?;
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    if let Some(w) = workers {
        anyhow::ensure!(w >= 1, "--workers must be at least 1");
        cfg.set_workers(w);
    }
    let dir = out
        .or_else(|| cfg.output_dir())
        .unwrap_or_else(|| PathBuf::from("out").join(cfg.name()));
    let start = Instant::now();
    let outcome = execute(&cfg, cfg.workers())?;
    let elapsed = start.elapsed().as_secs_f64();
    let paths = write_outputs(&dir, &cfg, &outcome, elapsed)?;
    for c in &outcome.checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    for p in &paths {
        println!("wrote {}", p.display());
    }
    Ok(outcome.checks.iter().all(|c| c.passed))
}

fn selftest() -> anyhow::Result<bool> {
    let mut checks = trivial_checks()?;
    let scratch =
        std::env::temp_dir().join(format!("anderson-levels-selftest-{}", std::process::id()));
    let det = determinism_check(&scratch);
    let _ = std::fs::remove_dir_all(&scratch);
    checks.push(det?);
    for c in &checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            workers,
            out,
        } => run(config, seed, workers, out),
        Command::Selftest => selftest(),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
