use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use elastoslab_cli::report::cmd_sweep_report;
use elastoslab_cli::run::cmd_run;
use elastoslab_cli::suite::cmd_verify;
use elastoslab_cli::{load_config, CliResult, RunConfig};

#[derive(Parser)]
#[command(name = "elastoslab", version, about = "Regularized elastodynamics on the periodic slab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat key = value configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent sweep members.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Velocity seed, overriding `seed` in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory per kappa and write energy.csv, snapshots and manifests.
    Run(Common),
    /// Run the property suite; exits nonzero if any check fails.
    Verify(Common),
    /// Summarize completed runs (run directories or a sweep root).
    SweepReport {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
}

fn configure(c: &Common) -> CliResult<RunConfig> {
    let mut config = load_config(c.config.as_deref())?;
    if let Some(out) = &c.out {
        config.output = out.clone();
    }
    if let Some(seed) = c.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn execute(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::Run(c) => {
            let config = configure(&c)?;
            for s in cmd_run(&config, &config.output, c.jobs)? {
                let flag = if s.violated { " (a priori regime left)" } else { "" };
                println!("kappa {:?}: t = {:.6} after {} steps{flag} -> {}", s.kappa, s.t_run, s.steps, s.dir.display());
            }
            Ok(true)
        }
        Command::Verify(c) => {
            let config = configure(&c)?;
            let report = cmd_verify(&config, &config.output, c.jobs)?;
            let failed = report.lines.iter().filter(|l| !l.pass).count();
            println!("{} checks, {failed} failed", report.lines.len());
            Ok(report.pass())
        }
        Command::SweepReport { dirs } => {
            let report = cmd_sweep_report(&dirs)?;
            print!("{}", report.table());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
