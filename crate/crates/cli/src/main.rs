use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use comember_cli::{report, resume, run_experiment, CliResult, RunOptions};

#[derive(Parser)]
#[command(name = "comember", version, about = "Membership and co-membership attack experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        /// Replaces the config's master_seed.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Finish or repair a run from its manifest.
    Resume {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Write the AUC grid of a completed run.
    Report {
        #[arg(long)]
        manifest: PathBuf,
        /// Where to write report.json and report.csv; the run directory by default.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            threads,
            seed_override,
        } => {
            let opts = RunOptions {
                out_dir: out,
                threads,
                seed_override,
            };
            let m = run_experiment(&config, &opts)?;
            println!("{}: {} stages complete", m.kind, m.stages.len());
        }
        Command::Resume { manifest, threads } => {
            let m = resume(&manifest, threads)?;
            println!("{}: {} stages complete", m.kind, m.stages.len());
        }
        Command::Report { manifest, out } => {
            let r = report(&manifest, out.as_deref())?;
            for c in &r.cells {
                println!(
                    "{:<5} {:<18} n={:<3} {:<12} auc {:.3} ± {:.3}",
                    c.model, c.method, c.strength, c.arm, c.mean_auc, c.std_auc
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
