use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coexist_cli::commands::{self, EvalOptions};
use coexist_cli::config::{RunConfig, describe};
use coexist_cli::error::CliError;
use coexist_core::theory::Scope;

/// Multi-agent resource allocation for coexisting terrestrial and UAV cells.
#[derive(Parser)]
#[command(name = "coexist", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML run configuration; defaults apply to omitted keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy and write metrics and checkpoints.
    Train {
        #[command(flatten)]
        common: Common,
        /// Output directory; overrides `run.out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a continuous-time arrival scenario.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Scenario preset: arrivals-1, arrivals-3 or arrivals-5.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        duration_min: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the numerical verification suite.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Restrict to these scopes; repeatable.
        #[arg(long)]
        scope: Vec<String>,
    },
    /// Turn a metrics CSV into per-panel plot data.
    ExportPlots {
        metrics: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::load(common.config.as_deref(), std::env::vars())?;
    if let Some(seed) = common.seed {
        config.run.seed = seed;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { common, out } => {
            let config = load(&common)?;
            let out = out.unwrap_or_else(|| PathBuf::from(&config.run.out));
            println!("training {} on {}", config.run.method, describe(&config.system()?));
            let s = commands::train(&config, &out)?;
            println!(
                "{} episodes -> {}; final mean reward {:.4e} bit/s/user, cost {:.4e}, lambda {:.4}",
                s.episodes,
                s.out.display(),
                s.final_raw_reward,
                s.final_cost,
                s.lambda_mean
            );
        }
        Command::Eval {
            common,
            checkpoint,
            scenario,
            duration_min,
            out,
        } => {
            let config = load(&common)?;
            let out = out.unwrap_or_else(|| PathBuf::from(&config.run.out));
            let opts = EvalOptions {
                checkpoint,
                scenario,
                duration_min,
            };
            let r = commands::eval(&config, &opts, &out)?;
            let s = &r.summary;
            println!(
                "{}: {} s, throughput mean {:.4e} min {:.4e} bit/s, QoS misses {:.3}, users {:.2}, arrivals {}, departures {}, blocked {} -> {}",
                r.scenario,
                s.seconds,
                s.mean_throughput,
                s.min_throughput,
                s.mean_qos_misses,
                s.mean_active_users,
                s.arrivals,
                s.departures,
                s.blocked,
                r.metrics.display()
            );
        }
        Command::Verify { common, scope } => {
            let config = load(&common)?;
            let scopes = scope
                .iter()
                .map(|s| Scope::parse(s))
                .collect::<Result<Vec<_>, _>>()?;
            let reports = commands::verify(&config, &scopes)?;
            print!("{}", commands::format_reports(&reports));
            let failed = reports.iter().filter(|r| !r.passed).count();
            if failed > 0 {
                return Err(CliError::VerifyFailed(failed));
            }
        }
        Command::ExportPlots { metrics, out } => {
            for f in commands::export_plots(&metrics, &out)? {
                println!("{}", out.join(f).display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
