//! Subcommand implementations. Each returns a summary for the caller to print
//! and leaves every artifact under the chosen output directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use coexist_core::eval::{Controller, EvalSummary, run_scenario, scenario};
use coexist_core::nn::Checkpoint;
use coexist_core::theory::{CheckReport, Scope, run_suite};
use coexist_core::trainer::{EpisodeReport, Trainer, policy_from_checkpoint};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::metrics::{MetricsRow, MetricsWriter, Phase, SCHEMA_VERSION, export_panels, read_metrics_file, write_atomic};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const TRAIN_METRICS_FILE: &str = "metrics.csv";
pub const EVAL_METRICS_FILE: &str = "eval_metrics.csv";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.toml";

/// Stable identifier derived from the method and the resolved config.
pub fn run_id(config: &RunConfig) -> String {
    format!("{}-{}", config.run.method, &hex::encode(config.config_hash())[..12])
}

fn prepare_out(out: &Path, config: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write_atomic(&out.join(RESOLVED_CONFIG_FILE), &config.to_toml())
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub out: PathBuf,
    pub episodes: usize,
    /// Means over the last tenth of the run (at least one episode).
    pub final_raw_reward: f64,
    pub final_cost: f64,
    pub lambda_mean: f64,
}

fn save_checkpoint(trainer: &Trainer<f64>, config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let mut ck = trainer.checkpoint(config.system_hash());
    ck.metadata.insert("config_sha256".into(), hex::encode(config.config_hash()));
    ck.metadata.insert("run_id".into(), run_id(config));
    Ok(ck.save(&out.join(CHECKPOINT_FILE))?)
}

fn train_row(config: &RunConfig, r: &EpisodeReport, wall: f64) -> MetricsRow {
    let episode_s = config.trainer.episode_steps as f64 * config.dynamics.frame_s;
    MetricsRow {
        schema_version: SCHEMA_VERSION,
        run_id: run_id(config),
        wall_time_s: wall,
        episode: r.episode as u64,
        phase: Phase::Train,
        sim_time_s: (r.episode + 1) as f64 * episode_s,
        mean_shaped_reward: r.summary.mean_shaped_reward,
        mean_raw_reward: r.summary.mean_raw_reward,
        mean_cost: r.summary.mean_cost,
        lambda_mean: r.lambda_mean,
        lambda_max: r.lambda_max,
        qos_misses: r.summary.mean_qos_misses,
        throughput_bps: r.summary.mean_throughput,
        active_users: r.summary.mean_active_users,
    }
}

/// Trains per `config`, writing the resolved config, metrics and checkpoints
/// (initial, every `run.checkpoint_every` episodes and final) under `out`.
/// A diverging run stops with [`CliError::Collapse`] after its metrics so far
/// have been flushed.
pub fn train(config: &RunConfig, out: &Path) -> Result<TrainSummary, CliError> {
    config.validate()?;
    prepare_out(out, config)?;
    let mut trainer = Trainer::<f64>::new(
        config.system()?,
        config.dynamics()?,
        config.trainer()?,
        config.method()?,
        config.run.seed,
        config.run.workers,
    )?;
    save_checkpoint(&trainer, config, out)?;
    let mut metrics = MetricsWriter::create(&out.join(TRAIN_METRICS_FILE))?;
    let started = Instant::now();
    let target = config.run.episodes;
    let every = config.run.checkpoint_every;
    let mut tail = Vec::new();
    let tail_len = (target / 10).max(1);
    while trainer.episodes_done() < target {
        let before = trainer.episodes_done();
        let batch = (target - before).min(trainer.workers());
        for r in trainer.iterate(batch)? {
            metrics.append(&train_row(config, &r, started.elapsed().as_secs_f64()))?;
            if r.episode + tail_len >= target {
                tail.push((r.summary.mean_raw_reward, r.summary.mean_cost));
            }
        }
        if every > 0 && trainer.episodes_done() / every > before / every {
            save_checkpoint(&trainer, config, out)?;
        }
    }
    save_checkpoint(&trainer, config, out)?;
    let n = tail.len().max(1) as f64;
    Ok(TrainSummary {
        out: out.to_path_buf(),
        episodes: trainer.episodes_done(),
        final_raw_reward: tail.iter().map(|t| t.0).sum::<f64>() / n,
        final_cost: tail.iter().map(|t| t.1).sum::<f64>() / n,
        lambda_mean: trainer.multipliers.mean(),
    })
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub checkpoint: PathBuf,
    /// Overrides `eval.scenario`.
    pub scenario: Option<String>,
    /// Overrides `eval.duration_min`.
    pub duration_min: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct EvalReport {
    pub summary: EvalSummary,
    pub scenario: String,
    pub metrics: PathBuf,
}

/// Loads a checkpoint, checks it matches the config's system block and plays
/// the continuous-time scenario with greedy actions.
pub fn eval(config: &RunConfig, opts: &EvalOptions, out: &Path) -> Result<EvalReport, CliError> {
    config.validate()?;
    let ck = Checkpoint::load(&opts.checkpoint)?;
    if ck.config_hash != config.system_hash() {
        return Err(CliError::HashMismatch {
            checkpoint: hex::encode(ck.config_hash),
            config: hex::encode(config.system_hash()),
        });
    }
    let system = config.system()?;
    let policy = policy_from_checkpoint::<f64>(&ck, &system)?;
    let name = opts.scenario.clone().unwrap_or_else(|| config.eval.scenario.clone());
    let base = config.dynamics()?;
    let dynamics = if name.is_empty() { base } else { scenario(&name, &base)? };
    let minutes = opts.duration_min.unwrap_or(config.eval.duration_min);
    if !(minutes > 0.0) {
        return Err(CliError::Config(format!("duration must be > 0 minutes, got {minutes}")));
    }
    let lambda = ck.block("dual.lambda").map(|b| b.values().to_vec()).unwrap_or_default();
    let lambda_mean = if lambda.is_empty() { 0.0 } else { lambda.iter().sum::<f64>() / lambda.len() as f64 };
    let lambda_max = lambda.iter().copied().fold(0.0, f64::max);

    prepare_out(out, config)?;
    let path = out.join(EVAL_METRICS_FILE);
    let mut metrics = MetricsWriter::create(&path)?;
    let id = run_id(config);
    let started = Instant::now();
    let summary = run_scenario(
        &system,
        &dynamics,
        &Controller::Greedy(policy),
        minutes * 60.0,
        config.run.seed,
        |row| {
            metrics.append(&MetricsRow {
                schema_version: SCHEMA_VERSION,
                run_id: id.clone(),
                wall_time_s: started.elapsed().as_secs_f64(),
                episode: row.second as u64,
                phase: Phase::Eval,
                sim_time_s: row.sim_time_s,
                mean_shaped_reward: row.mean_raw_reward,
                mean_raw_reward: row.mean_raw_reward,
                mean_cost: row.mean_cost,
                lambda_mean,
                lambda_max,
                qos_misses: row.qos_misses,
                throughput_bps: row.throughput,
                active_users: row.active_users,
            })
            .map_err(|e| coexist_core::Error::Io(std::io::Error::other(e.to_string())))
        },
    )?;
    Ok(EvalReport {
        summary,
        scenario: if name.is_empty() { "custom".into() } else { name },
        metrics: path,
    })
}

/// Runs the requested verification scopes (all when empty) and fails when
/// any check fails.
pub fn verify(config: &RunConfig, scopes: &[Scope]) -> Result<Vec<CheckReport>, CliError> {
    let scopes = if scopes.is_empty() { Scope::ALL.to_vec() } else { scopes.to_vec() };
    Ok(run_suite(&scopes, &config.verify_options()?)?)
}

pub fn format_reports(reports: &[CheckReport]) -> String {
    let mut s = format!(
        "{:<6} {:<56} {:>8} {:>11} {:>9} {:>8}\n",
        "status", "check", "cases", "max dev", "tol", "seconds"
    );
    for r in reports {
        s.push_str(&format!(
            "{:<6} {:<56} {:>8} {:>11.3e} {:>9.1e} {:>8.2}  {}\n",
            if r.passed { "PASS" } else { "FAIL" },
            r.check,
            r.cases,
            r.max_deviation,
            r.tolerance,
            r.seconds,
            r.detail
        ));
    }
    s
}

/// Writes per-panel plot data for a metrics file.
pub fn export_plots(metrics: &Path, out: &Path) -> Result<Vec<String>, CliError> {
    let rows = read_metrics_file(metrics)?;
    export_panels(&rows, out)
}
