//! Versioned metrics CSV: one row per training episode or per simulated
//! second of evaluation.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Bumped whenever the column set or a column's meaning changes.
pub const SCHEMA_VERSION: u32 = 1;

pub const COLUMNS: [&str; 14] = [
    "schema_version",
    "run_id",
    "wall_time_s",
    "episode",
    "phase",
    "sim_time_s",
    "mean_shaped_reward",
    "mean_raw_reward",
    "mean_cost",
    "lambda_mean",
    "lambda_max",
    "qos_misses",
    "throughput_bps",
    "active_users",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Eval,
}

/// Rewards and costs are bit/s per user; `episode` is the simulated second
/// during evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub schema_version: u32,
    pub run_id: String,
    pub wall_time_s: f64,
    pub episode: u64,
    pub phase: Phase,
    pub sim_time_s: f64,
    pub mean_shaped_reward: f64,
    pub mean_raw_reward: f64,
    pub mean_cost: f64,
    pub lambda_mean: f64,
    pub lambda_max: f64,
    pub qos_misses: f64,
    pub throughput_bps: f64,
    pub active_users: f64,
}

/// Appends rows and flushes after each, so a crash leaves a valid prefix.
pub struct MetricsWriter {
    inner: csv::Writer<BufWriter<File>>,
    path: String,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut inner = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(BufWriter::new(file));
        let path = path.display().to_string();
        inner
            .write_record(COLUMNS)
            .and_then(|_| Ok(inner.flush()?))
            .map_err(|e| CliError::Metrics(format!("{path}: {e}")))?;
        Ok(Self { inner, path })
    }

    pub fn append(&mut self, row: &MetricsRow) -> Result<(), CliError> {
        self.inner
            .serialize(row)
            .and_then(|_| Ok(self.inner.flush()?))
            .map_err(|e| CliError::Metrics(format!("{}: {e}", self.path)))
    }
}

/// Parses a metrics file, rejecting other schema versions and column sets.
pub fn read_metrics(mut source: impl Read) -> Result<Vec<MetricsRow>, CliError> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| CliError::Metrics(e.to_string()))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::Metrics(e.to_string()))?
        .clone();
    if headers.iter().ne(COLUMNS) {
        return Err(CliError::Metrics(format!(
            "unexpected header `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<MetricsRow>().enumerate() {
        let row = rec.map_err(|e| CliError::Metrics(format!("row {}: {e}", i + 1)))?;
        if row.schema_version != SCHEMA_VERSION {
            return Err(CliError::Metrics(format!(
                "row {}: schema version {} is not supported (expected {SCHEMA_VERSION})",
                i + 1,
                row.schema_version
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_metrics_file(path: &Path) -> Result<Vec<MetricsRow>, CliError> {
    let file = File::open(path).map_err(|e| CliError::Metrics(format!("{}: {e}", path.display())))?;
    read_metrics(file).map_err(|e| match e {
        CliError::Metrics(msg) => CliError::Metrics(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// A plot panel: one x column and the y columns drawn against it.
struct Panel {
    file: &'static str,
    x: &'static str,
    y: &'static [&'static str],
    phase: Phase,
}

const PANELS: [Panel; 5] = [
    Panel {
        file: "reward.csv",
        x: "episode",
        y: &["mean_shaped_reward", "mean_raw_reward"],
        phase: Phase::Train,
    },
    Panel {
        file: "cost.csv",
        x: "episode",
        y: &["mean_cost", "lambda_mean", "lambda_max"],
        phase: Phase::Train,
    },
    Panel {
        file: "active_users.csv",
        x: "sim_time_s",
        y: &["active_users"],
        phase: Phase::Eval,
    },
    Panel {
        file: "qos_misses.csv",
        x: "sim_time_s",
        y: &["qos_misses"],
        phase: Phase::Eval,
    },
    Panel {
        file: "throughput.csv",
        x: "sim_time_s",
        y: &["throughput_bps"],
        phase: Phase::Eval,
    },
];

fn column(row: &MetricsRow, name: &str) -> String {
    let v = match name {
        "episode" => return row.episode.to_string(),
        "sim_time_s" => row.sim_time_s,
        "mean_shaped_reward" => row.mean_shaped_reward,
        "mean_raw_reward" => row.mean_raw_reward,
        "mean_cost" => row.mean_cost,
        "lambda_mean" => row.lambda_mean,
        "lambda_max" => row.lambda_max,
        "qos_misses" => row.qos_misses,
        "throughput_bps" => row.throughput_bps,
        "active_users" => row.active_users,
        other => unreachable!("no panel column {other}"),
    };
    v.to_string()
}

/// Writes per-panel CSVs for the phases present in `rows` and returns their
/// file names. With no rows every panel is written with a header only.
pub fn export_panels(rows: &[MetricsRow], out: &Path) -> Result<Vec<String>, CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut written = Vec::new();
    for panel in &PANELS {
        let selected: Vec<&MetricsRow> = rows.iter().filter(|r| r.phase == panel.phase).collect();
        if selected.is_empty() && !rows.is_empty() {
            continue;
        }
        let path = out.join(panel.file);
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Metrics(e.to_string()))?;
        let header: Vec<&str> = ["run_id", panel.x].into_iter().chain(panel.y.iter().copied()).collect();
        let mut write = || -> csv::Result<()> {
            w.write_record(&header)?;
            for row in &selected {
                let mut rec = vec![row.run_id.clone(), column(row, panel.x)];
                rec.extend(panel.y.iter().map(|c| column(row, c)));
                w.write_record(&rec)?;
            }
            w.flush()?;
            Ok(())
        };
        write().map_err(|e| CliError::Metrics(format!("{}: {e}", path.display())))?;
        written.push(panel.file.to_string());
    }
    Ok(written)
}

/// Rows with the wall-clock column blanked, for reproducibility comparisons.
pub fn without_wall_time(rows: &[MetricsRow]) -> Vec<MetricsRow> {
    rows.iter()
        .map(|r| MetricsRow {
            wall_time_s: 0.0,
            ..r.clone()
        })
        .collect()
}

/// Writes `text` through a temporary file and rename.
pub fn write_atomic(path: &Path, text: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    let mut f = File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::io(&tmp, e))?;
    f.sync_all().map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(phase: Phase, episode: u64) -> MetricsRow {
        MetricsRow {
            schema_version: SCHEMA_VERSION,
            run_id: "r,\"quoted\"".into(),
            wall_time_s: 0.25,
            episode,
            phase,
            sim_time_s: episode as f64,
            mean_shaped_reward: -1.5,
            mean_raw_reward: 2e6,
            mean_cost: 0.0,
            lambda_mean: 0.1,
            lambda_max: 0.3,
            qos_misses: 1.0,
            throughput_bps: 3e7,
            active_users: 4.0,
        }
    }

    #[test]
    fn round_trip_with_quoting() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut w = MetricsWriter::create(&path).unwrap();
        let rows = vec![row(Phase::Train, 0), row(Phase::Eval, 1)];
        for r in &rows {
            w.append(r).unwrap();
        }
        drop(w);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("schema_version,run_id,wall_time_s,"));
        assert!(text.contains("\"r,\"\"quoted\"\"\""));
        assert_eq!(read_metrics_file(&path).unwrap(), rows);
    }

    #[test]
    fn other_versions_rejected() {
        let mut text = COLUMNS.join(",");
        text.push_str("\n2,x,0,0,train,0,0,0,0,0,0,0,0,0\n");
        assert!(matches!(read_metrics(text.as_bytes()), Err(CliError::Metrics(_))));
    }

    #[test]
    fn missing_columns_rejected() {
        assert!(read_metrics("schema_version,run_id\n1,x\n".as_bytes()).is_err());
        assert!(read_metrics("".as_bytes()).is_err());
    }
}
