//! Run configuration: a strict TOML schema, environment overrides, conversion
//! to core types and content hashing.
//!
//! Every key is optional and falls back to the desk-scale default, but keys
//! outside the schema are rejected. Physical quantities use engineering units
//! at this boundary (dBm, dBm/Hz, Mbit/s, minutes) and are converted to linear
//! SI units before reaching the core.

use std::collections::BTreeMap;
use std::path::Path;

use coexist_core::channel::{ChannelParams, LinkClass, LosModel, PathlossModel, dbm_to_watts, watts_to_dbm};
use coexist_core::dynamics::DynamicsConfig;
use coexist_core::nn::Activation;
use coexist_core::system::{BaseStation, BsKind, ObservationScaling, PartitionStyle, SystemConfig};
use coexist_core::theory::VerifyOptions;
use coexist_core::trainer::{Method, TrainerConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Prefix of environment variables that override config keys, e.g.
/// `COEXIST__RUN__EPISODES=50` or `COEXIST__TRAINER__HIDDEN=[32, 32]`.
pub const ENV_PREFIX: &str = "COEXIST__";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemBlock,
    pub dynamics: DynamicsBlock,
    pub trainer: TrainerBlock,
    pub run: RunBlock,
    pub eval: EvalBlock,
    pub verify: VerifyBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseStationEntry {
    /// `tbs` or `ntbs`
    pub kind: String,
    pub position_m: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemBlock {
    pub k_max: usize,
    pub subchannels: usize,
    pub srbs: usize,
    pub subchannel_bandwidth_hz: f64,
    pub p_max_dbm: f64,
    pub eta_mbps: f64,
    pub noise_dbm_per_hz: f64,
    pub area_m: [f64; 2],
    pub user_height_m: f64,
    /// `contiguous` or `shifted`
    pub partition: String,
    pub base_stations: Vec<BaseStationEntry>,
    pub channel: ChannelBlock,
    pub scaling: ScalingBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathlossEntry {
    pub intercept_db: f64,
    pub slope_db_per_decade: f64,
    pub reference_distance_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelBlock {
    pub terrestrial: PathlossEntry,
    pub aerial_los: PathlossEntry,
    pub aerial_nlos: PathlossEntry,
    pub los_a: f64,
    pub los_b: f64,
    pub rician_k_db: f64,
    pub fading_rho: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingBlock {
    pub gain_db: [f64; 2],
    pub pathloss_db: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsBlock {
    pub arrival_rate_per_min: f64,
    pub dwell_mean_min: f64,
    pub walk_speed_mps: f64,
    pub training_mean_fraction: f64,
    pub frame_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerBlock {
    pub lr: f64,
    pub gamma: f64,
    pub minibatch: usize,
    pub clip: f64,
    pub gae_lambda: f64,
    pub entropy_coef: f64,
    pub dual_lr: f64,
    pub lambda_max: f64,
    pub epochs: usize,
    pub episode_steps: usize,
    pub max_grad_norm: f64,
    pub hidden: Vec<usize>,
    pub activation: String,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub rate_unit_bps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunBlock {
    pub seed: u64,
    pub episodes: usize,
    pub workers: usize,
    pub out: String,
    /// `decomposed`, `monolithic-mappo` or `ippo`; recorded as the run tag.
    pub method: String,
    /// Checkpoint cadence in episodes; 0 writes only the initial and final ones.
    pub checkpoint_every: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalBlock {
    /// Preset name, e.g. `arrivals-3`; empty keeps the dynamics block as is.
    pub scenario: String,
    pub duration_min: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyBlock {
    pub micro_instances: usize,
    pub assumption_samples: usize,
    pub resample_states: usize,
    pub resamples: usize,
    pub physics_actions: usize,
    pub mdps: usize,
    pub reward_tables: usize,
    pub networks: usize,
}

fn pathloss_entry(m: &PathlossModel) -> PathlossEntry {
    PathlossEntry {
        intercept_db: m.intercept_db,
        slope_db_per_decade: m.slope_db_per_decade,
        reference_distance_m: m.reference_distance,
    }
}

impl Default for SystemBlock {
    fn default() -> Self {
        let s = SystemConfig::desk();
        Self {
            k_max: s.k_max,
            subchannels: s.subchannels,
            srbs: s.srbs,
            subchannel_bandwidth_hz: s.subchannel_bandwidth,
            p_max_dbm: 46.0,
            eta_mbps: s.eta / 1e6,
            noise_dbm_per_hz: -174.0,
            area_m: s.area,
            user_height_m: s.user_height,
            partition: "contiguous".into(),
            base_stations: s
                .base_stations
                .iter()
                .map(|b| BaseStationEntry {
                    kind: match b.kind {
                        BsKind::Tbs => "tbs".into(),
                        BsKind::Ntbs => "ntbs".into(),
                    },
                    position_m: b.position,
                })
                .collect(),
            channel: ChannelBlock::default(),
            scaling: ScalingBlock::default(),
        }
    }
}

impl Default for ChannelBlock {
    fn default() -> Self {
        let c = ChannelParams::default();
        Self {
            terrestrial: pathloss_entry(&c.terrestrial),
            aerial_los: pathloss_entry(&c.aerial_los),
            aerial_nlos: pathloss_entry(&c.aerial_nlos),
            los_a: c.los.a,
            los_b: c.los.b,
            rician_k_db: c.rician_k_db,
            fading_rho: c.fading_rho,
        }
    }
}

impl Default for ScalingBlock {
    fn default() -> Self {
        let s = ObservationScaling::default();
        Self {
            gain_db: [s.gain_db.0, s.gain_db.1],
            pathloss_db: [s.pathloss_db.0, s.pathloss_db.1],
        }
    }
}

impl Default for DynamicsBlock {
    fn default() -> Self {
        let d = DynamicsConfig::default();
        Self {
            arrival_rate_per_min: d.arrival_rate,
            dwell_mean_min: d.dwell_mean,
            walk_speed_mps: d.walk_speed,
            training_mean_fraction: d.training_mean_fraction,
            frame_s: d.frame,
        }
    }
}

impl Default for TrainerBlock {
    fn default() -> Self {
        let t = TrainerConfig::default();
        Self {
            lr: t.lr,
            gamma: t.gamma,
            minibatch: t.minibatch,
            clip: t.clip,
            gae_lambda: t.gae_lambda,
            entropy_coef: t.entropy_coef,
            dual_lr: t.dual_lr,
            lambda_max: t.lambda_max,
            epochs: t.epochs,
            episode_steps: t.episode_steps,
            max_grad_norm: t.max_grad_norm,
            hidden: vec![64, 64],
            activation: t.activation.name().into(),
            adam_beta1: t.adam_beta1,
            adam_beta2: t.adam_beta2,
            adam_eps: t.adam_eps,
            rate_unit_bps: t.rate_unit,
        }
    }
}

impl Default for RunBlock {
    fn default() -> Self {
        Self {
            seed: 0,
            episodes: 1000,
            workers: 1,
            out: "runs/default".into(),
            method: Method::Decomposed.name().into(),
            checkpoint_every: 100,
        }
    }
}

impl Default for EvalBlock {
    fn default() -> Self {
        Self {
            scenario: String::new(),
            duration_min: 30.0,
        }
    }
}

impl Default for VerifyBlock {
    fn default() -> Self {
        let v = VerifyOptions::default();
        Self {
            micro_instances: v.micro_instances,
            assumption_samples: v.assumption_samples,
            resample_states: v.resample_states,
            resamples: v.resamples,
            physics_actions: v.physics_actions,
            mdps: v.mdps,
            reward_tables: v.reward_tables,
            networks: v.networks,
        }
    }
}

fn digest(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

impl RunConfig {
    /// Parses TOML text; `origin` names the source in diagnostics.
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))
    }

    /// Reads `path` (or the defaults when `None`) and applies `COEXIST__`
    /// overrides taken from `vars`.
    pub fn load(
        path: Option<&Path>,
        vars: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, CliError> {
        let (text, origin) = match path {
            Some(p) => (
                std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?,
                p.display().to_string(),
            ),
            None => (String::new(), "<defaults>".to_string()),
        };
        let config = Self::parse(&text, &origin)?;
        let overrides: BTreeMap<String, String> = vars
            .into_iter()
            .filter(|(k, _)| k.starts_with(ENV_PREFIX))
            .collect();
        if overrides.is_empty() {
            return Ok(config);
        }
        let mut table = toml::Table::try_from(&config)
            .map_err(|e| CliError::Config(format!("cannot re-encode config: {e}")))?;
        for (key, value) in &overrides {
            apply_override(&mut table, key, value)?;
        }
        let names: Vec<&str> = overrides.keys().map(String::as_str).collect();
        let text = toml::to_string(&table)
            .map_err(|e| CliError::Config(format!("cannot re-encode config: {e}")))?;
        Self::parse(&text, &format!("{origin} with overrides {}", names.join(", ")))
    }

    pub fn method(&self) -> Result<Method, CliError> {
        Ok(Method::parse(&self.run.method)?)
    }

    pub fn system(&self) -> Result<SystemConfig, CliError> {
        let s = &self.system;
        let model = |class, e: &PathlossEntry| {
            PathlossModel::new(class, e.intercept_db, e.slope_db_per_decade, e.reference_distance_m)
        };
        let base_stations = s
            .base_stations
            .iter()
            .map(|b| {
                let kind = match b.kind.as_str() {
                    "tbs" => BsKind::Tbs,
                    "ntbs" => BsKind::Ntbs,
                    other => {
                        return Err(CliError::Config(format!(
                            "system.base_stations.kind must be `tbs` or `ntbs`, got `{other}`"
                        )));
                    }
                };
                Ok(BaseStation {
                    kind,
                    position: b.position_m,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let partition = match s.partition.as_str() {
            "contiguous" => PartitionStyle::Contiguous,
            "shifted" => PartitionStyle::Shifted,
            other => {
                return Err(CliError::Config(format!(
                    "system.partition must be `contiguous` or `shifted`, got `{other}`"
                )));
            }
        };
        let config = SystemConfig {
            base_stations,
            k_max: s.k_max,
            subchannels: s.subchannels,
            srbs: s.srbs,
            subchannel_bandwidth: s.subchannel_bandwidth_hz,
            p_max: dbm_to_watts(s.p_max_dbm),
            eta: s.eta_mbps * 1e6,
            area: s.area_m,
            user_height: s.user_height_m,
            channel: ChannelParams {
                terrestrial: model(LinkClass::Terrestrial, &s.channel.terrestrial)?,
                aerial_los: model(LinkClass::AerialLos, &s.channel.aerial_los)?,
                aerial_nlos: model(LinkClass::AerialNlos, &s.channel.aerial_nlos)?,
                los: LosModel {
                    a: s.channel.los_a,
                    b: s.channel.los_b,
                },
                rician_k_db: s.channel.rician_k_db,
                fading_rho: s.channel.fading_rho,
                noise_density: dbm_to_watts(s.noise_dbm_per_hz),
            },
            partition,
            scaling: ObservationScaling {
                gain_db: (s.scaling.gain_db[0], s.scaling.gain_db[1]),
                pathloss_db: (s.scaling.pathloss_db[0], s.scaling.pathloss_db[1]),
            },
        };
        config.validate()?;
        Ok(config)
    }

    pub fn dynamics(&self) -> Result<DynamicsConfig, CliError> {
        let d = &self.dynamics;
        let config = DynamicsConfig {
            arrival_rate: d.arrival_rate_per_min,
            dwell_mean: d.dwell_mean_min,
            walk_speed: d.walk_speed_mps,
            training_mean_fraction: d.training_mean_fraction,
            frame: d.frame_s,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn trainer(&self) -> Result<TrainerConfig, CliError> {
        let t = &self.trainer;
        let config = TrainerConfig {
            lr: t.lr,
            gamma: t.gamma,
            minibatch: t.minibatch,
            clip: t.clip,
            gae_lambda: t.gae_lambda,
            entropy_coef: t.entropy_coef,
            dual_lr: t.dual_lr,
            lambda_max: t.lambda_max,
            epochs: t.epochs,
            episode_steps: t.episode_steps,
            max_grad_norm: t.max_grad_norm,
            hidden: t.hidden.clone(),
            activation: Activation::parse(&t.activation)?,
            adam_beta1: t.adam_beta1,
            adam_beta2: t.adam_beta2,
            adam_eps: t.adam_eps,
            rate_unit: t.rate_unit_bps,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn verify_options(&self) -> Result<VerifyOptions, CliError> {
        let v = &self.verify;
        Ok(VerifyOptions {
            system: self.system()?,
            seed: self.run.seed,
            micro_instances: v.micro_instances,
            assumption_samples: v.assumption_samples,
            resample_states: v.resample_states,
            resamples: v.resamples,
            physics_actions: v.physics_actions,
            mdps: v.mdps,
            reward_tables: v.reward_tables,
            networks: v.networks,
        })
    }

    /// Checks every block converts, without running anything.
    pub fn validate(&self) -> Result<(), CliError> {
        self.system()?;
        self.dynamics()?;
        self.trainer()?;
        self.method()?;
        if self.run.workers == 0 {
            return Err(CliError::Config("run.workers must be at least 1".into()));
        }
        if !(self.eval.duration_min > 0.0) {
            return Err(CliError::Config("eval.duration_min must be > 0".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hash of the system block; checkpoints carry it and evaluation refuses a
    /// checkpoint whose hash differs.
    pub fn system_hash(&self) -> [u8; 32] {
        digest(toml::to_string(&self.system).expect("system block serializes").as_bytes())
    }

    /// Hash of the whole resolved config.
    pub fn config_hash(&self) -> [u8; 32] {
        digest(self.to_toml().as_bytes())
    }
}

/// Sets `COEXIST__BLOCK__KEY=value` in `table`. The value is read as a TOML
/// literal, or as a bare string when it is not one.
fn apply_override(table: &mut toml::Table, var: &str, value: &str) -> Result<(), CliError> {
    let path: Vec<String> = var[ENV_PREFIX.len()..]
        .split("__")
        .map(str::to_ascii_lowercase)
        .collect();
    if path.iter().any(String::is_empty) {
        return Err(CliError::Config(format!("malformed override variable {var}")));
    }
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cursor = table;
    for key in parents {
        cursor = cursor
            .entry(key.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("{var}: `{key}` is not a table")))?;
    }
    cursor.insert(last.clone(), parsed);
    Ok(())
}

/// Human-readable summary of the converted system, for logs.
pub fn describe(system: &SystemConfig) -> String {
    format!(
        "{} BSs, F = {}, M = {}, K_max = {}, p_max = {:.2} W ({:.1} dBm)",
        system.n_bs(),
        system.subchannels,
        system.srbs,
        system.k_max,
        system.p_max,
        watts_to_dbm(system.p_max)
    )
}
