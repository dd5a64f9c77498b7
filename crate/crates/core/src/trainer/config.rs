use crate::error::{Error, Result};
use crate::nn::{Activation, AdamConfig};

/// Agent granularity and critic scope of a learning run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// One agent per (BS, SRB), sequential within a BS, group rewards, critic
    /// on the full state plus the group index.
    Decomposed,
    /// One agent per BS over all subchannels, global reward, critic on the
    /// full state.
    MonolithicMappo,
    /// One agent per BS, global reward, critic on the agent's own observation.
    Ippo,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Decomposed, Method::MonolithicMappo, Method::Ippo];

    pub fn name(self) -> &'static str {
        match self {
            Method::Decomposed => "decomposed",
            Method::MonolithicMappo => "monolithic-mappo",
            Method::Ippo => "ippo",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainerConfig {
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
    pub activation: Activation,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Rewards and costs are divided by this (bit/s) before shaping, learning
    /// and the dual update.
    pub rate_unit: f64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            lr: 5e-5,
            gamma: 0.9,
            minibatch: 64,
            clip: 0.2,
            gae_lambda: 0.95,
            entropy_coef: 0.01,
            dual_lr: 1e-3,
            lambda_max: 100.0,
            epochs: 4,
            episode_steps: 100,
            max_grad_norm: 0.5,
            hidden: vec![256, 256],
            activation: Activation::Tanh,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            rate_unit: 1e6,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lr", self.lr),
            ("dual_lr", self.dual_lr),
            ("lambda_max", self.lambda_max),
            ("max_grad_norm", self.max_grad_norm),
            ("adam_eps", self.adam_eps),
            ("rate_unit", self.rate_unit),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("trainer.{name} must be > 0, got {v}")));
            }
        }
        let unit_open = [
            ("gamma", self.gamma),
            ("clip", self.clip),
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
        ];
        for (name, v) in unit_open {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("trainer.{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::Config(format!(
                "trainer.gae_lambda must lie in [0, 1], got {}",
                self.gae_lambda
            )));
        }
        if !(self.entropy_coef >= 0.0) {
            return Err(Error::Config("trainer.entropy_coef must be >= 0".into()));
        }
        if self.minibatch == 0 || self.epochs == 0 || self.episode_steps == 0 {
            return Err(Error::Config(
                "trainer.minibatch, epochs and episode_steps must be positive".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("trainer.hidden widths must be positive".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    /// Comparative runs must share every hyperparameter; only the method differs.
    pub fn check_parity(&self, other: &TrainerConfig) -> Result<()> {
        if self != other {
            return Err(Error::Config(format!(
                "hyperparameters differ between compared runs: {self:?} vs {other:?}"
            )));
        }
        Ok(())
    }
}
