//! Enumerable single-step instances and exhaustive optimizers over them.

use rand::Rng;

use crate::env::{AgentAction, ChannelRealization, JointAction, Physics, StepOutcome};
use crate::error::{Error, Result};
use crate::system::{BaseStation, BsKind, PartitionStyle, SystemConfig};

/// Largest joint action space the exhaustive searches will enumerate.
pub const ENUMERATION_LIMIT: u64 = 10_000_000;

/// Fixed gains, every user active, QoS disabled.
#[derive(Clone, Debug)]
pub struct MicroInstance {
    pub config: SystemConfig,
    pub physics: Physics<f64>,
    pub channel: ChannelRealization<f64>,
    pub active: Vec<bool>,
    pub eta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimum {
    pub joint: JointAction,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequentialOptimum {
    /// Optimal group rewards `J_m` in decision order.
    pub group_values: Vec<f64>,
    /// All groups' optimal actions composed into one joint action.
    pub composed: JointAction,
}

impl SequentialOptimum {
    pub fn total(&self) -> f64 {
        self.group_values.iter().sum()
    }
}

fn micro_config(n_bs: usize, subchannels: usize, srbs: usize, k: usize, style: PartitionStyle) -> SystemConfig {
    let mut cfg = SystemConfig::desk();
    cfg.base_stations = (0..n_bs)
        .map(|n| BaseStation {
            kind: BsKind::Tbs,
            position: [100.0 + 200.0 * n as f64, 500.0, 25.0],
        })
        .collect();
    cfg.subchannels = subchannels;
    cfg.srbs = srbs;
    cfg.k_max = k;
    cfg.eta = 0.0;
    cfg.partition = style;
    cfg
}

impl MicroInstance {
    /// Gains given as `[l][j][f]` with `j = n * K + k`.
    pub fn with_gains(
        n_bs: usize,
        subchannels: usize,
        srbs: usize,
        k: usize,
        style: PartitionStyle,
        gains: Vec<f64>,
    ) -> Result<Self> {
        let config = micro_config(n_bs, subchannels, srbs, k, style);
        config.validate()?;
        let physics = Physics::new(&config)?;
        let slots = config.user_slots();
        if gains.len() != n_bs * slots * subchannels {
            return Err(Error::Shape {
                context: "micro instance gains",
                expected: n_bs * slots * subchannels,
                got: gains.len(),
            });
        }
        Ok(Self {
            channel: ChannelRealization::from_gains(n_bs, slots, subchannels, gains),
            active: vec![true; slots],
            eta: vec![0.0; slots],
            physics,
            config,
        })
    }

    /// Gains `10^U(-12, -9)` drawn independently per link and subchannel.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        n_bs: usize,
        subchannels: usize,
        srbs: usize,
        k: usize,
        style: PartitionStyle,
    ) -> Result<Self> {
        let len = n_bs * n_bs * k * subchannels;
        let gains = (0..len).map(|_| 10f64.powf(rng.random_range(-12.0..-9.0))).collect();
        Self::with_gains(n_bs, subchannels, srbs, k, style, gains)
    }

    pub fn evaluate(&self, joint: &JointAction) -> Result<StepOutcome<f64>> {
        self.physics.evaluate(&self.channel, &self.active, &self.eta, joint)
    }

    fn idle(&self) -> JointAction {
        JointAction::idle(self.physics.n_bs, self.physics.srbs, self.physics.srb_size())
    }

    /// Actions of one agent: `(K + 1)^(F / M)`.
    pub fn agent_space(&self) -> u64 {
        ((self.physics.k_max + 1) as u64).pow(self.physics.srb_size() as u32)
    }

    /// Joint actions of one group: one agent per BS.
    pub fn group_space(&self) -> f64 {
        (self.agent_space() as f64).powi(self.physics.n_bs as i32)
    }

    pub fn joint_space(&self) -> f64 {
        self.group_space().powi(self.physics.srbs as i32)
    }

    fn check_size(size: f64) -> Result<u64> {
        if size > ENUMERATION_LIMIT as f64 {
            return Err(Error::TooLarge {
                size,
                limit: ENUMERATION_LIMIT,
            });
        }
        Ok(size as u64)
    }

    /// Writes the group-`m` actions encoded by `index` into `joint`.
    fn set_group(&self, joint: &mut JointAction, m: usize, mut index: u64) {
        let base = (self.physics.k_max + 1) as u64;
        let srbs = self.physics.srbs;
        for n in 0..self.physics.n_bs {
            let a = joint.agent_mut(n, m, srbs);
            for c in a.assignment.iter_mut() {
                *c = (index % base) as usize;
                index /= base;
            }
        }
    }

    /// Group actions with every group enumerated.
    fn set_all(&self, joint: &mut JointAction, mut index: u64) {
        let g = self.group_space() as u64;
        for m in 0..self.physics.srbs {
            self.set_group(joint, m, index % g);
            index /= g;
        }
    }

    /// Exhaustive maximization of `r = sum R / K` over every joint action.
    pub fn brute_force_joint_optimum(&self) -> Result<Optimum> {
        let size = Self::check_size(self.joint_space())?;
        let mut joint = self.idle();
        let mut best = Optimum {
            joint: joint.clone(),
            value: f64::NEG_INFINITY,
        };
        for idx in 0..size {
            self.set_all(&mut joint, idx);
            let v = self.evaluate(&joint)?.reward;
            if v > best.value {
                best = Optimum {
                    joint: joint.clone(),
                    value: v,
                };
            }
        }
        Ok(best)
    }

    /// Best group-`m` reward with the other groups fixed as in `base`.
    pub fn best_group_response(&self, base: &JointAction, m: usize) -> Result<(Vec<AgentAction>, f64)> {
        let size = Self::check_size(self.group_space())?;
        let mut joint = base.clone();
        let srbs = self.physics.srbs;
        let mut best = (Vec::new(), f64::NEG_INFINITY);
        for idx in 0..size {
            self.set_group(&mut joint, m, idx);
            let v = self.evaluate(&joint)?.group_rewards[m];
            if v > best.1 {
                let actions = (0..self.physics.n_bs).map(|n| joint.agent(n, m, srbs).clone()).collect();
                best = (actions, v);
            }
        }
        Ok(best)
    }

    /// Optimizes groups in order, each given the earlier groups' choices and
    /// with later groups idle.
    pub fn sequential_group_optimum(&self) -> Result<SequentialOptimum> {
        let srbs = self.physics.srbs;
        let mut composed = self.idle();
        let mut group_values = Vec::with_capacity(srbs);
        for m in 0..srbs {
            let (actions, value) = self.best_group_response(&composed, m)?;
            for (n, a) in actions.into_iter().enumerate() {
                *composed.agent_mut(n, m, srbs) = a;
            }
            group_values.push(value);
        }
        Ok(SequentialOptimum {
            group_values,
            composed,
        })
    }

    /// Group-`m` optimal value for every joint action of groups `0..m`
    /// (later groups idle).
    pub fn conditional_optima(&self, m: usize) -> Result<Vec<f64>> {
        let g = Self::check_size(self.group_space())?;
        let prefix = Self::check_size(self.group_space().powi(m as i32))?;
        Self::check_size(prefix as f64 * g as f64)?;
        let mut out = Vec::with_capacity(prefix as usize);
        for idx in 0..prefix {
            let mut joint = self.idle();
            let mut rest = idx;
            for i in 0..m {
                self.set_group(&mut joint, i, rest % g);
                rest /= g;
            }
            out.push(self.best_group_response(&joint, m)?.1);
        }
        Ok(out)
    }
}
