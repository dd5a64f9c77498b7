//! Episode collection and per-stream advantage estimation.

use rand::Rng;

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::scalar::Scalar;
use crate::trainer::dual::Multipliers;
use crate::trainer::gae::compute_gae;
use crate::trainer::policy::{self, Policy, Selection};
use crate::trainer::{Method, TrainerConfig};

/// One agent decision, ready for the policy loss.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentSample<T> {
    pub features: Vec<T>,
    pub mask: Vec<bool>,
    pub actions: Vec<usize>,
    pub log_prob: T,
    /// Index into the episode's value samples (`t * streams + stream`).
    pub value_index: usize,
    pub advantage: T,
}

/// One critic evaluation for a stream at a step.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueSample<T> {
    pub input: Vec<T>,
    pub value: T,
    /// Stream reward in rate units before shaping.
    pub raw: T,
    /// `raw - penalty`.
    pub shaped: T,
    pub advantage: T,
    pub target: T,
}

/// Environment-level facts of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord<T> {
    /// Global reward `r`, bit/s per user.
    pub reward: T,
    /// `sum_k lambda_k (1 - gamma) c_k`, rate units.
    pub penalty: T,
    /// Per user slot, rate units.
    pub costs: Vec<T>,
    /// `sum_k c_k / K`, bit/s.
    pub cost_per_user: T,
    /// bit/s
    pub throughput: T,
    pub qos_misses: usize,
    pub active_users: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeBuffer<T> {
    pub method: Method,
    pub streams: usize,
    pub agents: Vec<AgentSample<T>>,
    pub values: Vec<ValueSample<T>>,
    /// Critic value at the state after the last step, per stream.
    pub bootstrap: Vec<T>,
    pub records: Vec<StepRecord<T>>,
    /// Multipliers used for shaping during this episode.
    pub lambda: Vec<T>,
}

/// Episode-level means reported to the metrics stream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeSummary {
    /// bit/s per user
    pub mean_raw_reward: f64,
    /// bit/s per user, `r - penalty`
    pub mean_shaped_reward: f64,
    /// bit/s per user
    pub mean_cost: f64,
    pub mean_qos_misses: f64,
    /// bit/s
    pub mean_throughput: f64,
    pub mean_active_users: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 { 0.0 } else { s / n as f64 }
}

impl<T: Scalar> EpisodeBuffer<T> {
    pub fn summary(&self, rate_unit: f64) -> EpisodeSummary {
        let r = &self.records;
        EpisodeSummary {
            mean_raw_reward: mean(r.iter().map(|s| s.reward.as_f64())),
            mean_shaped_reward: mean(
                r.iter().map(|s| s.reward.as_f64() - s.penalty.as_f64() * rate_unit),
            ),
            mean_cost: mean(r.iter().map(|s| s.cost_per_user.as_f64())),
            mean_qos_misses: mean(r.iter().map(|s| s.qos_misses as f64)),
            mean_throughput: mean(r.iter().map(|s| s.throughput.as_f64())),
            mean_active_users: mean(r.iter().map(|s| s.active_users as f64)),
        }
    }

    /// Time-averaged cost per user slot, rate units.
    pub fn mean_costs(&self) -> Vec<T> {
        let slots = self.lambda.len();
        let mut acc = vec![T::zero(); slots];
        for s in &self.records {
            for (a, &c) in acc.iter_mut().zip(&s.costs) {
                *a = *a + c;
            }
        }
        let n = T::lit(self.records.len().max(1) as f64);
        acc.iter_mut().for_each(|a| *a = *a / n);
        acc
    }
}

fn ensure_finite<T: Scalar>(v: T, what: &str) -> Result<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Resets `env`, plays one episode with sampled actions and fills in
/// advantages and value targets.
pub fn collect_episode<T: Scalar, R: Rng + ?Sized>(
    env: &mut Environment<T>,
    policy: &Policy<T>,
    critic: &Mlp<T>,
    multipliers: &Multipliers<T>,
    cfg: &TrainerConfig,
    rng: &mut R,
) -> Result<EpisodeBuffer<T>> {
    let method = policy.method;
    env.reset()?;
    let n_bs = env.physics().n_bs;
    let streams = policy::streams(method, env.physics());
    let unit = T::lit(cfg.rate_unit);
    let steps = cfg.episode_steps;
    let mut agents = Vec::with_capacity(steps * env.config().agents());
    let mut values = Vec::with_capacity(steps * streams);
    let mut records = Vec::with_capacity(steps);
    for t in 0..steps {
        let (joint, decisions) = policy.decide(env, Selection::Sample, rng)?;
        let inputs = policy::critic_inputs(method, env);
        let active_users = env.state().active_users();
        let outcome = env.step(&joint)?;
        let costs: Vec<T> = outcome.costs.iter().map(|&c| c / unit).collect();
        let penalty = ensure_finite(multipliers.penalty(&costs, cfg.gamma), "QoS penalty")?;
        let raw = policy::stream_rewards(method, &outcome, n_bs);
        for (input, r) in inputs.into_iter().zip(raw) {
            let value = ensure_finite(critic.predict(&input)?[0], "critic output")?;
            let raw = ensure_finite(r / unit, "reward")?;
            values.push(ValueSample {
                input,
                value,
                raw,
                shaped: raw - penalty,
                advantage: T::zero(),
                target: T::zero(),
            });
        }
        for d in decisions {
            let stream = policy::stream_of(method, d.bs, d.srb.unwrap_or(0));
            agents.push(AgentSample {
                features: d.features,
                mask: d.mask,
                actions: d.actions,
                log_prob: d.log_prob,
                value_index: t * streams + stream,
                advantage: T::zero(),
            });
        }
        let k = T::lit(outcome.active_users as f64);
        records.push(StepRecord {
            reward: outcome.reward,
            penalty,
            cost_per_user: outcome.costs.iter().copied().sum::<T>() / k,
            costs,
            throughput: outcome.throughput(),
            qos_misses: outcome.qos_misses(),
            active_users,
        });
    }
    let bootstrap = policy::critic_inputs(method, env)
        .iter()
        .map(|x| Ok(ensure_finite(critic.predict(x)?[0], "critic output")?))
        .collect::<Result<Vec<T>>>()?;
    // episodes end by truncation, so every segment bootstraps
    for s in 0..streams {
        let rewards: Vec<T> = (0..steps).map(|t| values[t * streams + s].shaped).collect();
        let vals: Vec<T> = (0..steps).map(|t| values[t * streams + s].value).collect();
        let (adv, targets) = compute_gae(&rewards, &vals, bootstrap[s], false, cfg.gamma, cfg.gae_lambda);
        for t in 0..steps {
            let v = &mut values[t * streams + s];
            v.advantage = adv[t];
            v.target = targets[t];
        }
    }
    for a in &mut agents {
        a.advantage = values[a.value_index].advantage;
    }
    Ok(EpisodeBuffer {
        method,
        streams,
        agents,
        values,
        bootstrap,
        records,
        lambda: multipliers.lambda.clone(),
    })
}
