//! Constrained multi-agent PPO: rollouts, GAE, clipped-surrogate updates and
//! dual ascent on the QoS multipliers.

pub mod config;
pub mod dual;
pub mod gae;
pub mod policy;
pub mod ppo;
pub mod rollout;

use std::thread;

pub use config::{Method, TrainerConfig};
pub use dual::{Multipliers, shape_reward};
pub use gae::compute_gae;
pub use policy::{Decision, Policy, Selection};
pub use ppo::{PpoStats, ppo_update};
pub use rollout::{AgentSample, EpisodeBuffer, EpisodeSummary, ValueSample, collect_episode};

use crate::dynamics::DynamicsConfig;
use crate::env::{Environment, PopulationMode};
use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, Checkpoint, Mlp, TensorBuffer};
use crate::rng::{self, SimRng};
use crate::scalar::Scalar;
use crate::system::SystemConfig;

/// Salt separating the critic's initialization from the actor's.
const CRITIC_SEED_SALT: u64 = 0x5EED_C817_1C00_0001;

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeReport {
    /// Zero-based episode index across the run.
    pub episode: usize,
    pub worker: usize,
    pub summary: EpisodeSummary,
    /// Multiplier statistics after the update that consumed this episode.
    pub lambda_mean: f64,
    pub lambda_max: f64,
    pub stats: PpoStats,
}

pub struct Trainer<T> {
    config: TrainerConfig,
    method: Method,
    seed: u64,
    pub policy: Policy<T>,
    pub critic: Mlp<T>,
    actor_opt: Adam<T>,
    critic_opt: Adam<T>,
    pub multipliers: Multipliers<T>,
    envs: Vec<Environment<T>>,
    policy_rngs: Vec<SimRng>,
    minibatch_rng: SimRng,
    episodes: usize,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(
        system: SystemConfig,
        dynamics: DynamicsConfig,
        config: TrainerConfig,
        method: Method,
        seed: u64,
        workers: usize,
    ) -> Result<Self> {
        config.validate()?;
        system.validate()?;
        if workers == 0 {
            return Err(Error::Config("at least one rollout worker is required".into()));
        }
        let envs = (0..workers)
            .map(|w| {
                Environment::new(
                    system.clone(),
                    dynamics.clone(),
                    PopulationMode::Training,
                    seed,
                    w,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let phys = envs[0].physics();
        let policy = Policy::new(method, phys, &config, seed)?;
        let critic = policy::new_critic(method, phys, &config, seed ^ CRITIC_SEED_SALT)?;
        let slots = system.user_slots();
        Ok(Self {
            actor_opt: Adam::new(policy.actor.param_count(), config.adam()),
            critic_opt: Adam::new(critic.param_count(), config.adam()),
            multipliers: Multipliers::new(slots, config.dual_lr, config.lambda_max),
            policy_rngs: (0..workers)
                .map(|w| rng::stream(seed, rng::worker_stream(rng::STREAM_POLICY, w)))
                .collect(),
            minibatch_rng: rng::stream(seed, rng::STREAM_MINIBATCH),
            policy,
            critic,
            envs,
            config,
            method,
            seed,
            episodes: 0,
        })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn workers(&self) -> usize {
        self.envs.len()
    }

    pub fn episodes_done(&self) -> usize {
        self.episodes
    }

    pub fn system(&self) -> &SystemConfig {
        self.envs[0].config()
    }

    /// Collects one episode on each of the first `workers` environments in
    /// parallel, with parameters frozen.
    pub fn collect(&mut self, workers: usize) -> Result<Vec<EpisodeBuffer<T>>> {
        let workers = workers.clamp(1, self.envs.len());
        let (policy, critic, multipliers, cfg) =
            (&self.policy, &self.critic, &self.multipliers, &self.config);
        let jobs = self.envs.iter_mut().zip(self.policy_rngs.iter_mut()).take(workers);
        if workers == 1 {
            return jobs
                .map(|(env, r)| collect_episode(env, policy, critic, multipliers, cfg, r))
                .collect();
        }
        thread::scope(|scope| {
            let handles: Vec<_> = jobs
                .map(|(env, r)| {
                    scope.spawn(move || collect_episode(env, policy, critic, multipliers, cfg, r))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("rollout worker panicked"))
                .collect()
        })
    }

    /// Applies the PPO update and one dual step to freshly collected episodes.
    pub fn update(&mut self, buffers: &[EpisodeBuffer<T>]) -> Result<PpoStats> {
        let agents: Vec<AgentSample<T>> = buffers.iter().flat_map(|b| b.agents.iter().cloned()).collect();
        let values: Vec<ValueSample<T>> = buffers.iter().flat_map(|b| b.values.iter().cloned()).collect();
        let stats = ppo_update(
            &mut self.policy,
            &mut self.critic,
            &mut self.actor_opt,
            &mut self.critic_opt,
            &agents,
            &values,
            &self.config,
            &mut self.minibatch_rng,
        )?;
        let slots = self.multipliers.lambda.len();
        let mut mean_cost = vec![T::zero(); slots];
        for b in buffers {
            for (acc, c) in mean_cost.iter_mut().zip(b.mean_costs()) {
                *acc = *acc + c / T::lit(buffers.len() as f64);
            }
        }
        self.multipliers.update(&mean_cost)?;
        let finite = self.policy.actor.params().iter().all(|v| v.is_finite())
            && self.critic.params().iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("network parameters after update".into()));
        }
        Ok(stats)
    }

    /// One collect / update / dual cycle; reports one entry per episode.
    pub fn iterate(&mut self, workers: usize) -> Result<Vec<EpisodeReport>> {
        let buffers = self.collect(workers)?;
        let stats = self.update(&buffers)?;
        let (lambda_mean, lambda_max) = (self.multipliers.mean().as_f64(), self.multipliers.max().as_f64());
        let reports = buffers
            .iter()
            .enumerate()
            .map(|(w, b)| EpisodeReport {
                episode: self.episodes + w,
                worker: w,
                summary: b.summary(self.config.rate_unit),
                lambda_mean,
                lambda_max,
                stats,
            })
            .collect();
        self.episodes += buffers.len();
        Ok(reports)
    }

    /// Trains until `episodes` episodes have been consumed in total.
    pub fn train(&mut self, episodes: usize, mut on_episode: impl FnMut(&EpisodeReport)) -> Result<()> {
        while self.episodes < episodes {
            let batch = (episodes - self.episodes).min(self.workers());
            for r in self.iterate(batch)? {
                on_episode(&r);
            }
        }
        Ok(())
    }

    /// Actor, critic and multipliers with run metadata.
    pub fn checkpoint(&self, config_hash: [u8; 32]) -> Checkpoint {
        let mut ck = Checkpoint::new(config_hash);
        let meta = [
            ("method", self.method.name().to_string()),
            ("activation", self.config.activation.name().to_string()),
            ("episodes", self.episodes.to_string()),
            ("seed", self.seed.to_string()),
            ("workers", self.workers().to_string()),
        ];
        for (k, v) in meta {
            ck.metadata.insert(k.into(), v);
        }
        let lambda = self.multipliers.lambda.iter().map(|v| v.as_f64()).collect();
        let blocks = self
            .policy
            .actor
            .to_blocks("actor")
            .into_iter()
            .chain(self.critic.to_blocks("critic"))
            .chain([(
                "dual.lambda".to_string(),
                TensorBuffer::vector(lambda).expect("multipliers are finite"),
            )]);
        for (name, t) in blocks {
            ck.push_block(name, t).expect("block names are unique");
        }
        ck
    }
}

/// Rebuilds the actor stored in a checkpoint for the given system.
pub fn policy_from_checkpoint<T: Scalar>(ck: &Checkpoint, system: &SystemConfig) -> Result<Policy<T>> {
    let method = Method::parse(
        ck.meta("method")
            .ok_or_else(|| Error::Checkpoint("missing `method` metadata".into()))?,
    )?;
    let activation = Activation::parse(ck.meta("activation").unwrap_or("tanh"))?;
    let actor = Mlp::from_blocks("actor", activation, |n| ck.block(n))?;
    let phys = crate::env::Physics::new(system)?;
    Policy::from_actor(method, &phys, actor)
}
