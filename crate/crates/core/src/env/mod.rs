//! Decomposed downlink environment: channel state, joint-action evaluation,
//! observations and the reset/step contract.

pub mod observation;
pub mod physics;

use num_complex::Complex;

use crate::channel::{
    LinkGeometry, SmallScaleKind, channel_coefficient, pathloss_db, sample_small_scale,
};
use crate::dynamics::{
    DynamicsConfig, Population, PopulationEvent, advance, presence_metadata,
    sample_stationary_population, sample_training_population,
};
use crate::error::Result;
use crate::rng::{self, SimRng};
use crate::scalar::Scalar;
use crate::system::{BsKind, SystemConfig};

pub use observation::{Observation, ObservationLayout};
pub use physics::{
    AgentAction, ChannelRealization, JointAction, Physics, PowerAllocation, StepOutcome,
    decode_power, interference, rate,
};

use rand::Rng;

/// Everything needed to evaluate any joint action at step `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalState<T> {
    pub step: usize,
    pub channel: ChannelRealization<T>,
    /// Per user slot `n * K_max + k`.
    pub active: Vec<bool>,
    /// Presence bits per BS, indexed by action class.
    pub presence: Vec<Vec<u8>>,
    /// QoS target per user slot, bit/s.
    pub eta: Vec<T>,
}

impl<T: Scalar> GlobalState<T> {
    pub fn active_users(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }
}

/// How `reset` draws the user population.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PopulationMode {
    /// Truncated-Poisson population per episode.
    Training,
    /// Stationary arrival/departure population.
    Stationary,
}

/// Small-scale scatter state per `(l, j, f)`.
#[derive(Clone, Debug, Default)]
struct FadingState<T> {
    scatter: Vec<Option<Complex<T>>>,
}

/// Draws a channel realization for the current population.
fn sample_channel<T: Scalar, R: Rng + ?Sized>(
    config: &SystemConfig,
    population: &Population,
    fading: &mut FadingState<T>,
    rng: &mut R,
) -> Result<ChannelRealization<T>> {
    let n_bs = config.n_bs();
    let slots = config.user_slots();
    let f_total = config.subchannels;
    let mut ch = ChannelRealization::zeros(n_bs, slots, f_total);
    let rho = T::lit(config.channel.fading_rho);
    let rician = SmallScaleKind::rician_db(config.channel.rician_k_db);
    for (l, bs) in config.base_stations.iter().enumerate() {
        for (j, user) in population.users.iter().enumerate() {
            let base = ch.index(l, j, 0);
            if !user.active {
                fading.scatter[base..base + f_total].fill(None);
                continue;
            }
            let rx = [user.position[0], user.position[1], config.user_height];
            let (geometry, model, kind) = match bs.kind {
                BsKind::Tbs => (
                    LinkGeometry::terrestrial(bs.position, rx),
                    &config.channel.terrestrial,
                    SmallScaleKind::Rayleigh,
                ),
                BsKind::Ntbs => {
                    let g = LinkGeometry::aerial(bs.position, rx);
                    let p_los = config.channel.los.probability(g.elevation_deg)?;
                    if rng.random::<f64>() < p_los {
                        (g, &config.channel.aerial_los, rician)
                    } else {
                        (g, &config.channel.aerial_nlos, SmallScaleKind::Rayleigh)
                    }
                }
            };
            let geometry = LinkGeometry {
                distance: geometry.distance.max(1.0),
                ..geometry
            };
            let pl = T::lit(pathloss_db(&geometry, model)?);
            ch.pathloss_db[l * slots + j] = pl;
            for f in 0..f_total {
                let draw = sample_small_scale(rng, kind, rho, fading.scatter[base + f]);
                fading.scatter[base + f] = Some(draw.scatter);
                ch.set(l, j, f, channel_coefficient(pl, draw.coefficient));
            }
        }
    }
    Ok(ch)
}

pub struct Environment<T> {
    config: SystemConfig,
    dynamics: DynamicsConfig,
    physics: Physics<T>,
    mode: PopulationMode,
    population: Population,
    fading: FadingState<T>,
    state: GlobalState<T>,
    population_rng: SimRng,
    channel_rng: SimRng,
    events: Vec<PopulationEvent>,
}

impl<T: Scalar> Environment<T> {
    /// Builds and resets an environment whose random streams derive from
    /// `(seed, worker)`.
    pub fn new(
        config: SystemConfig,
        dynamics: DynamicsConfig,
        mode: PopulationMode,
        seed: u64,
        worker: usize,
    ) -> Result<Self> {
        dynamics.validate()?;
        let physics = Physics::new(&config)?;
        let population = Population::empty(config.n_bs(), config.k_max, config.area, config.eta);
        let len = config.n_bs() * config.user_slots() * config.subchannels;
        let mut env = Self {
            state: GlobalState {
                step: 0,
                channel: ChannelRealization::zeros(
                    config.n_bs(),
                    config.user_slots(),
                    config.subchannels,
                ),
                active: vec![false; config.user_slots()],
                presence: presence_metadata(&population),
                eta: vec![T::lit(config.eta); config.user_slots()],
            },
            fading: FadingState {
                scatter: vec![None; len],
            },
            population_rng: rng::stream(seed, rng::worker_stream(rng::STREAM_POPULATION, worker)),
            channel_rng: rng::stream(seed, rng::worker_stream(rng::STREAM_CHANNEL, worker)),
            config,
            dynamics,
            physics,
            mode,
            population,
            events: Vec::new(),
        };
        env.reset()?;
        Ok(env)
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn dynamics(&self) -> &DynamicsConfig {
        &self.dynamics
    }

    pub fn physics(&self) -> &Physics<T> {
        &self.physics
    }

    pub fn state(&self) -> &GlobalState<T> {
        &self.state
    }

    pub fn population(&self) -> &Population {
        &self.population
    }

    /// Draws a new population and channel; `t = 0`.
    pub fn reset(&mut self) -> Result<&GlobalState<T>> {
        let c = &self.config;
        self.population = match self.mode {
            PopulationMode::Training => sample_training_population(
                &mut self.population_rng,
                c.n_bs(),
                c.k_max,
                c.area,
                c.eta,
                &self.dynamics,
            ),
            PopulationMode::Stationary => sample_stationary_population(
                &mut self.population_rng,
                c.n_bs(),
                c.k_max,
                c.area,
                c.eta,
                &self.dynamics,
            ),
        };
        self.fading.scatter.fill(None);
        self.events.clear();
        self.refresh(0)?;
        Ok(&self.state)
    }

    /// Replaces the population and redraws the channel at `t = 0`.
    pub fn set_population(&mut self, population: Population) -> Result<&GlobalState<T>> {
        assert_eq!(population.users.len(), self.config.user_slots());
        self.population = population;
        self.fading.scatter.fill(None);
        self.refresh(0)?;
        Ok(&self.state)
    }

    fn refresh(&mut self, step: usize) -> Result<()> {
        let channel = sample_channel(
            &self.config,
            &self.population,
            &mut self.fading,
            &mut self.channel_rng,
        )?;
        self.state = GlobalState {
            step,
            channel,
            active: self.population.users.iter().map(|u| u.active).collect(),
            presence: presence_metadata(&self.population),
            eta: self.population.users.iter().map(|u| T::lit(u.eta)).collect(),
        };
        Ok(())
    }

    /// Evaluates a joint action on the current state without advancing.
    pub fn evaluate(&self, joint: &JointAction) -> Result<StepOutcome<T>> {
        self.physics.evaluate(
            &self.state.channel,
            &self.state.active,
            &self.state.eta,
            joint,
        )
    }

    /// Evaluates the joint action, then advances users by one frame and draws
    /// the next channel.
    pub fn step(&mut self, joint: &JointAction) -> Result<StepOutcome<T>> {
        let outcome = self.evaluate(joint)?;
        let ev = advance(
            &mut self.population,
            self.dynamics.frame,
            &mut self.population_rng,
            &self.dynamics,
        )?;
        self.events.extend(ev);
        self.refresh(self.state.step + 1)?;
        Ok(outcome)
    }

    pub fn observe(&self, n: usize, m: usize, prior: &[AgentAction]) -> Observation<T> {
        observation::observe(&self.physics, &self.state, &self.config.scaling, n, m, prior)
    }

    pub fn observe_bs(&self, n: usize) -> Observation<T> {
        observation::observe_bs(&self.physics, &self.state, &self.config.scaling, n)
    }

    pub fn state_features(&self) -> Vec<T> {
        observation::state_features(&self.physics, &self.state, &self.config.scaling)
    }

    /// Arrival / departure events since the last call.
    pub fn drain_events(&mut self) -> Vec<PopulationEvent> {
        std::mem::take(&mut self.events)
    }
}
