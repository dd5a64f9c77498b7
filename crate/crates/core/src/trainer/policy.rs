//! Shared actor, critic inputs and joint-action selection for every method.

use rand::Rng;

use crate::baselines::split_bs_action;
use crate::env::observation::{self, ObservationLayout};
use crate::env::{AgentAction, Environment, JointAction, Physics, StepOutcome};
use crate::error::{Error, Result};
use crate::nn::{Init, MaskedCategorical, Mlp};
use crate::scalar::Scalar;
use crate::trainer::{Method, TrainerConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    Sample,
    /// Per-head argmax.
    Greedy,
}

/// One agent's choice within a step.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision<T> {
    pub bs: usize,
    /// SRB index for decomposed agents.
    pub srb: Option<usize>,
    pub features: Vec<T>,
    pub mask: Vec<bool>,
    /// Class per head.
    pub actions: Vec<usize>,
    /// Sum of the per-head log-probabilities.
    pub log_prob: T,
}

/// Actor parameters shared by all agents of a method.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy<T> {
    pub method: Method,
    pub actor: Mlp<T>,
    classes: usize,
}

pub fn heads<T>(method: Method, phys: &Physics<T>) -> usize {
    match method {
        Method::Decomposed => phys.srb_size(),
        Method::MonolithicMappo | Method::Ippo => phys.subchannels,
    }
}

pub fn observation_len<T>(method: Method, phys: &Physics<T>) -> usize {
    match method {
        Method::Decomposed => ObservationLayout::srb_agent(phys).len(),
        Method::MonolithicMappo | Method::Ippo => ObservationLayout::bs_agent(phys).len(),
    }
}

/// Value streams per step: one per group, one global, or one per BS.
pub fn streams<T>(method: Method, phys: &Physics<T>) -> usize {
    match method {
        Method::Decomposed => phys.srbs,
        Method::MonolithicMappo => 1,
        Method::Ippo => phys.n_bs,
    }
}

/// Stream whose advantage trains agent `(n, m)` (`m` ignored for per-BS agents).
pub fn stream_of(method: Method, n: usize, m: usize) -> usize {
    match method {
        Method::Decomposed => m,
        Method::MonolithicMappo => 0,
        Method::Ippo => n,
    }
}

pub fn critic_input_len<T>(method: Method, phys: &Physics<T>) -> usize {
    let state = observation::state_feature_len(phys);
    match method {
        Method::Decomposed => state + phys.srbs,
        Method::MonolithicMappo => state,
        Method::Ippo => ObservationLayout::bs_agent(phys).len(),
    }
}

/// Critic input per stream for the current state.
pub fn critic_inputs<T: Scalar>(method: Method, env: &Environment<T>) -> Vec<Vec<T>> {
    let phys = env.physics();
    match method {
        Method::Decomposed => {
            let state = env.state_features();
            (0..phys.srbs)
                .map(|m| {
                    let mut x = Vec::with_capacity(state.len() + phys.srbs);
                    x.extend_from_slice(&state);
                    x.extend((0..phys.srbs).map(|i| if i == m { T::one() } else { T::zero() }));
                    x
                })
                .collect()
        }
        Method::MonolithicMappo => vec![env.state_features()],
        Method::Ippo => (0..phys.n_bs).map(|n| env.observe_bs(n).features).collect(),
    }
}

/// Unshaped reward per stream, bit/s.
pub fn stream_rewards<T: Scalar>(method: Method, outcome: &StepOutcome<T>, n_bs: usize) -> Vec<T> {
    match method {
        Method::Decomposed => outcome.group_rewards.clone(),
        Method::MonolithicMappo => vec![outcome.reward],
        Method::Ippo => vec![outcome.reward; n_bs],
    }
}

pub fn new_critic<T: Scalar>(
    method: Method,
    phys: &Physics<T>,
    cfg: &TrainerConfig,
    seed: u64,
) -> Result<Mlp<T>> {
    let mut widths = vec![critic_input_len(method, phys)];
    widths.extend(&cfg.hidden);
    widths.push(1);
    Mlp::new(
        &widths,
        cfg.activation,
        Init::Orthogonal {
            seed,
            hidden_gain: 1.0,
            output_gain: 1.0,
        },
    )
}

impl<T: Scalar> Policy<T> {
    pub fn new(method: Method, phys: &Physics<T>, cfg: &TrainerConfig, seed: u64) -> Result<Self> {
        let classes = phys.k_max + 1;
        let mut widths = vec![observation_len(method, phys)];
        widths.extend(&cfg.hidden);
        widths.push(heads(method, phys) * classes);
        let actor = Mlp::new(
            &widths,
            cfg.activation,
            Init::Orthogonal {
                seed,
                hidden_gain: 1.0,
                output_gain: 0.01,
            },
        )?;
        Ok(Self {
            method,
            actor,
            classes,
        })
    }

    /// Wraps existing actor parameters, checking they fit `phys`.
    pub fn from_actor(method: Method, phys: &Physics<T>, actor: Mlp<T>) -> Result<Self> {
        let classes = phys.k_max + 1;
        if actor.input_len() != observation_len(method, phys)
            || actor.output_len() != heads(method, phys) * classes
        {
            return Err(Error::Config(format!(
                "actor {:?} does not fit a {method} agent on this system",
                actor.widths()
            )));
        }
        Ok(Self {
            method,
            actor,
            classes,
        })
    }

    /// Actor with an arbitrary input layout, e.g. for synthetic tasks.
    pub fn with_classes(method: Method, actor: Mlp<T>, classes: usize) -> Result<Self> {
        if classes == 0 || actor.output_len() % classes != 0 {
            return Err(Error::Config(format!(
                "{} outputs do not split into heads of {classes} classes",
                actor.output_len()
            )));
        }
        Ok(Self {
            method,
            actor,
            classes,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn heads(&self) -> usize {
        self.actor.output_len() / self.classes
    }

    /// Per-head distributions from a logit vector.
    pub fn distributions(&self, logits: &[T], mask: &[bool]) -> Result<Vec<MaskedCategorical<T>>> {
        logits
            .chunks(self.classes)
            .map(|z| MaskedCategorical::new(z, mask))
            .collect()
    }

    pub fn act<R: Rng + ?Sized>(
        &self,
        features: &[T],
        mask: &[bool],
        selection: Selection,
        rng: &mut R,
    ) -> Result<(Vec<usize>, T)> {
        let logits = self.actor.predict(features)?;
        let dists = self.distributions(&logits, mask)?;
        let mut actions = Vec::with_capacity(dists.len());
        let mut log_prob = T::zero();
        for d in &dists {
            let a = match selection {
                Selection::Sample => d.sample(rng),
                Selection::Greedy => d.argmax(),
            };
            log_prob = log_prob + d.log_prob(a)?;
            actions.push(a);
        }
        Ok((actions, log_prob))
    }

    /// Joint action for the current state. Decomposed agents act group by
    /// group; agent `(n, m)` sees only BS `n`'s earlier choices this step.
    pub fn decide<R: Rng + ?Sized>(
        &self,
        env: &Environment<T>,
        selection: Selection,
        rng: &mut R,
    ) -> Result<(JointAction, Vec<Decision<T>>)> {
        let phys = env.physics();
        let (n_bs, srbs) = (phys.n_bs, phys.srbs);
        let mut joint = JointAction::idle(n_bs, srbs, phys.srb_size());
        let mut decisions = Vec::new();
        match self.method {
            Method::Decomposed => {
                let mut prior: Vec<Vec<AgentAction>> = vec![Vec::with_capacity(srbs); n_bs];
                for m in 0..srbs {
                    for n in 0..n_bs {
                        let obs = env.observe(n, m, &prior[n]);
                        let (actions, log_prob) = self.act(&obs.features, &obs.mask, selection, rng)?;
                        let a = AgentAction::new(actions.clone());
                        prior[n].push(a.clone());
                        *joint.agent_mut(n, m, srbs) = a;
                        decisions.push(Decision {
                            bs: n,
                            srb: Some(m),
                            features: obs.features,
                            mask: obs.mask,
                            actions,
                            log_prob,
                        });
                    }
                }
            }
            Method::MonolithicMappo | Method::Ippo => {
                for n in 0..n_bs {
                    let obs = env.observe_bs(n);
                    let (actions, log_prob) = self.act(&obs.features, &obs.mask, selection, rng)?;
                    for (m, a) in split_bs_action(&phys.partition, n, &actions).into_iter().enumerate() {
                        *joint.agent_mut(n, m, srbs) = a;
                    }
                    decisions.push(Decision {
                        bs: n,
                        srb: None,
                        features: obs.features,
                        mask: obs.mask,
                        actions,
                        log_prob,
                    });
                }
            }
        }
        Ok((joint, decisions))
    }
}
