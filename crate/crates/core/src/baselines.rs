//! Comparison methods: per-BS agents over the undecomposed action (monolithic
//! MAPPO and IPPO, trained by [`crate::trainer`]) and two non-learning
//! heuristics that serve as sanity floors.

use rand::Rng;

use crate::env::{AgentAction, Environment, JointAction, StepOutcome};
use crate::error::{Error, Result};
use crate::partition::SrbPartition;
use crate::scalar::Scalar;
use crate::trainer::Method;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineKind {
    MonolithicMappo,
    Ippo,
    /// Every subchannel activated, active users assigned round-robin.
    FullActivationUniform,
    /// Each subchannel independently uniform over the legal classes.
    RandomAssignment,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [
        BaselineKind::MonolithicMappo,
        BaselineKind::Ippo,
        BaselineKind::FullActivationUniform,
        BaselineKind::RandomAssignment,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::MonolithicMappo => "monolithic-mappo",
            BaselineKind::Ippo => "ippo",
            BaselineKind::FullActivationUniform => "full-activation-uniform",
            BaselineKind::RandomAssignment => "random-assignment",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown baseline `{s}`")))
    }

    /// The learning method behind a trained baseline; `None` for heuristics.
    pub fn method(self) -> Option<Method> {
        match self {
            BaselineKind::MonolithicMappo => Some(Method::MonolithicMappo),
            BaselineKind::Ippo => Some(Method::Ippo),
            _ => None,
        }
    }
}

/// Splits a whole-BS assignment (indexed by subchannel) into per-SRB actions.
pub fn split_bs_action(partition: &SrbPartition, n: usize, assignment: &[usize]) -> Vec<AgentAction> {
    (0..partition.srbs())
        .map(|m| AgentAction::new(partition.block(n, m).iter().map(|&f| assignment[f]).collect()))
        .collect()
}

/// Inverse of [`split_bs_action`].
pub fn merge_bs_action(partition: &SrbPartition, n: usize, srb_actions: &[AgentAction]) -> Vec<usize> {
    let mut out = vec![0; partition.subchannels()];
    for (m, a) in srb_actions.iter().enumerate() {
        for (i, &f) in partition.block(n, m).iter().enumerate() {
            out[f] = a.assignment[i];
        }
    }
    out
}

/// Joint action from one whole-BS assignment per BS.
pub fn joint_from_bs_actions(partition: &SrbPartition, bs_actions: &[Vec<usize>]) -> Result<JointAction> {
    if bs_actions.len() != partition.n_bs() {
        return Err(Error::Contract(format!(
            "{} BS actions for {} base stations",
            bs_actions.len(),
            partition.n_bs()
        )));
    }
    let mut agents = Vec::with_capacity(partition.n_bs() * partition.srbs());
    for (n, a) in bs_actions.iter().enumerate() {
        if a.len() != partition.subchannels() {
            return Err(Error::Contract(format!(
                "BS {n} action covers {} subchannels, expected {}",
                a.len(),
                partition.subchannels()
            )));
        }
        agents.extend(split_bs_action(partition, n, a));
    }
    Ok(JointAction { agents })
}

/// Evaluates per-BS actions through the same physics the decomposed path uses.
pub fn evaluate_monolithic<T: Scalar>(
    env: &Environment<T>,
    bs_actions: &[Vec<usize>],
) -> Result<StepOutcome<T>> {
    env.evaluate(&joint_from_bs_actions(&env.physics().partition, bs_actions)?)
}

/// Assignment for `len` subchannels of one BS. `mask[0]` is the idle class,
/// `mask[k + 1]` tells whether local user `k` is active. `offset` continues
/// the round-robin across SRBs.
pub fn heuristic_assignment<R: Rng + ?Sized>(
    kind: BaselineKind,
    mask: &[bool],
    len: usize,
    offset: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let users: Vec<usize> = (1..mask.len()).filter(|&c| mask[c]).collect();
    match kind {
        BaselineKind::FullActivationUniform => Ok((0..len)
            .map(|i| if users.is_empty() { 0 } else { users[(i + offset) % users.len()] })
            .collect()),
        BaselineKind::RandomAssignment => Ok((0..len)
            .map(|_| {
                let pick = rng.random_range(0..=users.len());
                if pick == 0 { 0 } else { users[pick - 1] }
            })
            .collect()),
        other => Err(Error::Contract(format!("{} is a learned baseline", other.name()))),
    }
}

/// Heuristic joint action for the current environment state.
pub fn heuristic_joint<T: Scalar, R: Rng + ?Sized>(
    kind: BaselineKind,
    env: &Environment<T>,
    rng: &mut R,
) -> Result<JointAction> {
    let phys = env.physics();
    let bs_actions = (0..phys.n_bs)
        .map(|n| {
            let mask = crate::env::observation::action_mask(phys, env.state(), n);
            heuristic_assignment(kind, &mask, phys.subchannels, 0, rng)
        })
        .collect::<Result<Vec<_>>>()?;
    joint_from_bs_actions(&phys.partition, &bs_actions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn full_activation_single_user() {
        let mut r = rng::stream(0, 0);
        let a = heuristic_assignment(
            BaselineKind::FullActivationUniform,
            &[true, true, false, false],
            4,
            0,
            &mut r,
        )
        .unwrap();
        assert_eq!(a, vec![1, 1, 1, 1]);
        let a = heuristic_assignment(
            BaselineKind::FullActivationUniform,
            &[true, true, false, true],
            4,
            0,
            &mut r,
        )
        .unwrap();
        assert_eq!(a, vec![1, 3, 1, 3]);
    }

    #[test]
    fn no_users_means_idle() {
        let mut r = rng::stream(0, 0);
        for kind in [BaselineKind::FullActivationUniform, BaselineKind::RandomAssignment] {
            let a = heuristic_assignment(kind, &[true, false, false], 5, 0, &mut r).unwrap();
            assert_eq!(a, vec![0; 5]);
        }
    }

    #[test]
    fn random_assignment_stays_legal() {
        let mut r = rng::stream(1, 0);
        let mask = [true, false, true, false, true];
        for _ in 0..100 {
            let a = heuristic_assignment(BaselineKind::RandomAssignment, &mask, 8, 0, &mut r).unwrap();
            assert!(a.iter().all(|&c| mask[c]));
        }
    }

    #[test]
    fn split_and_merge_are_inverse() {
        let p = SrbPartition::new(2, 6, 3, crate::system::PartitionStyle::Shifted).unwrap();
        let a = vec![1, 0, 2, 2, 0, 1];
        let parts = split_bs_action(&p, 1, &a);
        assert_eq!(parts.len(), 3);
        assert_eq!(merge_bs_action(&p, 1, &parts), a);
    }

    #[test]
    fn names_round_trip() {
        for k in BaselineKind::ALL {
            assert_eq!(BaselineKind::parse(k.name()).unwrap(), k);
        }
    }
}
