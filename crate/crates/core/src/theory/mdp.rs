//! Finite discounted MDPs small enough to solve exactly, used to check that a
//! discounted sum equals the expectation under the normalized discounted
//! state-occupancy measure.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TinyMdp {
    pub states: usize,
    pub actions: usize,
    /// `P[s][a][s']`, flattened.
    pub transition: Vec<f64>,
    pub gamma: f64,
    /// Initial distribution.
    pub mu: Vec<f64>,
}

fn is_distribution(row: &[f64]) -> bool {
    row.iter().all(|&p| p >= 0.0) && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-12
}

fn random_distribution<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

impl TinyMdp {
    pub fn new(states: usize, actions: usize, transition: Vec<f64>, gamma: f64, mu: Vec<f64>) -> Result<Self> {
        if states == 0 || actions == 0 {
            return Err(Error::Domain("an MDP needs at least one state and action".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Domain(format!(
                "discount must lie in [0, 1) for a finite occupancy measure, got {gamma}"
            )));
        }
        if transition.len() != states * actions * states {
            return Err(Error::Shape {
                context: "transition kernel",
                expected: states * actions * states,
                got: transition.len(),
            });
        }
        if let Some(bad) = transition.chunks(states).position(|row| !is_distribution(row)) {
            return Err(Error::Domain(format!(
                "transition row (s, a) = ({}, {}) is not a distribution",
                bad / actions,
                bad % actions
            )));
        }
        if mu.len() != states || !is_distribution(&mu) {
            return Err(Error::Domain("initial distribution is invalid".into()));
        }
        Ok(Self {
            states,
            actions,
            transition,
            gamma,
            mu,
        })
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, states: usize, actions: usize, gamma: f64) -> Result<Self> {
        let transition = (0..states * actions)
            .flat_map(|_| random_distribution(rng, states))
            .collect();
        let mu = random_distribution(rng, states);
        Self::new(states, actions, transition, gamma, mu)
    }

    /// Random stochastic policy `pi[s][a]`.
    pub fn random_policy<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.states)
            .flat_map(|_| random_distribution(rng, self.actions))
            .collect()
    }

    fn check_policy(&self, policy: &[f64]) -> Result<()> {
        if policy.len() != self.states * self.actions {
            return Err(Error::Shape {
                context: "policy table",
                expected: self.states * self.actions,
                got: policy.len(),
            });
        }
        if policy.chunks(self.actions).any(|row| !is_distribution(row)) {
            return Err(Error::Domain("policy rows must be distributions".into()));
        }
        Ok(())
    }

    /// `I - gamma P_pi`.
    fn resolvent_system(&self, policy: &[f64]) -> DMatrix<f64> {
        let s = self.states;
        DMatrix::from_fn(s, s, |i, j| {
            let p: f64 = (0..self.actions)
                .map(|a| policy[i * self.actions + a] * self.transition[(i * self.actions + a) * s + j])
                .sum();
            if i == j { 1.0 - self.gamma * p } else { -self.gamma * p }
        })
    }

    fn solve(m: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
        m.lu()
            .solve(&b)
            .ok_or_else(|| Error::Domain("singular linear system".into()))
    }

    /// `E[sum_t gamma^t f(s_t, a_t)]` from `s_0 ~ mu`, by solving `(I - gamma P_pi) v = f_pi`.
    pub fn discounted_sum(&self, policy: &[f64], f: &[f64]) -> Result<f64> {
        self.check_policy(policy)?;
        let f_pi = DVector::from_fn(self.states, |s, _| {
            (0..self.actions).map(|a| policy[s * self.actions + a] * f[s * self.actions + a]).sum()
        });
        let v = Self::solve(self.resolvent_system(policy), f_pi)?;
        Ok(self.mu.iter().zip(v.iter()).map(|(m, v)| m * v).sum())
    }

    /// `d = (1 - gamma) mu^T (I - gamma P_pi)^{-1}`, via the transposed system.
    pub fn occupancy(&self, policy: &[f64]) -> Result<Vec<f64>> {
        self.check_policy(policy)?;
        let mu = DVector::from_column_slice(&self.mu);
        let x = Self::solve(self.resolvent_system(policy).transpose(), mu)?;
        Ok(x.iter().map(|v| (1.0 - self.gamma) * v).collect())
    }

    /// Both sides of the occupancy identity:
    /// `E[sum_t gamma^t f] = E_{s ~ d, a ~ pi}[f] / (1 - gamma)`.
    pub fn occupancy_identity(&self, policy: &[f64], f: &[f64]) -> Result<(f64, f64)> {
        if f.len() != self.states * self.actions {
            return Err(Error::Shape {
                context: "reward table",
                expected: self.states * self.actions,
                got: f.len(),
            });
        }
        let lhs = self.discounted_sum(policy, f)?;
        let d = self.occupancy(policy)?;
        let expectation: f64 = (0..self.states)
            .map(|s| {
                d[s] * (0..self.actions)
                    .map(|a| policy[s * self.actions + a] * f[s * self.actions + a])
                    .sum::<f64>()
            })
            .sum();
        Ok((lhs, expectation / (1.0 - self.gamma)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn single_state_geometric_series() {
        let mdp = TinyMdp::new(1, 1, vec![1.0], 0.9, vec![1.0]).unwrap();
        let (lhs, rhs) = mdp.occupancy_identity(&[1.0], &[1.0]).unwrap();
        assert!((lhs - 10.0).abs() < 1e-12);
        assert!((rhs - 10.0).abs() < 1e-12);
    }

    #[test]
    fn zero_reward_gives_zero() {
        let mut r = rng::stream(1, 0);
        let mdp = TinyMdp::random(&mut r, 4, 2, 0.9).unwrap();
        let pi = mdp.random_policy(&mut r);
        assert_eq!(mdp.occupancy_identity(&pi, &[0.0; 8]).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn occupancy_is_a_distribution() {
        let mut r = rng::stream(2, 0);
        let mdp = TinyMdp::random(&mut r, 5, 3, 0.95).unwrap();
        let d = mdp.occupancy(&mdp.random_policy(&mut r)).unwrap();
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(d.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn undiscounted_is_rejected() {
        assert!(TinyMdp::new(1, 1, vec![1.0], 1.0, vec![1.0]).is_err());
    }

    #[test]
    fn bad_rows_rejected() {
        assert!(TinyMdp::new(2, 1, vec![0.5, 0.4, 0.0, 1.0], 0.5, vec![1.0, 0.0]).is_err());
    }
}
