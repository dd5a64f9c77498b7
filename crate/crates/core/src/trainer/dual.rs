//! Lagrange multipliers for the per-user QoS constraints.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One multiplier per user slot, shared by every agent group.
#[derive(Clone, Debug, PartialEq)]
pub struct Multipliers<T> {
    pub lambda: Vec<T>,
    pub lr: f64,
    pub cap: f64,
}

impl<T: Scalar> Multipliers<T> {
    pub fn new(slots: usize, lr: f64, cap: f64) -> Self {
        Self {
            lambda: vec![T::zero(); slots],
            lr,
            cap,
        }
    }

    pub fn mean(&self) -> T {
        if self.lambda.is_empty() {
            return T::zero();
        }
        self.lambda.iter().copied().sum::<T>() / T::lit(self.lambda.len() as f64)
    }

    pub fn max(&self) -> T {
        self.lambda.iter().copied().fold(T::zero(), T::max)
    }

    /// `sum_k lambda_k (1 - gamma) c_k`.
    pub fn penalty(&self, costs: &[T], gamma: f64) -> T {
        let w = T::lit(1.0 - gamma);
        self.lambda
            .iter()
            .zip(costs)
            .map(|(&l, &c)| l * w * c)
            .sum()
    }

    /// Projected subgradient ascent: `lambda <- clip(lambda + lr * mean_cost, 0, cap)`.
    pub fn update(&mut self, mean_cost: &[T]) -> Result<()> {
        if mean_cost.len() != self.lambda.len() {
            return Err(Error::Shape {
                context: "dual update",
                expected: self.lambda.len(),
                got: mean_cost.len(),
            });
        }
        let (lr, cap) = (T::lit(self.lr), T::lit(self.cap));
        for (l, &c) in self.lambda.iter_mut().zip(mean_cost) {
            if !c.is_finite() {
                return Err(Error::NonFinite("mean cost in dual update".into()));
            }
            *l = (*l + lr * c).max(T::zero()).min(cap);
        }
        Ok(())
    }
}

/// `r_hat = r - sum_k lambda_k (1 - gamma) c_k`.
pub fn shape_reward<T: Scalar>(reward: T, multipliers: &Multipliers<T>, costs: &[T], gamma: f64) -> T {
    reward - multipliers.penalty(costs, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_step_example() {
        let mut m = Multipliers::<f64>::new(1, 1e-3, 100.0);
        m.lambda[0] = 0.5;
        m.update(&[100.0]).unwrap();
        assert!((m.lambda[0] - 0.6).abs() < 1e-15);
        m.update(&[0.0]).unwrap();
        assert!((m.lambda[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn accumulates_to_cap() {
        let mut m = Multipliers::<f64>::new(2, 0.1, 5.0);
        m.lambda[1] = 1.0;
        for t in 1..=100 {
            m.update(&[2.0, 2.0]).unwrap();
            let closed = (0.2 * t as f64).min(5.0);
            assert!((m.lambda[0] - closed).abs() < 1e-12);
            assert!((m.lambda[1] - (1.0 + 0.2 * t as f64).min(5.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn shaping_arithmetic() {
        let mut m = Multipliers::<f64>::new(3, 1e-3, 100.0);
        m.lambda = vec![0.5, 2.0, 0.0];
        let r = shape_reward(3.0, &m, &[1.0, 0.25, 7.0], 0.9);
        assert!((r - (3.0 - 0.5 * 0.1 * 1.0 - 2.0 * 0.1 * 0.25)).abs() < 1e-15);
        m.lambda = vec![0.0; 3];
        assert_eq!(shape_reward(3.0, &m, &[1.0, 0.25, 7.0], 0.9), 3.0);
    }
}
