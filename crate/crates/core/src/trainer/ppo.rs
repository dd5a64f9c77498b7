//! Clipped-surrogate policy update and critic regression.

use rand::Rng;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::nn::{Adam, Mlp, clip_grad_norm};
use crate::scalar::Scalar;
use crate::trainer::TrainerConfig;
use crate::trainer::gae::normalize;
use crate::trainer::policy::Policy;
use crate::trainer::rollout::{AgentSample, ValueSample};

/// Importance ratios may deviate from 1 by at most this much before the first
/// gradient step.
pub const RATIO_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    /// `max |ratio - 1|` over the buffer before any update.
    pub initial_ratio_error: f64,
    pub minibatches: usize,
    /// Minibatches dropped because of a non-finite loss or gradient.
    pub skipped: usize,
}

/// Loss value and parameter gradient of one policy minibatch.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyLoss<T> {
    pub loss: T,
    pub grads: Vec<T>,
    /// Mean per-sample entropy (summed over heads).
    pub entropy: T,
    pub approx_kl: T,
    pub clip_fraction: T,
}

fn sample_log_prob<T: Scalar>(policy: &Policy<T>, logits: &[T], s: &AgentSample<T>) -> Result<T> {
    let dists = policy.distributions(logits, &s.mask)?;
    dists
        .iter()
        .zip(&s.actions)
        .try_fold(T::zero(), |acc, (d, &a)| Ok(acc + d.log_prob(a)?))
}

/// `-mean(min(ratio A, clip(ratio) A)) - c_ent * mean(entropy)` and its gradient.
pub fn policy_loss<T: Scalar>(
    policy: &Policy<T>,
    batch: &[&AgentSample<T>],
    advantages: &[T],
    cfg: &TrainerConfig,
) -> Result<PolicyLoss<T>> {
    let b = T::lit(batch.len() as f64);
    let eps = T::lit(cfg.clip);
    let c_ent = T::lit(cfg.entropy_coef);
    let (lo, hi) = (T::one() - eps, T::one() + eps);
    let mut grads = vec![T::zero(); policy.actor.param_count()];
    let (mut loss, mut entropy, mut kl, mut clipped_n) = (T::zero(), T::zero(), T::zero(), T::zero());
    for (s, &adv) in batch.iter().zip(advantages) {
        let cache = policy.actor.forward(&s.features)?;
        let dists = policy.distributions(cache.output(), &s.mask)?;
        let mut logp = T::zero();
        let mut ent = T::zero();
        for (d, &a) in dists.iter().zip(&s.actions) {
            logp = logp + d.log_prob(a)?;
            ent = ent + d.entropy();
        }
        let ratio = (logp - s.log_prob).exp();
        let unclipped = ratio * adv;
        let clipped = ratio.max(lo).min(hi) * adv;
        loss = loss - unclipped.min(clipped) / b - c_ent * ent / b;
        entropy = entropy + ent / b;
        kl = kl + (s.log_prob - logp) / b;
        if (ratio - T::one()).abs() > eps {
            clipped_n = clipped_n + T::one() / b;
        }
        // the min picks the unclipped branch unless clipping is binding
        let coef = if unclipped <= clipped { unclipped } else { T::zero() };
        let mut dlogits = Vec::with_capacity(policy.actor.output_len());
        for (d, &a) in dists.iter().zip(&s.actions) {
            let glp = d.grad_log_prob(a)?;
            let gent = d.grad_entropy();
            dlogits.extend(glp.iter().zip(&gent).map(|(&g, &h)| -(coef * g + c_ent * h) / b));
        }
        policy.actor.backward(&cache, &dlogits, &mut grads)?;
    }
    Ok(PolicyLoss {
        loss,
        grads,
        entropy,
        approx_kl: kl,
        clip_fraction: clipped_n,
    })
}

/// `0.5 * mean((V - target)^2)` and its gradient.
pub fn value_loss<T: Scalar>(critic: &Mlp<T>, batch: &[&ValueSample<T>]) -> Result<(T, Vec<T>)> {
    let b = T::lit(batch.len() as f64);
    let mut grads = vec![T::zero(); critic.param_count()];
    let mut loss = T::zero();
    for s in batch {
        let cache = critic.forward(&s.input)?;
        let err = cache.output()[0] - s.target;
        loss = loss + T::lit(0.5) * err * err / b;
        critic.backward(&cache, &[err / b], &mut grads)?;
    }
    Ok((loss, grads))
}

/// `max |pi_new / pi_old - 1|` over `samples`.
pub fn ratio_error<T: Scalar>(policy: &Policy<T>, samples: &[AgentSample<T>]) -> Result<f64> {
    let mut worst = 0.0f64;
    for s in samples {
        let logits = policy.actor.predict(&s.features)?;
        let lp = sample_log_prob(policy, &logits, s)?;
        worst = worst.max(((lp - s.log_prob).exp() - T::one()).abs().as_f64());
    }
    Ok(worst)
}

fn all_finite<T: Scalar>(loss: T, grads: &[T]) -> bool {
    loss.is_finite() && grads.iter().all(|g| g.is_finite())
}

/// `epochs` passes of shuffled minibatches over the actor samples, then over
/// the critic samples. Advantages are normalized per minibatch.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update<T: Scalar, R: Rng + ?Sized>(
    policy: &mut Policy<T>,
    critic: &mut Mlp<T>,
    actor_opt: &mut Adam<T>,
    critic_opt: &mut Adam<T>,
    agents: &[AgentSample<T>],
    values: &[ValueSample<T>],
    cfg: &TrainerConfig,
    rng: &mut R,
) -> Result<PpoStats> {
    let mut stats = PpoStats {
        initial_ratio_error: ratio_error(policy, agents)?,
        ..Default::default()
    };
    if stats.initial_ratio_error > RATIO_TOLERANCE {
        return Err(Error::Contract(format!(
            "importance ratios start at {} from 1; stored log-probs are stale",
            stats.initial_ratio_error
        )));
    }
    let mut order: Vec<usize> = (0..agents.len()).collect();
    let mut value_order: Vec<usize> = (0..values.len()).collect();
    let (mut pl_n, mut vl_n) = (0usize, 0usize);
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch) {
            stats.minibatches += 1;
            let batch: Vec<&AgentSample<T>> = chunk.iter().map(|&i| &agents[i]).collect();
            let mut adv: Vec<T> = batch.iter().map(|s| s.advantage).collect();
            normalize(&mut adv);
            let mut pl = policy_loss(policy, &batch, &adv, cfg)?;
            if !all_finite(pl.loss, &pl.grads) {
                stats.skipped += 1;
                continue;
            }
            clip_grad_norm(&mut pl.grads, cfg.max_grad_norm);
            match actor_opt.step(policy.actor.params_mut(), &pl.grads) {
                Err(Error::NonFinite(_)) => {
                    stats.skipped += 1;
                    continue;
                }
                other => other?,
            }
            stats.policy_loss += pl.loss.as_f64();
            stats.entropy += pl.entropy.as_f64();
            stats.approx_kl += pl.approx_kl.as_f64();
            stats.clip_fraction += pl.clip_fraction.as_f64();
            pl_n += 1;
        }
        value_order.shuffle(rng);
        for chunk in value_order.chunks(cfg.minibatch) {
            stats.minibatches += 1;
            let batch: Vec<&ValueSample<T>> = chunk.iter().map(|&i| &values[i]).collect();
            let (loss, mut grads) = value_loss(critic, &batch)?;
            if !all_finite(loss, &grads) {
                stats.skipped += 1;
                continue;
            }
            clip_grad_norm(&mut grads, cfg.max_grad_norm);
            match critic_opt.step(critic.params_mut(), &grads) {
                Err(Error::NonFinite(_)) => {
                    stats.skipped += 1;
                    continue;
                }
                other => other?,
            }
            stats.value_loss += loss.as_f64();
            vl_n += 1;
        }
    }
    let pn = pl_n.max(1) as f64;
    stats.policy_loss /= pn;
    stats.entropy /= pn;
    stats.approx_kl /= pn;
    stats.clip_fraction /= pn;
    stats.value_loss /= vl_n.max(1) as f64;
    Ok(stats)
}
