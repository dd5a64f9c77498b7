//! Rate, interference and reward evaluation for a joint SRB assignment.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::partition::SrbPartition;
use crate::scalar::Scalar;
use crate::system::SystemConfig;

/// Per-subchannel assignment of one SRB agent: 0 is unactivated, `j >= 1`
/// serves user slot `j - 1` of the agent's BS.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct AgentAction {
    pub assignment: Vec<usize>,
}

impl AgentAction {
    pub fn new(assignment: Vec<usize>) -> Self {
        Self { assignment }
    }

    pub fn idle(len: usize) -> Self {
        Self {
            assignment: vec![0; len],
        }
    }

    pub fn active_subchannels(&self) -> usize {
        self.assignment.iter().filter(|&&c| c != 0).count()
    }
}

/// Actions of every agent, indexed `n * M + m`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct JointAction {
    pub agents: Vec<AgentAction>,
}

impl JointAction {
    pub fn idle(n_bs: usize, srbs: usize, srb_size: usize) -> Self {
        Self {
            agents: vec![AgentAction::idle(srb_size); n_bs * srbs],
        }
    }

    pub fn agent(&self, n: usize, m: usize, srbs: usize) -> &AgentAction {
        &self.agents[n * srbs + m]
    }

    pub fn agent_mut(&mut self, n: usize, m: usize, srbs: usize) -> &mut AgentAction {
        &mut self.agents[n * srbs + m]
    }
}

/// Complex coefficients `h[l][j][f]` from BS `l` to user slot `j` on
/// subchannel `f`, their squared magnitudes, and the pathloss table `[l][j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization<T> {
    pub n_bs: usize,
    pub user_slots: usize,
    pub subchannels: usize,
    pub coefficients: Vec<Complex<T>>,
    pub gains: Vec<T>,
    pub pathloss_db: Vec<T>,
}

impl<T: Scalar> ChannelRealization<T> {
    pub fn zeros(n_bs: usize, user_slots: usize, subchannels: usize) -> Self {
        let len = n_bs * user_slots * subchannels;
        Self {
            n_bs,
            user_slots,
            subchannels,
            coefficients: vec![Complex::new(T::zero(), T::zero()); len],
            gains: vec![T::zero(); len],
            pathloss_db: vec![T::zero(); n_bs * user_slots],
        }
    }

    /// Builds a realization from squared magnitudes only (real coefficients).
    pub fn from_gains(n_bs: usize, user_slots: usize, subchannels: usize, gains: Vec<T>) -> Self {
        assert_eq!(gains.len(), n_bs * user_slots * subchannels);
        let coefficients = gains.iter().map(|g| Complex::new(g.sqrt(), T::zero())).collect();
        let pathloss_db = (0..n_bs * user_slots)
            .map(|i| {
                let row = &gains[i * subchannels..(i + 1) * subchannels];
                let mean = row.iter().copied().sum::<T>() / T::lit(subchannels as f64);
                if mean > T::zero() {
                    -T::lit(10.0) * mean.log10()
                } else {
                    T::zero()
                }
            })
            .collect();
        Self {
            n_bs,
            user_slots,
            subchannels,
            coefficients,
            gains,
            pathloss_db,
        }
    }

    #[inline]
    pub fn index(&self, l: usize, j: usize, f: usize) -> usize {
        (l * self.user_slots + j) * self.subchannels + f
    }

    #[inline]
    pub fn gain(&self, l: usize, j: usize, f: usize) -> T {
        self.gains[self.index(l, j, f)]
    }

    pub fn set(&mut self, l: usize, j: usize, f: usize, h: Complex<T>) {
        let i = self.index(l, j, f);
        self.coefficients[i] = h;
        self.gains[i] = h.norm_sqr();
    }

    pub fn pathloss(&self, l: usize, j: usize) -> T {
        self.pathloss_db[l * self.user_slots + j]
    }
}

/// Transmit power `[n][f]` and the served local slot, if any.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerAllocation<T> {
    pub subchannels: usize,
    pub power: Vec<T>,
    pub user: Vec<Option<usize>>,
}

impl<T: Scalar> PowerAllocation<T> {
    pub fn zeros(n_bs: usize, subchannels: usize) -> Self {
        Self {
            subchannels,
            power: vec![T::zero(); n_bs * subchannels],
            user: vec![None; n_bs * subchannels],
        }
    }

    #[inline]
    pub fn at(&self, n: usize, f: usize) -> T {
        self.power[n * self.subchannels + f]
    }

    pub fn bs_total(&self, n: usize) -> T {
        self.power[n * self.subchannels..(n + 1) * self.subchannels]
            .iter()
            .copied()
            .sum()
    }
}

/// Each BS splits `p_max` evenly over its `M` SRBs, and each SRB evenly over
/// its active subchannels.
pub fn decode_power<T: Scalar>(action: &AgentAction, p_max: T, srbs: usize) -> Vec<T> {
    let active = action.active_subchannels();
    if active == 0 {
        return vec![T::zero(); action.assignment.len()];
    }
    let level = p_max / T::lit((active * srbs) as f64);
    action
        .assignment
        .iter()
        .map(|&c| if c == 0 { T::zero() } else { level })
        .collect()
}

/// Inter-BS interference at user slot `j` (served by BS `n`) on subchannel `f`.
pub fn interference<T: Scalar>(
    j: usize,
    n: usize,
    f: usize,
    powers: &PowerAllocation<T>,
    channel: &ChannelRealization<T>,
) -> T {
    (0..channel.n_bs)
        .filter(|&l| l != n)
        .map(|l| channel.gain(l, j, f) * powers.at(l, f))
        .sum()
}

/// `W log2(1 + |h|^2 p / (g + W N0))` in bit/s.
#[inline]
pub fn rate<T: Scalar>(gain: T, power: T, interference: T, bandwidth: T, noise_density: T) -> T {
    if power == T::zero() {
        return T::zero();
    }
    bandwidth * (T::one() + gain * power / (interference + bandwidth * noise_density)).log2()
}

/// Result of evaluating one joint action.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome<T> {
    pub powers: PowerAllocation<T>,
    /// bit/s on `[n][f]` for the served user (0 when unactivated).
    pub rates: Vec<T>,
    /// Interference seen by the served user on `[n][f]`, watts.
    pub interference: Vec<T>,
    /// Group rewards `r_m`.
    pub group_rewards: Vec<T>,
    /// Global reward `r`.
    pub reward: T,
    /// bit/s per user slot.
    pub user_rates: Vec<T>,
    /// Truncated QoS shortfall per user slot, bit/s.
    pub costs: Vec<T>,
    pub qos_miss: Vec<bool>,
    /// Normaliser `K` used in the rewards (active users, at least 1).
    pub active_users: usize,
}

impl<T: Scalar> StepOutcome<T> {
    pub fn throughput(&self) -> T {
        self.rates.iter().copied().sum()
    }

    pub fn qos_misses(&self) -> usize {
        self.qos_miss.iter().filter(|&&m| m).count()
    }

    /// `R_{k,n,f}` for local slot `k` of BS `n`.
    pub fn rate_of(&self, k: usize, n: usize, f: usize) -> T {
        let i = n * self.powers.subchannels + f;
        if self.powers.user[i] == Some(k) {
            self.rates[i]
        } else {
            T::zero()
        }
    }
}

/// Numeric constants of a configuration converted to the scalar type.
#[derive(Clone, Debug)]
pub struct Physics<T> {
    pub n_bs: usize,
    pub k_max: usize,
    pub subchannels: usize,
    pub srbs: usize,
    pub p_max: T,
    pub bandwidth: T,
    pub noise_density: T,
    pub partition: SrbPartition,
}

impl<T> Physics<T> {
    pub fn srb_size(&self) -> usize {
        self.subchannels / self.srbs
    }

    pub fn user_slots(&self) -> usize {
        self.n_bs * self.k_max
    }
}

impl<T: Scalar> Physics<T> {
    pub fn new(config: &SystemConfig) -> Result<Self> {
        config.validate()?;
        let partition = SrbPartition::new(
            config.n_bs(),
            config.subchannels,
            config.srbs,
            config.partition,
        )?;
        Ok(Self::with_partition(config, partition))
    }

    pub fn with_partition(config: &SystemConfig, partition: SrbPartition) -> Self {
        Self {
            n_bs: config.n_bs(),
            k_max: config.k_max,
            subchannels: config.subchannels,
            srbs: config.srbs,
            p_max: T::lit(config.p_max),
            bandwidth: T::lit(config.subchannel_bandwidth),
            noise_density: T::lit(config.channel.noise_density),
            partition,
        }
    }

    /// Checks lengths, class range and that only active users are served.
    pub fn validate(&self, joint: &JointAction, active: &[bool]) -> Result<()> {
        if joint.agents.len() != self.n_bs * self.srbs {
            return Err(Error::Contract(format!(
                "joint action has {} agents, expected {}",
                joint.agents.len(),
                self.n_bs * self.srbs
            )));
        }
        for (i, a) in joint.agents.iter().enumerate() {
            let n = i / self.srbs;
            if a.assignment.len() != self.srb_size() {
                return Err(Error::Contract(format!(
                    "agent ({n}, {}) assigns {} subchannels, SRB has {}",
                    i % self.srbs,
                    a.assignment.len(),
                    self.srb_size()
                )));
            }
            for &c in &a.assignment {
                if c > self.k_max {
                    return Err(Error::Contract(format!(
                        "agent ({n}, {}) selected class {c} > K_max",
                        i % self.srbs
                    )));
                }
                if c > 0 && !active[n * self.k_max + c - 1] {
                    return Err(Error::Contract(format!(
                        "agent ({n}, {}) selected inactive user {c}",
                        i % self.srbs
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn allocate(&self, joint: &JointAction) -> PowerAllocation<T> {
        let mut powers = PowerAllocation::zeros(self.n_bs, self.subchannels);
        for n in 0..self.n_bs {
            for m in 0..self.srbs {
                let action = joint.agent(n, m, self.srbs);
                let p = decode_power(action, self.p_max, self.srbs);
                for (i, &f) in self.partition.block(n, m).iter().enumerate() {
                    let idx = n * self.subchannels + f;
                    powers.power[idx] = p[i];
                    powers.user[idx] = action.assignment[i].checked_sub(1);
                }
            }
        }
        powers
    }

    /// Evaluates a joint action on a channel realization.
    pub fn evaluate(
        &self,
        channel: &ChannelRealization<T>,
        active: &[bool],
        eta: &[T],
        joint: &JointAction,
    ) -> Result<StepOutcome<T>> {
        self.validate(joint, active)?;
        let powers = self.allocate(joint);
        let f_total = self.subchannels;
        let mut rates = vec![T::zero(); self.n_bs * f_total];
        let mut interf = vec![T::zero(); self.n_bs * f_total];
        let mut user_rates = vec![T::zero(); self.user_slots()];
        for n in 0..self.n_bs {
            for f in 0..f_total {
                let idx = n * f_total + f;
                if let Some(k) = powers.user[idx] {
                    let j = n * self.k_max + k;
                    let g = interference(j, n, f, &powers, channel);
                    let r = rate(
                        channel.gain(n, j, f),
                        powers.power[idx],
                        g,
                        self.bandwidth,
                        self.noise_density,
                    );
                    interf[idx] = g;
                    rates[idx] = r;
                    user_rates[j] = user_rates[j] + r;
                }
            }
        }
        let active_users = active.iter().filter(|&&a| a).count().max(1);
        let norm = T::lit(active_users as f64);
        let group_rewards = (0..self.srbs)
            .map(|m| {
                (0..self.n_bs)
                    .flat_map(|n| {
                        self.partition
                            .block(n, m)
                            .iter()
                            .map(move |&f| n * f_total + f)
                    })
                    .map(|i| rates[i])
                    .sum::<T>()
                    / norm
            })
            .collect();
        let reward = rates.iter().copied().sum::<T>() / norm;
        let costs: Vec<T> = (0..self.user_slots())
            .map(|j| {
                if active[j] {
                    (eta[j] - user_rates[j]).max(T::zero())
                } else {
                    T::zero()
                }
            })
            .collect();
        let qos_miss = costs.iter().map(|&c| c > T::zero()).collect();
        Ok(StepOutcome {
            powers,
            rates,
            interference: interf,
            group_rewards,
            reward,
            user_rates,
            costs,
            qos_miss,
            active_users,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_power_examples() {
        let p = decode_power(&AgentAction::new(vec![1, 0, 2, 0]), 8.0f64, 2);
        assert_eq!(p, vec![2.0, 0.0, 2.0, 0.0]);
        let p = decode_power(&AgentAction::idle(4), 8.0f64, 2);
        assert_eq!(p, vec![0.0; 4]);
        let p = decode_power(&AgentAction::new(vec![1, 1, 2, 2]), 8.0f64, 2);
        assert_eq!(p, vec![1.0; 4]);
        assert_eq!(p.iter().sum::<f64>() * 2.0, 8.0);
    }

    #[test]
    fn power_levels_match_level_set() {
        // one, two, ..., all active on an SRB of 5 with M = 4
        for a in 1..=5 {
            let mut v = vec![0; 5];
            v[..a].fill(1);
            let p = decode_power(&AgentAction::new(v), 10.0f64, 4);
            assert_eq!(p[0], 10.0 / (a * 4) as f64);
        }
    }

    #[test]
    fn rate_examples() {
        assert_eq!(rate(1e-10f64, 0.0, 0.0, 180e3, 1e-20), 0.0);
        let r = rate(1e-10f64, 1.0, 0.0, 180e3, 10f64.powf(-20.4));
        assert!((r / 3_076_276.525_929_017 - 1.0).abs() < 1e-12, "{r}");
        let (h, p, w, n0) = (1e-10f64, 1.0, 180e3, 10f64.powf(-20.4));
        let r = rate(h, p, 1e6 * h * p, w, n0);
        assert!(r < w * (1.0 + 1e-6f64).log2() * 1.0001);
    }

    fn two_bs() -> Physics<f64> {
        let mut cfg = SystemConfig::desk();
        cfg.base_stations.truncate(2);
        cfg.subchannels = 4;
        cfg.srbs = 2;
        cfg.k_max = 2;
        Physics::new(&cfg).unwrap()
    }

    #[test]
    fn interference_examples() {
        let phys = two_bs();
        let mut ch = ChannelRealization::<f64>::zeros(2, 4, 4);
        // user slot 0 (BS 0) hears BS 1 on subchannel 1
        ch.set(1, 0, 1, Complex::new(1e-6, 0.0));
        let mut joint = JointAction::idle(2, 2, 2);
        joint.agent_mut(1, 0, 2).assignment = vec![0, 1];
        let powers = phys.allocate(&joint);
        assert_eq!(powers.at(1, 1), phys.p_max / 2.0);
        let g = interference(0, 0, 1, &powers, &ch);
        assert!((g - 1e-12 * phys.p_max / 2.0).abs() < 1e-24);

        let mut single = SystemConfig::desk();
        single.base_stations.truncate(1);
        let phys1 = Physics::<f64>::new(&single).unwrap();
        let ch1 = ChannelRealization::<f64>::zeros(1, 6, 24);
        let p1 = phys1.allocate(&JointAction::idle(1, 3, 8));
        assert_eq!(interference(0, 0, 3, &p1, &ch1), 0.0);
    }

    #[test]
    fn inactive_user_rejected() {
        let phys = two_bs();
        let ch = ChannelRealization::<f64>::zeros(2, 4, 4);
        let mut joint = JointAction::idle(2, 2, 2);
        joint.agent_mut(0, 1, 2).assignment = vec![2, 0];
        let active = [true, false, true, true];
        let err = phys.evaluate(&ch, &active, &[0.0; 4], &joint).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn idle_joint_action_costs_eta() {
        let phys = two_bs();
        let ch = ChannelRealization::<f64>::zeros(2, 4, 4);
        let active = [true, true, false, true];
        let eta = [2e6; 4];
        let out = phys
            .evaluate(&ch, &active, &eta, &JointAction::idle(2, 2, 2))
            .unwrap();
        assert_eq!(out.reward, 0.0);
        assert!(out.group_rewards.iter().all(|&r| r == 0.0));
        assert_eq!(out.costs, vec![2e6, 2e6, 0.0, 2e6]);
        assert_eq!(out.qos_misses(), 3);
    }
}
