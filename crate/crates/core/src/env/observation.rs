//! Local observations of SRB agents and BS agents, and the critic's state features.

use crate::env::GlobalState;
use crate::env::physics::{AgentAction, Physics, decode_power, rate};
use crate::scalar::Scalar;
use crate::system::ObservationScaling;

/// Fixed-length feature vector plus the action mask for the agent's BS.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation<T> {
    pub features: Vec<T>,
    /// Valid classes; class 0 is always valid.
    pub mask: Vec<bool>,
    /// Accumulated-rate approximation of preceding agents per local slot, bit/s.
    pub psi: Vec<T>,
}

/// Layout of an SRB agent's features.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ObservationLayout {
    pub own_gains: usize,
    pub pathloss: usize,
    pub psi: usize,
    pub presence: usize,
    pub bs_index: usize,
    pub srb_index: usize,
}

impl ObservationLayout {
    pub fn srb_agent<T>(phys: &Physics<T>) -> Self {
        Self {
            own_gains: phys.srb_size() * phys.k_max,
            pathloss: phys.n_bs * phys.user_slots(),
            psi: phys.k_max,
            presence: phys.k_max,
            bs_index: phys.n_bs,
            srb_index: phys.srbs,
        }
    }

    /// One agent per BS over all of its subchannels; no accumulated-rate block.
    pub fn bs_agent<T>(phys: &Physics<T>) -> Self {
        Self {
            own_gains: phys.subchannels * phys.k_max,
            pathloss: phys.n_bs * phys.user_slots(),
            psi: 0,
            presence: phys.k_max,
            bs_index: phys.n_bs,
            srb_index: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.own_gains + self.pathloss + self.psi + self.presence + self.bs_index + self.srb_index
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn gain_feature<T: Scalar>(scaling: &ObservationScaling, g: T) -> T {
    if g > T::zero() {
        T::lit(scaling.gain(10.0 * g.as_f64().log10()))
    } else {
        T::lit(-1.0)
    }
}

fn push_gains<T: Scalar>(
    out: &mut Vec<T>,
    phys: &Physics<T>,
    state: &GlobalState<T>,
    scaling: &ObservationScaling,
    n: usize,
    subchannels: &[usize],
) {
    for &f in subchannels {
        for k in 0..phys.k_max {
            let j = n * phys.k_max + k;
            out.push(if state.active[j] {
                gain_feature(scaling, state.channel.gain(n, j, f))
            } else {
                T::zero()
            });
        }
    }
}

fn push_pathloss<T: Scalar>(
    out: &mut Vec<T>,
    phys: &Physics<T>,
    state: &GlobalState<T>,
    scaling: &ObservationScaling,
) {
    for l in 0..phys.n_bs {
        for j in 0..phys.user_slots() {
            out.push(if state.active[j] {
                T::lit(scaling.pathloss(state.channel.pathloss(l, j).as_f64()))
            } else {
                T::zero()
            });
        }
    }
}

fn push_one_hot<T: Scalar>(out: &mut Vec<T>, len: usize, hot: usize) {
    out.extend((0..len).map(|i| if i == hot { T::one() } else { T::zero() }));
}

pub fn action_mask<T>(phys: &Physics<T>, state: &GlobalState<T>, n: usize) -> Vec<bool> {
    std::iter::once(true)
        .chain((0..phys.k_max).map(|k| state.active[n * phys.k_max + k]))
        .collect()
}

/// Interference-free rates the first `prior.len()` agents of BS `n` deliver to
/// each local slot. Exact when there is a single BS.
pub fn accumulated_rate<T: Scalar>(
    phys: &Physics<T>,
    state: &GlobalState<T>,
    n: usize,
    prior: &[AgentAction],
) -> Vec<T> {
    let mut psi = vec![T::zero(); phys.k_max];
    for (m, action) in prior.iter().enumerate() {
        let p = decode_power(action, phys.p_max, phys.srbs);
        for (i, &f) in phys.partition.block(n, m).iter().enumerate() {
            let c = action.assignment[i];
            if c > 0 {
                let j = n * phys.k_max + c - 1;
                psi[c - 1] = psi[c - 1]
                    + rate(
                        state.channel.gain(n, j, f),
                        p[i],
                        T::zero(),
                        phys.bandwidth,
                        phys.noise_density,
                    );
            }
        }
    }
    psi
}

/// Observation of SRB agent `(n, m)` given the actions already taken by
/// agents `(n, 0..m)` in this step.
pub fn observe<T: Scalar>(
    phys: &Physics<T>,
    state: &GlobalState<T>,
    scaling: &ObservationScaling,
    n: usize,
    m: usize,
    prior: &[AgentAction],
) -> Observation<T> {
    debug_assert!(prior.len() >= m);
    let layout = ObservationLayout::srb_agent(phys);
    let mut features = Vec::with_capacity(layout.len());
    push_gains(
        &mut features,
        phys,
        state,
        scaling,
        n,
        phys.partition.block(n, m),
    );
    push_pathloss(&mut features, phys, state, scaling);
    let psi = accumulated_rate(phys, state, n, &prior[..m]);
    for (k, &v) in psi.iter().enumerate() {
        let eta = state.eta[n * phys.k_max + k];
        let unit = if eta > T::zero() { eta } else { T::lit(1e6) };
        features.push(v / unit);
    }
    features.extend(state.presence[n][1..].iter().map(|&b| T::lit(b as f64)));
    push_one_hot(&mut features, phys.n_bs, n);
    push_one_hot(&mut features, phys.srbs, m);
    debug_assert_eq!(features.len(), layout.len());
    Observation {
        features,
        mask: action_mask(phys, state, n),
        psi,
    }
}

/// Observation of a whole-BS agent controlling all `F` subchannels.
pub fn observe_bs<T: Scalar>(
    phys: &Physics<T>,
    state: &GlobalState<T>,
    scaling: &ObservationScaling,
    n: usize,
) -> Observation<T> {
    let layout = ObservationLayout::bs_agent(phys);
    let mut features = Vec::with_capacity(layout.len());
    let all: Vec<usize> = (0..phys.subchannels).collect();
    push_gains(&mut features, phys, state, scaling, n, &all);
    push_pathloss(&mut features, phys, state, scaling);
    features.extend(state.presence[n][1..].iter().map(|&b| T::lit(b as f64)));
    push_one_hot(&mut features, phys.n_bs, n);
    debug_assert_eq!(features.len(), layout.len());
    Observation {
        features,
        mask: action_mask(phys, state, n),
        psi: Vec::new(),
    }
}

pub fn state_feature_len<T>(phys: &Physics<T>) -> usize {
    let u = phys.user_slots();
    phys.n_bs * u * phys.subchannels + phys.n_bs * u + u
}

/// Full-state features for centralized critics: every gain, every pathloss
/// and the presence bits of every slot.
pub fn state_features<T: Scalar>(
    phys: &Physics<T>,
    state: &GlobalState<T>,
    scaling: &ObservationScaling,
) -> Vec<T> {
    let u = phys.user_slots();
    let mut out = Vec::with_capacity(state_feature_len(phys));
    for l in 0..phys.n_bs {
        for j in 0..u {
            for f in 0..phys.subchannels {
                out.push(if state.active[j] {
                    gain_feature(scaling, state.channel.gain(l, j, f))
                } else {
                    T::zero()
                });
            }
        }
    }
    push_pathloss(&mut out, phys, state, scaling);
    out.extend(state.active.iter().map(|&a| if a { T::one() } else { T::zero() }));
    out
}
