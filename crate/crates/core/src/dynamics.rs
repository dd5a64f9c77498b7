//! User populations: per-episode randomization for training and a
//! continuous-time arrival / departure / random-walk process for evaluation.

use rand::Rng;
use rand::seq::index;
use rand_distr::{Distribution, Exp, Poisson};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicsConfig {
    /// Arrivals per minute per BS.
    pub arrival_rate: f64,
    /// Mean active duration, minutes.
    pub dwell_mean: f64,
    /// m/s
    pub walk_speed: f64,
    /// Training population mean as a fraction of `K_max`.
    pub training_mean_fraction: f64,
    /// Seconds advanced per environment step.
    pub frame: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            arrival_rate: 1.0,
            dwell_mean: 3.0,
            walk_speed: 1.0,
            training_mean_fraction: 0.5,
            frame: 0.01,
        }
    }
}

impl DynamicsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.arrival_rate >= 0.0) || !(self.walk_speed >= 0.0) {
            return Err(Error::Config("arrival rate and walk speed must be >= 0".into()));
        }
        if !(self.dwell_mean > 0.0) || !(self.frame > 0.0) {
            return Err(Error::Config("dwell mean and frame duration must be > 0".into()));
        }
        if !(self.training_mean_fraction > 0.0) {
            return Err(Error::Config("training mean fraction must be > 0".into()));
        }
        Ok(())
    }

    /// Long-run mean active count per BS ignoring the slot cap.
    pub fn offered_load(&self) -> f64 {
        self.arrival_rate * self.dwell_mean
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserRecord {
    pub id: u64,
    pub home_bs: usize,
    /// Slot index within the home BS, `0..K_max`. Action class is `slot + 1`.
    pub slot: usize,
    pub position: [f64; 2],
    pub active: bool,
    pub spawn_time: f64,
    pub dwell_remaining: f64,
    /// bit/s
    pub eta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PopulationEvent {
    Arrival {
        time: f64,
        bs: usize,
        slot: usize,
        id: u64,
        dwell: f64,
    },
    Departure {
        time: f64,
        bs: usize,
        slot: usize,
        id: u64,
    },
    /// Arrival dropped because every slot of the BS was busy.
    Blocked { time: f64, bs: usize },
}

/// Fixed slot table of `N * K_max` users, slot `n * K_max + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Population {
    pub users: Vec<UserRecord>,
    pub n_bs: usize,
    pub k_max: usize,
    pub area: [f64; 2],
    pub time: f64,
    next_id: u64,
}

impl Population {
    pub fn empty(n_bs: usize, k_max: usize, area: [f64; 2], eta: f64) -> Self {
        let users = (0..n_bs * k_max)
            .map(|j| UserRecord {
                id: 0,
                home_bs: j / k_max,
                slot: j % k_max,
                position: [area[0] / 2.0, area[1] / 2.0],
                active: false,
                spawn_time: 0.0,
                dwell_remaining: 0.0,
                eta,
            })
            .collect();
        Self {
            users,
            n_bs,
            k_max,
            area,
            time: 0.0,
            next_id: 1,
        }
    }

    pub fn user(&self, bs: usize, slot: usize) -> &UserRecord {
        &self.users[bs * self.k_max + slot]
    }

    pub fn active_count(&self) -> usize {
        self.users.iter().filter(|u| u.active).count()
    }

    pub fn active_at(&self, bs: usize) -> usize {
        self.users[bs * self.k_max..(bs + 1) * self.k_max]
            .iter()
            .filter(|u| u.active)
            .count()
    }

    pub fn is_active(&self, slot: usize) -> bool {
        self.users[slot].active
    }

    fn activate<R: Rng + ?Sized>(&mut self, j: usize, dwell: f64, rng: &mut R) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        let area = self.area;
        let u = &mut self.users[j];
        u.id = id;
        u.active = true;
        u.spawn_time = self.time;
        u.dwell_remaining = dwell;
        u.position = [rng.random::<f64>() * area[0], rng.random::<f64>() * area[1]];
        id
    }
}

fn dwell_law(config: &DynamicsConfig) -> Exp<f64> {
    Exp::new(1.0 / (config.dwell_mean * 60.0)).expect("dwell mean validated > 0")
}

/// Draws from Poisson(`mean`) conditioned on landing in `[1, k_max]`.
pub fn truncated_poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64, k_max: usize) -> usize {
    if k_max <= 1 || mean <= 0.0 {
        return 1;
    }
    let law = Poisson::new(mean).expect("positive Poisson mean");
    loop {
        let k = law.sample(rng) as usize;
        if (1..=k_max).contains(&k) {
            return k;
        }
    }
}

/// Training population: per BS, active count ~ Poisson(fraction * K_max)
/// truncated to `[1, K_max]`, placed on random slots, uniform positions.
pub fn sample_training_population<R: Rng + ?Sized>(
    rng: &mut R,
    n_bs: usize,
    k_max: usize,
    area: [f64; 2],
    eta: f64,
    config: &DynamicsConfig,
) -> Population {
    let mut pop = Population::empty(n_bs, k_max, area, eta);
    let dwell = dwell_law(config);
    for bs in 0..n_bs {
        let count = truncated_poisson(rng, config.training_mean_fraction * k_max as f64, k_max);
        let mut slots = index::sample(rng, k_max, count).into_vec();
        slots.sort_unstable();
        for slot in slots {
            let d = dwell.sample(rng);
            pop.activate(bs * k_max + slot, d, rng);
        }
    }
    pop
}

/// Evaluation start: per BS, Poisson(arrival rate * dwell mean) users capped
/// at `K_max` on the lowest slots.
pub fn sample_stationary_population<R: Rng + ?Sized>(
    rng: &mut R,
    n_bs: usize,
    k_max: usize,
    area: [f64; 2],
    eta: f64,
    config: &DynamicsConfig,
) -> Population {
    let mut pop = Population::empty(n_bs, k_max, area, eta);
    let load = config.offered_load();
    if load <= 0.0 {
        return pop;
    }
    let law = Poisson::new(load).expect("positive load");
    let dwell = dwell_law(config);
    for bs in 0..n_bs {
        let count = (law.sample(rng) as usize).min(k_max);
        for slot in 0..count {
            let d = dwell.sample(rng);
            pop.activate(bs * k_max + slot, d, rng);
        }
    }
    pop
}

fn reflect(mut x: f64, hi: f64) -> f64 {
    loop {
        if x < 0.0 {
            x = -x;
        } else if x > hi {
            x = 2.0 * hi - x;
        } else {
            return x;
        }
    }
}

/// Advances the population by `dt` seconds: ages and expires users, moves the
/// survivors one random-walk step, then admits Poisson arrivals per BS.
pub fn advance<R: Rng + ?Sized>(
    pop: &mut Population,
    dt: f64,
    rng: &mut R,
    config: &DynamicsConfig,
) -> Result<Vec<PopulationEvent>> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("time step must be > 0, got {dt}")));
    }
    let mut events = Vec::new();
    let t0 = pop.time;
    let step = config.walk_speed * dt;
    let area = pop.area;
    for u in pop.users.iter_mut().filter(|u| u.active) {
        if u.dwell_remaining <= dt {
            events.push(PopulationEvent::Departure {
                time: t0 + u.dwell_remaining,
                bs: u.home_bs,
                slot: u.slot,
                id: u.id,
            });
            u.active = false;
            u.dwell_remaining = 0.0;
            continue;
        }
        u.dwell_remaining -= dt;
        if step > 0.0 {
            let heading = rng.random::<f64>() * std::f64::consts::TAU;
            u.position = [
                reflect(u.position[0] + step * heading.cos(), area[0]),
                reflect(u.position[1] + step * heading.sin(), area[1]),
            ];
        }
    }
    pop.time = t0 + dt;
    let mean = config.arrival_rate * dt / 60.0;
    if mean > 0.0 {
        let law = Poisson::new(mean).expect("positive arrival mean");
        let dwell = dwell_law(config);
        for bs in 0..pop.n_bs {
            let arrivals = law.sample(rng) as usize;
            for _ in 0..arrivals {
                let free = (0..pop.k_max).find(|&k| !pop.users[bs * pop.k_max + k].active);
                match free {
                    Some(slot) => {
                        let d = dwell.sample(rng);
                        let id = pop.activate(bs * pop.k_max + slot, d, rng);
                        events.push(PopulationEvent::Arrival {
                            time: pop.time,
                            bs,
                            slot,
                            id,
                            dwell: d,
                        });
                    }
                    None => events.push(PopulationEvent::Blocked { time: pop.time, bs }),
                }
            }
        }
    }
    Ok(events)
}

/// Presence bits per BS indexed by action class: entry 0 (unactivated) is
/// always 0, entry `k + 1` is 1 iff slot `k` is active.
pub fn presence_metadata(pop: &Population) -> Vec<Vec<u8>> {
    (0..pop.n_bs)
        .map(|bs| {
            std::iter::once(0)
                .chain((0..pop.k_max).map(|k| u8::from(pop.user(bs, k).active)))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    const AREA: [f64; 2] = [1000.0, 1000.0];

    /// Truncated Poisson mean by direct pmf summation.
    fn truncated_poisson_mean(lambda: f64, k_max: usize) -> f64 {
        let mut pmf = (-lambda).exp();
        let (mut num, mut den) = (0.0, 0.0);
        for k in 1..=k_max {
            pmf *= lambda / k as f64;
            num += k as f64 * pmf;
            den += pmf;
        }
        num / den
    }

    #[test]
    fn training_population_mean_matches_truncated_poisson() {
        let mut r = rng::stream(10, 0);
        let cfg = DynamicsConfig::default();
        let n = 100_000;
        let mut total = 0usize;
        for _ in 0..n {
            let pop = sample_training_population(&mut r, 1, 20, AREA, 2e6, &cfg);
            total += pop.active_count();
        }
        let mean = total as f64 / n as f64;
        let oracle = truncated_poisson_mean(10.0, 20);
        assert!((mean / oracle - 1.0).abs() < 0.02, "{mean} vs {oracle}");
    }

    #[test]
    fn single_slot_always_one_user() {
        let mut r = rng::stream(11, 0);
        for _ in 0..1000 {
            let pop = sample_training_population(&mut r, 3, 1, AREA, 2e6, &DynamicsConfig::default());
            for bs in 0..3 {
                assert_eq!(pop.active_at(bs), 1);
            }
        }
    }

    #[test]
    fn fixed_seed_fixed_population() {
        let cfg = DynamicsConfig::default();
        let a = sample_training_population(&mut rng::stream(5, 1), 3, 6, AREA, 2e6, &cfg);
        let b = sample_training_population(&mut rng::stream(5, 1), 3, 6, AREA, 2e6, &cfg);
        assert_eq!(a, b);
    }

    #[test]
    fn no_arrivals_leaves_empty_population() {
        let cfg = DynamicsConfig {
            arrival_rate: 0.0,
            ..Default::default()
        };
        let mut pop = Population::empty(2, 4, AREA, 2e6);
        let before = pop.users.clone();
        let ev = advance(&mut pop, 1.0, &mut rng::stream(1, 1), &cfg).unwrap();
        assert!(ev.is_empty());
        assert_eq!(pop.users, before);
        assert!(advance(&mut pop, 0.0, &mut rng::stream(1, 1), &cfg).is_err());
    }

    #[test]
    fn spawned_dwell_mean_is_three_minutes() {
        let cfg = DynamicsConfig {
            arrival_rate: 600.0,
            ..Default::default()
        };
        let mut r = rng::stream(12, 0);
        let mut dwells = Vec::new();
        // wide population so arrivals are never blocked
        let mut pop = Population::empty(1, 100_000, AREA, 2e6);
        while dwells.len() < 100_000 {
            for e in advance(&mut pop, 1.0, &mut r, &cfg).unwrap() {
                if let PopulationEvent::Arrival { dwell, .. } = e {
                    dwells.push(dwell);
                }
            }
        }
        let mean = dwells.iter().sum::<f64>() / dwells.len() as f64;
        assert!((mean / 180.0 - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn walk_step_is_exact_before_reflection() {
        let cfg = DynamicsConfig {
            arrival_rate: 0.0,
            ..Default::default()
        };
        let mut r = rng::stream(13, 0);
        let mut pop = sample_training_population(&mut r, 2, 8, AREA, 2e6, &cfg);
        // keep everyone away from the walls and alive
        for u in pop.users.iter_mut() {
            u.position = [500.0, 500.0];
            u.dwell_remaining = 1e6;
        }
        let before = pop.clone();
        advance(&mut pop, 1.0, &mut r, &cfg).unwrap();
        for (a, b) in before.users.iter().zip(&pop.users) {
            if a.active {
                let d = ((a.position[0] - b.position[0]).powi(2)
                    + (a.position[1] - b.position[1]).powi(2))
                .sqrt();
                assert!((d - 1.0).abs() < 1e-12, "{d}");
            }
        }
    }

    #[test]
    fn positions_stay_in_area() {
        let cfg = DynamicsConfig {
            arrival_rate: 30.0,
            walk_speed: 400.0,
            ..Default::default()
        };
        let mut r = rng::stream(14, 0);
        let mut pop = Population::empty(3, 5, AREA, 2e6);
        for _ in 0..2000 {
            advance(&mut pop, 1.0, &mut r, &cfg).unwrap();
            for u in &pop.users {
                assert!((0.0..=AREA[0]).contains(&u.position[0]));
                assert!((0.0..=AREA[1]).contains(&u.position[1]));
            }
            for bs in 0..3 {
                assert!(pop.active_at(bs) <= 5);
            }
        }
    }

    #[test]
    fn presence_examples() {
        let mut pop = Population::empty(1, 4, AREA, 2e6);
        assert_eq!(presence_metadata(&pop), vec![vec![0, 0, 0, 0, 0]]);
        pop.users[0].active = true;
        pop.users[2].active = true;
        assert_eq!(presence_metadata(&pop), vec![vec![0, 1, 0, 1, 0]]);
    }

    #[test]
    fn presence_count_matches_population() {
        let mut r = rng::stream(15, 0);
        let cfg = DynamicsConfig::default();
        for _ in 0..1000 {
            let pop = sample_training_population(&mut r, 3, 6, AREA, 2e6, &cfg);
            let bits: usize = presence_metadata(&pop)
                .iter()
                .flatten()
                .map(|&b| b as usize)
                .sum();
            assert_eq!(bits, pop.active_count());
        }
    }

    /// Mean active users per BS over a 10-hour horizon.
    fn long_run_mean(rate: f64, k_max: usize, seed: u64) -> f64 {
        let cfg = DynamicsConfig {
            arrival_rate: rate,
            ..Default::default()
        };
        let mut r = rng::stream(seed, 0);
        let mut pop = sample_stationary_population(&mut r, 3, k_max, AREA, 2e6, &cfg);
        let steps = 36_000;
        let mut acc = 0usize;
        for _ in 0..steps {
            advance(&mut pop, 1.0, &mut r, &cfg).unwrap();
            acc += pop.active_count();
        }
        acc as f64 / (3 * steps) as f64
    }

    #[test]
    fn long_run_occupancy_matches_offered_load() {
        // relative std of the time average is about 1.5% at this load
        let m = long_run_mean(5.0, 60, 16);
        assert!((m / 15.0 - 1.0).abs() < 0.05, "{m}");
        let capped = long_run_mean(100.0, 6, 17);
        assert!((capped / 6.0 - 1.0).abs() < 0.05, "{capped}");
    }

    #[test]
    fn thirty_minute_trace_is_deterministic() {
        let cfg = DynamicsConfig {
            arrival_rate: 5.0,
            ..Default::default()
        };
        let run = || {
            let mut r = rng::stream(18, 0);
            let mut pop = sample_stationary_population(&mut r, 3, 20, AREA, 2e6, &cfg);
            let mut log = Vec::new();
            for _ in 0..1800 {
                log.extend(advance(&mut pop, 1.0, &mut r, &cfg).unwrap());
            }
            (log, pop)
        };
        assert_eq!(run(), run());
    }
}
