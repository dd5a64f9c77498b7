//! Numerical checks of the decomposition claims, the occupancy identity, the
//! physics invariants and gradient fidelity, each producing a [`CheckReport`].

use std::time::Instant;

use rand::Rng;

use crate::baselines::{BaselineKind, heuristic_joint};
use crate::dynamics::DynamicsConfig;
use crate::env::observation::action_mask;
use crate::env::{AgentAction, Environment, JointAction, PopulationMode};
use crate::error::{Error, Result};
use crate::nn::{Activation, Init, Mlp};
use crate::rng::{self, SimRng};
use crate::system::{PartitionStyle, SystemConfig};
use crate::theory::mdp::TinyMdp;
use crate::theory::micro::MicroInstance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scope {
    Lemma1,
    Lemma2,
    Theorem1,
    Proposition1,
    Assumptions,
    Gradients,
    Physics,
}

impl Scope {
    pub const ALL: [Scope; 7] = [
        Scope::Lemma1,
        Scope::Lemma2,
        Scope::Theorem1,
        Scope::Proposition1,
        Scope::Assumptions,
        Scope::Gradients,
        Scope::Physics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scope::Lemma1 => "lemma1",
            Scope::Lemma2 => "lemma2",
            Scope::Theorem1 => "theorem1",
            Scope::Proposition1 => "proposition1",
            Scope::Assumptions => "assumptions",
            Scope::Gradients => "gradients",
            Scope::Physics => "physics",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
                Error::Config(format!("unknown scope `{s}`; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub check: String,
    pub passed: bool,
    pub cases: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub seconds: f64,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// Deployment for the sampled checks; its partition style also shapes
    /// the micro instances.
    pub system: SystemConfig,
    pub seed: u64,
    pub micro_instances: usize,
    pub assumption_samples: usize,
    pub resample_states: usize,
    pub resamples: usize,
    pub physics_actions: usize,
    pub mdps: usize,
    pub reward_tables: usize,
    pub networks: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            system: SystemConfig::desk(),
            seed: 0,
            micro_instances: 100,
            assumption_samples: 10_000,
            resample_states: 100,
            resamples: 100,
            physics_actions: 100_000,
            mdps: 20,
            reward_tables: 20,
            networks: 20,
        }
    }
}

pub const ENUMERATION_TOLERANCE: f64 = 1e-9;
pub const LINEAR_SOLVE_TOLERANCE: f64 = 1e-8;
pub const ADDITIVITY_TOLERANCE: f64 = 1e-12;
pub const GRADIENT_TOLERANCE: f64 = 1e-4;

/// Micro instance shape used by the decomposition checks: N=2, F=4, M=2, K=2.
const MICRO: (usize, usize, usize, usize) = (2, 4, 2, 2);

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

struct Tally {
    check: &'static str,
    tolerance: f64,
    cases: usize,
    worst: f64,
    failures: usize,
    started: Instant,
}

impl Tally {
    fn new(check: &'static str, tolerance: f64) -> Self {
        Self {
            check,
            tolerance,
            cases: 0,
            worst: 0.0,
            failures: 0,
            started: Instant::now(),
        }
    }

    fn record(&mut self, deviation: f64) {
        self.cases += 1;
        self.worst = self.worst.max(deviation);
        if !(deviation <= self.tolerance) {
            self.failures += 1;
        }
    }

    fn finish(self, detail: String) -> CheckReport {
        CheckReport {
            check: self.check.to_string(),
            passed: self.failures == 0 && self.cases > 0,
            cases: self.cases,
            max_deviation: self.worst,
            tolerance: self.tolerance,
            seconds: self.started.elapsed().as_secs_f64(),
            detail: if self.failures > 0 {
                format!("{} of {} cases out of tolerance; {detail}", self.failures, self.cases)
            } else {
                detail
            },
        }
    }
}

fn micro_instances(opts: &VerifyOptions, style: PartitionStyle, salt: u64) -> Result<Vec<MicroInstance>> {
    let mut r = rng::stream(opts.seed, salt);
    let (n, f, m, k) = MICRO;
    (0..opts.micro_instances)
        .map(|_| MicroInstance::random(&mut r, n, f, m, k, style))
        .collect()
}

/// Sequential per-group optimization reaches the joint optimum.
pub fn check_theorem1(opts: &VerifyOptions) -> Result<CheckReport> {
    let mut t = Tally::new("theorem1: sequential optimum = joint optimum", ENUMERATION_TOLERANCE);
    for inst in micro_instances(opts, opts.system.partition, 11)? {
        let joint = inst.brute_force_joint_optimum()?.value;
        let seq = inst.sequential_group_optimum()?;
        t.record(relative(seq.total(), joint));
    }
    Ok(t.finish("N=2, F=4, M=2, K=2, QoS disabled".into()))
}

/// Group objectives add up to the global objective of the composed action.
pub fn check_lemma1(opts: &VerifyOptions) -> Result<CheckReport> {
    let mut t = Tally::new("lemma1: sum of group objectives = global objective", ENUMERATION_TOLERANCE);
    for inst in micro_instances(opts, opts.system.partition, 12)? {
        let seq = inst.sequential_group_optimum()?;
        let out = inst.evaluate(&seq.composed)?;
        let groups: f64 = out.group_rewards.iter().sum();
        t.record(relative(groups, out.reward).max(relative(seq.total(), out.reward)));
    }
    Ok(t.finish("composed sequential optima".into()))
}

fn lemma2_spread(inst: &MicroInstance) -> Result<f64> {
    let mut worst = 0.0f64;
    for m in 1..inst.physics.srbs {
        let values = inst.conditional_optima(m)?;
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        worst = worst.max(relative(hi, lo));
    }
    Ok(worst)
}

/// Conditional group optima do not depend on earlier groups' actions.
pub fn check_lemma2(opts: &VerifyOptions) -> Result<CheckReport> {
    let mut t = Tally::new("lemma2: conditional group optima are constant", ENUMERATION_TOLERANCE);
    for inst in micro_instances(opts, opts.system.partition, 13)? {
        t.record(lemma2_spread(&inst)?);
    }
    Ok(t.finish("every conditioning action of earlier groups enumerated".into()))
}

/// The same check on frequency-shifted partitions must fail.
pub fn check_lemma2_negative_control(opts: &VerifyOptions) -> Result<CheckReport> {
    let started = Instant::now();
    let mut detected = 0;
    let mut worst = 0.0f64;
    let instances = micro_instances(opts, PartitionStyle::Shifted, 14)?;
    for inst in &instances {
        let s = lemma2_spread(inst)?;
        worst = worst.max(s);
        if s > ENUMERATION_TOLERANCE {
            detected += 1;
        }
    }
    Ok(CheckReport {
        check: "lemma2 negative control: misaligned SRBs detected".into(),
        passed: detected > 0,
        cases: instances.len(),
        max_deviation: worst,
        tolerance: ENUMERATION_TOLERANCE,
        seconds: started.elapsed().as_secs_f64(),
        detail: format!("{detected} of {} shifted instances violate the lemma", instances.len()),
    })
}

/// Discounted sums equal scaled occupancy expectations on random tiny MDPs.
pub fn check_proposition1(opts: &VerifyOptions) -> Result<CheckReport> {
    let mut t = Tally::new("proposition1: occupancy identity", LINEAR_SOLVE_TOLERANCE);
    let mut r = rng::stream(opts.seed, 15);
    for _ in 0..opts.mdps {
        let states = r.random_range(2..=5);
        let actions = r.random_range(1..=3);
        let gamma = r.random_range(0.5..0.99);
        let mdp = TinyMdp::random(&mut r, states, actions, gamma)?;
        let pi = mdp.random_policy(&mut r);
        for _ in 0..opts.reward_tables {
            let f: Vec<f64> = (0..states * actions).map(|_| r.random_range(-5.0..5.0)).collect();
            let (lhs, rhs) = mdp.occupancy_identity(&pi, &f)?;
            t.record(relative(lhs, rhs));
        }
    }
    Ok(t.finish(format!("{} MDPs with up to 5 states", opts.mdps)))
}

fn sampling_env(system: &SystemConfig, seed: u64) -> Result<Environment<f64>> {
    Environment::new(system.clone(), DynamicsConfig::default(), PopulationMode::Training, seed, 0)
}

/// Redraws every group except `keep`.
fn resample_other_groups(env: &Environment<f64>, base: &JointAction, keep: usize, r: &mut SimRng) -> Result<JointAction> {
    let srbs = env.physics().srbs;
    let mut j = heuristic_joint(BaselineKind::RandomAssignment, env, r)?;
    for n in 0..env.physics().n_bs {
        *j.agent_mut(n, keep, srbs) = base.agent(n, keep, srbs).clone();
    }
    Ok(j)
}

fn group_invariance(env: &Environment<f64>, joint: &JointAction, resamples: usize, r: &mut SimRng) -> Result<usize> {
    let base = env.evaluate(joint)?;
    let mut changed = 0;
    for m in 0..env.physics().srbs {
        for _ in 0..resamples {
            let other = resample_other_groups(env, joint, m, r)?;
            if env.evaluate(&other)?.group_rewards[m].to_bits() != base.group_rewards[m].to_bits() {
                changed += 1;
            }
        }
    }
    Ok(changed)
}

/// Additive rewards and group rewards that ignore other groups' actions.
pub fn check_assumptions(opts: &VerifyOptions) -> Result<Vec<CheckReport>> {
    let mut add = Tally::new("assumption2: r = sum of group rewards", ADDITIVITY_TOLERANCE);
    let mut env = sampling_env(&opts.system, opts.seed)?;
    let mut r = rng::stream(opts.seed, 16);
    for i in 0..opts.assumption_samples {
        if i % 10 == 0 {
            env.reset()?;
        }
        let joint = heuristic_joint(BaselineKind::RandomAssignment, &env, &mut r)?;
        let out = env.step(&joint)?;
        let sum: f64 = out.group_rewards.iter().sum();
        add.record((out.reward - sum).abs() / out.reward.max(1.0));
    }
    let additive = add.finish(format!("{} random state/action samples", opts.assumption_samples));

    let started = Instant::now();
    let mut env = sampling_env(&opts.system, opts.seed ^ 1)?;
    let (mut changed, mut cases) = (0, 0);
    for _ in 0..opts.resample_states {
        env.reset()?;
        let joint = heuristic_joint(BaselineKind::RandomAssignment, &env, &mut r)?;
        changed += group_invariance(&env, &joint, opts.resamples, &mut r)?;
        cases += opts.resamples * env.physics().srbs;
    }
    let invariant = CheckReport {
        check: "assumption1: group reward ignores other groups".into(),
        passed: changed == 0 && cases > 0,
        cases,
        max_deviation: changed as f64,
        tolerance: 0.0,
        seconds: started.elapsed().as_secs_f64(),
        detail: format!("{changed} bit-level changes over {cases} resamples"),
    };

    let started = Instant::now();
    let mut shifted = opts.system.clone();
    shifted.partition = PartitionStyle::Shifted;
    let mut env = sampling_env(&shifted, opts.seed ^ 2)?;
    let mut detected = 0;
    let states = opts.resample_states.clamp(1, 10);
    for _ in 0..states {
        env.reset()?;
        let joint = heuristic_joint(BaselineKind::RandomAssignment, &env, &mut r)?;
        detected += group_invariance(&env, &joint, 10, &mut r)?;
    }
    let control = CheckReport {
        check: "assumption1 negative control: misaligned SRBs detected".into(),
        passed: detected > 0,
        cases: states * 10 * shifted.srbs,
        max_deviation: detected as f64,
        tolerance: 0.0,
        seconds: started.elapsed().as_secs_f64(),
        detail: format!("{detected} group rewards changed under a shifted partition"),
    };
    Ok(vec![additive, invariant, control])
}

fn random_net(r: &mut SimRng, seed: u64) -> Result<Mlp<f64>> {
    let depth = r.random_range(1..=3);
    let mut widths = vec![r.random_range(1..=6)];
    for _ in 0..depth {
        widths.push(r.random_range(1..=7));
    }
    let act = if r.random::<bool>() { Activation::Tanh } else { Activation::Relu };
    let mut net = Mlp::new(&widths, act, Init::Orthogonal { seed, hidden_gain: 1.0, output_gain: 1.0 })?;
    for p in net.params_mut() {
        *p += r.random_range(-0.3..0.3);
    }
    Ok(net)
}

/// Backpropagated gradients against central finite differences.
pub fn check_gradients(opts: &VerifyOptions) -> Result<CheckReport> {
    let mut t = Tally::new("gradients: backprop = central differences", GRADIENT_TOLERANCE);
    let mut r = rng::stream(opts.seed, 17);
    let h = 1e-5;
    for s in 0..opts.networks {
        let mut net = random_net(&mut r, opts.seed.wrapping_add(s as u64))?;
        let x: Vec<f64> = (0..net.input_len()).map(|_| r.random_range(-2.0..2.0)).collect();
        let proj: Vec<f64> = (0..net.output_len()).map(|_| r.random_range(-1.0..1.0)).collect();
        let loss = |net: &Mlp<f64>| -> Result<f64> {
            Ok(net.predict(&x)?.iter().zip(&proj).map(|(y, p)| y * p).sum())
        };
        let cache = net.forward(&x)?;
        let mut grads = vec![0.0; net.param_count()];
        net.backward(&cache, &proj, &mut grads)?;
        let mut worst = 0.0f64;
        for i in 0..net.param_count() {
            let orig = net.params()[i];
            net.params_mut()[i] = orig + h;
            let up = loss(&net)?;
            net.params_mut()[i] = orig - h;
            let dn = loss(&net)?;
            net.params_mut()[i] = orig;
            let fd = (up - dn) / (2.0 * h);
            worst = worst.max((fd - grads[i]).abs() / fd.abs().max(grads[i].abs()).max(1e-6));
        }
        t.record(worst);
    }
    Ok(t.finish(format!("{} random networks, h = 1e-5", opts.networks)))
}

/// Random action with a per-agent activation style: idle, fully active or mixed.
fn fuzz_joint(env: &Environment<f64>, r: &mut SimRng) -> JointAction {
    let phys = env.physics();
    let mut joint = JointAction::idle(phys.n_bs, phys.srbs, phys.srb_size());
    for n in 0..phys.n_bs {
        let mask = action_mask(phys, env.state(), n);
        let users: Vec<usize> = (1..mask.len()).filter(|&c| mask[c]).collect();
        for m in 0..phys.srbs {
            let style = r.random_range(0..3);
            let a = (0..phys.srb_size())
                .map(|_| match style {
                    0 => 0,
                    1 => users[r.random_range(0..users.len())],
                    _ => {
                        let pick = r.random_range(0..=users.len());
                        if pick == 0 { 0 } else { users[pick - 1] }
                    }
                })
                .collect();
            *joint.agent_mut(n, m, phys.srbs) = AgentAction::new(a);
        }
    }
    joint
}

/// Power budget, orthogonality and cost sign over fuzzed actions.
pub fn check_physics(opts: &VerifyOptions) -> Result<CheckReport> {
    let started = Instant::now();
    let mut env = sampling_env(&opts.system, opts.seed ^ 3)?;
    let mut r = rng::stream(opts.seed, 18);
    let mut violations = Vec::new();
    let p_max = env.physics().p_max;
    for i in 0..opts.physics_actions {
        if i % 100 == 0 {
            env.reset()?;
        }
        let joint = fuzz_joint(&env, &mut r);
        let phys = env.physics();
        let out = env.evaluate(&joint)?;
        for n in 0..phys.n_bs {
            let total = out.powers.bs_total(n);
            let every_srb = (0..phys.srbs).all(|m| joint.agent(n, m, phys.srbs).active_subchannels() > 0);
            let at_budget = (total - p_max).abs() <= 1e-12 * p_max;
            if total > p_max * (1.0 + 1e-12) || at_budget != every_srb {
                violations.push(format!("BS {n} transmits {total} W"));
            }
            for f in 0..phys.subchannels {
                let idx = n * phys.subchannels + f;
                if (out.powers.power[idx] > 0.0) != out.powers.user[idx].is_some() {
                    violations.push(format!("subchannel ({n}, {f}) power without a unique user"));
                }
            }
        }
        let state = env.state();
        for j in 0..phys.user_slots() {
            let c = out.costs[j];
            let satisfied = out.user_rates[j] >= state.eta[j];
            let ok = c >= 0.0 && (!state.active[j] && c == 0.0 || state.active[j] && (c == 0.0) == satisfied);
            if !ok {
                violations.push(format!("user slot {j} has cost {c}"));
            }
        }
    }
    let n = violations.len();
    Ok(CheckReport {
        check: "physics: power budget, orthogonality, cost sign".into(),
        passed: n == 0 && opts.physics_actions > 0,
        cases: opts.physics_actions,
        max_deviation: n as f64,
        tolerance: 0.0,
        seconds: started.elapsed().as_secs_f64(),
        detail: violations.first().cloned().unwrap_or_else(|| "no violations".into()),
    })
}

/// Runs the requested scopes in their canonical order.
pub fn run_suite(scopes: &[Scope], opts: &VerifyOptions) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    for scope in Scope::ALL.into_iter().filter(|s| scopes.contains(s)) {
        match scope {
            Scope::Lemma1 => out.push(check_lemma1(opts)?),
            Scope::Lemma2 => {
                out.push(check_lemma2(opts)?);
                out.push(check_lemma2_negative_control(opts)?);
            }
            Scope::Theorem1 => out.push(check_theorem1(opts)?),
            Scope::Proposition1 => out.push(check_proposition1(opts)?),
            Scope::Assumptions => out.extend(check_assumptions(opts)?),
            Scope::Gradients => out.push(check_gradients(opts)?),
            Scope::Physics => out.push(check_physics(opts)?),
        }
    }
    Ok(out)
}
