//! Acceptance criteria, run in order with one PASS/FAIL line each.
//!
//! The scalability comparison needs tens of CPU-hours at its stated budget. By
//! default it runs at a reduced budget and reports the directional outcome as
//! informational; set `ACCEPTANCE_FULL=1` to run the full protocol.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use coexist_cli::RunConfig;
use coexist_cli::commands::{self, TRAIN_METRICS_FILE};
use coexist_core::dynamics::DynamicsConfig;
use coexist_core::eval::{Controller, SecondRow, run_scenario, scenario};
use coexist_core::system::SystemConfig;
use coexist_core::theory::{CheckReport, VerifyOptions, checks};
use coexist_core::trainer::{Method, Trainer, TrainerConfig};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    /// Ran at a reduced budget; reported, neither passed nor failed.
    Info,
}

struct Outcome {
    status: Status,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        status: if passed { Status::Pass } else { Status::Fail },
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, budget_s: u64) -> bool {
    elapsed <= Duration::from_secs(budget_s)
}

fn summarize(reports: &[CheckReport]) -> String {
    reports
        .iter()
        .map(|r| {
            format!(
                "[{}] {} ({} cases, max dev {:.2e}, {})",
                if r.passed { "ok" } else { "FAIL" },
                r.check,
                r.cases,
                r.max_deviation,
                r.detail
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn assumptions() -> Outcome {
    let (reports, dt) = timed(|| checks::check_assumptions(&VerifyOptions::default()).unwrap());
    let passed = reports.iter().all(|r| r.passed) && within(dt, 60);
    outcome(passed, format!("{} in {:.1}s", summarize(&reports), dt.as_secs_f64()))
}

fn decomposition() -> Outcome {
    let opts = VerifyOptions::default();
    let (reports, dt) = timed(|| {
        vec![
            checks::check_theorem1(&opts).unwrap(),
            checks::check_lemma1(&opts).unwrap(),
            checks::check_lemma2(&opts).unwrap(),
            checks::check_lemma2_negative_control(&opts).unwrap(),
        ]
    });
    let enough = reports.iter().all(|r| r.cases >= 100);
    let passed = enough && reports.iter().all(|r| r.passed) && within(dt, 300);
    outcome(passed, format!("{} in {:.1}s", summarize(&reports), dt.as_secs_f64()))
}

fn occupancy() -> Outcome {
    let (r, dt) = timed(|| checks::check_proposition1(&VerifyOptions::default()).unwrap());
    outcome(r.passed && within(dt, 10), format!("{} in {:.2}s", summarize(&[r]), dt.as_secs_f64()))
}

fn physics() -> Outcome {
    let (r, dt) = timed(|| checks::check_physics(&VerifyOptions::default()).unwrap());
    let passed = r.passed && r.cases >= 100_000;
    outcome(passed, format!("{} in {:.1}s", summarize(&[r]), dt.as_secs_f64()))
}

fn gradients() -> Outcome {
    let (r, dt) = timed(|| checks::check_gradients(&VerifyOptions::default()).unwrap());
    outcome(r.passed && within(dt, 60), format!("{} in {:.2}s", summarize(&[r]), dt.as_secs_f64()))
}

fn small_trainer(eta: f64) -> Trainer<f64> {
    let mut system = SystemConfig::desk();
    system.eta = eta;
    let cfg = TrainerConfig {
        hidden: vec![16, 16],
        episode_steps: 10,
        ..TrainerConfig::default()
    };
    Trainer::new(system, DynamicsConfig::default(), cfg, Method::Decomposed, 3, 1).unwrap()
}

fn dual_dynamics() -> Outcome {
    let mut hard = small_trainer(1e9);
    let mut violations = 0;
    let mut rises = 0;
    for _ in 0..50 {
        let before = hard.multipliers.lambda.clone();
        let buffers = hard.collect(1).unwrap();
        let costs = buffers[0].mean_costs();
        hard.update(&buffers).unwrap();
        for ((b, a), c) in before.iter().zip(&hard.multipliers.lambda).zip(&costs) {
            let below_cap = *b < hard.multipliers.cap;
            if a < b || (*c > 0.0 && below_cap && a <= b) {
                violations += 1;
            }
            if a > b {
                rises += 1;
            }
        }
    }
    let mut easy = small_trainer(0.0);
    for _ in 0..50 {
        let buffers = easy.collect(1).unwrap();
        easy.update(&buffers).unwrap();
    }
    let zero = easy.multipliers.lambda.iter().all(|&l| l == 0.0);
    outcome(
        violations == 0 && rises > 0 && zero,
        format!(
            "unreachable target: {rises} strict rises, {violations} violations over 50 updates, final lambda mean {:.3}; zero target: lambda identically 0 = {zero}",
            hard.multipliers.mean()
        ),
    )
}

#[derive(Clone, Copy, Debug, Default)]
struct Curve {
    initial_cost: f64,
    final_reward: f64,
    final_cost: f64,
}

fn train_curve(method: Method, seed: u64, episodes: usize, window: usize) -> Curve {
    let cfg = TrainerConfig {
        hidden: vec![64, 64],
        ..TrainerConfig::default()
    };
    let mut t = Trainer::<f64>::new(SystemConfig::desk(), DynamicsConfig::default(), cfg, method, seed, 4).unwrap();
    let mut rows = Vec::new();
    t.train(episodes, |r| rows.push((r.summary.mean_raw_reward, r.summary.mean_cost)))
        .unwrap();
    let mean = |xs: &[(f64, f64)], f: fn(&(f64, f64)) -> f64| xs.iter().map(f).sum::<f64>() / xs.len() as f64;
    let w = window.min(rows.len());
    let (head, tail) = (&rows[..w], &rows[rows.len() - w..]);
    Curve {
        initial_cost: mean(head, |r| r.1),
        final_reward: mean(tail, |r| r.0),
        final_cost: mean(tail, |r| r.1),
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

fn scalability(full: bool) -> Outcome {
    let (episodes, window, seeds) = if full { (20_000, 500, 3) } else { (48, 12, 1) };
    let mut medians = Vec::new();
    for method in Method::ALL {
        let curves: Vec<Curve> = (0..seeds).map(|s| train_curve(method, s, episodes, window)).collect();
        medians.push((
            method,
            Curve {
                initial_cost: median(curves.iter().map(|c| c.initial_cost).collect()),
                final_reward: median(curves.iter().map(|c| c.final_reward).collect()),
                final_cost: median(curves.iter().map(|c| c.final_cost).collect()),
            },
        ));
    }
    let dec = medians[0].1;
    let others = &medians[1..];
    let directional = others
        .iter()
        .all(|(_, c)| dec.final_reward > c.final_reward && dec.final_cost < c.final_cost)
        && dec.final_cost <= 0.2 * dec.initial_cost;
    let table = medians
        .iter()
        .map(|(m, c)| format!("{m}: reward {:.4e}, cost {:.4e} (initial {:.4e})", c.final_reward, c.final_cost, c.initial_cost))
        .collect::<Vec<_>>()
        .join("; ");
    let budget = format!("{episodes} episodes x {seeds} seed(s), last {window}");
    if full {
        outcome(directional, format!("{budget}: {table}"))
    } else {
        let finite = medians.iter().all(|(_, c)| c.final_reward.is_finite() && c.final_cost.is_finite());
        Outcome {
            status: if finite { Status::Info } else { Status::Fail },
            detail: format!(
                "reduced budget {budget}; directional ordering {} (full protocol: ACCEPTANCE_FULL=1): {table}",
                if directional { "holds" } else { "does not hold" }
            ),
        }
    }
}

fn flexibility() -> Outcome {
    let started = Instant::now();
    // A short run at the default 5e-5 leaves per-head idle probabilities just
    // above each user's, so the argmax joint action idles everything; a larger
    // step sharpens the heads within the time budget.
    let cfg = TrainerConfig {
        hidden: vec![64, 64],
        lr: 5e-4,
        ..TrainerConfig::default()
    };
    let system = SystemConfig::desk();
    let mut t = Trainer::<f64>::new(system.clone(), DynamicsConfig::default(), cfg, Method::Decomposed, 11, 4).unwrap();
    t.train(80, |_| {}).unwrap();
    let controller = Controller::Greedy(t.policy.clone());
    let trace = |preset: &str| -> coexist_core::Result<(Vec<SecondRow>, coexist_core::eval::EvalSummary)> {
        let dynamics = scenario(preset, &DynamicsConfig::default())?;
        let mut rows = Vec::new();
        let s = run_scenario(&system, &dynamics, &controller, 30.0 * 60.0, 5, |r| {
            rows.push(r.clone());
            Ok(())
        })?;
        Ok((rows, s))
    };
    let mut parts = Vec::new();
    let mut ok = true;
    let mut misses = Vec::new();
    for preset in ["arrivals-1", "arrivals-3", "arrivals-5"] {
        match trace(preset) {
            Ok((rows, s)) => {
                let positive = rows.iter().all(|r| r.throughput > 0.0);
                ok &= positive && rows.len() == 1800;
                misses.push(s.mean_qos_misses);
                parts.push(format!(
                    "{preset}: min throughput {:.3e}, mean misses {:.3}, users {:.2}, {} arrivals / {} departures",
                    s.min_throughput, s.mean_qos_misses, s.mean_active_users, s.arrivals, s.departures
                ));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{preset}: error {e}"));
            }
        }
    }
    let monotone = misses.len() == 3 && misses[0] <= misses[2];
    let deterministic = match (trace("arrivals-1"), trace("arrivals-1")) {
        (Ok(a), Ok(b)) => a.0 == b.0,
        _ => false,
    };
    let dt = started.elapsed();
    outcome(
        ok && monotone && deterministic && within(dt, 600),
        format!(
            "{}; misses rate1 <= rate5: {monotone}; deterministic: {deterministic}; {:.0}s including 80 training episodes at lr 5e-4",
            parts.join("; "),
            dt.as_secs_f64()
        ),
    )
}

fn strip_wall_time(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let wall = r.headers().unwrap().iter().position(|h| h == "wall_time_s").unwrap();
    r.records()
        .map(|rec| {
            rec.unwrap()
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != wall)
                .map(|(_, v)| v.to_string())
                .collect()
        })
        .collect()
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut config = RunConfig::default();
    config.run.seed = 21;
    config.run.episodes = 6;
    config.run.workers = 3;
    config.trainer.hidden = vec![32, 32];
    config.trainer.episode_steps = 20;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    commands::train(&config, &a).unwrap();
    commands::train(&config, &b).unwrap();
    let (ra, rb) = (strip_wall_time(&a.join(TRAIN_METRICS_FILE)), strip_wall_time(&b.join(TRAIN_METRICS_FILE)));
    let ck_same = std::fs::read(a.join(commands::CHECKPOINT_FILE)).unwrap()
        == std::fs::read(b.join(commands::CHECKPOINT_FILE)).unwrap();
    outcome(
        ra == rb && ra.len() == 6 && ck_same,
        format!("{} rows, metrics identical = {}, checkpoints identical = {ck_same}", ra.len(), ra == rb),
    )
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let full = std::env::var("ACCEPTANCE_FULL").is_ok_and(|v| v == "1");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("assumption suite", Box::new(assumptions)),
        ("decomposition optimality", Box::new(decomposition)),
        ("occupancy identity", Box::new(occupancy)),
        ("physics invariants", Box::new(physics)),
        ("gradient fidelity", Box::new(gradients)),
        ("dual dynamics", Box::new(dual_dynamics)),
        ("scalability", Box::new(move || scalability(full))),
        ("flexibility", Box::new(flexibility)),
        ("reproducibility", Box::new(reproducibility)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        let label = match o.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        };
        failed += usize::from(o.status == Status::Fail);
        println!("criterion {} {name}: {label} | {}", i + 1, o.detail);
    }
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
