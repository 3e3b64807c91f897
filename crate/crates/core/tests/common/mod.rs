#![allow(dead_code)]

use dmpart_core::campaign::trial_rng;
use dmpart_core::random::{random_task_set, GeneratorConfig};
use dmpart_core::schedulability::Violation;
use dmpart_core::{DeadlineClass, Rational, SchedTest, SporadicTask, TaskSet, TestVerdict};
use rand::Rng;

/// Random set for trial `i`: 3 to 12 tasks, total utilization within `util`.
pub fn random_set(seed: u64, i: u64, class: DeadlineClass, util: (f64, f64)) -> (TaskSet, u64) {
    let mut rng = trial_rng(seed, i);
    let n = rng.random_range(3..=12usize);
    let hi = util.1.min(0.95 * n as f64);
    let lo = util.0.min(hi);
    let cfg = GeneratorConfig {
        n,
        class,
        total_util: (lo, hi),
    };
    let ts = random_task_set(&mut rng, &cfg).expect("valid generator config");
    (ts, rng.random())
}

/// Random multiprocessor instance: `M ∈ 2..=4`, total utilization up to `M`.
pub fn random_instance(seed: u64, i: u64, class: DeadlineClass) -> (TaskSet, usize, u64) {
    let m = 2 + (i % 3) as usize;
    let (ts, fit_seed) = random_set(seed, i, class, (0.4 * m as f64, 1.1 * m as f64));
    (ts, m, fit_seed)
}

/// Worst-case response time carried by a busy-window verdict.
pub fn busy_window_response(v: &TestVerdict) -> Option<Rational> {
    match (&v.witness, &v.violated_at) {
        (Some(w), _) if v.accepted => Some(w.clone()),
        (_, Some(Violation::ResponseTime { response })) => Some(response.clone()),
        _ => None,
    }
}

pub fn accepts(test: SchedTest, hp: &[SporadicTask], cand: &SporadicTask) -> bool {
    test.check(hp, cand).expect("test applies").accepted
}
