//! Fixtures shared by the benchmarks.

use dmpart_core::campaign::trial_rng;
use dmpart_core::random::{random_task_set, GeneratorConfig};
use dmpart_core::{DeadlineClass, TaskSet};

/// Seeded random set of `n` tasks with total utilization in `util`.
pub fn random_set(seed: u64, n: usize, class: DeadlineClass, util: (f64, f64)) -> TaskSet {
    let cfg = GeneratorConfig {
        n,
        class,
        total_util: util,
    };
    random_task_set(&mut trial_rng(seed, 0), &cfg).expect("valid generator config")
}

/// Splits a set into its higher-priority prefix and lowest-priority task.
pub fn split_last(ts: &TaskSet) -> (&[dmpart_core::SporadicTask], &dmpart_core::SporadicTask) {
    let (last, hp) = ts.tasks().split_last().expect("non-empty set");
    (hp, last)
}
