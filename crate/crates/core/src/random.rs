//! Seeded random task-set generation.
//!
//! Utilizations come from UUniFast with discard (redrawn until every share is
//! at most one), periods are log-uniform integers in `[1, 1000]`, execution
//! times are `U·T` rounded to hundredths and deadlines are uniform in
//! `[C, T]` (constrained) or `[C, 2T]` (arbitrary), also in hundredths.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SchedError};
use crate::rational::{int, ratio, Rational};
use crate::task::{DeadlineClass, SporadicTask, TaskSet};

/// Resolution of generated execution times and deadlines.
pub const QUANTUM: i64 = 100;
pub const PERIOD_MIN: f64 = 1.0;
pub const PERIOD_MAX: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub class: DeadlineClass,
    /// Total utilization is drawn uniformly from this range per set.
    pub total_util: (f64, f64),
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.total_util;
        if self.n == 0 {
            return Err(SchedError::Domain("need at least one task".into()));
        }
        if !(lo > 0.0 && lo <= hi && hi <= self.n as f64) {
            return Err(SchedError::Domain(format!(
                "total utilization range [{lo}, {hi}] must lie in (0, n]"
            )));
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        format!(
            "uunifast-discard utilizations, total uniform in [{}, {}]; periods log-uniform integers in [{PERIOD_MIN}, {PERIOD_MAX}]; C = U*T rounded to 1/{QUANTUM}; D {}",
            self.total_util.0,
            self.total_util.1,
            match self.class {
                DeadlineClass::Implicit => "= T".to_string(),
                DeadlineClass::Constrained => format!("uniform in [C, T] rounded to 1/{QUANTUM}"),
                DeadlineClass::Arbitrary => format!("uniform in [C, 2T] rounded to 1/{QUANTUM}"),
            }
        )
    }
}

/// `n` utilizations summing to `total`, each at most one.
pub fn uunifast_discard(rng: &mut ChaCha8Rng, n: usize, total: f64) -> Vec<f64> {
    loop {
        let mut out = Vec::with_capacity(n);
        let mut rest = total;
        for i in 1..n {
            let next = rest * rng.random::<f64>().powf(1.0 / (n - i) as f64);
            out.push(rest - next);
            rest = next;
        }
        out.push(rest);
        if out.iter().all(|&u| u <= 1.0) {
            return out;
        }
    }
}

fn quantize(x: f64) -> Rational {
    ratio((x * QUANTUM as f64).round() as i64, QUANTUM)
}

fn uniform_between(rng: &mut ChaCha8Rng, lo: &Rational, hi: &Rational) -> Rational {
    let x = lo + (hi - lo) * quantize(rng.random::<f64>());
    let q = quantize(crate::rational::to_f64(&x));
    q.clamp(lo.clone(), hi.clone())
}

pub fn random_task_set(rng: &mut ChaCha8Rng, cfg: &GeneratorConfig) -> Result<TaskSet> {
    cfg.validate()?;
    let (lo, hi) = cfg.total_util;
    let total = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let utils = uunifast_discard(rng, cfg.n, total);
    let quantum = ratio(1, QUANTUM);
    let (ln_lo, ln_hi) = (PERIOD_MIN.ln(), PERIOD_MAX.ln());
    let mut tasks = Vec::with_capacity(cfg.n);
    for (i, u) in utils.into_iter().enumerate() {
        let t_raw = rng.random_range(ln_lo..=ln_hi).exp().round().max(PERIOD_MIN);
        let t = int(t_raw as i64);
        let c = quantize(u * t_raw).clamp(quantum.clone(), t.clone());
        let d = match cfg.class {
            DeadlineClass::Implicit => t.clone(),
            DeadlineClass::Constrained => uniform_between(rng, &c, &t),
            DeadlineClass::Arbitrary => uniform_between(rng, &c, &(int(2) * &t)),
        };
        tasks.push(SporadicTask::periodic(i as u32 + 1, c, t, d)?);
    }
    TaskSet::new(tasks)
}
