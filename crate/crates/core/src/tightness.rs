//! Generators for the tight instances of the speedup bounds, and the dbf♯
//! over-approximation used to analyse the constrained-deadline one.

use std::io::Write;

use num_traits::{One, ToPrimitive};
use rayon::prelude::*;
use serde::Serialize;

use crate::demand::{speed_lower_bound, SpeedBoundReport};
use crate::error::{Result, SchedError};
use crate::partition::{dm_partition, FitStrategy, Partition};
use crate::rational::{self, int, ratio, Rational};
use crate::schedulability::SchedTest;
use crate::speedup::w_half;
use crate::task::{Period, SporadicTask, TaskId, TaskSet};

/// Default ε for the constrained-deadline instance.
pub fn default_constrained_epsilon() -> Rational {
    ratio(1, 1_000_000)
}

/// `f = 2W(1/2)`, solving `ln(1/f) = f/2`.
pub fn tight_f() -> f64 {
    2.0 * w_half()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TightInstance {
    pub task_set: TaskSet,
    pub processors: usize,
    pub epsilon: Rational,
    pub test: SchedTest,
    pub fit: FitStrategy,
    pub expected_fail_id: TaskId,
    pub predicted_speedup: f64,
    /// Rational `f` used for task construction (constrained instance only).
    pub f: Option<Rational>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Reproduction {
    pub failed_at: Option<TaskId>,
    pub expected_fail_id: TaskId,
    pub fails_as_expected: bool,
    pub speed_bound: SpeedBoundReport,
    pub measured_speedup: f64,
    pub predicted_speedup: f64,
}

impl TightInstance {
    pub fn partition(&self) -> Result<Partition> {
        dm_partition(&self.task_set, self.processors, self.test, &self.fit)
    }

    /// Runs the designated partition and the speed lower bound.
    pub fn reproduce(&self) -> Result<(Partition, Reproduction)> {
        let p = self.partition()?;
        let speed_bound = speed_lower_bound(&self.task_set, self.processors, None)?;
        let failed_at = p.failed_task();
        let rep = Reproduction {
            failed_at,
            expected_fail_id: self.expected_fail_id,
            fails_as_expected: failed_at == Some(self.expected_fail_id),
            measured_speedup: speed_bound.speedup(),
            speed_bound,
            predicted_speedup: self.predicted_speedup,
        };
        Ok((p, rep))
    }
}

fn check_small_epsilon(epsilon: &Rational) -> Result<()> {
    if *epsilon <= int(0) || *epsilon >= ratio(1, 10) {
        return Err(SchedError::Domain(format!(
            "epsilon must lie in (0, 1/10), got {}",
            rational::format(epsilon)
        )));
    }
    Ok(())
}

fn check_processors(m: usize, min: usize) -> Result<()> {
    if m < min {
        return Err(SchedError::Domain(format!("need at least {min} processors, got {m}")));
    }
    Ok(())
}

fn implicit(id: usize, c: Rational) -> Result<SporadicTask> {
    SporadicTask::periodic(id as u32, c, int(1), int(1))
}

fn one_shot(id: usize, c: Rational, d: Rational) -> Result<SporadicTask> {
    SporadicTask::new(id as u32, c, Period::Infinite, d)
}

/// `M` light tasks `(1/(3M), 1, 1)` followed by `M` heavy tasks
/// `((1+ε)/3, 1, 1)`; first fit with the linear arbitrary-deadline test
/// fails at task `2M`.
pub fn gen_arbitrary_ff(m: usize, epsilon: &Rational) -> Result<TightInstance> {
    check_processors(m, 2)?;
    check_small_epsilon(epsilon)?;
    let mm = int(m as i64);
    let light = Rational::one() / (int(3) * &mm);
    let heavy = (Rational::one() + epsilon) / int(3);
    let mut tasks = Vec::with_capacity(2 * m);
    for i in 1..=m {
        tasks.push(implicit(i, light.clone())?);
    }
    for i in m + 1..=2 * m {
        tasks.push(implicit(i, heavy.clone())?);
    }
    let (mf, ef) = (m as f64, rational::to_f64(epsilon));
    let gamma = 3.0 * ef * mf * mf / ((mf + 1.0) * (mf + 1.0 + ef * mf));
    Ok(TightInstance {
        task_set: TaskSet::new(tasks)?,
        processors: m,
        epsilon: epsilon.clone(),
        test: SchedTest::FbbArbitrary,
        fit: FitStrategy::FirstFit,
        expected_fail_id: TaskId(2 * m as u32),
        predicted_speedup: 3.0 - 3.0 / (mf + 1.0) - gamma,
        f: None,
    })
}

/// `M` one-shot tasks `(1/(3M), ∞, 1)`, `M` tasks `(ε/3, ε, 1)` and `M`
/// one-shot tasks `((1+ε)/3, ∞, 1)`, with the adversarial assignment:
/// tasks `1..=M+1` on processor 1, then tasks `i` and `i+M−1` on processor
/// `i−M` for `i = M+2..=2M`. Task `3M` fits nowhere.
pub fn gen_arbitrary_af(m: usize, epsilon: &Rational) -> Result<TightInstance> {
    check_processors(m, 2)?;
    check_small_epsilon(epsilon)?;
    let inv = epsilon.recip();
    if !inv.is_integer() {
        return Err(SchedError::Domain(format!(
            "1/epsilon must be an integer, got {}",
            rational::format(&inv)
        )));
    }
    let mm = int(m as i64);
    let mut tasks = Vec::with_capacity(3 * m);
    for i in 1..=m {
        tasks.push(one_shot(i, Rational::one() / (int(3) * &mm), int(1))?);
    }
    for i in m + 1..=2 * m {
        tasks.push(SporadicTask::periodic(i as u32, epsilon / int(3), epsilon.clone(), int(1))?);
    }
    for i in 2 * m + 1..=3 * m {
        tasks.push(one_shot(i, (Rational::one() + epsilon) / int(3), int(1))?);
    }
    let mut script: Vec<(u32, usize)> = (1..=m + 1).map(|i| (i as u32, 1)).collect();
    for i in m + 2..=2 * m {
        script.push((i as u32, i - m));
        script.push(((i + m - 1) as u32, i - m));
    }
    let (mf, ef) = (m as f64, rational::to_f64(epsilon));
    Ok(TightInstance {
        task_set: TaskSet::new(tasks)?,
        processors: m,
        epsilon: epsilon.clone(),
        test: SchedTest::BusyWindowExact,
        fit: FitStrategy::scripted(script),
        expected_fail_id: TaskId(3 * m as u32),
        predicted_speedup: 3.0 * mf / (mf + 2.0 * ef * mf + 1.0),
        f: None,
    })
}

pub fn gen_constrained(m: usize) -> Result<TightInstance> {
    gen_constrained_with(m, &default_constrained_epsilon())
}

/// `M²` implicit-deadline tasks in `M` period groups spread over `[f, 1]`,
/// `M²` one-shot tasks sharing `1.5f − 1` per processor, and a final
/// one-shot task `(0.5f + ε, ∞, 1)` that TDA rejects everywhere once task
/// `i + jM` sits on processor `i`.
pub fn gen_constrained_with(m: usize, epsilon: &Rational) -> Result<TightInstance> {
    check_processors(m, 10)?;
    check_small_epsilon(epsilon)?;
    let f = rational::from_f64_digits(tight_f(), 12);
    let mm = int(m as i64);
    let mu = (Rational::one() - &f) / int(m as i64 - 1);
    let m2 = m * m;
    let mut tasks = Vec::with_capacity(2 * m2 + 1);
    for i in 1..=m2 {
        let group = (i - 1) / m;
        let period = &f + int(group as i64) * &mu;
        tasks.push(SporadicTask::periodic(i as u32, mu.clone(), period.clone(), period)?);
    }
    let filler = (ratio(3, 2) * &f - Rational::one()) / &mm;
    for i in m2 + 1..=2 * m2 {
        tasks.push(one_shot(i, filler.clone(), int(1))?);
    }
    let n = 2 * m2 + 1;
    tasks.push(one_shot(n, &f / int(2) + epsilon, int(1))?);
    let script = (1..=m).flat_map(|i| (0..2 * m).map(move |j| ((i + j * m) as u32, i)));
    Ok(TightInstance {
        task_set: TaskSet::new(tasks)?,
        processors: m,
        epsilon: epsilon.clone(),
        test: SchedTest::TdaConstrained,
        fit: FitStrategy::scripted(script),
        expected_fail_id: TaskId(n as u32),
        predicted_speedup: 1.0 / w_half(),
        f: Some(f),
    })
}

/// Contribution of the `ℓ`-th jobs of the periodic tasks of one processor.
pub fn dbf_sharp_pile(ell: u64, t: f64, f: f64) -> f64 {
    let l = ell as f64;
    if t < l * f {
        0.0
    } else if t < l {
        (t - l * f) / l
    } else {
        1.0 - f
    }
}

/// `1.5f − 1 + Σ_{ℓ ≤ t/f} pile(ℓ, t)`, valid for `t ≥ 1`.
pub fn dbf_sharp(t: f64, f: f64) -> Result<f64> {
    if !(t >= 1.0) {
        return Err(SchedError::Domain(format!("dbf_sharp needs t >= 1, got {t}")));
    }
    let piles = (t / f).floor() as u64;
    Ok(1.5 * f - 1.0 + (1..=piles).map(|l| dbf_sharp_pile(l, t, f)).sum::<f64>())
}

/// Closed form of `dbf_sharp` at an integer `ℓ ≥ 5`:
/// `1.5f − 1 + ℓ − ⌊ℓ/f⌋f + Σ_{i=ℓ+1..⌊ℓ/f⌋} ℓ/i`.
pub fn dbf_sharp_integer(ell: u64, f: f64) -> Result<f64> {
    if ell < 5 {
        return Err(SchedError::Domain(format!("dbf_sharp_integer needs ell >= 5, got {ell}")));
    }
    let l = ell as f64;
    let top = (l / f).floor() as u64;
    let tail: f64 = (ell + 1..=top).map(|i| l / i as f64).sum();
    Ok(1.5 * f - 1.0 + l - top as f64 * f + tail)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    /// `values[ℓ-1] = dbf♯(ℓ)/ℓ`.
    pub values: Vec<f64>,
    /// First `ℓ ≥ 5` with `dbf♯(ℓ+1)/(ℓ+1) < dbf♯(ℓ)/ℓ`, if any.
    pub first_decrease: Option<u64>,
    pub integer_max: f64,
    pub integer_argmax: u64,
    /// `f/2`, the limit as `ℓ → ∞`.
    pub limit: f64,
    pub global_max: f64,
    /// Largest excess of a dense sample on `[ℓ, ℓ+1]`, `ℓ = 1..5`, over the
    /// larger endpoint; non-positive when every segment peaks at an endpoint.
    pub segment_excess: f64,
}

impl ScanReport {
    pub fn monotone_from_5(&self) -> bool {
        self.first_decrease.is_none()
    }

    pub fn ratio(&self, ell: u64) -> f64 {
        self.values[ell as usize - 1]
    }
}

pub fn ratio_scan(ell_max: u64, f: f64) -> Result<ScanReport> {
    if ell_max < 6 {
        return Err(SchedError::Domain(format!("ratio_scan needs ell_max >= 6, got {ell_max}")));
    }
    let values: Vec<f64> = (1..=ell_max)
        .into_par_iter()
        .map(|l| dbf_sharp(l as f64, f).map(|v| v / l as f64))
        .collect::<Result<_>>()?;
    let first_decrease = (5..ell_max)
        .find(|&l| values[l as usize] < values[l as usize - 1]);
    let (argmax, integer_max) = values
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });

    const SAMPLES: u32 = 1000;
    let mut segment_excess = f64::MIN;
    for l in 1..=5u32 {
        let lo = values[l as usize - 1];
        let hi = values[l as usize];
        for s in 0..=SAMPLES {
            let t = l as f64 + s as f64 / SAMPLES as f64;
            let v = dbf_sharp(t, f)? / t;
            segment_excess = segment_excess.max(v - lo.max(hi));
        }
    }
    Ok(ScanReport {
        first_decrease,
        integer_max,
        integer_argmax: argmax as u64 + 1,
        limit: f / 2.0,
        global_max: values[0].max(f / 2.0),
        segment_excess,
        values,
    })
}

/// `(Y1(b), Y2(b))`, the two case expressions bounding
/// `dbf♯(ℓ+1)/(ℓ+1) − dbf♯(ℓ)/ℓ` with `b = ℓ/f − ⌊ℓ/f⌋`.
pub fn y_case_values(ell: u64, b: f64, f: f64) -> Result<(f64, f64)> {
    if ell < 5 {
        return Err(SchedError::Domain(format!("y_case_values needs ell >= 5, got {ell}")));
    }
    if !(0.0..1.0).contains(&b) {
        return Err(SchedError::Domain(format!("y_case_values needs 0 <= b < 1, got {b}")));
    }
    let l = ell as f64;
    let q = l / f - b;
    let y1 = ((q * f - 1.5 * f + 1.0) / (l * (l + 1.0))) - (f + 1.0) / (l + 1.0) + 1.0 / (q + 1.0);
    let y2 = (l - b * f - 1.5 * f + 1.0) / (l * (l + 1.0)) - (2.0 * f + 1.0) / (l + 1.0)
        + 1.0 / (q + 1.0)
        + 1.0 / (q + 2.0);
    Ok((y1, y2))
}

/// Evenly spaced samples `from, from+step, …` up to `to` inclusive.
pub fn grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(to >= from) || !from.is_finite() || !to.is_finite() {
        return Err(SchedError::Domain(format!("bad range [{from}, {to}] step {step}")));
    }
    let n = ((to - from) / step + 1e-9).floor().to_u64().unwrap_or(0);
    Ok((0..=n).map(|i| from + i as f64 * step).collect())
}

fn csv_err(e: impl std::fmt::Display) -> SchedError {
    SchedError::Domain(format!("csv output failed: {e}"))
}

/// Writes `t, dbf♯(t)` (or `t, dbf♯(t)/t` when `ratio` is set) over a grid.
pub fn write_dbf_sharp_csv<W: Write>(out: W, ts: &[f64], f: f64, ratio: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "value"]).map_err(csv_err)?;
    for &t in ts {
        let v = dbf_sharp(t, f)?;
        let v = if ratio { v / t } else { v };
        w.write_record([t.to_string(), v.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

/// Writes `ell, dbf♯(ℓ)/ℓ` for `ℓ = from..=to`.
pub fn write_ratio_csv<W: Write>(out: W, from: u64, to: u64, f: f64) -> Result<()> {
    if from == 0 || to < from {
        return Err(SchedError::Domain(format!("bad integer range {from}..={to}")));
    }
    let values: Vec<f64> = (from..=to)
        .into_par_iter()
        .map(|l| dbf_sharp(l as f64, f).map(|v| v / l as f64))
        .collect::<Result<_>>()?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["ell", "value"]).map_err(csv_err)?;
    for (l, v) in (from..=to).zip(values) {
        w.write_record([l.to_string(), v.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}
