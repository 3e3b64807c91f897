//! Demand bound functions and the necessary-speed lower bound.

use std::collections::BTreeSet;
use std::io::Write;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SchedError};
use crate::rational::{self, Rational};
use crate::task::{Period, SporadicTask, TaskSet};

/// Default cap on the number of step points enumerated below a horizon.
pub const DEFAULT_STEP_POINT_CAP: usize = 1_000_000;

/// `dbf(τ, t) = max{0, ⌊(t − D)/T⌋ + 1}·C`; an infinite period yields at
/// most one job.
pub fn dbf(task: &SporadicTask, t: &Rational) -> Result<Rational> {
    if t.is_negative() {
        return Err(SchedError::Domain(format!(
            "dbf evaluated at negative t = {}",
            rational::format(t)
        )));
    }
    Ok(dbf_unchecked(task, t))
}

pub(crate) fn dbf_unchecked(task: &SporadicTask, t: &Rational) -> Rational {
    if *t < task.deadline {
        return Rational::zero();
    }
    match &task.period {
        Period::Infinite => task.wcet.clone(),
        Period::Finite(p) => {
            let jobs = rational::floor_div(&(t - &task.deadline), p) + 1;
            Rational::from_integer(jobs) * &task.wcet
        }
    }
}

/// `Σ dbf(τ, t)` over the set.
pub fn dbf_total(tasks: &[SporadicTask], t: &Rational) -> Result<Rational> {
    if t.is_negative() {
        return Err(SchedError::Domain(format!(
            "dbf evaluated at negative t = {}",
            rational::format(t)
        )));
    }
    Ok(tasks.iter().map(|task| dbf_unchecked(task, t)).sum())
}

/// All absolute deadlines `D + kT ≤ horizon` of the synchronous arrival
/// pattern, ascending and deduplicated.
pub fn step_points(tasks: &[SporadicTask], horizon: &Rational) -> Result<Vec<Rational>> {
    step_points_capped(tasks, horizon, DEFAULT_STEP_POINT_CAP)
}

pub fn step_points_capped(
    tasks: &[SporadicTask],
    horizon: &Rational,
    cap: usize,
) -> Result<Vec<Rational>> {
    if !horizon.is_positive() {
        return Err(SchedError::Domain("horizon must be positive".into()));
    }
    let overflow = || SchedError::ResourceCap {
        what: "step points below horizon",
        cap: cap as u64,
    };
    let mut points = BTreeSet::new();
    let mut generated = 0usize;
    for task in tasks {
        let mut t = task.deadline.clone();
        while t <= *horizon {
            generated += 1;
            if generated > cap {
                return Err(overflow());
            }
            points.insert(t.clone());
            match &task.period {
                Period::Finite(p) => t += p,
                Period::Infinite => break,
            }
        }
    }
    Ok(points.into_iter().collect())
}

/// `2·max D + 2·max finite T`.
pub fn default_horizon(ts: &TaskSet) -> Rational {
    let two = rational::int(2);
    let d = ts.max_deadline().cloned().unwrap_or_default();
    let t = ts.max_finite_period().cloned().unwrap_or_default();
    &two * d + &two * t
}

/// Lower bound on the speed any algorithm needs on `M` processors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedBoundReport {
    pub dbf_term: f64,
    #[serde(with = "rational::serde_str")]
    pub dbf_term_exact: Rational,
    pub util_term: f64,
    #[serde(with = "rational::serde_str")]
    pub util_term_exact: Rational,
    pub density_term: f64,
    pub bound: f64,
    #[serde(with = "rational::serde_str::option")]
    pub witness_t: Option<Rational>,
    #[serde(with = "rational::serde_str")]
    pub horizon_used: Rational,
}

impl SpeedBoundReport {
    /// Speedup a failing algorithm is certified to need: `1/bound`.
    pub fn speedup(&self) -> f64 {
        1.0 / self.bound
    }
}

/// Evaluates `max{max_t Σdbf/(Mt), ΣU/M, max Δ}` with the dbf term taken over
/// every step point up to `horizon` (the default horizon when `None`).
pub fn speed_lower_bound(
    ts: &TaskSet,
    processors: usize,
    horizon: Option<&Rational>,
) -> Result<SpeedBoundReport> {
    if processors == 0 {
        return Err(SchedError::Domain("need at least one processor".into()));
    }
    let horizon = match horizon {
        Some(h) => h.clone(),
        None => default_horizon(ts),
    };
    let m = rational::int(processors as i64);

    let mut dbf_term = Rational::zero();
    let mut witness_t = None;
    if !ts.is_empty() {
        for t in step_points(ts.tasks(), &horizon)? {
            let ratio = dbf_total(ts.tasks(), &t)? / (&m * &t);
            if ratio > dbf_term {
                dbf_term = ratio;
                witness_t = Some(t);
            }
        }
    }
    let util = ts.total_utilization() / &m;
    let density = ts
        .iter()
        .map(|t| t.density())
        .max()
        .unwrap_or_default();

    let (dbf_f, util_f, dens_f) = (
        rational::to_f64(&dbf_term),
        rational::to_f64(&util),
        rational::to_f64(&density),
    );
    let bound = dbf_term.clone().max(util.clone()).max(density);
    Ok(SpeedBoundReport {
        dbf_term: dbf_f,
        dbf_term_exact: dbf_term,
        util_term: util_f,
        util_term_exact: util,
        density_term: dens_f,
        bound: rational::to_f64(&bound),
        witness_t,
        horizon_used: horizon,
    })
}

/// Writes `t, Σdbf(t)` rows at every step point up to the horizon, as exact
/// rationals.
pub fn write_dbf_csv<W: Write>(out: W, ts: &TaskSet, horizon: &Rational) -> Result<()> {
    let io = |e: csv::Error| SchedError::Domain(format!("csv output failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "value"]).map_err(io)?;
    for t in step_points(ts.tasks(), horizon)? {
        let total = dbf_total(ts.tasks(), &t)?;
        w.write_record([rational::format(&t), rational::format(&total)])
            .map_err(io)?;
    }
    w.flush()
        .map_err(|e| SchedError::Domain(format!("csv output failed: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn task(id: u32, c: i64, t: i64, d: i64) -> SporadicTask {
        SporadicTask::periodic(id, int(c), int(t), int(d)).unwrap()
    }

    #[test]
    fn dbf_examples() {
        let tk = task(1, 2, 5, 7);
        assert_eq!(dbf(&tk, &int(6)).unwrap(), int(0));
        assert_eq!(dbf(&tk, &int(7)).unwrap(), int(2));
        assert_eq!(dbf(&tk, &int(12)).unwrap(), int(4));
        assert!(dbf(&tk, &int(-1)).is_err());
    }

    #[test]
    fn dbf_infinite_period_single_job() {
        let tk = SporadicTask::new(1, int(3), Period::Infinite, int(2)).unwrap();
        assert_eq!(dbf(&tk, &ratio(3, 2)).unwrap(), int(0));
        assert_eq!(dbf(&tk, &int(2)).unwrap(), int(3));
        assert_eq!(dbf(&tk, &int(1000)).unwrap(), int(3));
    }

    #[test]
    fn dbf_total_empty_is_zero() {
        assert_eq!(dbf_total(&[], &int(5)).unwrap(), int(0));
    }

    #[test]
    fn step_point_examples() {
        let pts = step_points(&[task(1, 1, 2, 1)], &int(5)).unwrap();
        assert_eq!(pts, vec![int(1), int(3), int(5)]);
        let inf = SporadicTask::new(1, int(1), Period::Infinite, int(2)).unwrap();
        assert_eq!(step_points(&[inf], &int(10)).unwrap(), vec![int(2)]);
    }

    #[test]
    fn step_point_cap_is_an_error() {
        let err = step_points_capped(&[task(1, 1, 1, 1)], &int(100), 10).unwrap_err();
        assert_eq!(
            err,
            SchedError::ResourceCap {
                what: "step points below horizon",
                cap: 10
            }
        );
    }

    #[test]
    fn full_utilization_single_task() {
        let ts = TaskSet::new(vec![task(1, 1, 1, 1)]).unwrap();
        let r = speed_lower_bound(&ts, 1, None).unwrap();
        assert_eq!(r.bound, 1.0);
        assert_eq!(r.dbf_term_exact, int(1));
    }

    #[test]
    fn bound_is_max_of_terms() {
        let ts = TaskSet::new(vec![task(1, 1, 10, 2), task(2, 3, 4, 4)]).unwrap();
        let r = speed_lower_bound(&ts, 2, None).unwrap();
        assert_eq!(r.bound, r.dbf_term.max(r.util_term).max(r.density_term));
        assert_eq!(r.horizon_used, int(2 * 4 + 2 * 10));
    }

    #[test]
    fn csv_rows_at_step_points() {
        let ts = TaskSet::new(vec![task(1, 1, 2, 1)]).unwrap();
        let mut buf = Vec::new();
        write_dbf_csv(&mut buf, &ts, &int(5)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "t,value\n1,1\n3,2\n5,3\n");
    }
}
