//! Sporadic task model, deadline-monotonic ordering and deadline classes.

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SchedError};
use crate::rational::{self, Rational};

/// Ordinal identifying a task; the DM tie-break uses ascending ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub u32);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "τ{}", self.0)
    }
}

/// Minimum inter-arrival time. `Infinite` means a single job is ever released.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Period {
    Finite(Rational),
    Infinite,
}

impl Period {
    pub fn finite(&self) -> Option<&Rational> {
        match self {
            Period::Finite(t) => Some(t),
            Period::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Period::Infinite)
    }

    /// Number of releases in `[0, t)` under periodic arrivals, i.e. `⌈t/T⌉`
    /// (1 for an infinite period, for any `t > 0`).
    pub fn releases_before(&self, t: &Rational) -> Rational {
        if !t.is_positive() {
            return Rational::zero();
        }
        match self {
            Period::Finite(p) => Rational::from_integer(rational::ceil_div(t, p)),
            Period::Infinite => Rational::one(),
        }
    }

    /// `T < x`, with an infinite period never smaller.
    pub fn less_than(&self, x: &Rational) -> bool {
        matches!(self, Period::Finite(t) if t < x)
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Period::Infinite),
            other => rational::parse(other).map(Period::Finite),
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Period::Finite(t) => f.write_str(&rational::format(t)),
            Period::Infinite => f.write_str("inf"),
        }
    }
}

/// Serialized form of a task: rationals as strings, `"inf"` for no period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: u32,
    pub c: String,
    pub t: String,
    pub d: String,
}

/// A sporadic task `(C, T, D)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TaskRecord", into = "TaskRecord")]
pub struct SporadicTask {
    pub id: TaskId,
    pub wcet: Rational,
    pub period: Period,
    pub deadline: Rational,
}

impl SporadicTask {
    /// Checks positivity of `C`, `D` and a finite `T`. Density is not
    /// checked here; see [`TaskSet::new`].
    pub fn new(id: u32, wcet: Rational, period: Period, deadline: Rational) -> Result<Self> {
        let id = TaskId(id);
        let invalid = |reason: &str| SchedError::InvalidTask {
            id,
            reason: reason.to_string(),
        };
        if !wcet.is_positive() {
            return Err(invalid("execution time must be positive"));
        }
        if !deadline.is_positive() {
            return Err(invalid("relative deadline must be positive"));
        }
        if let Period::Finite(t) = &period {
            if !t.is_positive() {
                return Err(invalid("period must be positive"));
            }
        }
        Ok(SporadicTask {
            id,
            wcet,
            period,
            deadline,
        })
    }

    /// Convenience constructor for finite periods.
    pub fn periodic(id: u32, wcet: Rational, period: Rational, deadline: Rational) -> Result<Self> {
        Self::new(id, wcet, Period::Finite(period), deadline)
    }

    /// `U = C/T`, zero for an infinite period.
    pub fn utilization(&self) -> Rational {
        match &self.period {
            Period::Finite(t) => &self.wcet / t,
            Period::Infinite => Rational::zero(),
        }
    }

    /// `C/D`.
    pub fn deadline_ratio(&self) -> Rational {
        &self.wcet / &self.deadline
    }

    /// `Δ = max{U, C/D}`.
    pub fn density(&self) -> Rational {
        self.utilization().max(self.deadline_ratio())
    }

    /// `D ≤ T` (always true for an infinite period).
    pub fn is_constrained(&self) -> bool {
        match &self.period {
            Period::Finite(t) => self.deadline <= *t,
            Period::Infinite => true,
        }
    }

    pub fn is_implicit(&self) -> bool {
        matches!(&self.period, Period::Finite(t) if *t == self.deadline)
    }

    pub fn scaled(&self, speed: &Rational) -> SporadicTask {
        SporadicTask {
            wcet: &self.wcet / speed,
            ..self.clone()
        }
    }

    fn dm_key(&self) -> (&Rational, TaskId) {
        (&self.deadline, self.id)
    }
}

impl TryFrom<TaskRecord> for SporadicTask {
    type Error = SchedError;

    fn try_from(r: TaskRecord) -> Result<Self> {
        SporadicTask::new(
            r.id,
            rational::parse(&r.c)?,
            Period::parse(&r.t)?,
            rational::parse(&r.d)?,
        )
    }
}

impl From<SporadicTask> for TaskRecord {
    fn from(t: SporadicTask) -> Self {
        TaskRecord {
            id: t.id.0,
            c: rational::format(&t.wcet),
            t: t.period.to_string(),
            d: rational::format(&t.deadline),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeadlineClass {
    Implicit,
    Constrained,
    Arbitrary,
}

impl DeadlineClass {
    /// Implicit ⊂ Constrained ⊂ Arbitrary.
    pub fn within(self, other: DeadlineClass) -> bool {
        use DeadlineClass::*;
        matches!(
            (self, other),
            (Implicit, _) | (Constrained, Constrained) | (Constrained, Arbitrary) | (Arbitrary, Arbitrary)
        )
    }
}

impl fmt::Display for DeadlineClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeadlineClass::Implicit => "implicit",
            DeadlineClass::Constrained => "constrained",
            DeadlineClass::Arbitrary => "arbitrary",
        })
    }
}

/// Task collection kept in deadline-monotonic order (deadline, then id).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<SporadicTask>", into = "Vec<SporadicTask>")]
pub struct TaskSet {
    tasks: Vec<SporadicTask>,
}

impl TaskSet {
    /// Admits the tasks: ids must be unique and every density `Δ ≤ 1`.
    pub fn new(tasks: Vec<SporadicTask>) -> Result<Self> {
        for t in &tasks {
            let density = t.density();
            if density > Rational::one() {
                return Err(SchedError::DensityExceeded {
                    id: t.id,
                    density: rational::format(&density),
                });
            }
        }
        Self::without_admission(tasks)
    }

    /// Like [`TaskSet::new`] but accepts overloaded tasks (`Δ > 1`), as
    /// produced by slowing a platform down.
    pub fn without_admission(tasks: Vec<SporadicTask>) -> Result<Self> {
        let mut ids: Vec<TaskId> = tasks.iter().map(|t| t.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(SchedError::DuplicateId(w[0]));
        }
        Ok(Self::sorted(tasks))
    }

    pub fn empty() -> Self {
        TaskSet::default()
    }

    fn sorted(mut tasks: Vec<SporadicTask>) -> Self {
        tasks.sort_by(|a, b| a.dm_key().cmp(&b.dm_key()));
        TaskSet { tasks }
    }

    pub fn tasks(&self) -> &[SporadicTask] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SporadicTask> {
        self.tasks.iter()
    }

    pub fn get(&self, id: TaskId) -> Option<&SporadicTask> {
        self.tasks.iter().find(|t| t.id == id)
    }

    /// Appends a task with priority lower than every current member.
    pub(crate) fn push_lowest(&mut self, task: SporadicTask) {
        debug_assert!(self.tasks.last().is_none_or(|l| l.dm_key() < task.dm_key()));
        self.tasks.push(task);
    }

    pub fn classify(&self) -> Result<DeadlineClass> {
        classify(&self.tasks)
    }

    pub fn total_utilization(&self) -> Rational {
        self.tasks.iter().map(|t| t.utilization()).sum()
    }

    pub fn max_deadline(&self) -> Option<&Rational> {
        self.tasks.iter().map(|t| &t.deadline).max()
    }

    pub fn max_finite_period(&self) -> Option<&Rational> {
        self.tasks.iter().filter_map(|t| t.period.finite()).max()
    }

    pub fn into_tasks(self) -> Vec<SporadicTask> {
        self.tasks
    }
}

impl TryFrom<Vec<SporadicTask>> for TaskSet {
    type Error = SchedError;

    fn try_from(v: Vec<SporadicTask>) -> Result<Self> {
        TaskSet::new(v)
    }
}

impl From<TaskSet> for Vec<SporadicTask> {
    fn from(ts: TaskSet) -> Self {
        ts.tasks
    }
}

impl<'a> IntoIterator for &'a TaskSet {
    type Item = &'a SporadicTask;
    type IntoIter = std::slice::Iter<'a, SporadicTask>;

    fn into_iter(self) -> Self::IntoIter {
        self.tasks.iter()
    }
}

/// Deadline class of a non-empty collection of tasks.
pub fn classify(tasks: &[SporadicTask]) -> Result<DeadlineClass> {
    if tasks.is_empty() {
        return Err(SchedError::EmptyTaskSet);
    }
    if tasks.iter().all(|t| t.is_implicit()) {
        Ok(DeadlineClass::Implicit)
    } else if tasks.iter().all(|t| t.is_constrained()) {
        Ok(DeadlineClass::Constrained)
    } else {
        Ok(DeadlineClass::Arbitrary)
    }
}

/// Stable deadline-monotonic order of arbitrary tasks.
pub fn dm_sort(tasks: Vec<SporadicTask>) -> Vec<SporadicTask> {
    TaskSet::sorted(tasks).tasks
}

/// Task set as seen on a platform of speed `s`: every `C` becomes `C/s`.
pub fn scale_speed(ts: &TaskSet, speed: &Rational) -> Result<TaskSet> {
    if !speed.is_positive() {
        return Err(SchedError::Domain(format!(
            "speed must be positive, got {}",
            rational::format(speed)
        )));
    }
    Ok(TaskSet {
        tasks: ts.tasks.iter().map(|t| t.scaled(speed)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn task(id: u32, c: Rational, t: Rational, d: Rational) -> SporadicTask {
        SporadicTask::periodic(id, c, t, d).unwrap()
    }

    #[test]
    fn classify_examples() {
        let implicit = TaskSet::new(vec![task(1, int(1), int(2), int(2))]).unwrap();
        assert_eq!(implicit.classify().unwrap(), DeadlineClass::Implicit);
        let constrained = TaskSet::new(vec![task(1, int(1), int(2), int(1))]).unwrap();
        assert_eq!(constrained.classify().unwrap(), DeadlineClass::Constrained);
        assert_eq!(TaskSet::empty().classify(), Err(SchedError::EmptyTaskSet));
    }

    #[test]
    fn infinite_period_is_constrained_not_implicit() {
        let t = SporadicTask::new(1, int(1), Period::Infinite, int(2)).unwrap();
        let ts = TaskSet::new(vec![t]).unwrap();
        assert_eq!(ts.classify().unwrap(), DeadlineClass::Constrained);
        assert_eq!(ts.tasks()[0].utilization(), int(0));
    }

    #[test]
    fn deadline_beyond_period_is_arbitrary() {
        let ts = TaskSet::new(vec![task(1, ratio(1, 300), ratio(1, 100), int(1))]).unwrap();
        assert_eq!(ts.classify().unwrap(), DeadlineClass::Arbitrary);
    }

    #[test]
    fn sorts_by_deadline_then_id() {
        let ts = TaskSet::new(vec![
            task(1, int(1), int(9), int(3)),
            task(2, int(1), int(9), int(1)),
            task(3, int(1), int(9), int(2)),
            task(4, int(1), int(9), int(1)),
        ])
        .unwrap();
        let ids: Vec<u32> = ts.iter().map(|t| t.id.0).collect();
        assert_eq!(ids, vec![2, 4, 3, 1]);
    }

    #[test]
    fn admission_rejects_density_above_one() {
        let err = TaskSet::new(vec![task(1, int(3), int(4), int(2))]).unwrap_err();
        assert!(matches!(err, SchedError::DensityExceeded { .. }));
        assert!(TaskSet::without_admission(vec![task(1, int(3), int(4), int(2))]).is_ok());
    }

    #[test]
    fn rejects_duplicates_and_nonpositive() {
        let a = task(1, int(1), int(4), int(4));
        assert_eq!(
            TaskSet::new(vec![a.clone(), a]).unwrap_err(),
            SchedError::DuplicateId(TaskId(1))
        );
        assert!(SporadicTask::periodic(1, int(0), int(1), int(1)).is_err());
        assert!(SporadicTask::periodic(1, int(1), int(0), int(1)).is_err());
        assert!(SporadicTask::periodic(1, int(1), int(1), int(-1)).is_err());
    }

    #[test]
    fn scale_speed_examples() {
        let ts = TaskSet::new(vec![task(1, int(2), int(4), int(4))]).unwrap();
        assert_eq!(scale_speed(&ts, &int(1)).unwrap(), ts);
        let half = scale_speed(&ts, &int(2)).unwrap();
        assert_eq!(half.tasks()[0].wcet, int(1));
        assert!(scale_speed(&ts, &int(0)).is_err());
        assert!(scale_speed(&ts, &int(-1)).is_err());
    }

    #[test]
    fn serde_record_round_trip() {
        let t = SporadicTask::new(7, ratio(1, 3), Period::Infinite, ratio(5, 2)).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(json, r#"{"id":7,"c":"1/3","t":"inf","d":"5/2"}"#);
        assert_eq!(serde_json::from_str::<SporadicTask>(&json).unwrap(), t);
    }
}
