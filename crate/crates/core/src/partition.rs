//! Deadline-monotonic partitioning with a pluggable per-processor test and
//! fitting strategy.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SchedError};
use crate::rational::Rational;
use crate::schedulability::{SchedTest, TestVerdict};
use crate::task::{SporadicTask, TaskId, TaskSet};

/// How to choose among the processors that pass the test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum FitStrategy {
    /// Lowest-indexed feasible processor.
    FirstFit,
    /// Uniformly random feasible processor, reproducible from `seed`.
    ArbitraryFit { seed: u64 },
    /// Feasible processor with the largest workload index.
    BestFit,
    /// Feasible processor with the smallest workload index.
    WorstFit,
    /// Fixed task → processor (1-based) map; every entry must be feasible.
    Scripted { assignment: BTreeMap<TaskId, usize> },
}

impl FitStrategy {
    pub fn scripted<I: IntoIterator<Item = (u32, usize)>>(pairs: I) -> Self {
        FitStrategy::Scripted {
            assignment: pairs.into_iter().map(|(t, p)| (TaskId(t), p)).collect(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FitStrategy::FirstFit => "first-fit",
            FitStrategy::ArbitraryFit { .. } => "arbitrary-fit",
            FitStrategy::BestFit => "best-fit",
            FitStrategy::WorstFit => "worst-fit",
            FitStrategy::Scripted { .. } => "scripted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Success,
    /// No processor accepted `task_id`; one verdict per processor.
    Failed {
        task_id: TaskId,
        per_processor_verdicts: Vec<TestVerdict>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub processors: usize,
    pub test: SchedTest,
    /// Task → processor index in `1..=processors`.
    pub assignments: BTreeMap<TaskId, usize>,
    /// `per_processor[m - 1]` is the set assigned to processor `m`.
    pub per_processor: Vec<TaskSet>,
    pub outcome: Outcome,
}

impl Partition {
    pub fn is_success(&self) -> bool {
        matches!(self.outcome, Outcome::Success)
    }

    pub fn failed_task(&self) -> Option<TaskId> {
        match &self.outcome {
            Outcome::Failed { task_id, .. } => Some(*task_id),
            Outcome::Success => None,
        }
    }

    /// Builds a successful partition from an explicit assignment of (a subset
    /// of) `ts`, without running any test.
    pub fn from_assignment(
        ts: &TaskSet,
        processors: usize,
        test: SchedTest,
        assignment: &BTreeMap<TaskId, usize>,
    ) -> Result<Self> {
        let mut per_processor = vec![TaskSet::empty(); processors];
        let mut assignments = BTreeMap::new();
        for task in ts {
            if let Some(&m) = assignment.get(&task.id) {
                if m == 0 || m > processors {
                    return Err(SchedError::Script {
                        task: task.id,
                        detail: format!("processor {m} outside 1..={processors}"),
                    });
                }
                per_processor[m - 1].push_lowest(task.clone());
                assignments.insert(task.id, m);
            }
        }
        Ok(Partition {
            processors,
            test,
            assignments,
            per_processor,
            outcome: Outcome::Success,
        })
    }
}

/// Total utilization of a processor's set.
pub fn workload_index(tm: &TaskSet) -> Rational {
    tm.total_utilization()
}

/// Assigns tasks in deadline-monotonic order; the first task goes to
/// processor 1 and each later task to a processor chosen by `fit` among
/// those where `test` accepts it.
pub fn dm_partition(
    ts: &TaskSet,
    processors: usize,
    test: SchedTest,
    fit: &FitStrategy,
) -> Result<Partition> {
    if processors == 0 {
        return Err(SchedError::Domain("need at least one processor".into()));
    }
    if !ts.is_empty() {
        let class = ts.classify()?;
        if !test.admits(class) {
            return Err(SchedError::DeadlineClass {
                test: test.name(),
                required: "constrained",
                detail: format!("task set is {class}"),
            });
        }
    }
    let mut rng = match fit {
        FitStrategy::ArbitraryFit { seed } => Some(ChaCha8Rng::seed_from_u64(*seed)),
        _ => None,
    };
    let mut p = Partition {
        processors,
        test,
        assignments: BTreeMap::new(),
        per_processor: vec![TaskSet::empty(); processors],
        outcome: Outcome::Success,
    };

    for (k, task) in ts.iter().enumerate() {
        let choice = if k == 0 && !matches!(fit, FitStrategy::Scripted { .. }) {
            let v = test.check(p.per_processor[0].tasks(), task)?;
            if v.accepted {
                Choice::Place(0)
            } else {
                Choice::Fail(vec![v; processors])
            }
        } else {
            choose(&p, task, test, fit, rng.as_mut())?
        };
        match choice {
            Choice::Place(m) => {
                p.per_processor[m].push_lowest(task.clone());
                p.assignments.insert(task.id, m + 1);
            }
            Choice::Fail(verdicts) => {
                p.outcome = Outcome::Failed {
                    task_id: task.id,
                    per_processor_verdicts: verdicts,
                };
                break;
            }
        }
    }
    Ok(p)
}

enum Choice {
    Place(usize),
    Fail(Vec<TestVerdict>),
}

fn all_verdicts(p: &Partition, task: &SporadicTask, test: SchedTest) -> Result<Vec<TestVerdict>> {
    p.per_processor
        .iter()
        .map(|tm| test.check(tm.tasks(), task))
        .collect()
}

fn choose(
    p: &Partition,
    task: &SporadicTask,
    test: SchedTest,
    fit: &FitStrategy,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<Choice> {
    if let FitStrategy::FirstFit = fit {
        let mut verdicts = Vec::with_capacity(p.processors);
        for (m, tm) in p.per_processor.iter().enumerate() {
            let v = test.check(tm.tasks(), task)?;
            if v.accepted {
                return Ok(Choice::Place(m));
            }
            verdicts.push(v);
        }
        return Ok(Choice::Fail(verdicts));
    }

    if let FitStrategy::Scripted { assignment } = fit {
        let target = assignment.get(&task.id).copied();
        if let Some(m) = target {
            if m == 0 || m > p.processors {
                return Err(SchedError::Script {
                    task: task.id,
                    detail: format!("processor {m} outside 1..={}", p.processors),
                });
            }
            if test.check(p.per_processor[m - 1].tasks(), task)?.accepted {
                return Ok(Choice::Place(m - 1));
            }
        }
        let verdicts = all_verdicts(p, task, test)?;
        if verdicts.iter().all(|v| !v.accepted) {
            return Ok(Choice::Fail(verdicts));
        }
        let detail = match target {
            Some(m) => format!(
                "scripted processor {m} rejects the task: {:?}",
                verdicts[m - 1].violated_at
            ),
            None => "no scripted processor although a feasible one exists".to_string(),
        };
        return Err(SchedError::Script {
            task: task.id,
            detail,
        });
    }

    let verdicts = all_verdicts(p, task, test)?;
    let feasible: Vec<usize> = (0..p.processors).filter(|&m| verdicts[m].accepted).collect();
    if feasible.is_empty() {
        return Ok(Choice::Fail(verdicts));
    }
    let load = |m: usize| workload_index(&p.per_processor[m]);
    let m = match fit {
        FitStrategy::ArbitraryFit { .. } => {
            let rng = rng.expect("arbitrary fit carries a generator");
            feasible[rng.random_range(0..feasible.len())]
        }
        // Ties go to the lowest index: only a strictly better load replaces.
        FitStrategy::BestFit => feasible
            .iter()
            .copied()
            .fold(None::<(usize, Rational)>, |best, m| {
                let l = load(m);
                match best {
                    Some((_, ref bl)) if l <= *bl => best,
                    _ => Some((m, l)),
                }
            })
            .map(|(m, _)| m)
            .expect("non-empty"),
        FitStrategy::WorstFit => feasible
            .iter()
            .copied()
            .fold(None::<(usize, Rational)>, |best, m| {
                let l = load(m);
                match best {
                    Some((_, ref bl)) if l >= *bl => best,
                    _ => Some((m, l)),
                }
            })
            .map(|(m, _)| m)
            .expect("non-empty"),
        FitStrategy::FirstFit | FitStrategy::Scripted { .. } => unreachable!(),
    };
    Ok(Choice::Place(m))
}

/// Re-runs `test` for every task against the higher-priority tasks on its
/// processor. False for failed partitions or on any test error.
pub fn verify_partition(p: &Partition, test: SchedTest) -> bool {
    if !p.is_success() {
        return false;
    }
    p.per_processor.iter().all(|tm| {
        let tasks = tm.tasks();
        (0..tasks.len()).all(|k| {
            test.check(&tasks[..k], &tasks[k])
                .map(|v| v.accepted)
                .unwrap_or(false)
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn itask(id: u32, c: i64, t: i64, d: i64) -> SporadicTask {
        SporadicTask::periodic(id, int(c), int(t), int(d)).unwrap()
    }

    #[test]
    fn worst_fit_spreads_incompatible_tasks() {
        let ts = TaskSet::new(vec![itask(1, 1, 1, 1), itask(2, 1, 1, 1)]).unwrap();
        for test in SchedTest::ALL {
            let p = dm_partition(&ts, 2, test, &FitStrategy::WorstFit).unwrap();
            assert!(p.is_success(), "{test}");
            assert_eq!(p.assignments[&TaskId(1)], 1);
            assert_eq!(p.assignments[&TaskId(2)], 2);
            assert!(verify_partition(&p, test));
        }
    }

    #[test]
    fn failure_records_every_processor() {
        let ts = TaskSet::new((1..=3).map(|i| itask(i, 1, 1, 1)).collect()).unwrap();
        let p = dm_partition(&ts, 2, SchedTest::TdaConstrained, &FitStrategy::FirstFit).unwrap();
        match &p.outcome {
            Outcome::Failed {
                task_id,
                per_processor_verdicts,
            } => {
                assert_eq!(*task_id, TaskId(3));
                assert_eq!(per_processor_verdicts.len(), 2);
                assert!(per_processor_verdicts.iter().all(|v| !v.accepted));
            }
            Outcome::Success => panic!("expected failure"),
        }
        assert!(!verify_partition(&p, SchedTest::TdaConstrained));
    }

    #[test]
    fn overloaded_processor_fails_verification() {
        let ts = TaskSet::new(vec![itask(1, 1, 1, 1), itask(2, 1, 1, 1)]).unwrap();
        let assignment = BTreeMap::from([(TaskId(1), 1), (TaskId(2), 1)]);
        let p = Partition::from_assignment(&ts, 2, SchedTest::TdaConstrained, &assignment).unwrap();
        assert!(!verify_partition(&p, SchedTest::TdaConstrained));
    }

    #[test]
    fn best_fit_packs_tightest_processor() {
        // 1 and 2 go to separate processors (each 3/4 utilization against
        // the other), then 3 fits both and best fit picks the fuller one.
        let ts = TaskSet::new(vec![
            itask(1, 3, 4, 4),
            itask(2, 2, 4, 4),
            itask(3, 1, 8, 8),
        ])
        .unwrap();
        let p = dm_partition(&ts, 2, SchedTest::TdaConstrained, &FitStrategy::BestFit).unwrap();
        assert!(p.is_success());
        assert_eq!(p.assignments[&TaskId(2)], 2);
        assert_eq!(p.assignments[&TaskId(3)], 1);
        let p = dm_partition(&ts, 2, SchedTest::TdaConstrained, &FitStrategy::WorstFit).unwrap();
        assert_eq!(p.assignments[&TaskId(3)], 2);
    }

    #[test]
    fn scripted_errors_on_infeasible_choice() {
        let ts = TaskSet::new(vec![itask(1, 1, 1, 1), itask(2, 1, 2, 2)]).unwrap();
        let fit = FitStrategy::scripted([(1, 1), (2, 1)]);
        let err = dm_partition(&ts, 2, SchedTest::TdaConstrained, &fit).unwrap_err();
        assert!(matches!(err, SchedError::Script { task: TaskId(2), .. }));
        let fit = FitStrategy::scripted([(1, 1), (2, 2)]);
        assert!(dm_partition(&ts, 2, SchedTest::TdaConstrained, &fit).unwrap().is_success());
        let fit = FitStrategy::scripted([(1, 1), (2, 3)]);
        assert!(dm_partition(&ts, 2, SchedTest::TdaConstrained, &fit).is_err());
    }

    #[test]
    fn arbitrary_fit_is_deterministic_per_seed() {
        let ts = TaskSet::new((1..=12).map(|i| itask(i, 1, 10, 10)).collect()).unwrap();
        let run = |seed| {
            dm_partition(&ts, 4, SchedTest::TdaConstrained, &FitStrategy::ArbitraryFit { seed })
                .unwrap()
        };
        assert_eq!(run(7), run(7));
        let spread: std::collections::BTreeSet<usize> = run(7).assignments.values().copied().collect();
        assert!(spread.len() > 1);
    }

    #[test]
    fn test_must_admit_deadline_class() {
        let ts = TaskSet::new(vec![itask(1, 1, 2, 3)]).unwrap();
        assert!(dm_partition(&ts, 1, SchedTest::TdaConstrained, &FitStrategy::FirstFit).is_err());
        assert!(dm_partition(&ts, 1, SchedTest::BusyWindowExact, &FitStrategy::FirstFit).is_ok());
    }

    #[test]
    fn workload_index_sums_utilization() {
        assert_eq!(workload_index(&TaskSet::empty()), int(0));
        let ts = TaskSet::new(vec![itask(1, 1, 2, 2), itask(2, 1, 4, 4)]).unwrap();
        assert_eq!(workload_index(&ts), ratio(3, 4));
    }

    #[test]
    fn partition_json_round_trip() {
        let ts = TaskSet::new(vec![itask(1, 1, 2, 2), itask(2, 1, 4, 4)]).unwrap();
        let p = dm_partition(&ts, 2, SchedTest::BiniArbitrary, &FitStrategy::WorstFit).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<Partition>(&json).unwrap(), p);
    }
}
