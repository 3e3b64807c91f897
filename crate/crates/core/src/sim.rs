//! Event-driven preemptive fixed-priority simulation on one processor, in
//! exact rational time. Used as an independent oracle for the exact tests.

use std::collections::VecDeque;
use std::io::Write;

use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SchedError};
use crate::rational::{self, Rational};
use crate::task::{classify, DeadlineClass, Period, SporadicTask, TaskId, TaskSet};

/// Cap on events in one simulation.
pub const DEFAULT_EVENT_CAP: usize = 10_000_000;
/// Cap on candidate jobs followed through one busy period.
pub const DEFAULT_BUSY_PERIOD_JOB_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Release,
    Start,
    Preempt,
    Finish,
    DeadlineMiss,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimEvent {
    #[serde(with = "rational::serde_str")]
    pub time: Rational,
    pub kind: EventKind,
    pub task: TaskId,
    pub job: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimTrace {
    pub events: Vec<SimEvent>,
    #[serde(with = "rational::serde_str")]
    pub horizon: Rational,
    #[serde(with = "rational::serde_str")]
    pub speed: Rational,
}

impl SimTrace {
    pub fn finish_time(&self, task: TaskId, job: u64) -> Option<&Rational> {
        self.find(EventKind::Finish, task, job)
    }

    pub fn release_time(&self, task: TaskId, job: u64) -> Option<&Rational> {
        self.find(EventKind::Release, task, job)
    }

    fn find(&self, kind: EventKind, task: TaskId, job: u64) -> Option<&Rational> {
        self.events
            .iter()
            .find(|e| e.kind == kind && e.task == task && e.job == job)
            .map(|e| &e.time)
    }

    pub fn misses(&self) -> impl Iterator<Item = &SimEvent> {
        self.events.iter().filter(|e| e.kind == EventKind::DeadlineMiss)
    }

    pub fn has_miss(&self) -> bool {
        self.misses().next().is_some()
    }

    /// Maximal execution intervals `(start, end, task, job)` in time order.
    pub fn execution_intervals(&self) -> Vec<(Rational, Rational, TaskId, u64)> {
        let mut out = Vec::new();
        let mut open: Option<(Rational, TaskId, u64)> = None;
        for e in &self.events {
            match e.kind {
                EventKind::Start => open = Some((e.time.clone(), e.task, e.job)),
                EventKind::Preempt | EventKind::Finish => {
                    if let Some((s, task, job)) = open.take() {
                        if s < e.time {
                            out.push((s, e.time.clone(), task, job));
                        }
                    }
                }
                _ => {}
            }
        }
        if let Some((s, task, job)) = open {
            if s < self.horizon {
                out.push((s, self.horizon.clone(), task, job));
            }
        }
        out
    }

    /// One JSON object per event, newline separated.
    pub fn write_json_lines<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

struct Job {
    index: u64,
    release: Rational,
    remaining: Rational,
    deadline: Rational,
    missed: bool,
}

struct Engine<'a> {
    tasks: &'a [SporadicTask],
    exec: Vec<Rational>,
    queues: Vec<VecDeque<Job>>,
    next_release: Vec<Option<Rational>>,
    released: Vec<u64>,
    running: Option<usize>,
    now: Rational,
    events: Vec<SimEvent>,
    event_count: usize,
    event_cap: usize,
    record: bool,
}

impl<'a> Engine<'a> {
    /// `tasks` in priority order, highest first.
    fn new(tasks: &'a [SporadicTask], speed: &Rational) -> Self {
        Engine {
            tasks,
            exec: tasks.iter().map(|t| &t.wcet / speed).collect(),
            queues: tasks.iter().map(|_| VecDeque::new()).collect(),
            next_release: tasks.iter().map(|_| Some(Rational::zero())).collect(),
            released: vec![0; tasks.len()],
            running: None,
            now: Rational::zero(),
            events: Vec::new(),
            event_count: 0,
            event_cap: DEFAULT_EVENT_CAP,
            record: true,
        }
    }

    fn emit(&mut self, kind: EventKind, i: usize, job: u64) -> Result<()> {
        if self.event_count >= self.event_cap {
            return Err(SchedError::ResourceCap {
                what: "simulation events",
                cap: self.event_cap as u64,
            });
        }
        self.event_count += 1;
        if !self.record {
            return Ok(());
        }
        self.events.push(SimEvent {
            time: self.now.clone(),
            kind,
            task: self.tasks[i].id,
            job,
        });
        Ok(())
    }

    fn idle(&self) -> bool {
        self.queues.iter().all(VecDeque::is_empty)
    }

    /// Releases due at `now`, when strictly before `release_limit`.
    fn release_due(&mut self, release_limit: Option<&Rational>) -> Result<()> {
        for i in 0..self.tasks.len() {
            let due = match &self.next_release[i] {
                Some(r) => *r == self.now && release_limit.is_none_or(|h| r < h),
                None => false,
            };
            if !due {
                continue;
            }
            let index = self.released[i];
            self.released[i] += 1;
            self.queues[i].push_back(Job {
                index,
                release: self.now.clone(),
                remaining: self.exec[i].clone(),
                deadline: &self.now + &self.tasks[i].deadline,
                missed: false,
            });
            self.next_release[i] = match &self.tasks[i].period {
                Period::Finite(p) => Some(&self.now + p),
                Period::Infinite => None,
            };
            self.emit(EventKind::Release, i, index)?;
        }
        Ok(())
    }

    fn dispatch(&mut self) -> Result<()> {
        let next = self.queues.iter().position(|q| !q.is_empty());
        if next == self.running {
            return Ok(());
        }
        if let Some(old) = self.running {
            if let Some(job) = self.queues[old].front() {
                let index = job.index;
                self.emit(EventKind::Preempt, old, index)?;
            }
        }
        if let Some(new) = next {
            let index = self.queues[new].front().expect("non-empty").index;
            self.emit(EventKind::Start, new, index)?;
        }
        self.running = next;
        Ok(())
    }

    fn next_event_time(&self, release_limit: Option<&Rational>) -> Option<Rational> {
        let finish = self
            .running
            .map(|i| &self.now + &self.queues[i].front().expect("running job").remaining);
        let release = self
            .next_release
            .iter()
            .flatten()
            .filter(|r| release_limit.is_none_or(|h| *r < h))
            .min()
            .cloned();
        let deadline = self
            .queues
            .iter()
            .flatten()
            .filter(|j| !j.missed && j.deadline > self.now)
            .map(|j| j.deadline.clone())
            .min();
        [finish, release, deadline].into_iter().flatten().min()
    }

    /// Advances to `t`, then handles finishes, misses and releases at `t`.
    /// Returns the finished job's `(task, release, finish)`, if any.
    fn step_to(
        &mut self,
        t: Rational,
        release_limit: Option<&Rational>,
    ) -> Result<Option<(usize, Rational)>> {
        let dt = &t - &self.now;
        self.now = t;
        let mut finished = None;
        if let Some(i) = self.running {
            let job = self.queues[i].front_mut().expect("running job");
            job.remaining -= &dt;
            if job.remaining.is_zero() {
                let job = self.queues[i].pop_front().expect("running job");
                self.emit(EventKind::Finish, i, job.index)?;
                finished = Some((i, job.release));
                self.running = None;
            }
        }
        for i in 0..self.queues.len() {
            let mut missed = Vec::new();
            for job in self.queues[i].iter_mut() {
                if !job.missed && job.deadline == self.now {
                    job.missed = true;
                    missed.push(job.index);
                }
            }
            for index in missed {
                self.emit(EventKind::DeadlineMiss, i, index)?;
            }
        }
        if finished.is_some() && self.idle() {
            return Ok(finished);
        }
        self.release_due(release_limit)?;
        Ok(finished)
    }
}

/// Simulates `tm` from a synchronous release at 0 with the tasks' minimum
/// inter-arrival separation, up to and including time `horizon`.
pub fn simulate_dm(tm: &TaskSet, horizon: &Rational, speed: &Rational) -> Result<SimTrace> {
    simulate_ordered(tm.tasks(), horizon, speed)
}

/// Like [`simulate_dm`] but with priorities given by slice order.
pub fn simulate_ordered(
    tasks: &[SporadicTask],
    horizon: &Rational,
    speed: &Rational,
) -> Result<SimTrace> {
    if *horizon <= Rational::zero() {
        return Err(SchedError::Domain("simulation horizon must be positive".into()));
    }
    if *speed <= Rational::zero() {
        return Err(SchedError::Domain("speed must be positive".into()));
    }
    let mut eng = Engine::new(tasks, speed);
    eng.release_due(Some(horizon))?;
    eng.dispatch()?;
    while let Some(t) = eng.next_event_time(Some(horizon)) {
        if t > *horizon {
            break;
        }
        eng.step_to(t, Some(horizon))?;
        eng.release_due(Some(horizon))?;
        eng.dispatch()?;
    }
    if let Some(i) = eng.running {
        let dt = horizon - &eng.now;
        eng.queues[i].front_mut().expect("running job").remaining -= dt;
    }
    Ok(SimTrace {
        events: eng.events,
        horizon: horizon.clone(),
        speed: speed.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BusyPeriodReport {
    /// First idle instant after 0, or the finish of the last job that can
    /// matter when the window does not close or the last task is one-shot.
    #[serde(with = "rational::serde_str")]
    pub end: Rational,
    /// Jobs of the lowest-priority task completed in the busy period.
    pub jobs: u64,
    /// Largest response time among those jobs.
    #[serde(with = "rational::serde_str")]
    pub max_response: Rational,
}

/// Simulates the synchronous busy period of `tasks` (priority by slice order)
/// and reports the response times of the last task's jobs within it.
pub fn busy_period(tasks: &[SporadicTask]) -> Result<BusyPeriodReport> {
    let Some(last) = tasks.len().checked_sub(1) else {
        return Err(SchedError::EmptyTaskSet);
    };
    let total: Rational = tasks.iter().map(|t| t.utilization()).sum();
    if total > Rational::one() {
        return Err(SchedError::Domain(
            "busy period is unbounded when utilization exceeds one".into(),
        ));
    }
    // At full utilization the window may not close; responses of the last
    // task then repeat every hyperperiod, so the first H/T jobs suffice.
    let enough_jobs = match &tasks[last].period {
        Period::Infinite => Some(1),
        Period::Finite(tk) if total == Rational::one() => {
            let h = tasks
                .iter()
                .filter_map(|t| t.period.finite())
                .fold(tk.clone(), |acc, p| rational::lcm(&acc, p));
            Some((h / tk).to_integer().to_u64().unwrap_or(u64::MAX))
        }
        _ => None,
    };
    let mut eng = Engine::new(tasks, &Rational::one());
    eng.record = false;
    eng.release_due(None)?;
    eng.dispatch()?;
    let mut jobs = 0u64;
    let mut max_response = Rational::zero();
    while let Some(t) = eng.next_event_time(None) {
        let finished = eng.step_to(t, None)?;
        if let Some((i, release)) = finished {
            if i == last {
                jobs += 1;
                let response = &eng.now - release;
                if response > max_response {
                    max_response = response;
                }
                if jobs > DEFAULT_BUSY_PERIOD_JOB_CAP {
                    return Err(SchedError::ResourceCap {
                        what: "jobs in simulated busy period",
                        cap: DEFAULT_BUSY_PERIOD_JOB_CAP,
                    });
                }
            }
            if eng.idle() || (i == last && enough_jobs == Some(jobs)) {
                return Ok(BusyPeriodReport {
                    end: eng.now.clone(),
                    jobs,
                    max_response,
                });
            }
        }
        eng.dispatch()?;
    }
    unreachable!("a busy period with pending work always has a next event")
}

/// Simulated verdict for `cand` below `hp`. Constrained sets: whether the
/// first job of `cand` meets its deadline after a synchronous release.
/// Otherwise: whether the worst response time in the synchronous busy period
/// is at most `D_k`.
pub fn oracle_check(hp: &TaskSet, cand: &SporadicTask) -> Result<bool> {
    let mut tasks = hp.tasks().to_vec();
    tasks.push(cand.clone());
    if classify(&tasks)?.within(DeadlineClass::Constrained) {
        let trace = simulate_ordered(&tasks, &cand.deadline, &Rational::one())?;
        Ok(trace.finish_time(cand.id, 0).is_some())
    } else {
        Ok(busy_period(&tasks)?.max_response <= cand.deadline)
    }
}

/// Worst simulated response time of `cand` below `hp` over the synchronous
/// busy period.
pub fn simulated_response_time(hp: &[SporadicTask], cand: &SporadicTask) -> Result<Rational> {
    let mut tasks = hp.to_vec();
    tasks.push(cand.clone());
    Ok(busy_period(&tasks)?.max_response)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn itask(id: u32, c: i64, t: i64, d: i64) -> SporadicTask {
        SporadicTask::periodic(id, int(c), int(t), int(d)).unwrap()
    }

    #[test]
    fn single_task_finishes_after_scaled_wcet() {
        let ts = TaskSet::new(vec![itask(1, 3, 10, 10)]).unwrap();
        let tr = simulate_dm(&ts, &int(10), &int(2)).unwrap();
        assert_eq!(tr.finish_time(TaskId(1), 0), Some(&ratio(3, 2)));
        assert!(!tr.has_miss());
    }

    #[test]
    fn two_task_hand_simulation() {
        let ts = TaskSet::new(vec![itask(1, 1, 2, 2), itask(2, 2, 4, 4)]).unwrap();
        let tr = simulate_dm(&ts, &int(4), &int(1)).unwrap();
        assert_eq!(tr.finish_time(TaskId(2), 0), Some(&int(4)));
        assert!(!tr.has_miss());
        let kinds: Vec<_> = tr
            .events
            .iter()
            .filter(|e| e.task == TaskId(2))
            .map(|e| (e.kind, e.time.clone()))
            .collect();
        assert_eq!(
            kinds,
            vec![
                (EventKind::Release, int(0)),
                (EventKind::Start, int(1)),
                (EventKind::Preempt, int(2)),
                (EventKind::Start, int(3)),
                (EventKind::Finish, int(4)),
            ]
        );
    }

    #[test]
    fn miss_is_reported_at_deadline() {
        let ts = TaskSet::new(vec![itask(1, 2, 3, 3), itask(2, 2, 4, 3)]).unwrap();
        let tr = simulate_dm(&ts, &int(6), &int(1)).unwrap();
        let miss = tr.misses().next().unwrap();
        assert_eq!((miss.task, miss.job, &miss.time), (TaskId(2), 0, &int(3)));
        assert_eq!(tr.finish_time(TaskId(2), 0), Some(&int(6)));
    }

    #[test]
    fn busy_period_matches_hand_values() {
        let hp = [itask(1, 2, 4, 4)];
        let r = simulated_response_time(&hp, &itask(2, 3, 8, 8)).unwrap();
        assert_eq!(r, int(7));
        let r = simulated_response_time(&[itask(1, 2, 5, 5)], &itask(2, 3, 10, 7)).unwrap();
        assert_eq!(r, int(5));
        let b = busy_period(&[itask(1, 2, 4, 4), itask(2, 3, 6, 9)]).unwrap();
        assert_eq!((b.max_response, b.jobs, b.end), (int(7), 2, int(12)));
        let once = SporadicTask::new(1, int(1), Period::Infinite, int(1)).unwrap();
        let b = busy_period(&[once, itask(2, 1, 2, 2), itask(3, 1, 2, 10)]).unwrap();
        assert_eq!((b.max_response, b.jobs), (int(4), 1));
    }

    #[test]
    fn oracle_for_lone_task() {
        let lone = |c, d| SporadicTask::periodic(1, int(c), int(10), int(d)).unwrap();
        assert!(oracle_check(&TaskSet::empty(), &lone(3, 3)).unwrap());
        let over = SporadicTask::periodic(1, int(4), int(10), int(3)).unwrap();
        assert!(!oracle_check(&TaskSet::empty(), &over).unwrap());
    }

    #[test]
    fn json_lines_one_per_event() {
        let ts = TaskSet::new(vec![itask(1, 1, 2, 2)]).unwrap();
        let tr = simulate_dm(&ts, &int(4), &int(1)).unwrap();
        let mut buf = Vec::new();
        tr.write_json_lines(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), tr.events.len());
        assert!(text.starts_with(r#"{"time":"0","kind":"release","task":1,"job":0}"#));
    }

    #[test]
    fn rejects_bad_parameters() {
        let ts = TaskSet::new(vec![itask(1, 1, 2, 2)]).unwrap();
        assert!(simulate_dm(&ts, &int(0), &int(1)).is_err());
        assert!(simulate_dm(&ts, &int(1), &int(0)).is_err());
    }
}
