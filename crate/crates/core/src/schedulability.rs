//! Per-processor deadline-monotonic schedulability tests.
//!
//! Every test decides whether a candidate task `cand` meets its deadline when
//! added below the already-assigned, higher-priority tasks `hp` of one
//! processor. All arithmetic is exact.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SchedError};
use crate::rational::{self, Rational};
use crate::task::{DeadlineClass, Period, SporadicTask};

/// Default cap on jobs examined in one level-k busy window.
pub const DEFAULT_BUSY_WINDOW_JOB_CAP: u64 = 1_000_000;
/// Default cap on fixed-point iterations (summed over all jobs).
pub const DEFAULT_FIXED_POINT_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedTest {
    #[serde(rename = "tda")]
    TdaConstrained,
    FbbConstrained,
    Hyperbolic,
    #[serde(rename = "busy-window")]
    BusyWindowExact,
    #[serde(rename = "fbb-arb")]
    FbbArbitrary,
    #[serde(rename = "bini")]
    BiniArbitrary,
}

impl SchedTest {
    pub const ALL: [SchedTest; 6] = [
        SchedTest::TdaConstrained,
        SchedTest::FbbConstrained,
        SchedTest::Hyperbolic,
        SchedTest::BusyWindowExact,
        SchedTest::FbbArbitrary,
        SchedTest::BiniArbitrary,
    ];

    /// Short name used on the command line.
    pub fn name(self) -> &'static str {
        match self {
            SchedTest::TdaConstrained => "tda",
            SchedTest::FbbConstrained => "fbb-constrained",
            SchedTest::Hyperbolic => "hyperbolic",
            SchedTest::BusyWindowExact => "busy-window",
            SchedTest::FbbArbitrary => "fbb-arb",
            SchedTest::BiniArbitrary => "bini",
        }
    }

    /// Deadline class the test is valid for.
    pub fn admissible_class(self) -> DeadlineClass {
        match self {
            SchedTest::TdaConstrained | SchedTest::FbbConstrained | SchedTest::Hyperbolic => {
                DeadlineClass::Constrained
            }
            _ => DeadlineClass::Arbitrary,
        }
    }

    pub fn admits(self, class: DeadlineClass) -> bool {
        class.within(self.admissible_class())
    }

    pub fn check(self, hp: &[SporadicTask], cand: &SporadicTask) -> Result<TestVerdict> {
        match self {
            SchedTest::TdaConstrained => tda_constrained(hp, cand),
            SchedTest::FbbConstrained => fbb_constrained(hp, cand),
            SchedTest::Hyperbolic => hyperbolic(hp, cand),
            SchedTest::BusyWindowExact => busy_window_exact(hp, cand),
            SchedTest::FbbArbitrary => fbb_arbitrary(hp, cand),
            SchedTest::BiniArbitrary => bini_arbitrary(hp, cand),
        }
    }
}

impl fmt::Display for SchedTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchedTest {
    type Err = SchedError;

    fn from_str(s: &str) -> Result<Self> {
        SchedTest::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| SchedError::Parse(format!("unknown test {s:?}")))
    }
}

/// Which inequality rejected the candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Time demand exceeds `t` at every point of `(0, D_k]`.
    NoFeasiblePoint,
    /// A linear demand bound `lhs ≤ D_k` fails.
    LinearDemand {
        #[serde(with = "rational::serde_str")]
        lhs: Rational,
        #[serde(with = "rational::serde_str")]
        deadline: Rational,
    },
    /// Total utilization of `hp ∪ {cand}` exceeds one.
    Utilization {
        #[serde(with = "rational::serde_str")]
        total: Rational,
    },
    /// `(C'/D_k + 1)·Π(U_j + 1) > 2`.
    HyperbolicProduct {
        #[serde(with = "rational::serde_str")]
        value: Rational,
    },
    /// Worst-case response time exceeds the deadline.
    ResponseTime {
        #[serde(with = "rational::serde_str")]
        response: Rational,
    },
    /// Higher-priority utilization is exactly one; the candidate never runs.
    Starvation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub accepted: bool,
    pub test_name: SchedTest,
    #[serde(with = "rational::serde_str::option")]
    pub witness: Option<Rational>,
    pub violated_at: Option<Violation>,
}

impl TestVerdict {
    fn accept(test: SchedTest, witness: Option<Rational>) -> Self {
        TestVerdict {
            accepted: true,
            test_name: test,
            witness,
            violated_at: None,
        }
    }

    fn reject(test: SchedTest, why: Violation) -> Self {
        TestVerdict {
            accepted: false,
            test_name: test,
            witness: None,
            violated_at: Some(why),
        }
    }
}

/// Split of higher-priority tasks around the candidate's deadline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct K2USplit {
    /// Tasks with `T_i < D_k`.
    pub t1: Vec<SporadicTask>,
    /// Tasks with `T_i ≥ D_k`, including infinite periods.
    pub t2: Vec<SporadicTask>,
    /// `C_k + Σ_{t2} C_i / divisor`.
    pub c_prime: Rational,
}

impl K2USplit {
    /// `divisor` is 1 for a single processor and `M` for the global prefix.
    pub fn new(hp: &[SporadicTask], cand: &SporadicTask, divisor: &Rational) -> Self {
        let (t1, t2): (Vec<_>, Vec<_>) = hp
            .iter()
            .cloned()
            .partition(|t| t.period.less_than(&cand.deadline));
        let t2_sum: Rational = t2.iter().map(|t| t.wcet.clone()).sum();
        let c_prime = &cand.wcet + t2_sum / divisor;
        K2USplit { t1, t2, c_prime }
    }

    /// `κ = |t1| + 1`.
    pub fn kappa(&self) -> usize {
        self.t1.len() + 1
    }
}

fn require_constrained(test: SchedTest, hp: &[SporadicTask], cand: &SporadicTask) -> Result<()> {
    let fail = |detail: String| SchedError::DeadlineClass {
        test: test.name(),
        required: "constrained",
        detail,
    };
    if let Some(t) = std::iter::once(cand).chain(hp).find(|t| !t.is_constrained()) {
        return Err(fail(format!("{} has D > T", t.id)));
    }
    if let Some(t) = hp.iter().find(|t| t.deadline > cand.deadline) {
        return Err(fail(format!(
            "higher-priority {} has a longer deadline than {}",
            t.id, cand.id
        )));
    }
    Ok(())
}

fn interference(hp: &[SporadicTask], t: &Rational) -> Rational {
    hp.iter()
        .map(|task| task.period.releases_before(t) * &task.wcet)
        .sum()
}

fn hp_utilization(hp: &[SporadicTask]) -> Rational {
    hp.iter().map(|t| t.utilization()).sum()
}

/// Time-demand analysis: accepts iff `C_k + Σ⌈t/T_i⌉C_i ≤ t` for some
/// `t ∈ (0, D_k]`. The witness is the smallest such `t` among the points
/// `{jT_i ≤ D_k} ∪ {D_k}`.
pub fn tda_constrained(hp: &[SporadicTask], cand: &SporadicTask) -> Result<TestVerdict> {
    let test = SchedTest::TdaConstrained;
    require_constrained(test, hp, cand)?;
    let d = &cand.deadline;
    // Least fixed point of the demand; exists below D_k iff the test passes.
    let mut t = &cand.wcet + hp.iter().map(|x| x.wcet.clone()).sum::<Rational>();
    loop {
        if t > *d {
            return Ok(TestVerdict::reject(test, Violation::NoFeasiblePoint));
        }
        let next = &cand.wcet + interference(hp, &t);
        if next == t {
            break;
        }
        t = next;
    }
    // Demand is constant on (previous point, next point], so the first
    // candidate point at or after the fixed point also satisfies the test.
    let witness = hp
        .iter()
        .filter_map(|x| x.period.finite())
        .map(|p| Rational::from_integer(rational::ceil_div(&t, p)) * p)
        .filter(|p| p <= d)
        .chain(std::iter::once(d.clone()))
        .min()
        .expect("deadline is always a candidate");
    Ok(TestVerdict::accept(test, Some(witness)))
}

fn linear_demand(hp: &[SporadicTask], cand: &SporadicTask) -> Rational {
    let d = &cand.deadline;
    let hp_part: Rational = hp
        .iter()
        .map(|t| match &t.period {
            Period::Finite(p) => (Rational::one() + d / p) * &t.wcet,
            Period::Infinite => t.wcet.clone(),
        })
        .sum();
    &cand.wcet + hp_part
}

/// Linear approximation of TDA: `C_k + Σ(1 + D_k/T_i)C_i ≤ D_k`.
pub fn fbb_constrained(hp: &[SporadicTask], cand: &SporadicTask) -> Result<TestVerdict> {
    let test = SchedTest::FbbConstrained;
    require_constrained(test, hp, cand)?;
    let lhs = linear_demand(hp, cand);
    if lhs <= cand.deadline {
        Ok(TestVerdict::accept(test, None))
    } else {
        Ok(TestVerdict::reject(
            test,
            Violation::LinearDemand {
                lhs,
                deadline: cand.deadline.clone(),
            },
        ))
    }
}

/// Hyperbolic bound: `(C'/D_k + 1)·Π_{T_j < D_k}(U_j + 1) ≤ 2` with
/// `C' = C_k + Σ_{T_i ≥ D_k} C_i`.
pub fn hyperbolic(hp: &[SporadicTask], cand: &SporadicTask) -> Result<TestVerdict> {
    let test = SchedTest::Hyperbolic;
    require_constrained(test, hp, cand)?;
    let split = K2USplit::new(hp, cand, &Rational::one());
    let product: Rational = split
        .t1
        .iter()
        .map(|t| t.utilization() + Rational::one())
        .product();
    let value = (&split.c_prime / &cand.deadline + Rational::one()) * product;
    if value <= rational::int(2) {
        Ok(TestVerdict::accept(test, None))
    } else {
        Ok(TestVerdict::reject(test, Violation::HyperbolicProduct { value }))
    }
}

/// Exact test by busy-window response-time analysis, valid for any deadline
/// class. The witness is the worst-case response time.
pub fn busy_window_exact(hp: &[SporadicTask], cand: &SporadicTask) -> Result<TestVerdict> {
    busy_window_exact_capped(hp, cand, DEFAULT_BUSY_WINDOW_JOB_CAP)
}

pub fn busy_window_exact_capped(
    hp: &[SporadicTask],
    cand: &SporadicTask,
    job_cap: u64,
) -> Result<TestVerdict> {
    let test = SchedTest::BusyWindowExact;
    let hp_util = hp_utilization(hp);
    let total = &hp_util + cand.utilization();
    if total > Rational::one() {
        return Ok(TestVerdict::reject(test, Violation::Utilization { total }));
    }
    if hp_util >= Rational::one() {
        return Ok(TestVerdict::reject(test, Violation::Starvation));
    }
    let wcrt = worst_case_response_time(hp, cand, job_cap)?;
    if wcrt <= cand.deadline {
        Ok(TestVerdict::accept(test, Some(wcrt)))
    } else {
        Ok(TestVerdict::reject(test, Violation::ResponseTime { response: wcrt }))
    }
}

/// Maximum of `R_{k,h} − (h−1)T_k` over the jobs of the synchronous level-k
/// busy window. Requires higher-priority utilization below one.
fn worst_case_response_time(
    hp: &[SporadicTask],
    cand: &SporadicTask,
    job_cap: u64,
) -> Result<Rational> {
    // At full utilization the window may never close, but response times
    // repeat with the hyperperiod H: job h + H/T_k finishes exactly H after
    // job h. The first H/T_k jobs then cover every response time.
    let total: Rational = hp_utilization(hp) + cand.utilization();
    let repeat_after = match &cand.period {
        Period::Finite(tk) if total == Rational::one() => {
            let h = hp
                .iter()
                .filter_map(|t| t.period.finite())
                .fold(tk.clone(), |acc, p| rational::lcm(&acc, p));
            let n = (h / tk).to_integer();
            Some(n.to_u64().unwrap_or(u64::MAX))
        }
        _ => None,
    };
    let mut iterations = 0u64;
    let mut finish = Rational::zero();
    let mut worst = Rational::zero();
    let mut h: u64 = 1;
    loop {
        let own = Rational::from_integer(h.into()) * &cand.wcet;
        // R_{k,h} ≥ R_{k,h-1}, so the previous finish is a valid start.
        let mut t = own.clone().max(finish);
        loop {
            iterations += 1;
            if iterations > DEFAULT_FIXED_POINT_CAP {
                return Err(SchedError::ResourceCap {
                    what: "busy-window fixed-point iterations",
                    cap: DEFAULT_FIXED_POINT_CAP,
                });
            }
            let next = &own + interference(hp, &t);
            if next == t {
                break;
            }
            t = next;
        }
        finish = t;
        let release = match &cand.period {
            Period::Finite(p) => Rational::from_integer((h - 1).into()) * p,
            Period::Infinite => Rational::zero(),
        };
        let response = &finish - &release;
        if response > worst {
            worst = response;
        }
        let closed = match &cand.period {
            Period::Finite(p) => finish <= Rational::from_integer(h.into()) * p,
            Period::Infinite => true,
        };
        if closed || repeat_after == Some(h) {
            return Ok(worst);
        }
        h += 1;
        if h > job_cap {
            return Err(SchedError::ResourceCap {
                what: "jobs in busy window",
                cap: job_cap,
            });
        }
    }
}

/// Linear demand bound plus utilization: `C_k + Σ(1 + D_k/T_i)C_i ≤ D_k`
/// and `U_k + ΣU_i ≤ 1`.
pub fn fbb_arbitrary(hp: &[SporadicTask], cand: &SporadicTask) -> Result<TestVerdict> {
    let test = SchedTest::FbbArbitrary;
    let lhs = linear_demand(hp, cand);
    if lhs > cand.deadline {
        return Ok(TestVerdict::reject(
            test,
            Violation::LinearDemand {
                lhs,
                deadline: cand.deadline.clone(),
            },
        ));
    }
    let total = hp_utilization(hp) + cand.utilization();
    if total > Rational::one() {
        return Ok(TestVerdict::reject(test, Violation::Utilization { total }));
    }
    Ok(TestVerdict::accept(test, None))
}

/// Response-time upper bound test:
/// `C_k + D_k·ΣU_i + ΣC_i − ΣU_iC_i ≤ D_k` and `U_k + ΣU_i ≤ 1`.
/// The witness is the bound `(C_k + ΣC_i − ΣU_iC_i)/(1 − ΣU_i)`.
pub fn bini_arbitrary(hp: &[SporadicTask], cand: &SporadicTask) -> Result<TestVerdict> {
    let test = SchedTest::BiniArbitrary;
    let d = &cand.deadline;
    let sum_u = hp_utilization(hp);
    let carry: Rational = hp
        .iter()
        .map(|t| &t.wcet - t.utilization() * &t.wcet)
        .sum();
    let lhs = &cand.wcet + d * &sum_u + &carry;
    if lhs > *d {
        return Ok(TestVerdict::reject(
            test,
            Violation::LinearDemand {
                lhs,
                deadline: d.clone(),
            },
        ));
    }
    let total = &sum_u + cand.utilization();
    if total > Rational::one() {
        return Ok(TestVerdict::reject(test, Violation::Utilization { total }));
    }
    let slack = Rational::one() - &sum_u;
    debug_assert!(slack.is_positive());
    let bound = (&cand.wcet + carry) / slack;
    Ok(TestVerdict::accept(test, Some(bound)))
}
