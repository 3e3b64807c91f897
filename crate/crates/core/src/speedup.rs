//! Failure certificates and the analytic constants behind the speedup bounds.
//!
//! Certificates are evaluated exactly and converted to `f64` at the end; a
//! certificate is valid when its maximum term exceeds the threshold by more
//! than `-CERTIFICATE_SLACK`.

use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::demand::dbf_total;
use crate::error::{Result, SchedError};
use crate::partition::{Outcome, Partition};
use crate::rational::{self, Rational};
use crate::schedulability::{K2USplit, SchedTest};
use crate::task::{classify, DeadlineClass, SporadicTask, TaskSet};

pub const CERTIFICATE_SLACK: f64 = 1e-9;

/// Principal branch of the Lambert W function for `z ≥ 0`.
pub fn lambert_w(z: f64) -> Result<f64> {
    if !(z >= 0.0) || !z.is_finite() {
        return Err(SchedError::Domain(format!("lambert_w needs finite z >= 0, got {z}")));
    }
    let mut w = z.ln_1p();
    for _ in 0..100 {
        let ew = w.exp();
        let r = w * ew - z;
        if r.abs() <= 1e-13 * z.max(1.0) {
            break;
        }
        w -= r / (ew * (w + 1.0));
    }
    Ok(w)
}

/// `W(1/2)`, the constrained-deadline certificate threshold.
pub fn w_half() -> f64 {
    lambert_w(0.5).expect("0.5 is in the domain")
}

/// Infimum of `Σu_i` over splits with `Π(1 + u_i) > x`, namely `ln x`.
pub fn min_util_for_product(x: f64) -> Result<f64> {
    if !(x > 1.0) {
        return Err(SchedError::Domain(format!("min_util_for_product needs x > 1, got {x}")));
    }
    Ok(x.ln())
}

/// Root of `e^σ(1 + σ) = 2`.
pub fn case1_constant() -> f64 {
    let g = |s: f64| s.exp() * (1.0 + s) - 2.0;
    let (mut lo, mut hi) = (0.3_f64, 0.4_f64);
    debug_assert!(g(lo) < 0.0 && g(hi) > 0.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..5 {
        s -= g(s) / (s.exp() * (2.0 + s));
    }
    s
}

/// Checks `Π(U_i/M + 1) ≤ (total/(n·M) + 1)^n`, the equal-split maximum.
pub fn product_upper_bound_check(utils: &[f64], total: f64, processors: usize) -> bool {
    if utils.is_empty() {
        return true;
    }
    let m = processors as f64;
    let n = utils.len() as f64;
    let lhs: f64 = utils.iter().map(|u| u / m + 1.0).product();
    let rhs = (total / (n * m) + 1.0).powf(n);
    lhs <= rhs * (1.0 + 1e-12)
}

/// Global product condition under which partitioning with TDA or the
/// hyperbolic test is guaranteed to place `cand`:
/// `Π_{T_i < D_k}(1 + U_i/M) ≤ 2/(1 + C'_k/D_k)` with
/// `C'_k = C_k + Σ_{T_i ≥ D_k} C_i / M`.
pub fn k2u_success_condition(prefix: &TaskSet, cand: &SporadicTask, processors: usize) -> Result<bool> {
    require_processors(processors)?;
    require_constrained_prefix(prefix.tasks(), cand)?;
    let m = rational::int(processors as i64);
    let split = K2USplit::new(prefix.tasks(), cand, &m);
    let product = product_over(&split.t1, &m);
    let rhs = rational::int(2) / (Rational::one() + &split.c_prime / &cand.deadline);
    Ok(product <= rhs)
}

fn product_over(tasks: &[SporadicTask], m: &Rational) -> Rational {
    tasks
        .iter()
        .map(|t| Rational::one() + t.utilization() / m)
        .product()
}

fn require_processors(processors: usize) -> Result<()> {
    if processors == 0 {
        return Err(SchedError::Domain("need at least one processor".into()));
    }
    Ok(())
}

fn require_constrained_prefix(prefix: &[SporadicTask], cand: &SporadicTask) -> Result<()> {
    let mut all = prefix.to_vec();
    all.push(cand.clone());
    let class = classify(&all)?;
    if !class.within(DeadlineClass::Constrained) {
        return Err(SchedError::DeadlineClass {
            test: "k2u condition",
            required: "constrained",
            detail: format!("task set is {class}"),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbitraryCertificate {
    pub delta_k: f64,
    pub util_avg: f64,
    pub dbf_density: f64,
    pub max_term: f64,
    pub threshold: f64,
}

impl ArbitraryCertificate {
    pub fn is_valid(&self) -> bool {
        self.max_term > self.threshold - CERTIFICATE_SLACK
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateCase {
    ProductAtLeast2,
    Case1,
    Case2a,
    Case2b,
}

impl CertificateCase {
    /// Lower bound the case guarantees for the maximum term.
    pub fn threshold(self) -> f64 {
        match self {
            CertificateCase::ProductAtLeast2 => std::f64::consts::LN_2,
            CertificateCase::Case1 => case1_constant(),
            CertificateCase::Case2a | CertificateCase::Case2b => w_half(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedCertificate {
    pub x: f64,
    pub sigma: f64,
    pub product: f64,
    pub case: CertificateCase,
    pub util_avg: f64,
    pub dbf_density: f64,
    pub max_term: f64,
    pub threshold: f64,
    /// Whether `C'_k/D_k + Σ_{T_i<D_k}⌊D_k/T_i⌋T_iU_i/(M·D_k) > Π(1+U_i/M)`
    /// holds; only evaluated when the product condition is violated.
    pub carry_in_check: Option<bool>,
}

impl ConstrainedCertificate {
    pub fn is_valid(&self) -> bool {
        self.max_term > self.threshold - CERTIFICATE_SLACK
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureCertificate {
    Arbitrary(ArbitraryCertificate),
    Constrained(ConstrainedCertificate),
}

impl FailureCertificate {
    pub fn is_valid(&self) -> bool {
        match self {
            FailureCertificate::Arbitrary(c) => c.is_valid(),
            FailureCertificate::Constrained(c) => c.is_valid(),
        }
    }

    pub fn max_term(&self) -> f64 {
        match self {
            FailureCertificate::Arbitrary(c) => c.max_term,
            FailureCertificate::Constrained(c) => c.max_term,
        }
    }

    pub fn threshold(&self) -> f64 {
        match self {
            FailureCertificate::Arbitrary(c) => c.threshold,
            FailureCertificate::Constrained(c) => c.threshold,
        }
    }
}

/// Picks the certificate matching the test that failed: TDA and hyperbolic
/// failures get the constrained certificate, every other test the
/// arbitrary one.
pub fn failure_certificate(p: &Partition, ts: &TaskSet) -> Result<FailureCertificate> {
    match p.test {
        SchedTest::TdaConstrained | SchedTest::Hyperbolic => {
            constrained_failure_certificate(p, ts, p.processors).map(FailureCertificate::Constrained)
        }
        _ => arbitrary_failure_certificate(p, ts, p.processors).map(FailureCertificate::Arbitrary),
    }
}

/// Splits `ts` at the failed task: `(tasks before τ_k, τ_k)`.
fn failed_prefix<'a>(
    p: &Partition,
    ts: &'a TaskSet,
    processors: usize,
) -> Result<(&'a [SporadicTask], &'a SporadicTask)> {
    require_processors(processors)?;
    if processors != p.processors {
        return Err(SchedError::Domain(format!(
            "partition has {} processors, certificate asked for {processors}",
            p.processors
        )));
    }
    let id = match &p.outcome {
        Outcome::Failed { task_id, .. } => *task_id,
        Outcome::Success => {
            return Err(SchedError::Domain("certificate requested for a successful partition".into()))
        }
    };
    let k = ts
        .iter()
        .position(|t| t.id == id)
        .ok_or_else(|| SchedError::Domain(format!("failed task {id} not in task set")))?;
    Ok((&ts.tasks()[..k], &ts.tasks()[k]))
}

/// `max{Δ_k, Σ_{i≤k}U_i/M, Σ_{i≤k}C_i/(M·D_k)}` against `1/(3 − 1/M)`.
pub fn arbitrary_failure_certificate(
    p: &Partition,
    ts: &TaskSet,
    processors: usize,
) -> Result<ArbitraryCertificate> {
    if p.test == SchedTest::Hyperbolic {
        return Err(SchedError::Domain(
            "hyperbolic failures are covered by the constrained certificate".into(),
        ));
    }
    let (before, cand) = failed_prefix(p, ts, processors)?;
    let m = rational::int(processors as i64);
    let upto = || before.iter().chain(std::iter::once(cand));
    let util: Rational = upto().map(|t| t.utilization()).sum::<Rational>() / &m;
    let wcet: Rational = upto().map(|t| t.wcet.clone()).sum();
    let density = wcet / (&m * &cand.deadline);
    let delta = cand.density();
    let max_term = delta.clone().max(util.clone()).max(density.clone());
    let threshold = 1.0 / (3.0 - 1.0 / processors as f64);
    let cert = ArbitraryCertificate {
        delta_k: rational::to_f64(&delta),
        util_avg: rational::to_f64(&util),
        dbf_density: rational::to_f64(&density),
        max_term: rational::to_f64(&max_term),
        threshold,
    };
    if !cert.is_valid() {
        log::warn!("arbitrary certificate below threshold at {}: {cert:?}", cand.id);
    }
    Ok(cert)
}

/// Case analysis on `x = C_k/D_k` and `σ = 2/Π_{T_i<D_k}(1 + U_i/M) − 1`
/// over the tasks preceding the failed one.
pub fn constrained_failure_certificate(
    p: &Partition,
    ts: &TaskSet,
    processors: usize,
) -> Result<ConstrainedCertificate> {
    if !matches!(p.test, SchedTest::TdaConstrained | SchedTest::Hyperbolic) {
        return Err(SchedError::Domain(format!(
            "constrained certificate needs a tda or hyperbolic failure, got {}",
            p.test
        )));
    }
    let (before, cand) = failed_prefix(p, ts, processors)?;
    require_constrained_prefix(before, cand)?;
    let m = rational::int(processors as i64);
    let d = &cand.deadline;
    let split = K2USplit::new(before, cand, &m);
    let product = product_over(&split.t1, &m);
    let sigma = rational::int(2) / &product - Rational::one();
    let x = &cand.wcet / d;
    let util: Rational = before.iter().map(|t| t.utilization()).sum::<Rational>() / &m;
    let dbf_density = dbf_total(before, d)? / (&m * d);

    let case = if product >= rational::int(2) {
        CertificateCase::ProductAtLeast2
    } else if x >= sigma {
        CertificateCase::Case1
    } else if x > (Rational::one() + &sigma) / rational::int(4) {
        CertificateCase::Case2a
    } else {
        CertificateCase::Case2b
    };
    let max_term = x.clone().max(util.clone()).max(dbf_density.clone());

    let product_ok = product <= rational::int(2) / (Rational::one() + &split.c_prime / d);
    let carry_in_check = (!product_ok).then(|| {
        let carry: Rational = split
            .t1
            .iter()
            .filter_map(|t| t.period.finite().map(|p| (t, p)))
            .map(|(t, p)| Rational::from_integer(rational::floor_div(d, p)) * p * t.utilization())
            .sum();
        let lhs = &split.c_prime / d + carry / (&m * d);
        let holds = lhs > product;
        log::debug!("carry-in diagnostic at {}: {holds}", cand.id);
        holds
    });

    let cert = ConstrainedCertificate {
        x: rational::to_f64(&x),
        sigma: rational::to_f64(&sigma),
        product: rational::to_f64(&product),
        case,
        util_avg: rational::to_f64(&util),
        dbf_density: rational::to_f64(&dbf_density),
        max_term: rational::to_f64(&max_term),
        threshold: case.threshold(),
        carry_in_check,
    };
    if !cert.is_valid() {
        log::warn!("constrained certificate below threshold at {}: {cert:?}", cand.id);
    }
    Ok(cert)
}
