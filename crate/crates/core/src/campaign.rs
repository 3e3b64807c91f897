//! Seeded random partitioning campaigns with certificate bookkeeping.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SchedError};
use crate::partition::{dm_partition, FitStrategy};
use crate::random::{random_task_set, GeneratorConfig};
use crate::schedulability::SchedTest;
use crate::speedup::{failure_certificate, FailureCertificate};
use crate::task::{DeadlineClass, TaskId, TaskSet};

/// Fitting strategy without per-run data; arbitrary fit gets a seed per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitKind {
    FirstFit,
    ArbitraryFit,
    BestFit,
    WorstFit,
}

impl FitKind {
    pub const ALL: [FitKind; 4] = [
        FitKind::FirstFit,
        FitKind::ArbitraryFit,
        FitKind::BestFit,
        FitKind::WorstFit,
    ];

    pub fn strategy(self, seed: u64) -> FitStrategy {
        match self {
            FitKind::FirstFit => FitStrategy::FirstFit,
            FitKind::ArbitraryFit => FitStrategy::ArbitraryFit { seed },
            FitKind::BestFit => FitStrategy::BestFit,
            FitKind::WorstFit => FitStrategy::WorstFit,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FitKind::FirstFit => "first-fit",
            FitKind::ArbitraryFit => "arbitrary-fit",
            FitKind::BestFit => "best-fit",
            FitKind::WorstFit => "worst-fit",
        }
    }
}

impl std::str::FromStr for FitKind {
    type Err = SchedError;

    fn from_str(s: &str) -> Result<Self> {
        FitKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| SchedError::Parse(format!("unknown fit strategy {s:?}")))
    }
}

/// Independent generator for trial `index` of a campaign seeded with `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub n: usize,
    pub m: usize,
    pub class: DeadlineClass,
    pub seed: u64,
    pub trials: u64,
    pub test: SchedTest,
    pub fit: FitKind,
    pub total_util: (f64, f64),
}

impl CampaignConfig {
    pub fn generator(&self) -> GeneratorConfig {
        GeneratorConfig {
            n: self.n,
            class: self.class,
            total_util: self.total_util,
        }
    }

    /// Default utilization range: a quarter to all of the platform, capped
    /// below the task count.
    pub fn default_total_util(n: usize, m: usize) -> (f64, f64) {
        let hi = (m as f64).min(0.95 * n as f64);
        (0.25 * hi, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub success: bool,
    pub failed_at: Option<TaskId>,
    pub certificate: Option<FailureCertificate>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub generator: String,
    pub config: CampaignConfig,
    pub successes: u64,
    pub failures: u64,
    pub errors: u64,
    pub acceptance_ratio: Option<f64>,
    pub certificates_valid: u64,
    pub certificates_invalid: u64,
    pub trials: Vec<TrialOutcome>,
}

impl CampaignReport {
    /// Every failure carried a valid certificate.
    pub fn all_certificates_valid(&self) -> bool {
        self.certificates_invalid == 0 && self.certificates_valid == self.failures
    }
}

pub fn generate_trial(cfg: &CampaignConfig, trial: u64) -> Result<(TaskSet, u64)> {
    let mut rng = trial_rng(cfg.seed, trial);
    let ts = random_task_set(&mut rng, &cfg.generator())?;
    Ok((ts, rng.next_u64()))
}

fn run_trial(cfg: &CampaignConfig, trial: u64) -> TrialOutcome {
    let run = || -> Result<TrialOutcome> {
        let (ts, fit_seed) = generate_trial(cfg, trial)?;
        let p = dm_partition(&ts, cfg.m, cfg.test, &cfg.fit.strategy(fit_seed))?;
        let certificate = if p.is_success() {
            None
        } else {
            Some(failure_certificate(&p, &ts)?)
        };
        Ok(TrialOutcome {
            trial,
            success: p.is_success(),
            failed_at: p.failed_task(),
            certificate,
            error: None,
        })
    };
    run().unwrap_or_else(|e| TrialOutcome {
        trial,
        success: false,
        failed_at: None,
        certificate: None,
        error: Some(e.to_string()),
    })
}

/// Runs the trials in parallel and aggregates them in trial order.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignReport> {
    if cfg.m == 0 {
        return Err(SchedError::Domain("need at least one processor".into()));
    }
    let gen = cfg.generator();
    gen.validate()?;
    if !cfg.test.admits(cfg.class) {
        return Err(SchedError::DeadlineClass {
            test: cfg.test.name(),
            required: "constrained",
            detail: format!("campaign generates {} sets", cfg.class),
        });
    }
    let trials: Vec<TrialOutcome> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, i))
        .collect();
    let successes = trials.iter().filter(|t| t.success).count() as u64;
    let errors = trials.iter().filter(|t| t.error.is_some()).count() as u64;
    let failures = cfg.trials - successes - errors;
    let certificates_valid = trials
        .iter()
        .filter(|t| t.certificate.as_ref().is_some_and(|c| c.is_valid()))
        .count() as u64;
    let certificates_invalid = trials
        .iter()
        .filter(|t| t.certificate.as_ref().is_some_and(|c| !c.is_valid()))
        .count() as u64;
    let decided = successes + failures;
    Ok(CampaignReport {
        generator: gen.describe(),
        config: cfg.clone(),
        successes,
        failures,
        errors,
        acceptance_ratio: (decided > 0).then(|| successes as f64 / decided as f64),
        certificates_valid,
        certificates_invalid,
        trials,
    })
}
