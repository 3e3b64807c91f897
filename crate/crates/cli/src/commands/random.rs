use dmpart_core::campaign::{run_campaign, CampaignConfig};

use super::{write_json, CliResult, Status};
use crate::args::RandomArgs;

pub fn config(args: &RandomArgs) -> CampaignConfig {
    let (lo, hi) = CampaignConfig::default_total_util(args.n, args.m);
    let hi = args.util_max.unwrap_or(hi);
    let lo = args.util_min.unwrap_or(if args.util_max.is_some() { 0.25 * hi } else { lo });
    CampaignConfig {
        n: args.n,
        m: args.m,
        class: args.class.into(),
        seed: args.seed,
        trials: args.trials,
        test: args.test,
        fit: args.fit,
        total_util: (lo, hi),
    }
}

pub fn run(args: &RandomArgs) -> CliResult {
    let report = run_campaign(&config(args))?;
    if !report.all_certificates_valid() {
        log::error!(
            "{} of {} failures lack a valid certificate",
            report.failures - report.certificates_valid,
            report.failures
        );
    }
    if report.errors > 0 {
        log::warn!("{} trials ended in an analysis error", report.errors);
    }
    write_json(args.out.as_deref(), &report)?;
    Ok(Status::Ok)
}
