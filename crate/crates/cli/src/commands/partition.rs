use std::io::Write;

use dmpart_core::demand::default_horizon;
use dmpart_core::doc::parse_script;
use dmpart_core::rational::{self, int};
use dmpart_core::sim::SimEvent;
use dmpart_core::{
    dm_partition, failure_certificate, simulate_dm, FailureCertificate, FitStrategy, Partition,
    SchedError,
};
use serde::Serialize;

use super::{output, read_document, read_text, write_json, CliError, CliResult, Status};
use crate::args::{FitArg, PartitionArgs};

#[derive(Debug, Serialize)]
struct Report<'a> {
    fit: &'a FitStrategy,
    total_utilization: String,
    partition: &'a Partition,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<FailureCertificate>,
}

#[derive(Debug, Serialize)]
struct Infeasible {
    status: &'static str,
    reason: String,
}

#[derive(Debug, Serialize)]
struct TraceLine<'a> {
    processor: usize,
    #[serde(flatten)]
    event: &'a SimEvent,
}

fn resolve_fit(args: &PartitionArgs) -> CliResult<FitStrategy> {
    match (args.fit, &args.script) {
        (None | Some(FitArg::Scripted), Some(path)) => Ok(parse_script(&read_text(path)?)?),
        (Some(FitArg::Scripted), None) => Err(CliError::Usage("--fit scripted needs --script".into())),
        (Some(_), Some(_)) => Err(CliError::Usage("--script only applies to --fit scripted".into())),
        (None | Some(FitArg::FirstFit), None) => Ok(FitStrategy::FirstFit),
        (Some(FitArg::ArbitraryFit), None) => Ok(FitStrategy::ArbitraryFit { seed: args.seed }),
        (Some(FitArg::BestFit), None) => Ok(FitStrategy::BestFit),
        (Some(FitArg::WorstFit), None) => Ok(FitStrategy::WorstFit),
    }
}

pub fn run(args: &PartitionArgs) -> CliResult {
    let doc = read_document(&args.input)?;
    let m = args
        .m
        .or(doc.m)
        .ok_or_else(|| CliError::Usage("no processor count: pass --m or set m in the document".into()))?;
    let fit = resolve_fit(args)?;
    let ts = match doc.to_task_set() {
        Ok(ts) => ts,
        Err(e @ SchedError::DensityExceeded { .. }) => {
            write_json(
                args.out.as_deref(),
                &Infeasible {
                    status: "infeasible",
                    reason: e.to_string(),
                },
            )?;
            return Ok(Status::Infeasible);
        }
        Err(e) => return Err(e.into()),
    };

    let p = dm_partition(&ts, m, args.test, &fit)?;
    let certificate = if p.is_success() {
        None
    } else {
        Some(failure_certificate(&p, &ts)?)
    };
    if let Some(c) = &certificate {
        log::info!(
            "failed at {:?}: max term {:.7} against threshold {:.7}",
            p.failed_task(),
            c.max_term(),
            c.threshold()
        );
    }
    if let Some(path) = &args.trace {
        write_trace(path, &p, args.horizon.as_ref())?;
    }
    write_json(
        args.out.as_deref(),
        &Report {
            fit: &fit,
            total_utilization: rational::format(&ts.total_utilization()),
            partition: &p,
            certificate,
        },
    )?;
    Ok(if p.is_success() {
        Status::Ok
    } else {
        Status::Infeasible
    })
}

fn write_trace(
    path: &std::path::Path,
    p: &Partition,
    horizon: Option<&dmpart_core::Rational>,
) -> CliResult<()> {
    let mut out = output(Some(path))?;
    for (i, set) in p.per_processor.iter().enumerate() {
        if set.is_empty() {
            continue;
        }
        let h = horizon.cloned().unwrap_or_else(|| default_horizon(set));
        let trace = simulate_dm(set, &h, &int(1))?;
        for event in &trace.events {
            let line = TraceLine {
                processor: i + 1,
                event,
            };
            serde_json::to_writer(&mut out, &line).map_err(|e| CliError::Input(e.to_string()))?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}
