use std::fs;

use dmpart_core::doc::script_to_json;
use dmpart_core::rational::{self, ratio};
use dmpart_core::tightness::{default_constrained_epsilon, gen_constrained_with, tight_f, Reproduction};
use dmpart_core::{gen_arbitrary_af, gen_arbitrary_ff, FitStrategy, TaskSetDocument, TightInstance};
use serde::Serialize;

use super::{write_json, CliError, CliResult, Status};
use crate::args::{Instance, TightArgs};

#[derive(Debug, Serialize)]
pub struct Report {
    pub instance: &'static str,
    pub m: usize,
    pub epsilon: String,
    pub test: String,
    pub fit: &'static str,
    pub tasks: usize,
    pub total_utilization: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_exact: Option<String>,
    #[serde(flatten)]
    pub reproduction: Reproduction,
}

fn instance_name(which: Instance) -> &'static str {
    match which {
        Instance::FirstFit => "first-fit",
        Instance::AdversarialFit => "adversarial-fit",
        Instance::Constrained => "constrained",
    }
}

pub fn build(which: Instance, m: usize, epsilon: Option<&dmpart_core::Rational>) -> CliResult<TightInstance> {
    let inst = match which {
        Instance::FirstFit => gen_arbitrary_ff(m, epsilon.unwrap_or(&ratio(1, 100)))?,
        Instance::AdversarialFit => gen_arbitrary_af(m, epsilon.unwrap_or(&ratio(1, 100)))?,
        Instance::Constrained => {
            gen_constrained_with(m, epsilon.unwrap_or(&default_constrained_epsilon()))?
        }
    };
    Ok(inst)
}

pub fn report(which: Instance, inst: &TightInstance) -> CliResult<Report> {
    let (_, reproduction) = inst.reproduce()?;
    Ok(Report {
        instance: instance_name(which),
        m: inst.processors,
        epsilon: rational::format(&inst.epsilon),
        test: inst.test.to_string(),
        fit: inst.fit.name(),
        tasks: inst.task_set.len(),
        total_utilization: rational::format(&inst.task_set.total_utilization()),
        f: inst.f.as_ref().map(|_| tight_f()),
        f_exact: inst.f.as_ref().map(rational::format),
        reproduction,
    })
}

pub fn run(args: &TightArgs) -> CliResult {
    let inst = build(args.instance, args.m, args.epsilon.as_ref())?;
    let rep = report(args.instance, &inst)?;
    if !rep.reproduction.fails_as_expected {
        log::warn!(
            "expected failure at {}, got {:?}",
            rep.reproduction.expected_fail_id,
            rep.reproduction.failed_at
        );
    }
    if let Some(dir) = &args.out {
        let io = |e: std::io::Error| CliError::Input(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        let doc = TaskSetDocument::new(&inst.task_set, Some(inst.processors));
        fs::write(dir.join("instance.json"), doc.to_json() + "\n").map_err(io)?;
        if let FitStrategy::Scripted { .. } = inst.fit {
            let script = script_to_json(&inst.fit).expect("scripted fit");
            fs::write(dir.join("script.json"), script + "\n").map_err(io)?;
        }
        write_json(Some(&dir.join("report.json")), &rep)?;
    }
    write_json(None, &rep)?;
    Ok(Status::Ok)
}
