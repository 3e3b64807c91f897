use std::path::Path;
use std::process::{Command, Output};

use dmpart_core::rational::{self, int, ratio};
use dmpart_core::{dbf_total, TaskSetDocument};
use serde_json::Value;

fn dmpart(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmpart"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn first_fit_instance_fails_with_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ff");
    let o = dmpart(&["tight", "--instance", "first-fit", "--m", "4", "--epsilon", "1/100", "--out", path(&out)]);
    assert_eq!(code(&o), 0);
    let o = dmpart(&["partition", path(&out.join("instance.json")), "--test", "fbb-arb", "--fit", "first-fit"]);
    assert_eq!(code(&o), 2);
    let v = json(&o);
    assert_eq!(v["partition"]["outcome"]["status"], "failed");
    assert_eq!(v["partition"]["outcome"]["task_id"], 8);
    let cert = &v["certificate"];
    assert_eq!(cert["kind"], "arbitrary");
    let threshold = 1.0 / (3.0 - 1.0 / 4.0);
    assert!(cert["max_term"].as_f64().unwrap() > threshold);
    assert!((cert["threshold"].as_f64().unwrap() - threshold).abs() < 1e-12);
}

#[test]
fn first_fit_speedup_closed_form() {
    let o = dmpart(&["tight", "--instance", "first-fit", "--m", "2", "--epsilon", "1/100"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    // Utilization dominates: 1/bound = 3M/(M + 1 + εM).
    let (m, e) = (2.0, 0.01);
    let expected = 3.0 * m / (m + 1.0 + e * m);
    let measured = v["measured_speedup"].as_f64().unwrap();
    assert!((measured - expected).abs() < 1e-9);
    assert!((measured - 1.98675).abs() < 1e-5);
    assert_eq!(v["failed_at"], 4);
}

#[test]
fn adversarial_instance_files_and_dbf_term() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("af");
    let o = dmpart(&["tight", "--instance", "adversarial-fit", "--m", "4", "--epsilon", "1/100", "--out", path(&out)]);
    assert_eq!(code(&o), 0);
    let rep: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(rep, json(&o));
    let (eps, m) = (ratio(1, 100), int(4));
    let term = (int(1) + int(2) * &eps + int(1) / &m) / int(3);
    assert_eq!(rep["speed_bound"]["dbf_term_exact"], rational::format(&term));
    assert_eq!(rep["failed_at"], 12);

    let o = dmpart(&[
        "partition",
        path(&out.join("instance.json")),
        "--test",
        "busy-window",
        "--script",
        path(&out.join("script.json")),
    ]);
    assert_eq!(code(&o), 2);
    let v = json(&o);
    assert_eq!(v["partition"]["outcome"]["task_id"], 12);
    assert_eq!(v["fit"]["kind"], "scripted");
    let verdicts = v["partition"]["outcome"]["per_processor_verdicts"].as_array().unwrap();
    assert_eq!(verdicts.len(), 4);
    assert!(verdicts.iter().all(|x| x["accepted"] == false));
}

#[test]
fn constrained_instance_report() {
    let o = dmpart(&["tight", "--instance", "constrained", "--m", "30"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert!((v["f"].as_f64().unwrap() - 0.7034674).abs() < 5e-8);
    assert_eq!(v["failed_at"], 2 * 30 * 30 + 1);
    assert_eq!(v["tasks"], 2 * 30 * 30 + 1);
    assert_eq!(v["fails_as_expected"], true);
}

#[test]
fn tight_bounds_are_input_errors() {
    assert_eq!(code(&dmpart(&["tight", "--instance", "constrained", "--m", "3"])), 1);
    assert_eq!(code(&dmpart(&["tight", "--instance", "first-fit", "--m", "2", "--epsilon", "1/2"])), 1);
    assert_eq!(code(&dmpart(&["tight", "--instance", "fifth", "--m", "2"])), 64);
}

#[test]
fn instance_document_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    assert_eq!(code(&dmpart(&["tight", "--instance", "constrained", "--m", "10", "--out", path(&out)])), 0);
    let text = std::fs::read_to_string(out.join("instance.json")).unwrap();
    let doc = TaskSetDocument::from_json(&text).unwrap();
    let ts = doc.to_task_set().unwrap();
    assert_eq!(ts.len(), 201);
    assert_eq!(doc.m, Some(10));
    assert_eq!(TaskSetDocument::new(&ts, doc.m).to_json() + "\n", text);
}

#[test]
fn feasible_single_task() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "one.json", r#"{"version":"1","tasks":[{"id":1,"c":"1","t":"4","d":"3"}]}"#);
    let o = dmpart(&["partition", &f, "--m", "1", "--test", "tda"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["partition"]["outcome"]["status"], "success");
    assert!(v.get("certificate").is_none());
    assert_eq!(v["partition"]["assignments"]["1"], 1);
}

#[test]
fn processor_count_from_document() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "two.json",
        r#"{"version":"1","m":2,"tasks":[{"id":1,"c":"3/4","t":"1","d":"1"},{"id":2,"c":"3/4","t":"1","d":"1"}]}"#,
    );
    let o = dmpart(&["partition", &f, "--test", "hyperbolic"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["partition"]["processors"], 2);
    let o = dmpart(&["partition", &f, "--m", "1", "--test", "hyperbolic"]);
    assert_eq!(code(&o), 2);
    assert_eq!(json(&o)["certificate"]["kind"], "constrained");
}

#[test]
fn input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"version":"1","tasks":[{"id":1,"c":"1/0","t":"2","d":"2"}]}"#);
    let o = dmpart(&["partition", &bad, "--m", "1", "--test", "tda"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("1/0"));
    assert_eq!(code(&dmpart(&["partition", "/nonexistent/ts.json", "--m", "1", "--test", "tda"])), 1);
    let arb = write(dir.path(), "arb.json", r#"{"version":"1","tasks":[{"id":1,"c":"1","t":"2","d":"3"}]}"#);
    assert_eq!(code(&dmpart(&["partition", &arb, "--m", "1", "--test", "tda"])), 1);
    let v2 = write(dir.path(), "v2.json", r#"{"version":"2","tasks":[]}"#);
    assert_eq!(code(&dmpart(&["partition", &v2, "--m", "1", "--test", "tda"])), 1);
}

#[test]
fn density_above_one_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "d.json", r#"{"version":"1","tasks":[{"id":1,"c":"3","t":"4","d":"2"}]}"#);
    let o = dmpart(&["partition", &f, "--m", "8", "--test", "tda"]);
    assert_eq!(code(&o), 2);
    assert_eq!(json(&o)["status"], "infeasible");
}

#[test]
fn usage_errors_exit_sixty_four() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "one.json", r#"{"version":"1","tasks":[{"id":1,"c":"1","t":"4","d":"3"}]}"#);
    assert_eq!(code(&dmpart(&["partition", &f, "--m", "1", "--test", "edf"])), 64);
    assert_eq!(code(&dmpart(&["partition", &f, "--m", "1", "--test", "tda", "--fit", "next-fit"])), 64);
    assert_eq!(code(&dmpart(&["partition", &f, "--m", "1", "--test", "tda", "--fit", "scripted"])), 64);
    assert_eq!(code(&dmpart(&["partition", &f, "--test", "tda"])), 64);
    assert_eq!(code(&dmpart(&["frobnicate"])), 64);
    assert_eq!(code(&dmpart(&[])), 64);
    assert_eq!(code(&dmpart(&["--help"])), 0);
    assert_eq!(code(&dmpart(&["--version"])), 0);
}

#[test]
fn scripted_run_rejects_bad_processor() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "one.json", r#"{"version":"1","tasks":[{"id":1,"c":"1","t":"4","d":"3"}]}"#);
    let s = write(dir.path(), "s.json", r#"{"1": 5}"#);
    let o = dmpart(&["partition", &f, "--m", "2", "--test", "tda", "--script", &s]);
    assert_eq!(code(&o), 1);
}

#[test]
fn trace_is_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "ts.json",
        r#"{"version":"1","tasks":[{"id":1,"c":"1","t":"2","d":"2"},{"id":2,"c":"1","t":"3","d":"3"},{"id":3,"c":"2","t":"4","d":"4"}]}"#,
    );
    let trace = dir.path().join("trace.jsonl");
    let o = dmpart(&["partition", &f, "--m", "2", "--test", "tda", "--trace", path(&trace), "--horizon", "12"]);
    assert_eq!(code(&o), 0);
    let lines: Vec<Value> = std::fs::read_to_string(&trace)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(lines.iter().any(|l| l["processor"] == 2));
    assert!(lines.iter().all(|l| l["kind"] != "deadline_miss"));
    // τ1 alone on its processor: 6 releases in [0, 12), all finished.
    let finishes = lines.iter().filter(|l| l["task"] == 1 && l["kind"] == "finish").count();
    assert_eq!(finishes, 6);
}

#[test]
fn dbf_sharp_curve() {
    let o = dmpart(&["curves", "--what", "dbf-sharp", "--from", "1", "--to", "6", "--step", "1/100"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "t,value");
    assert_eq!(rows.len() - 1, 501);
    let first: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(first[0], "1");
    assert!((first[1].parse::<f64>().unwrap() - 0.3517337).abs() < 5e-8);
    let last: Vec<&str> = rows[501].split(',').collect();
    assert!((last[0].parse::<f64>().unwrap() - 6.0).abs() < 1e-9);
}

#[test]
fn ratio_curve_minimum_at_five() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ratio.csv");
    let o = dmpart(&["curves", "--what", "ratio", "--from", "1", "--to", "4000", "--out", path(&out)]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(out).unwrap();
    let values: Vec<(u64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(values.len(), 4000);
    let (argmin, min) = values
        .iter()
        .filter(|(l, _)| *l >= 5)
        .fold((0, f64::INFINITY), |acc, &(l, v)| if v < acc.1 { (l, v) } else { acc });
    assert_eq!(argmin, 5);
    assert!((min - 0.3357).abs() < 5e-4);
    assert_eq!(code(&dmpart(&["curves", "--what", "ratio", "--to", "7/2"])), 1);
}

#[test]
fn dbf_curve_matches_demand() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"version":"1","tasks":[{"id":1,"c":"1/2","t":"3","d":"2"},{"id":2,"c":"1","t":"inf","d":"5/2"},{"id":3,"c":"2","t":"7","d":"9"}]}"#;
    let f = write(dir.path(), "ts.json", text);
    let o = dmpart(&["curves", "--what", "dbf", "--input", &f, "--to", "30"]);
    assert_eq!(code(&o), 0);
    let ts = TaskSetDocument::from_json(text).unwrap().to_task_set().unwrap();
    let out = String::from_utf8(o.stdout).unwrap();
    let mut rows = 0;
    for line in out.lines().skip(1) {
        let (t, v) = line.split_once(',').unwrap();
        let t = rational::parse(t).unwrap();
        assert_eq!(rational::parse(v).unwrap(), dbf_total(ts.tasks(), &t).unwrap());
        rows += 1;
    }
    // Steps: τ1 at 2, 5, …, 29 (10); τ2 at 5/2; τ3 at 9, 16, 23, 30 (4);
    // 23 is shared.
    assert_eq!(rows, 14);
    assert_eq!(code(&dmpart(&["curves", "--what", "dbf"])), 64);
}

#[test]
fn empty_campaign() {
    let o = dmpart(&["random", "--n", "5", "--m", "2", "--trials", "0", "--test", "tda"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["trials"].as_array().unwrap().len(), 0);
    assert_eq!(v["successes"], 0);
    assert!(v["acceptance_ratio"].is_null());
}

#[test]
fn campaign_is_deterministic_across_thread_counts() {
    let args = ["random", "--n", "6", "--m", "3", "--class", "arbitrary", "--seed", "11", "--trials", "150", "--test", "bini", "--fit", "arbitrary-fit"];
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_dmpart"))
            .args(args)
            .env("DMPART_THREADS", threads)
            .output()
            .unwrap()
    };
    let (a, b) = (run("1"), run("4"));
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let bad = run("many");
    assert_eq!(code(&bad), 1);
}

#[test]
fn constrained_campaign_certificates_hold() {
    let o = dmpart(&["random", "--n", "8", "--m", "2", "--seed", "2024", "--trials", "1000", "--test", "tda"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    let failures = v["failures"].as_u64().unwrap();
    assert!(failures > 0);
    assert_eq!(v["errors"], 0);
    assert_eq!(v["certificates_valid"].as_u64().unwrap(), failures);
    assert_eq!(v["certificates_invalid"], 0);
}
