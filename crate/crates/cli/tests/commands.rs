use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use densep_core::distlearn::{parse_rational, ratio};
use serde_json::Value;
use tempfile::TempDir;

fn densep(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_densep")).args(args).current_dir(dir).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_str(stdout(out).trim()).unwrap()
}

fn keys(v: &Value, acc: &mut Vec<String>) {
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                acc.push(k.clone());
                keys(v, acc);
            }
        }
        Value::Array(items) => items.iter().for_each(|v| keys(v, acc)),
        _ => {}
    }
}

fn has_secret_exponent(text: &str) -> bool {
    text.lines().filter(|l| !l.trim().is_empty()).any(|l| {
        let mut acc = Vec::new();
        keys(&serde_json::from_str(l).unwrap(), &mut acc);
        acc.iter().any(|k| k == "a")
    })
}

#[test]
fn four_bit_instances_use_p_11() {
    let dir = TempDir::new().unwrap();
    let v = json(&densep(&["gen-instance", "--bits", "4", "--n-in", "2", "--out", "pub.json"], dir.path()));
    assert_eq!(v["p"], 11);
    assert_eq!(v["q"], 5);
    let file: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("pub.json")).unwrap()).unwrap();
    assert_eq!(file, v);
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = TempDir::new().unwrap();
    for name in ["a", "b"] {
        let out = format!("{name}.json");
        let secret = format!("{name}.secret.json");
        stdout(&densep(
            &["gen-instance", "--seed", "5", "--bits", "18", "--out", &out, "--secret", &secret],
            dir.path(),
        ));
    }
    let read = |f: &str| fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.json"), read("b.json"));
    assert_eq!(read("a.secret.json"), read("b.secret.json"));
    let other = densep(&["gen-instance", "--seed", "6", "--bits", "18"], dir.path());
    assert_ne!(stdout(&other).as_bytes(), read("a.json").as_slice());
}

#[test]
fn secret_files_stay_out_of_public_artifacts() {
    let dir = TempDir::new().unwrap();
    let public =
        stdout(&densep(&["gen-instance", "--bits", "16", "--out", "pub.json", "--secret", "sec.json"], dir.path()));
    assert!(!has_secret_exponent(&public));
    assert!(has_secret_exponent(&fs::read_to_string(dir.path().join("sec.json")).unwrap()));
    let samples =
        stdout(&densep(&["sample", "--secret", "sec.json", "--count", "20", "--out", "s.ndjson"], dir.path()));
    assert!(samples.is_empty());
    assert!(!has_secret_exponent(&fs::read_to_string(dir.path().join("s.ndjson")).unwrap()));
    for learner in ["key-recovery", "histogram", "uniform"] {
        let metrics = stdout(&densep(&["learn", "--in", "s.ndjson", "--learner", learner], dir.path()));
        assert!(!has_secret_exponent(&metrics), "{learner}");
    }
    let report = stdout(&densep(&["separation-report", "--bits", "14", "--n-in", "10", "--budget", "500"], dir.path()));
    assert!(!has_secret_exponent(&report));
}

#[test]
fn zero_count_gives_empty_output() {
    let dir = TempDir::new().unwrap();
    stdout(&densep(&["gen-instance", "--secret", "sec.json"], dir.path()));
    assert_eq!(stdout(&densep(&["sample", "--secret", "sec.json", "--count", "0"], dir.path())), "");
}

#[test]
fn sample_lines_round_trip() {
    let dir = TempDir::new().unwrap();
    stdout(&densep(&["gen-instance", "--bits", "12", "--n-in", "6", "--secret", "sec.json"], dir.path()));
    let text = stdout(&densep(&["sample", "--secret", "sec.json", "--count", "50", "--seed", "2"], dir.path()));
    assert_eq!(text.lines().count(), 50);
    for line in text.lines() {
        let r = densep_core::SampleRecord::from_line(line).unwrap();
        assert_eq!(r.to_line(), line);
    }
}

#[test]
fn toy_instance_maps_10_to_4() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("sec.json"), r#"{"p":11,"q":5,"g":3,"ga":9,"n_in":2,"a":2,"k":2}"#).unwrap();
    let text = stdout(&densep(&["sample", "--secret", "sec.json", "--count", "200"], dir.path()));
    let hits: Vec<Value> =
        text.lines().map(|l| serde_json::from_str::<Value>(l).unwrap()).filter(|v| v["x"] == "10").collect();
    assert!(!hits.is_empty());
    assert!(hits.iter().all(|v| v["y"] == 4));
}

#[test]
fn learn_reports_exact_distances() {
    let dir = TempDir::new().unwrap();
    stdout(&densep(&["gen-instance", "--bits", "20", "--n-in", "16", "--secret", "sec.json"], dir.path()));
    stdout(&densep(&["sample", "--secret", "sec.json", "--count", "200", "--out", "s.ndjson"], dir.path()));
    let learn = |learner: &str| {
        json(&densep(&["learn", "--in", "s.ndjson", "--learner", learner, "--secret", "sec.json"], dir.path()))
    };
    let key = learn("key-recovery");
    assert_eq!(key["tv"], "0/1");
    assert_eq!(key["samples_used"], 1);
    assert!(key.get("wall_time_ms").is_none());
    let uniform = learn("uniform");
    let m = uniform["model"]["m"].as_u64().unwrap();
    assert_eq!(uniform["tv"], format!("{}/{}", (1u64 << m) - 1, 1u64 << m));
    let hist = parse_rational(learn("histogram")["tv"].as_str().unwrap()).unwrap();
    assert_eq!(hist, ratio((1u64 << 16) - 200 + collisions(&dir), 1u64 << 16));
}

fn collisions(dir: &TempDir) -> u64 {
    let text = fs::read_to_string(dir.path().join("s.ndjson")).unwrap();
    let distinct: std::collections::BTreeSet<&str> = text.lines().collect();
    200 - distinct.len() as u64
}

#[test]
fn learn_output_ignores_the_evaluation_secret() {
    let dir = TempDir::new().unwrap();
    stdout(&densep(&["gen-instance", "--bits", "14", "--n-in", "8", "--secret", "sec.json"], dir.path()));
    stdout(&densep(&["sample", "--secret", "sec.json", "--count", "30", "--out", "s.ndjson"], dir.path()));
    stdout(&densep(&["learn", "--in", "s.ndjson", "--learner", "histogram", "--out", "plain.json"], dir.path()));
    let args = ["learn", "--in", "s.ndjson", "--learner", "histogram", "--out", "eval.json", "--secret", "sec.json"];
    stdout(&densep(&args, dir.path()));
    let read = |f: &str| fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("plain.json"), read("eval.json"));
}

#[test]
fn corrupted_records_name_their_index() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.ndjson"), "{\"x\":\"10\",\"y\":7,\"p\":11,\"g\":3,\"ga\":9}\n").unwrap();
    let out = densep(&["learn", "--in", "bad.ndjson", "--learner", "key-recovery"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("record 0"));

    fs::write(dir.path().join("junk.ndjson"), "{\"x\":\"10\",\"y\":4,\"p\":11,\"g\":3,\"ga\":9}\nnot json\n").unwrap();
    let out = densep(&["learn", "--in", "junk.ndjson", "--learner", "histogram"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("record 1"));
}

#[test]
fn exam_reports() {
    let dir = TempDir::new().unwrap();
    let key = json(&densep(&["exam", "--trials", "300", "--learner", "key-recovery"], dir.path()));
    assert_eq!(key["rate"], 1.0);
    assert_eq!(key["meets_q_inference"], true);
    assert_eq!(key.as_object().unwrap().len(), 8);
    let uniform = json(&densep(&["exam", "--trials", "1000", "--learner", "uniform"], dir.path()));
    assert!(uniform["ci_low"].as_f64().unwrap() < 0.5 && uniform["ci_high"].as_f64().unwrap() > 0.5);
    assert_eq!(uniform["meets_q_inference"], false);
}

#[test]
fn exam_rejects_bad_configs() {
    let dir = TempDir::new().unwrap();
    for args in [
        &["exam", "--epsilon", "1/9"][..],
        &["exam", "--epsilon", "0.2"],
        &["exam", "--trials", "99"],
        &["exam", "--delta", "0"],
    ] {
        assert_eq!(densep(args, dir.path()).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn verify_lemmas_exit_status() {
    let dir = TempDir::new().unwrap();
    let small = ["verify-lemmas", "--loss-cases", "20", "--argmax-cases", "2", "--counting-cases", "30"];
    let ok = densep(&small, dir.path());
    let report = json(&ok);
    assert_eq!(report["passed"], true);
    let cases: Vec<u64> = report["suites"].as_array().unwrap().iter().map(|s| s["cases"].as_u64().unwrap()).collect();
    assert_eq!(cases, vec![20, 2, 30]);

    let mut faulty = small.to_vec();
    faulty.push("--inject-fault");
    let out = densep(&faulty, dir.path());
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], false);
    assert_eq!(report["suites"][0]["passed"], 0);
}

#[test]
fn separation_report_contract() {
    let dir = TempDir::new().unwrap();
    let args = ["separation-report", "--seed", "3", "--bits", "16", "--n-in", "12", "--budget", "2000"];
    let a = stdout(&densep(&args, dir.path()));
    let b = stdout(&densep(&args, dir.path()));
    assert_eq!(a, b);
    let v: Value = serde_json::from_str(a.trim()).unwrap();
    assert_eq!(v["caveat"], densep_cli::commands::CAVEAT);
    assert_eq!(v["emulated_quantum"]["tv"], "0/1");
    assert_eq!(v["emulated_quantum"]["samples_used"], 1);
    for baseline in v["baselines"].as_array().unwrap() {
        let tv = baseline["tv_f64"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&tv));
    }
    let timed = stdout(&densep(&[&args[..], &["--timings"]].concat(), dir.path()));
    assert!(timed.contains("wall_time_ms"));
    assert!(!a.contains("wall_time_ms"));
    let too_big = densep(&["separation-report", "--bits", "33"], dir.path());
    assert_eq!(too_big.status.code(), Some(2));
}

#[test]
fn pretty_output_is_a_table() {
    let dir = TempDir::new().unwrap();
    let text = stdout(&densep(&["gen-instance", "--bits", "4", "--n-in", "2", "--pretty"], dir.path()));
    assert!(text.lines().any(|l| l.starts_with("p ") && l.trim_end().ends_with("11")));
    assert!(serde_json::from_str::<Value>(&text).is_err());
}
