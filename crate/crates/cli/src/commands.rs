use std::io::Write;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use densep_core::distlearn::{format_rational, ratio, to_f64, tv_against_induced};
use densep_core::exam::{estimate_pass_rate, exam_taker_from_learner, Examinee, InstanceSampler, QPoly, MIN_TRIALS};
use densep_core::learners::{
    histogram_learner, key_recovery_with, sample_dtilde, target_spec, uniform_baseline, BsgsEmulation,
    HistogramLearner, KeyRecoveryLearner, UniformLearner,
};
use densep_core::lemmas::{verify_lemmas, VerifyConfig};
use densep_core::prf::{instance_gen, sample_key};
use densep_core::seed::stream;
use densep_core::{Instance, LearnedModel, Rational, SampleRecord, SecretInstance, SecretKey};
use serde::Serialize;
use serde_json::Value;

use crate::args::{
    Cli, Command, ExamArgs, GenInstanceArgs, LearnArgs, LearnerName, SampleArgs, SeparationArgs, VerifyArgs,
};
use crate::files::{parse_fraction, read_public, read_samples, read_secret, write_text, SecretFile};
use crate::render::render;

/// Printed verbatim in every separation report.
pub const CAVEAT: &str = "caveat: discrete logarithms are emulated classically (baby-step giant-step); \
classical hardness of the baselines' task is assumed from DDH, not proven, at desk scale";

/// Runs one command. Returns `false` when a verification failed.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<bool> {
    match cli.command {
        Command::GenInstance(a) => gen_instance(&a, out).map(|_| true),
        Command::Sample(a) => sample(&a, out).map(|_| true),
        Command::Learn(a) => learn(&a, out).map(|_| true),
        Command::Exam(a) => exam(&a, out, err).map(|_| true),
        Command::VerifyLemmas(a) => verify(&a, out, err),
        Command::SeparationReport(a) => separation(&a, out).map(|_| true),
    }
}

fn emit<T: Serialize>(value: &T, pretty: bool, out: &mut dyn Write) -> Result<String> {
    let json = serde_json::to_string(value)?;
    if pretty {
        let v: Value = serde_json::from_str(&json)?;
        write!(out, "{}", render(&v))?;
    } else {
        writeln!(out, "{json}")?;
    }
    Ok(json)
}

fn millis(start: Option<Instant>) -> Option<f64> {
    start.map(|s| s.elapsed().as_secs_f64() * 1e3)
}

fn gen_instance(a: &GenInstanceArgs, out: &mut dyn Write) -> Result<()> {
    let mut rng = stream(a.common.seed, "gen-instance", 0);
    let si = instance_gen(a.bits, a.n_in, &mut rng)?;
    let k = sample_key(si.instance(), &mut rng);
    let public = serde_json::to_string(si.instance())?;
    if let Some(path) = &a.out {
        write_text(path, &format!("{public}\n"))?;
    }
    if let Some(path) = &a.secret {
        write_text(path, &format!("{}\n", serde_json::to_string(&SecretFile::new(&si, &k))?))?;
    }
    emit(si.instance(), a.common.pretty, out)?;
    Ok(())
}

fn sample(a: &SampleArgs, out: &mut dyn Write) -> Result<()> {
    let (si, k) = read_secret(&a.secret)?;
    if let Some(path) = &a.input {
        ensure!(read_public(path)? == *si.instance(), "{} does not match the secret file", path.display());
    }
    let mut rng = stream(a.common.seed, "sample", 0);
    let mut text = String::new();
    for _ in 0..a.count {
        text.push_str(&sample_dtilde(&si, &k, &mut rng).to_line());
        text.push('\n');
    }
    match &a.out {
        Some(path) => write_text(path, &text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct LearnMetrics {
    learner: &'static str,
    records_read: u64,
    samples_used: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    dlog_calls: Option<u64>,
    delta: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    tv: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tv_f64: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<LearnedModel>,
}

fn unit_interval(s: &str, name: &str) -> Result<Rational> {
    let r = parse_fraction(s)?;
    ensure!(r > ratio(0, 1) && r < ratio(1, 1), "{name} must lie in (0, 1)");
    Ok(r)
}

fn learn(a: &LearnArgs, out: &mut dyn Write) -> Result<()> {
    let delta = unit_interval(&a.delta, "delta")?;
    let start = a.timings.then(Instant::now);
    let records = read_samples(&a.input, a.budget)?;
    let first = records.first().context("the sample file holds no records")?;
    let (model, samples_used, dlog_calls) = match a.learner {
        LearnerName::KeyRecovery => {
            let run = key_recovery_with(first, &mut BsgsEmulation::new()).context("record 0")?;
            (run.model, run.samples_used, Some(run.dlog_calls))
        }
        LearnerName::Histogram => (histogram_learner(&records)?, records.len() as u64, None),
        LearnerName::Uniform => {
            let inst = first.instance().context("record 0")?;
            (uniform_baseline(inst.n_in(), inst.output_bits())?, 0, None)
        }
    };
    let elapsed = millis(start);
    let tv = match &a.secret {
        Some(path) => {
            let (si, k) = read_secret(path)?;
            ensure!(
                first.params() == densep_core::PublicParams::of(si.instance()),
                "the secret file names another instance"
            );
            Some(tv_against_induced(&model.evaluator()?, &target_spec(si.instance(), &k)?)?)
        }
        None => None,
    };
    if let Some(path) = &a.out {
        write_text(path, &format!("{}\n", serde_json::to_string(&model)?))?;
    }
    let metrics = LearnMetrics {
        learner: learner_label(a.learner),
        records_read: records.len() as u64,
        samples_used,
        dlog_calls,
        delta: format_rational(&delta),
        tv_f64: tv.as_ref().map(to_f64),
        tv: tv.as_ref().map(format_rational),
        wall_time_ms: elapsed,
        model: a.out.is_none().then_some(model),
    };
    emit(&metrics, a.common.pretty, out)?;
    Ok(())
}

fn learner_label(l: LearnerName) -> &'static str {
    match l {
        LearnerName::KeyRecovery => "key-recovery",
        LearnerName::Histogram => "histogram",
        LearnerName::Uniform => "uniform",
    }
}

fn exam(a: &ExamArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let epsilon = parse_fraction(&a.epsilon)?;
    ensure!(epsilon > ratio(0, 1) && epsilon < ratio(1, 9), "epsilon must lie in (0, 1/9)");
    unit_interval(&a.delta, "delta")?;
    ensure!(a.trials >= MIN_TRIALS, "exams need at least {MIN_TRIALS} trials");
    let start = a.timings.then(Instant::now);
    let learner = a.learner;
    let samples = a.budget.unwrap_or(1000);
    let factory = |_: &SecretInstance, _: &SecretKey| -> Box<dyn Examinee> {
        match learner {
            LearnerName::KeyRecovery => {
                Box::new(exam_taker_from_learner(KeyRecoveryLearner::default(), epsilon.clone()))
            }
            LearnerName::Histogram => Box::new(exam_taker_from_learner(HistogramLearner { samples }, epsilon.clone())),
            LearnerName::Uniform => Box::new(exam_taker_from_learner(UniformLearner, epsilon.clone())),
        }
    };
    let sampler = InstanceSampler { bit_len: a.bits, n_in: a.n_in };
    let outcome =
        estimate_pass_rate(&factory, sampler, a.trials, a.common.seed, a.budget, QPoly { degree: a.q_degree })?;
    emit(&outcome.report, a.common.pretty, out)?;
    if let Some(ms) = millis(start) {
        writeln!(err, "wall time: {ms:.1} ms")?;
    }
    Ok(())
}

fn verify(a: &VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<bool> {
    let cfg = VerifyConfig {
        seed: a.common.seed,
        loss_cases: a.loss_cases,
        argmax_cases: a.argmax_cases,
        counting_cases: a.counting_cases,
        epsilon: parse_fraction(&a.epsilon)?,
        inject_fault: a.inject_fault,
    };
    let start = a.timings.then(Instant::now);
    let report = verify_lemmas(&cfg)?;
    emit(&report, a.common.pretty, out)?;
    if let Some(ms) = millis(start) {
        writeln!(err, "wall time: {ms:.1} ms")?;
    }
    Ok(report.passed)
}

#[derive(Debug, Serialize)]
pub struct InstanceSummary {
    pub p: u64,
    pub q: u64,
    pub g: u64,
    pub ga: u64,
    pub n_in: u32,
    pub output_bits: u32,
}

impl InstanceSummary {
    fn of(inst: &Instance) -> Self {
        InstanceSummary {
            p: inst.p(),
            q: inst.q(),
            g: inst.g(),
            ga: inst.ga(),
            n_in: inst.n_in(),
            output_bits: inst.output_bits(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct LearnerResult {
    pub learner: &'static str,
    pub samples_used: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dlog_calls: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key_recovered: Option<bool>,
    pub tv: String,
    pub tv_f64: f64,
    /// Closed-form value or lower bound the measured distance is checked against.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct SeparationReport {
    pub instance: InstanceSummary,
    pub emulated_quantum: LearnerResult,
    pub baselines: Vec<LearnerResult>,
    pub verdict: Vec<String>,
    pub caveat: &'static str,
}

pub fn separation_report(a: &SeparationArgs) -> Result<SeparationReport> {
    if a.bits > 32 {
        bail!("separation reports need --bits <= 32");
    }
    let mut rng = stream(a.common.seed, "separation", 0);
    let si = instance_gen(a.bits, a.n_in, &mut rng)?;
    let k = sample_key(si.instance(), &mut rng);
    let inst = si.instance();
    let spec = target_spec(inst, &k)?;
    let (n, m) = (inst.n_in(), inst.output_bits());

    let start = a.timings.then(Instant::now);
    let record = sample_dtilde(&si, &k, &mut stream(a.common.seed, "separation-quantum", 0));
    let run = key_recovery_with(&record, &mut BsgsEmulation::new())?;
    let elapsed = millis(start);
    let tv = tv_against_induced(&run.model.evaluator()?, &spec)?;
    let quantum = LearnerResult {
        learner: "key-recovery",
        samples_used: run.samples_used,
        dlog_calls: Some(run.dlog_calls),
        key_recovered: Some(run.key == k),
        tv_f64: to_f64(&tv),
        tv: format_rational(&tv),
        closed_form: Some("0".into()),
        wall_time_ms: elapsed,
    };

    let start = a.timings.then(Instant::now);
    let mut hist_rng = stream(a.common.seed, "separation-histogram", 0);
    let records: Vec<SampleRecord> = (0..a.budget.max(1)).map(|_| sample_dtilde(&si, &k, &mut hist_rng)).collect();
    let model = histogram_learner(&records)?;
    let elapsed = millis(start);
    let hist_tv = tv_against_induced(&model.evaluator()?, &spec)?;
    let floor = (ratio(1, 1) - ratio(records.len() as u64, 1) / densep_core::distlearn::pow2(n)).max(ratio(0, 1));
    let histogram = LearnerResult {
        learner: "histogram",
        samples_used: records.len() as u64,
        dlog_calls: None,
        key_recovered: None,
        tv_f64: to_f64(&hist_tv),
        tv: format_rational(&hist_tv),
        closed_form: Some(format!(">= {}", format_rational(&floor))),
        wall_time_ms: elapsed,
    };

    let start = a.timings.then(Instant::now);
    let model = uniform_baseline(n, m)?;
    let elapsed = millis(start);
    let uni_tv = tv_against_induced(&model.evaluator()?, &spec)?;
    let uniform = LearnerResult {
        learner: "uniform",
        samples_used: 0,
        dlog_calls: None,
        key_recovered: None,
        tv_f64: to_f64(&uni_tv),
        tv: format_rational(&uni_tv),
        closed_form: Some(format!("1 - 2^-{m}")),
        wall_time_ms: elapsed,
    };

    let verdict = vec![
        format!(
            "key recovery: TV {} from {} sample with {} emulated dlog calls",
            quantum.tv, quantum.samples_used, run.dlog_calls
        ),
        format!(
            "histogram: TV {:.6} from {} samples (floor 1 - N/2^{n} = {:.6})",
            histogram.tv_f64,
            histogram.samples_used,
            to_f64(&floor)
        ),
        format!("uniform: TV {:.9} = 1 - 2^-{m} from 0 samples", uniform.tv_f64),
    ];
    Ok(SeparationReport {
        instance: InstanceSummary::of(inst),
        emulated_quantum: quantum,
        baselines: vec![histogram, uniform],
        verdict,
        caveat: CAVEAT,
    })
}

fn separation(a: &SeparationArgs, out: &mut dyn Write) -> Result<()> {
    let report = separation_report(a)?;
    let json = emit(&report, a.common.pretty, out)?;
    if let Some(path) = &a.out {
        write_text(path, &format!("{json}\n"))?;
    }
    Ok(())
}
