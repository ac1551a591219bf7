//! The strong inference exam and the statistics built on it.
//!
//! An examinee trains on records of one secret member of the collection,
//! then sees a random input `x'` with two candidate outputs, one of them
//! `F(k, x')` and the other uniform over the rest of `Z_q`, and must say
//! which is genuine.

mod counting;
mod distinguish;
mod perturb;

use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::distlearn::{format_rational, pow2, ratio, tv_against_induced, Evaluator, FiniteFunction, Rational};
use crate::error::{Error, Result};
use crate::learners::{target_spec, DtildeSource, LearnedModel, PublicParams, RecordLearner, RecordSource};
use crate::numtheory::ZqElement;
use crate::prf::{instance_gen, prf_eval, sample_key, SecretInstance, SecretKey};
use crate::seed;
use crate::stats::{wilson, Z_99};

pub use counting::{check_counting_lemmas, CountingReport};
pub use distinguish::{
    estimate_distinguishing_advantage, AccessMode, AdvantageReport, ConstantDistinguisher, Distinguisher,
    FunctionOracle, KeyRecoveryDistinguisher, SiblingCollisionDistinguisher, World,
};
pub use perturb::{perturb_graph, DyadicEvaluator, PerturbationMode};

/// Smallest trial count accepted by the estimators.
pub const MIN_TRIALS: u64 = 100;

/// One candidate shown in the exam.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ExamPair {
    pub x_prime: Bits,
    pub candidate: ZqElement,
    /// 1 or 2.
    pub position: u8,
}

/// Everything that happened in one exam.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExamTranscript {
    pub training_queries: u64,
    pub pairs: [ExamPair; 2],
    pub guess: u8,
    pub truth: u8,
    pub passed: bool,
    pub guessed_at_random: bool,
    /// Set when training failed; the exam then counts as failed.
    pub failure: Option<String>,
}

/// An examinee's answer and whether it came from a coin flip.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decision {
    pub index: u8,
    pub random: bool,
}

impl Decision {
    fn coin(rng: &mut dyn RngCore) -> Self {
        Decision { index: if rng.random::<bool>() { 1 } else { 2 }, random: true }
    }
}

/// An algorithm taking the exam.
pub trait Examinee: Send {
    fn train(&mut self, source: &mut dyn RecordSource) -> Result<()>;
    fn guess(&mut self, params: &PublicParams, pair1: &ExamPair, pair2: &ExamPair, rng: &mut dyn RngCore) -> Decision;
}

/// Runs one exam against `(si, k)`. Training draws are capped by `budget`;
/// running past it fails the exam.
pub fn administer_exam<R: Rng>(
    si: &SecretInstance,
    k: &SecretKey,
    examinee: &mut dyn Examinee,
    budget: Option<u64>,
    rng: &mut R,
) -> ExamTranscript {
    let inst = si.instance();
    let (trained, used) = {
        let mut source = DtildeSource::new(si, *k, &mut *rng, budget);
        let trained = examinee.train(&mut source);
        (trained, source.used())
    };

    let x_prime = crate::distlearn::InputDist::uniform(inst.n_in()).sample(rng);
    let f1 = prf_eval(inst, k, x_prime).expect("x' has the instance length");
    let q = inst.q();
    let r = rng.random_range(0..q - 1);
    let f2 = ZqElement::new(if r < f1.value() { r } else { r + 1 }, q).expect("below q");
    let truth = if rng.random::<bool>() { 1 } else { 2 };
    let (first, second) = if truth == 1 { (f1, f2) } else { (f2, f1) };
    let pairs =
        [ExamPair { x_prime, candidate: first, position: 1 }, ExamPair { x_prime, candidate: second, position: 2 }];

    let (decision, failure) = match trained {
        Ok(()) => (examinee.guess(&PublicParams::of(inst), &pairs[0], &pairs[1], rng), None),
        Err(e) => (Decision { index: 3 - truth, random: false }, Some(e.to_string())),
    };
    ExamTranscript {
        training_queries: used,
        pairs,
        guess: decision.index,
        truth,
        passed: failure.is_none() && decision.index == truth,
        guessed_at_random: decision.random,
        failure,
    }
}

/// The accuracy promise the threshold strategy works with, and the record shape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExamStrategyConfig {
    pub epsilon: Rational,
    pub n: u32,
    pub m: u32,
}

impl ExamStrategyConfig {
    /// Requires `0 < ε < 1/9`, `n >= 3` and `m >= 3`, which makes the two
    /// thresholds distinct.
    pub fn new(epsilon: Rational, n: u32, m: u32) -> Result<Self> {
        if epsilon <= Rational::zero() || epsilon >= ratio(1, 9) {
            return Err(Error::invalid("epsilon must lie in (0, 1/9)"));
        }
        if n < 3 || m < 3 {
            return Err(Error::invalid(format!("unsupported exam shape n = {n}, m = {m}")));
        }
        Ok(ExamStrategyConfig { epsilon, n, m })
    }

    /// `ε / 2^n`: the genuine pair should reach this.
    pub fn high(&self) -> Rational {
        &self.epsilon / pow2(self.n)
    }

    /// `4ε / (2^(n+m) - 2^n)`: the fake pair should stay below this.
    pub fn low(&self) -> Rational {
        let off = (BigInt::one() << (self.n + self.m) as usize) - (BigInt::one() << self.n as usize);
        &self.epsilon * BigInt::from(4) / off
    }
}

/// The default accuracy promise handed to the threshold strategy.
pub fn default_epsilon() -> Rational {
    ratio(1, 10)
}

/// The threshold strategy on two evaluator outputs.
pub fn algorithm1_decide(p1: &Rational, p2: &Rational, cfg: &ExamStrategyConfig, rng: &mut dyn RngCore) -> Decision {
    let (high, low) = (cfg.high(), cfg.low());
    if p1 >= &high && p2 <= &low {
        Decision { index: 1, random: false }
    } else if p1 <= &low && p2 >= &high {
        Decision { index: 2, random: false }
    } else {
        Decision::coin(rng)
    }
}

/// Queries both pairs and compares their masses against the thresholds.
/// Unanswerable queries count as mass zero.
pub fn algorithm1_strategy<E: Evaluator + ?Sized>(
    e: &E,
    cfg: &ExamStrategyConfig,
    pair1: &ExamPair,
    pair2: &ExamPair,
    rng: &mut dyn RngCore,
) -> Decision {
    let query = |pair: &ExamPair| {
        Bits::new(pair.candidate.value(), cfg.m)
            .and_then(|y| pair.x_prime.concat(y))
            .and_then(|s| e.mass(s))
            .unwrap_or_else(|_| Rational::zero())
    };
    algorithm1_decide(&query(pair1), &query(pair2), cfg, rng)
}

/// Trains a record learner, then answers with the threshold strategy on its model.
pub struct ExamTaker<L> {
    learner: L,
    epsilon: Rational,
    model: Option<(Option<PublicParams>, Box<dyn Evaluator>)>,
}

pub fn exam_taker_from_learner<L: RecordLearner>(learner: L, epsilon: Rational) -> ExamTaker<L> {
    ExamTaker { learner, epsilon, model: None }
}

impl<L> ExamTaker<L> {
    pub fn learner(&self) -> &L {
        &self.learner
    }
}

impl<L: RecordLearner> Examinee for ExamTaker<L> {
    fn train(&mut self, source: &mut dyn RecordSource) -> Result<()> {
        let model: LearnedModel = self.learner.fit(source)?;
        self.model = Some((model.params(), model.evaluator()?));
        Ok(())
    }

    fn guess(&mut self, params: &PublicParams, pair1: &ExamPair, pair2: &ExamPair, rng: &mut dyn RngCore) -> Decision {
        let Some((bound, e)) = &self.model else {
            return Decision::coin(rng);
        };
        let Ok(cfg) = ExamStrategyConfig::new(self.epsilon.clone(), e.input_bits(), e.output_bits()) else {
            return Decision::coin(rng);
        };
        if bound.is_some_and(|b| &b != params) {
            return algorithm1_decide(&Rational::zero(), &Rational::zero(), &cfg, rng);
        }
        algorithm1_strategy(e.as_ref(), &cfg, pair1, pair2, rng)
    }
}

/// The threshold strategy with a fixed evaluator and no training.
pub struct PresetExaminee {
    evaluator: Arc<dyn Evaluator>,
    cfg: ExamStrategyConfig,
}

impl PresetExaminee {
    pub fn new(evaluator: Arc<dyn Evaluator>, epsilon: Rational) -> Result<Self> {
        let cfg = ExamStrategyConfig::new(epsilon, evaluator.input_bits(), evaluator.output_bits())?;
        Ok(PresetExaminee { evaluator, cfg })
    }
}

impl Examinee for PresetExaminee {
    fn train(&mut self, _: &mut dyn RecordSource) -> Result<()> {
        Ok(())
    }

    fn guess(&mut self, _: &PublicParams, pair1: &ExamPair, pair2: &ExamPair, rng: &mut dyn RngCore) -> Decision {
        algorithm1_strategy(self.evaluator.as_ref(), &self.cfg, pair1, pair2, rng)
    }
}

/// Flips a fair coin.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomGuesser;

impl Examinee for RandomGuesser {
    fn train(&mut self, _: &mut dyn RecordSource) -> Result<()> {
        Ok(())
    }

    fn guess(&mut self, _: &PublicParams, _: &ExamPair, _: &ExamPair, rng: &mut dyn RngCore) -> Decision {
        Decision::coin(rng)
    }
}

/// Knows the key and evaluates the function directly.
#[derive(Clone, Copy, Debug)]
pub struct KeyHolder {
    pub si: SecretInstance,
    pub key: SecretKey,
}

impl Examinee for KeyHolder {
    fn train(&mut self, _: &mut dyn RecordSource) -> Result<()> {
        Ok(())
    }

    fn guess(&mut self, _: &PublicParams, pair1: &ExamPair, _: &ExamPair, rng: &mut dyn RngCore) -> Decision {
        match prf_eval(self.si.instance(), &self.key, pair1.x_prime) {
            Ok(y) if y == pair1.candidate => Decision { index: 1, random: false },
            Ok(_) => Decision { index: 2, random: false },
            Err(_) => Decision::coin(rng),
        }
    }
}

/// Instance sizes drawn fresh for every trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSampler {
    pub bit_len: u32,
    pub n_in: u32,
}

/// `Q(n) = n^degree`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QPoly {
    pub degree: u32,
}

impl Default for QPoly {
    fn default() -> Self {
        QPoly { degree: 1 }
    }
}

impl QPoly {
    pub fn eval(&self, n: u32) -> f64 {
        f64::from(n).powi(self.degree as i32)
    }

    pub fn describe(&self) -> String {
        match self.degree {
            0 => "1".into(),
            1 => "n".into(),
            d => format!("n^{d}"),
        }
    }
}

/// Pass-rate summary in its wire form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassRateReport {
    pub trials: u64,
    pub passes: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub q_poly: String,
    pub q_threshold: f64,
    pub meets_q_inference: bool,
}

impl PassRateReport {
    pub fn from_counts(passes: u64, trials: u64, q: QPoly, n: u32) -> Self {
        let ci = wilson(passes, trials, Z_99);
        let q_threshold = 0.5 + 1.0 / q.eval(n);
        PassRateReport {
            trials,
            passes,
            rate: passes as f64 / trials as f64,
            ci_low: ci.low,
            ci_high: ci.high,
            q_poly: q.describe(),
            q_threshold,
            meets_q_inference: ci.low > q_threshold,
        }
    }
}

/// A report plus diagnostics that are not part of the wire form.
#[derive(Clone, Debug, PartialEq)]
pub struct PassRateOutcome {
    pub report: PassRateReport,
    pub random_guesses: u64,
    pub training_failures: u64,
    pub training_queries: u64,
}

pub type ExamineeFactory<'a> = dyn Fn(&SecretInstance, &SecretKey) -> Box<dyn Examinee> + Sync + 'a;

/// Runs `trials` independent exams, each on a fresh instance and key drawn
/// from the stream `("exam", trial)` of `master`.
pub fn estimate_pass_rate(
    factory: &ExamineeFactory<'_>,
    sampler: InstanceSampler,
    trials: u64,
    master: u64,
    budget: Option<u64>,
    q: QPoly,
) -> Result<PassRateOutcome> {
    if trials < MIN_TRIALS {
        return Err(Error::invalid(format!("need at least {MIN_TRIALS} trials")));
    }
    let transcripts = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::stream(master, "exam", i);
            let si = instance_gen(sampler.bit_len, sampler.n_in, &mut rng)?;
            let k = sample_key(si.instance(), &mut rng);
            let mut examinee = factory(&si, &k);
            Ok(administer_exam(&si, &k, examinee.as_mut(), budget, &mut rng))
        })
        .collect::<Result<Vec<_>>>()?;
    let passes = transcripts.iter().filter(|t| t.passed).count() as u64;
    Ok(PassRateOutcome {
        report: PassRateReport::from_counts(passes, trials, q, sampler.n_in),
        random_guesses: transcripts.iter().filter(|t| t.guessed_at_random).count() as u64,
        training_failures: transcripts.iter().filter(|t| t.failure.is_some()).count() as u64,
        training_queries: transcripts.iter().map(|t| t.training_queries).sum(),
    })
}

/// Pass rate of the threshold strategy holding evaluators corrupted within
/// total variation `ε` of the target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptedExamReport {
    pub instances: u64,
    pub exams: u64,
    pub passes: u64,
    pub rate: f64,
    pub random_guesses: u64,
    /// Largest exact distance of any corrupted evaluator, as `num/den`.
    pub max_tv: String,
    pub epsilon: String,
}

/// Draws `instances` instances and keys, corrupts each exact evaluator by
/// [`perturb_graph`] (alternating modes, labels below `q`), checks the exact
/// distance is at most `ε`, then runs `exams_per_instance` exams with it.
pub fn corrupted_evaluator_pass_rate(
    sampler: InstanceSampler,
    instances: u64,
    exams_per_instance: u64,
    epsilon: &Rational,
    master: u64,
) -> Result<CorruptedExamReport> {
    let per_instance = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::stream(master, "corrupted", i);
            let si = instance_gen(sampler.bit_len, sampler.n_in, &mut rng)?;
            let k = sample_key(si.instance(), &mut rng);
            let spec = target_spec(si.instance(), &k)?;
            let f = FiniteFunction::tabulate(spec.function())?;
            let mode = if i % 2 == 0 { PerturbationMode::Adversarial } else { PerturbationMode::Spread };
            let e = perturb_graph(&f, epsilon, mode, si.instance().q(), &mut rng)?;
            let tv = tv_against_induced(&e, &spec)?;
            if &tv > epsilon {
                return Err(Error::Precondition(format!("corruption reached distance {}", format_rational(&tv))));
            }
            let mut examinee = PresetExaminee::new(Arc::new(e), epsilon.clone())?;
            let mut passes = 0u64;
            let mut random = 0u64;
            for j in 0..exams_per_instance {
                let mut rng = seed::stream(master, "corrupted-exam", i * exams_per_instance + j);
                let t = administer_exam(&si, &k, &mut examinee, Some(0), &mut rng);
                passes += u64::from(t.passed);
                random += u64::from(t.guessed_at_random);
            }
            Ok((passes, random, tv))
        })
        .collect::<Result<Vec<_>>>()?;
    let exams = instances * exams_per_instance;
    let passes = per_instance.iter().map(|r| r.0).sum();
    let max_tv = per_instance.iter().map(|r| r.2.clone()).max().unwrap_or_else(Rational::zero);
    Ok(CorruptedExamReport {
        instances,
        exams,
        passes,
        rate: passes as f64 / exams.max(1) as f64,
        random_guesses: per_instance.iter().map(|r| r.1).sum(),
        max_tv: format_rational(&max_tv),
        epsilon: format_rational(epsilon),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{exact_evaluator_from_key, HistogramLearner, KeyRecoveryLearner, UniformLearner};
    use crate::stats::binomial_sigma;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn setup(seed: u64, bits: u32, n: u32) -> (SecretInstance, SecretKey) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let si = instance_gen(bits, n, &mut rng).unwrap();
        let k = sample_key(si.instance(), &mut rng);
        (si, k)
    }

    #[test]
    fn thresholds_are_disjoint_for_all_widths() {
        for n in 3..=40 {
            let cfg = ExamStrategyConfig::new(ratio(1, 10), n, n).unwrap();
            assert!(cfg.high() > cfg.low(), "n = {n}");
        }
        assert!(ExamStrategyConfig::new(ratio(1, 9), 4, 4).is_err());
        assert!(ExamStrategyConfig::new(ratio(1, 10), 2, 4).is_err());
    }

    #[test]
    fn strategy_examples() {
        let cfg = ExamStrategyConfig::new(ratio(1, 10), 4, 4).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let genuine = ratio(1, 16);
        let d = algorithm1_decide(&genuine, &Rational::zero(), &cfg, &mut rng);
        assert_eq!(d, Decision { index: 1, random: false });
        let d = algorithm1_decide(&Rational::zero(), &genuine, &cfg, &mut rng);
        assert_eq!(d, Decision { index: 2, random: false });
        assert!(algorithm1_decide(&Rational::zero(), &Rational::zero(), &cfg, &mut rng).random);
        assert!(algorithm1_decide(&genuine, &genuine, &cfg, &mut rng).random);
    }

    #[test]
    fn exams_are_well_formed_and_fair() {
        let (si, k) = setup(1, 12, 6);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let trials = 10_000u64;
        let mut first = 0u64;
        let mut passes = 0u64;
        for _ in 0..trials {
            let t = administer_exam(&si, &k, &mut RandomGuesser, None, &mut rng);
            assert_eq!(t.pairs[0].x_prime, t.pairs[1].x_prime);
            assert_ne!(t.pairs[0].candidate, t.pairs[1].candidate);
            let genuine = prf_eval(si.instance(), &k, t.pairs[0].x_prime).unwrap();
            assert_eq!(t.pairs[(t.truth - 1) as usize].candidate, genuine);
            assert_eq!(t.passed, t.guess == t.truth);
            first += u64::from(t.truth == 1);
            passes += u64::from(t.passed);
        }
        let sigma = binomial_sigma(0.5, trials);
        assert!((first as f64 / trials as f64 - 0.5).abs() < 4.0 * sigma);
        assert!((passes as f64 / trials as f64 - 0.5).abs() < 4.0 * sigma);
    }

    #[test]
    fn key_holder_always_passes() {
        let (si, k) = setup(3, 10, 5);
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for _ in 0..1000 {
            assert!(administer_exam(&si, &k, &mut KeyHolder { si, key: k }, None, &mut rng).passed);
        }
    }

    #[test]
    fn exact_evaluator_never_flips_a_coin() {
        let (si, k) = setup(5, 16, 8);
        let e: Arc<dyn Evaluator> = Arc::new(exact_evaluator_from_key(si.instance(), &k).unwrap());
        let mut examinee = PresetExaminee::new(e, default_epsilon()).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        for _ in 0..2000 {
            let t = administer_exam(&si, &k, &mut examinee, None, &mut rng);
            assert!(t.passed && !t.guessed_at_random);
        }
    }

    #[test]
    fn budget_overrun_fails_the_exam() {
        let (si, k) = setup(7, 12, 6);
        let mut taker = exam_taker_from_learner(HistogramLearner { samples: 50 }, default_epsilon());
        let t = administer_exam(&si, &k, &mut taker, Some(10), &mut ChaCha20Rng::seed_from_u64(8));
        assert!(!t.passed);
        assert!(t.failure.unwrap().contains("budget"));
    }

    #[test]
    fn pass_rates_for_reference_learners() {
        let sampler = InstanceSampler { bit_len: 16, n_in: 8 };
        let key = |_: &SecretInstance, _: &SecretKey| -> Box<dyn Examinee> {
            Box::new(exam_taker_from_learner(KeyRecoveryLearner::default(), default_epsilon()))
        };
        let out = estimate_pass_rate(&key, sampler, 300, 9, None, QPoly::default()).unwrap();
        assert_eq!(out.report.passes, 300);
        assert_eq!(out.random_guesses, 0);
        assert!(out.report.meets_q_inference);
        assert_eq!(out.training_queries, 300);

        let uniform = |_: &SecretInstance, _: &SecretKey| -> Box<dyn Examinee> {
            Box::new(exam_taker_from_learner(UniformLearner, default_epsilon()))
        };
        let out = estimate_pass_rate(&uniform, sampler, 2000, 9, None, QPoly::default()).unwrap();
        assert_eq!(out.random_guesses, 2000);
        assert!(out.report.ci_low < 0.5 && 0.5 < out.report.ci_high);
        assert!(!out.report.meets_q_inference);
    }

    #[test]
    fn reports_are_deterministic() {
        let sampler = InstanceSampler { bit_len: 12, n_in: 6 };
        let coin = |_: &SecretInstance, _: &SecretKey| -> Box<dyn Examinee> { Box::new(RandomGuesser) };
        let a = estimate_pass_rate(&coin, sampler, 500, 11, None, QPoly::default()).unwrap();
        let b = estimate_pass_rate(&coin, sampler, 500, 11, None, QPoly::default()).unwrap();
        assert_eq!(serde_json::to_string(&a.report).unwrap(), serde_json::to_string(&b.report).unwrap());
        assert!(estimate_pass_rate(&coin, sampler, 99, 11, None, QPoly::default()).is_err());
    }

    #[test]
    fn report_schema() {
        let r = PassRateReport::from_counts(100, 100, QPoly::default(), 8);
        let v = serde_json::to_value(&r).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 8);
        for k in ["trials", "passes", "rate", "ci_low", "ci_high", "q_poly", "q_threshold", "meets_q_inference"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        assert_eq!(v["q_poly"], "n");
        assert!((r.q_threshold - 0.625).abs() < 1e-12);
    }

    #[test]
    fn corrupted_evaluators_clear_five_eighths() {
        let sampler = InstanceSampler { bit_len: 9, n_in: 8 };
        let r = corrupted_evaluator_pass_rate(sampler, 10, 100, &default_epsilon(), 12).unwrap();
        assert_eq!(r.exams, 1000);
        let sigma = binomial_sigma(0.625, 1000);
        assert!(r.rate >= 0.625 - 3.0 * sigma, "{r:?}");
        assert!(crate::distlearn::parse_rational(&r.max_tv).unwrap() <= default_epsilon());
    }
}
