//! Randomized verification suites for the loss/TV identities, the argmax
//! rounding rule, the counting lemmas and the learning reductions.

use num_bigint::BigInt;
use num_traits::Zero;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::distlearn::{
    argmax_hypothesis, dense_masses, format_rational, function_loss, induced_eval, ratio, tv_distance, DenseEvaluator,
    EmpiricalEvaluatorLearner, FiniteFunction, FunctionView, InducedSpec, InputDist, LearnerConfig,
    MajorityVoteLearner, Rational,
};
use crate::distlearn::{eval_to_function_learner, function_to_eval_learner};
use crate::error::{Error, Result};
use crate::exam::{check_counting_lemmas, perturb_graph, PerturbationMode};
use crate::seed::stream;

const MAX_REPORTED_FAILURES: usize = 5;

/// Outcome of one suite.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    /// Cases the property was checked on.
    pub cases: u64,
    pub passed: u64,
    /// Cases whose premise did not hold, so nothing was checked.
    pub skipped: u64,
    pub failures: Vec<String>,
}

impl SuiteReport {
    fn collect<E: std::fmt::Display>(name: &str, outcomes: Vec<std::result::Result<Option<bool>, E>>) -> SuiteReport {
        let mut report = SuiteReport { name: name.to_string(), cases: 0, passed: 0, skipped: 0, failures: Vec::new() };
        for (i, outcome) in outcomes.into_iter().enumerate() {
            let failure = match outcome {
                Ok(None) => {
                    report.skipped += 1;
                    continue;
                }
                Ok(Some(true)) => None,
                Ok(Some(false)) => Some(format!("case {i}: property violated")),
                Err(e) => Some(format!("case {i}: {e}")),
            };
            report.cases += 1;
            match failure {
                None => report.passed += 1,
                Some(msg) if report.failures.len() < MAX_REPORTED_FAILURES => report.failures.push(msg),
                Some(_) => {}
            }
        }
        report
    }

    pub fn holds(&self) -> bool {
        self.passed == self.cases
    }
}

/// Case counts and parameters for [`verify_lemmas`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyConfig {
    pub seed: u64,
    pub loss_cases: u64,
    pub argmax_cases: u64,
    pub counting_cases: u64,
    pub epsilon: Rational,
    /// Toggles whether the loss fixture is correct at input 0, so that suite
    /// must fail.
    pub inject_fault: bool,
}

impl VerifyConfig {
    pub fn new(seed: u64) -> Self {
        VerifyConfig {
            seed,
            loss_cases: 200,
            argmax_cases: 50,
            counting_cases: 1000,
            epsilon: ratio(1, 10),
            inject_fault: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub suites: Vec<SuiteReport>,
    pub passed: bool,
}

pub fn verify_lemmas(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let suites = vec![
        loss_tv_suite(cfg.seed, cfg.loss_cases, cfg.inject_fault),
        argmax_suite(cfg.seed, cfg.argmax_cases),
        counting_suite(cfg.seed, cfg.counting_cases, &cfg.epsilon)?,
    ];
    let passed = suites.iter().all(SuiteReport::holds);
    Ok(VerifyReport { seed: cfg.seed, suites, passed })
}

fn random_input_dist<R: Rng + ?Sized>(n: u32, rng: &mut R) -> Result<InputDist> {
    InputDist::from_weights((0..1u64 << n).map(|_| rng.random_range(1..=12)).collect())
}

fn run_cases<T: Send>(
    seed: u64,
    label: &str,
    cases: u64,
    case: impl Fn(&mut rand_chacha::ChaCha20Rng) -> T + Sync,
) -> Vec<T> {
    (0..cases).into_par_iter().map(|i| case(&mut stream(seed, label, i))).collect()
}

/// `Pr_{x~P}[f(x) != h(x)]` against the dense TV of the two noiseless
/// induced tables, for random `n <= 6`, `m <= 3` and weighted `P`.
pub fn loss_tv_suite(seed: u64, cases: u64, inject_fault: bool) -> SuiteReport {
    let outcomes = run_cases(seed, "loss-tv", cases, |rng| -> Result<Option<bool>> {
        let n = rng.random_range(1..=6);
        let m = rng.random_range(1..=3);
        let p = random_input_dist(n, rng)?;
        let f = FiniteFunction::random(n, m, rng)?;
        let flip_rate = rng.random::<f64>();
        let mut table = f.table().to_vec();
        for y in table.iter_mut() {
            if rng.random_bool(flip_rate) {
                *y = (*y + rng.random_range(1..1u64 << m)) % (1 << m);
            }
        }
        let h = FiniteFunction::new(n, m, table.clone())?;
        if inject_fault {
            let truth = f.value(0);
            table[0] = if table[0] == truth { (truth + 1) % (1 << m) } else { truth };
        }
        let fixture = FiniteFunction::new(n, m, table)?;
        let loss = function_loss(&f, &h, &p)?;
        let a = dense_masses(&induced_eval(InducedSpec::noiseless(f, p.clone())?)?)?;
        let b = dense_masses(&induced_eval(InducedSpec::noiseless(fixture, p)?)?)?;
        Ok(Some(loss == tv_distance(&a, &b)?))
    });
    SuiteReport::collect("loss-equals-tv", outcomes)
}

/// Random dense evaluator with integer weights over a common denominator,
/// heavier on the graph of a random function; sometimes sub-normalized.
fn random_perturbed_evaluator<R: Rng + ?Sized>(n: u32, m: u32, rng: &mut R) -> Result<(Vec<u64>, u64)> {
    let f = FiniteFunction::random(n, m, rng)?;
    let weights: Vec<u64> = Bits::all(n + m)
        .map(|s| {
            let (x, y) = s.split(n).expect("n <= n + m");
            let noise = rng.random_range(0..=8);
            if f.apply(x) == y {
                noise + rng.random_range(0..=40)
            } else {
                noise
            }
        })
        .collect();
    let sum: u64 = weights.iter().sum::<u64>().max(1);
    let denominator = if rng.random_bool(0.5) { sum } else { sum + rng.random_range(1..=sum) };
    Ok((weights, denominator))
}

/// Smallest `2·L·TV(E, D_{f',P})` over every function `f'`, where `L` is the
/// common denominator of `E` and `P`. Evaluated in integers, one
/// candidate at a time.
fn exhaustive_min_scaled_tv(n: u32, m: u32, weights: &[u64], denominator: u64, p: &[u64], p_total: u64) -> BigInt {
    let labels = 1usize << m;
    let t = p_total as i128;
    let d = denominator as i128;
    let row_abs: Vec<i128> =
        (0..1usize << n).map(|x| weights[x * labels..(x + 1) * labels].iter().map(|&w| w as i128 * t).sum()).collect();
    let cost: Vec<Vec<i128>> = (0..1usize << n)
        .map(|x| {
            (0..labels)
                .map(|y| {
                    let e = weights[x * labels + y] as i128 * t;
                    (e - p[x] as i128 * d).abs() - e
                })
                .collect()
        })
        .collect();
    let base: i128 = row_abs.iter().sum::<i128>();
    let missing = (d * t - base).abs();
    let best = FiniteFunction::enumerate_all(n, m)
        .map(|g| g.table().iter().enumerate().map(|(x, &y)| cost[x][y as usize]).sum::<i128>())
        .min()
        .expect("at least one function");
    BigInt::from(base + best + missing)
}

/// The argmax hypothesis of a random evaluator against the exhaustive
/// minimum over all `(2^m)^(2^n)` candidate functions at `n = 3`, `m = 2`.
pub fn argmax_suite(seed: u64, cases: u64) -> SuiteReport {
    let (n, m) = (3, 2);
    let outcomes = run_cases(seed, "argmax", cases, |rng| -> Result<Option<bool>> {
        let (weights, denominator) = random_perturbed_evaluator(n, m, rng)?;
        let p_weights: Vec<u64> = (0..1u64 << n).map(|_| rng.random_range(1..=12)).collect();
        let p_total: u64 = p_weights.iter().sum();
        let p = InputDist::from_weights(p_weights.clone())?;
        let masses = weights.iter().map(|&w| ratio(w, denominator)).collect();
        let e = DenseEvaluator::new(n, m, masses)?;
        let h = argmax_hypothesis(&e, n, m)?;
        let induced = dense_masses(&induced_eval(InducedSpec::noiseless(h, p)?)?)?;
        let tv_h = tv_distance(e.masses(), &induced)?;
        let scale = BigInt::from(2u64) * BigInt::from(denominator) * BigInt::from(p_total);
        let best = exhaustive_min_scaled_tv(n, m, &weights, denominator, &p_weights, p_total);
        Ok(Some(tv_h * Rational::from_integer(scale) <= Rational::from_integer(best)))
    });
    SuiteReport::collect("argmax-is-optimal", outcomes)
}

/// Random graph perturbations of total variation at most `ε` at `n = m = 4`;
/// both counting bounds must hold for each.
pub fn counting_suite(seed: u64, cases: u64, epsilon: &Rational) -> Result<SuiteReport> {
    if epsilon <= &Rational::zero() || epsilon >= &ratio(1, 9) {
        return Err(Error::Precondition(format!("epsilon {} is not in (0, 1/9)", format_rational(epsilon))));
    }
    let (n, m) = (4, 4);
    let outcomes = run_cases(seed, "counting", cases, |rng| -> Result<Option<bool>> {
        let f = FiniteFunction::random(n, m, rng)?;
        let mode = if rng.random_bool(0.5) { PerturbationMode::Spread } else { PerturbationMode::Adversarial };
        let e = perturb_graph(&f, epsilon, mode, 1 << m, rng)?;
        Ok(Some(check_counting_lemmas(&f, &e, epsilon)?.holds()))
    });
    Ok(SuiteReport::collect("counting-bounds", outcomes))
}

/// Both learning reductions at `n = 4`, `m = 2` and noise `η`. A trial
/// counts when the wrapped learner reached accuracy `ε`; the bounds
/// `2(η + τ)` and `η + τ` are then checked with the measured accuracy `τ`.
pub fn reduction_suites(seed: u64, trials: u64, eta: &Rational, epsilon: &Rational) -> Result<[SuiteReport; 2]> {
    let (n, m) = (4, 2);
    let cfg = LearnerConfig::new(epsilon.clone(), ratio(1, 10), 20_000)?;
    let label = format!("reduction/{}", format_rational(eta));
    let outcomes = run_cases(seed, &label, trials, |rng| -> Result<(Option<bool>, Option<bool>)> {
        let f = FiniteFunction::random(n, m, rng)?;
        let p = random_input_dist(n, rng)?;
        let spec = InducedSpec::new(f.clone(), p.clone(), eta.clone())?;
        let target = dense_masses(&induced_eval(spec.clone())?)?;

        let mut eval_learner = EmpiricalEvaluatorLearner { samples: Some(rng.random_range(200..=8000)) };
        let run = eval_to_function_learner(&mut eval_learner, &spec, &cfg, stream(rng.random(), "draws", 0))?;
        let tau = tv_distance(&dense_masses(&run.model)?, &target)?;
        let first = (&tau <= epsilon).then(|| {
            let loss = function_loss(&f, &run.hypothesis, &p)?;
            Ok::<_, Error>(loss <= (eta + &tau) * Rational::from_integer(2.into()))
        });

        let mut fn_learner = MajorityVoteLearner { examples: Some(rng.random_range(20..=400)) };
        let run = function_to_eval_learner(&mut fn_learner, &spec, &cfg, stream(rng.random(), "draws", 1))?;
        let tau = function_loss(&f, run.evaluator.hypothesis(), &p)?;
        let second = (&tau <= epsilon).then(|| {
            let tv = tv_distance(&dense_masses(&run.evaluator)?, &target)?;
            Ok::<_, Error>(tv <= eta + &tau)
        });
        Ok((first.transpose()?, second.transpose()?))
    });
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for outcome in outcomes {
        match outcome {
            Ok((x, y)) => {
                a.push(Ok(x));
                b.push(Ok(y));
            }
            Err(e) => {
                a.push(Err(e.to_string()));
                b.push(Err(e.to_string()));
            }
        }
    }
    let eta = format_rational(eta);
    Ok([
        SuiteReport::collect(&format!("eval-to-function eta={eta}"), a),
        SuiteReport::collect(&format!("function-to-eval eta={eta}"), b),
    ])
}
