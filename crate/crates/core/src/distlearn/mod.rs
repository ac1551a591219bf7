//! Distribution learning over fixed-length bitstrings.
//!
//! A function `f: {0,1}^n -> {0,1}^m`, an input distribution `P` and a noise
//! rate `η` induce a distribution over `x‖y`: mass `P(x)(1-η)` on the graph
//! point `y = f(x)` and `P(x)·η/(2^m-1)` on every other label. This module
//! provides that construction, oracles and samplers for it, evaluators,
//! exact total variation machinery, and the reductions between function
//! learners and evaluator learners.

mod dist;
mod evaluator;
mod function;
pub mod io;
mod oracle;
mod reduction;
mod tv;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub use dist::{InducedSpec, InputDist};
pub use evaluator::{
    dense_masses, induced_eval, induced_generator, DenseEvaluator, Evaluator, Generator, GraphEvaluator,
    HistogramEvaluator, InducedEvaluator, InducedGenerator, SupportTable, UniformEvaluator,
};
pub use function::{FiniteFunction, FunctionView};
pub use oracle::{mq_oracle, rex_oracle, Budgeted, ExampleSource, MqOracle, QueryCounter, RexOracle, SampleSource};
pub use reduction::{
    argmax_hypothesis, eval_to_function_learner, function_to_eval_learner, EmpiricalEvaluatorLearner, EvalToFunction,
    EvaluatorLearner, FunctionLearner, FunctionToEval, LearnerConfig, MajorityVoteLearner, MAX_ARGMAX_LABEL_BITS,
};
pub use tv::{function_loss, tv_against_induced, tv_distance, tv_distance_f64, MAX_SUPPORT};

/// Exact probability masses.
pub type Rational = BigRational;

/// Dense tables are limited to `2^24` strings.
pub const MAX_DENSE_BITS: u32 = 24;

pub fn ratio(num: u64, den: u64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// `2^-k`.
pub fn pow2_inv(k: u32) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << k as usize)
}

/// `2^k` as an exact integer.
pub fn pow2(k: u32) -> Rational {
    Rational::from_integer(BigInt::one() << k as usize)
}

/// Renders as `num/den`, always with an explicit denominator.
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse_rational(s: &str) -> Result<Rational> {
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s.trim(), "1"),
    };
    let num: BigInt = n.parse().map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
    let den: BigInt = d.parse().map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
    if den.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(Rational::new(num, den))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Nearest rational with a small denominator, for user-supplied decimals.
pub fn rational_from_decimal(v: f64) -> Result<Rational> {
    if !v.is_finite() {
        return Err(Error::invalid(format!("{v} is not finite")));
    }
    let scaled = (v * 1e9).round();
    let r = Rational::new(BigInt::from(scaled as i64), BigInt::from(1_000_000_000u64));
    Ok(r)
}

pub(crate) fn in_unit_interval(r: &Rational) -> bool {
    r >= &Rational::zero() && r <= &Rational::one()
}
