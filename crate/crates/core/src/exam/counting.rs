use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::distlearn::{
    dense_masses, format_rational, ratio, tv_against_induced, Evaluator, FunctionView, InducedSpec, InputDist, Rational,
};
use crate::error::{Error, Result};

use super::ExamStrategyConfig;

/// Counts behind the two counting lemmas for one evaluator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountingReport {
    pub n: u32,
    pub m: u32,
    pub epsilon: String,
    pub tv: String,
    /// Inputs `x` with `E(x‖f(x)) >= ε/2^n`.
    pub diagonal_above: u64,
    pub diagonal_total: u64,
    /// Wrong-label strings with `E(x‖y) <= 4ε/(2^(n+m) - 2^n)`.
    pub off_diagonal_below: u64,
    pub off_diagonal_total: u64,
    pub diagonal_bound_holds: bool,
    pub off_diagonal_bound_holds: bool,
}

impl CountingReport {
    pub fn holds(&self) -> bool {
        self.diagonal_bound_holds && self.off_diagonal_bound_holds
    }
}

/// Measures `TV(E, D_{f,U})` first and refuses evaluators farther than `ε`
/// or promises `ε >= 1/9`; then counts both threshold sets by enumeration.
pub fn check_counting_lemmas<F, E>(f: &F, e: &E, epsilon: &Rational) -> Result<CountingReport>
where
    F: FunctionView + Clone,
    E: Evaluator + ?Sized,
{
    let (n, m) = (f.input_bits(), f.output_bits());
    if n > 8 || m > 16 {
        return Err(Error::Unsupported(format!("counting lemmas enumerate 2^{} strings", n + m)));
    }
    if epsilon <= &Rational::zero() {
        return Err(Error::invalid("epsilon must be positive"));
    }
    if epsilon >= &ratio(1, 9) {
        return Err(Error::Precondition(format!("epsilon {} is not below 1/9", format_rational(epsilon))));
    }
    let spec = InducedSpec::noiseless(f.clone(), InputDist::uniform(n))?;
    let tv = tv_against_induced(e, &spec)?;
    if &tv > epsilon {
        return Err(Error::Precondition(format!(
            "evaluator is at distance {} > {}",
            format_rational(&tv),
            format_rational(epsilon)
        )));
    }
    let cfg = ExamStrategyConfig { epsilon: epsilon.clone(), n, m };
    let (high, low) = (cfg.high(), cfg.low());
    let masses = dense_masses(e)?;
    let mut diagonal_above = 0u64;
    let mut off_diagonal_below = 0u64;
    for (i, p) in masses.iter().enumerate() {
        let (x, y) = Bits::truncated(i as u64, n + m).split(n)?;
        if f.apply(x) == y {
            diagonal_above += u64::from(p >= &high);
        } else {
            off_diagonal_below += u64::from(p <= &low);
        }
    }
    let diagonal_total = 1u64 << n;
    let off_diagonal_total = (1u64 << (n + m)) - diagonal_total;
    Ok(CountingReport {
        n,
        m,
        epsilon: format_rational(epsilon),
        tv: format_rational(&tv),
        diagonal_above,
        diagonal_total,
        off_diagonal_below,
        off_diagonal_total,
        diagonal_bound_holds: 4 * diagonal_above >= 3 * diagonal_total,
        off_diagonal_bound_holds: 2 * off_diagonal_below >= off_diagonal_total,
    })
}
