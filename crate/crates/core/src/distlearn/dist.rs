use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use crate::bits::Bits;
use crate::error::{Error, Result};

use super::{pow2_inv, ratio, FunctionView, Rational};

/// Largest input length for an explicitly weighted input distribution.
pub const MAX_WEIGHTED_BITS: u32 = 20;

/// A distribution `P` over `{0,1}^n`.
///
/// Weighted tables keep integer weights over a common total, so masses stay
/// exact and sampling needs no floating point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InputDist {
    Uniform { n: u32 },
    Weighted { n: u32, weights: Vec<u64>, total: u64 },
}

impl InputDist {
    pub fn uniform(n: u32) -> Self {
        InputDist::Uniform { n }
    }

    pub fn from_weights(weights: Vec<u64>) -> Result<Self> {
        let len = weights.len();
        if !len.is_power_of_two() {
            return Err(Error::invalid(format!("{len} weights is not a power of two")));
        }
        let n = len.trailing_zeros();
        if n > MAX_WEIGHTED_BITS {
            return Err(Error::invalid(format!("weighted tables need n <= {MAX_WEIGHTED_BITS}")));
        }
        let total = weights
            .iter()
            .try_fold(0u64, |acc, &w| acc.checked_add(w))
            .ok_or_else(|| Error::invalid("weights overflow"))?;
        if total == 0 {
            return Err(Error::invalid("weights sum to zero"));
        }
        Ok(InputDist::Weighted { n, weights, total })
    }

    /// Converts a table of rationals summing to exactly one.
    pub fn from_rationals(masses: &[Rational]) -> Result<Self> {
        let sum: Rational = masses.iter().sum();
        if sum != Rational::one() || masses.iter().any(|m| m < &Rational::zero()) {
            return Err(Error::invalid("input masses must be non-negative and sum to 1"));
        }
        let lcm = masses.iter().fold(BigInt::one(), |acc, m| acc.lcm(m.denom()));
        if lcm.to_u64().is_none() {
            return Err(Error::invalid("common denominator too large"));
        }
        let weights =
            masses.iter().map(|m| (m.numer() * (&lcm / m.denom())).to_u64().expect("bounded by total")).collect();
        Self::from_weights(weights)
    }

    pub fn n(&self) -> u32 {
        match self {
            InputDist::Uniform { n } | InputDist::Weighted { n, .. } => *n,
        }
    }

    pub fn is_uniform(&self) -> bool {
        match self {
            InputDist::Uniform { .. } => true,
            InputDist::Weighted { weights, .. } => weights.windows(2).all(|w| w[0] == w[1]),
        }
    }

    pub fn mass(&self, x: Bits) -> Rational {
        debug_assert_eq!(x.len(), self.n());
        match self {
            InputDist::Uniform { n } => pow2_inv(*n),
            InputDist::Weighted { weights, total, .. } => ratio(weights[x.value() as usize], *total),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Bits {
        match self {
            InputDist::Uniform { n } => {
                let v = if *n == 0 { 0 } else { rng.random::<u64>() >> (64 - n) };
                Bits::truncated(v, *n)
            }
            InputDist::Weighted { n, weights, total } => {
                let mut r = rng.random_range(0..*total);
                for (i, &w) in weights.iter().enumerate() {
                    if r < w {
                        return Bits::truncated(i as u64, *n);
                    }
                    r -= w;
                }
                unreachable!("weights sum to total")
            }
        }
    }

    /// Masses of every input, indexed by integer value.
    pub fn dense(&self) -> Result<Vec<Rational>> {
        let n = self.n();
        if n > MAX_WEIGHTED_BITS {
            return Err(Error::Unsupported(format!("dense table over 2^{n} inputs")));
        }
        Ok(Bits::all(n).map(|x| self.mass(x)).collect())
    }
}

/// The induced distribution `D_{f,P,η}`.
#[derive(Clone, Debug)]
pub struct InducedSpec<F> {
    f: F,
    p: InputDist,
    eta: Rational,
    eta_num: u64,
    eta_den: u64,
}

impl<F: FunctionView> InducedSpec<F> {
    pub fn new(f: F, p: InputDist, eta: Rational) -> Result<Self> {
        let (n, m) = (f.input_bits(), f.output_bits());
        if p.n() != n {
            return Err(Error::invalid(format!("P is over {} bits but f takes {n}", p.n())));
        }
        if m == 0 || n + m > 64 {
            return Err(Error::invalid(format!("unsupported shape {n} -> {m}")));
        }
        if eta < Rational::zero() || eta >= ratio(1, 2) {
            return Err(Error::invalid("noise rate must lie in [0, 1/2)"));
        }
        let eta_num = eta.numer().to_u64().ok_or_else(|| Error::invalid("noise rate too fine"))?;
        let eta_den = eta.denom().to_u64().ok_or_else(|| Error::invalid("noise rate too fine"))?;
        Ok(InducedSpec { f, p, eta, eta_num, eta_den })
    }

    pub fn noiseless(f: F, p: InputDist) -> Result<Self> {
        Self::new(f, p, Rational::zero())
    }

    pub fn function(&self) -> &F {
        &self.f
    }

    pub fn input_dist(&self) -> &InputDist {
        &self.p
    }

    pub fn eta(&self) -> &Rational {
        &self.eta
    }

    pub fn n(&self) -> u32 {
        self.f.input_bits()
    }

    pub fn m(&self) -> u32 {
        self.f.output_bits()
    }

    pub fn is_noiseless(&self) -> bool {
        self.eta_num == 0
    }

    /// `P(x)(1-η)` on the graph of `f`, `P(x)·η/(2^m-1)` elsewhere.
    pub fn mass(&self, s: Bits) -> Result<Rational> {
        let (n, m) = (self.n(), self.m());
        if s.len() != n + m {
            return Err(Error::LengthMismatch { expected: n + m, got: s.len() });
        }
        let (x, y) = s.split(n)?;
        let px = self.p.mass(x);
        if self.f.apply(x) == y {
            Ok(px * (Rational::one() - &self.eta))
        } else if self.eta_num == 0 {
            Ok(Rational::zero())
        } else {
            let wrong = Rational::from_integer((BigInt::one() << m as usize) - 1u32);
            Ok(px * &self.eta / wrong)
        }
    }

    /// A label for `x` under the noisy example rule: `f(x)` with probability
    /// `1-η`, otherwise uniform over the `2^m - 1` other labels.
    pub fn label<R: Rng + ?Sized>(&self, x: Bits, rng: &mut R) -> Bits {
        let truth = self.f.apply(x);
        if self.eta_num == 0 || rng.random_range(0..self.eta_den) >= self.eta_num {
            return truth;
        }
        let m = self.m();
        let r = if m == 64 { rng.random::<u64>() % u64::MAX } else { rng.random_range(0..(1u64 << m) - 1) };
        let v = if r < truth.value() { r } else { r + 1 };
        Bits::truncated(v, m)
    }

    /// One draw `x‖y`, distributed exactly as the induced distribution.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Bits {
        let x = self.p.sample(rng);
        let y = self.label(x, rng);
        x.concat(y).expect("n + m <= 64")
    }
}
