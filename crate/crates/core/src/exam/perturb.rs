use std::collections::{BTreeMap, HashSet};

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use crate::bits::Bits;
use crate::distlearn::{pow2, Evaluator, FunctionView, Rational, SupportTable};
use crate::error::{Error, Result};

use super::ExamStrategyConfig;

/// Masses that are integer multiples of `2^-shift`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DyadicEvaluator {
    n: u32,
    m: u32,
    shift: u32,
    units: BTreeMap<Bits, u64>,
}

impl DyadicEvaluator {
    pub fn new(n: u32, m: u32, shift: u32, units: BTreeMap<Bits, u64>) -> Result<Self> {
        if shift > 62 || n + m > 64 {
            return Err(Error::invalid("dyadic masses need shift <= 62"));
        }
        let total = units.values().try_fold(0u64, |a, &u| a.checked_add(u));
        if total.is_none_or(|t| t > 1u64 << shift) {
            return Err(Error::invalid("dyadic masses exceed 1"));
        }
        if let Some(s) = units.keys().find(|s| s.len() != n + m) {
            return Err(Error::LengthMismatch { expected: n + m, got: s.len() });
        }
        Ok(DyadicEvaluator { n, m, shift, units })
    }

    pub fn units(&self) -> &BTreeMap<Bits, u64> {
        &self.units
    }

    pub fn shift(&self) -> u32 {
        self.shift
    }

    fn to_rational(&self, u: u64) -> Rational {
        Rational::new(BigInt::from(u), BigInt::one() << self.shift as usize)
    }
}

impl Evaluator for DyadicEvaluator {
    fn input_bits(&self) -> u32 {
        self.n
    }

    fn output_bits(&self) -> u32 {
        self.m
    }

    fn mass(&self, s: Bits) -> Result<Rational> {
        if s.len() != self.n + self.m {
            return Err(Error::LengthMismatch { expected: self.n + self.m, got: s.len() });
        }
        Ok(self.to_rational(self.units.get(&s).copied().unwrap_or(0)))
    }

    fn support(&self) -> Option<SupportTable> {
        let entries = self.units.iter().filter(|(_, &u)| u > 0).map(|(&s, &u)| (s, self.to_rational(u)));
        SupportTable::from_entries(self.n, self.m, entries).ok()
    }
}

/// How mass is moved off the graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PerturbationMode {
    /// Random chunks from random graph points to random wrong labels.
    Spread,
    /// Graph points pushed just under `ε/2^n`, wrong labels lifted just over
    /// `4ε/(2^(n+m) - 2^n)`, so both counting bounds are stressed.
    Adversarial,
}

/// Moves at most `ε` of mass from the graph of `f` (uniform inputs) to wrong
/// labels below `label_bound`. Moving `τ` this way puts the result at total
/// variation exactly `τ` from the noiseless induced distribution.
pub fn perturb_graph<F: FunctionView, R: Rng + ?Sized>(
    f: &F,
    epsilon: &Rational,
    mode: PerturbationMode,
    label_bound: u64,
    rng: &mut R,
) -> Result<DyadicEvaluator> {
    let (n, m) = (f.input_bits(), f.output_bits());
    if n > 20 || n + m > 46 {
        return Err(Error::Unsupported(format!("perturbing a graph of shape {n} -> {m}")));
    }
    if epsilon < &Rational::zero() || epsilon >= &Rational::one() {
        return Err(Error::invalid("perturbation budget must lie in [0, 1)"));
    }
    let bound = if m >= 64 { label_bound } else { label_bound.min(1u64 << m) };
    if bound < 2 {
        return Err(Error::invalid("need at least two admissible labels"));
    }
    let shift = n + m + 16;
    let base = 1u64 << (shift - n);
    let scale = pow2(shift);
    let floor_units = |r: Rational| (r * &scale).floor().to_integer().to_u64().expect("below 2^shift");
    let budget = floor_units(epsilon.clone());

    let graph: Vec<Bits> = Bits::all(n).map(|x| x.concat(f.apply(x)).expect("fits")).collect();
    let mut units: BTreeMap<Bits, u64> = graph.iter().map(|&s| (s, base)).collect();
    let wrong_label = |rng: &mut R| loop {
        let x = Bits::truncated(rng.random::<u64>(), n);
        let y = rng.random_range(0..bound);
        if y != f.apply(x).value() {
            break x.concat(Bits::truncated(y, m)).expect("fits");
        }
    };

    match mode {
        PerturbationMode::Spread => {
            let mut left = rng.random_range(0..=budget);
            while left > 0 {
                let s = graph[rng.random_range(0..graph.len())];
                let have = units[&s];
                if have == 0 {
                    continue;
                }
                let chunk = rng.random_range(1..=(base / 2).max(1)).min(left).min(have);
                *units.get_mut(&s).expect("graph point") -= chunk;
                *units.entry(wrong_label(rng)).or_insert(0) += chunk;
                left -= chunk;
            }
        }
        PerturbationMode::Adversarial => {
            let cfg = ExamStrategyConfig { epsilon: epsilon.clone(), n, m };
            let under_high = (cfg.high() * &scale).ceil().to_integer().to_u64().expect("fits").saturating_sub(1);
            let over_low = floor_units(cfg.low()) + 1;
            let mut drop_budget = (budget as f64 * rng.random::<f64>()) as u64;
            let drop_cost = base - under_high;
            let mut order = graph.clone();
            for i in (1..order.len()).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            let mut removed = 0u64;
            let mut rest = order.into_iter().peekable();
            while let Some(&s) = rest.peek() {
                if drop_budget < drop_cost {
                    break;
                }
                units.insert(s, under_high);
                drop_budget -= drop_cost;
                removed += drop_cost;
                rest.next();
            }
            for s in rest {
                if removed == budget {
                    break;
                }
                let take = (budget - removed).min(base);
                *units.get_mut(&s).expect("graph point") -= take;
                removed += take;
            }
            let mut left = removed;
            let candidates = (1u64 << n) * (bound - 1);
            let mut lifted: HashSet<Bits> = HashSet::new();
            while left >= over_low && (lifted.len() as u64) < candidates {
                let s = wrong_label(rng);
                if lifted.insert(s) {
                    units.insert(s, over_low);
                    left -= over_low;
                }
            }
            if left > 0 {
                *units.entry(wrong_label(rng)).or_insert(0) += left;
            }
        }
    }
    units.retain(|_, u| *u > 0);
    DyadicEvaluator::new(n, m, shift, units)
}
