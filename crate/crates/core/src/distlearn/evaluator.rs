use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::Rng;

use crate::bits::Bits;
use crate::error::{Error, Result};

use super::{
    in_unit_interval, pow2_inv, ratio, FiniteFunction, FunctionView, InducedSpec, InputDist, Rational, MAX_DENSE_BITS,
};

/// Probability-mass queries over strings `x‖y` of length `n + m`.
pub trait Evaluator: Send + Sync {
    fn input_bits(&self) -> u32;
    fn output_bits(&self) -> u32;
    fn mass(&self, s: Bits) -> Result<Rational>;

    /// The explicit support, when the evaluator has a finite description.
    fn support(&self) -> Option<SupportTable> {
        None
    }

    fn string_bits(&self) -> u32 {
        self.input_bits() + self.output_bits()
    }
}

macro_rules! forward_evaluator {
    ($($wrapper:ty),*) => {$(
        impl<E: Evaluator + ?Sized> Evaluator for $wrapper {
            fn input_bits(&self) -> u32 {
                (**self).input_bits()
            }
            fn output_bits(&self) -> u32 {
                (**self).output_bits()
            }
            fn mass(&self, s: Bits) -> Result<Rational> {
                (**self).mass(s)
            }
            fn support(&self) -> Option<SupportTable> {
                (**self).support()
            }
        }
    )*};
}

forward_evaluator!(&E, Box<E>, std::sync::Arc<E>);

fn check_len(s: Bits, expected: u32) -> Result<()> {
    if s.len() != expected {
        return Err(Error::LengthMismatch { expected, got: s.len() });
    }
    Ok(())
}

/// Listed strings with interned masses, plus one mass shared by every
/// unlisted string.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportTable {
    n: u32,
    m: u32,
    points: Vec<(Bits, u32)>,
    masses: Vec<Rational>,
    default_mass: Rational,
}

impl SupportTable {
    pub fn from_entries(n: u32, m: u32, entries: impl IntoIterator<Item = (Bits, Rational)>) -> Result<Self> {
        let mut ids: HashMap<Rational, u32> = HashMap::new();
        let mut masses = Vec::new();
        let mut points = Vec::new();
        for (s, p) in entries {
            check_len(s, n + m)?;
            if !in_unit_interval(&p) {
                return Err(Error::invalid(format!("mass {p} of {s} is not a probability")));
            }
            if p.is_zero() {
                continue;
            }
            let id = *ids.entry(p.clone()).or_insert_with(|| {
                masses.push(p);
                (masses.len() - 1) as u32
            });
            points.push((s, id));
        }
        Self::assemble(n, m, points, masses, Rational::zero())
    }

    /// Every listed point carries the same mass.
    pub fn shared(n: u32, m: u32, points: Vec<Bits>, mass: Rational) -> Result<Self> {
        if let Some(s) = points.iter().find(|s| s.len() != n + m) {
            return Err(Error::LengthMismatch { expected: n + m, got: s.len() });
        }
        let points = points.into_iter().map(|s| (s, 0)).collect();
        Self::assemble(n, m, points, vec![mass], Rational::zero())
    }

    /// No listed points; every string has mass `default_mass`.
    pub fn constant(n: u32, m: u32, default_mass: Rational) -> Result<Self> {
        Self::assemble(n, m, Vec::new(), Vec::new(), default_mass)
    }

    fn assemble(
        n: u32,
        m: u32,
        mut points: Vec<(Bits, u32)>,
        masses: Vec<Rational>,
        default_mass: Rational,
    ) -> Result<Self> {
        if n + m > 64 {
            return Err(Error::invalid(format!("strings of {} bits", n + m)));
        }
        points.sort_unstable_by_key(|&(s, _)| s);
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("support lists a string twice"));
        }
        let table = SupportTable { n, m, points, masses, default_mass };
        if !in_unit_interval(&table.default_mass) || table.total() > Rational::one() {
            return Err(Error::invalid("support masses exceed 1"));
        }
        Ok(table)
    }

    pub fn input_bits(&self) -> u32 {
        self.n
    }

    pub fn output_bits(&self) -> u32 {
        self.m
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn default_mass(&self) -> &Rational {
        &self.default_mass
    }

    /// Distinct listed masses; points refer to them by index.
    pub fn distinct_masses(&self) -> &[Rational] {
        &self.masses
    }

    pub fn points(&self) -> &[(Bits, u32)] {
        &self.points
    }

    pub fn iter(&self) -> impl Iterator<Item = (Bits, &Rational)> + '_ {
        self.points.iter().map(|&(s, id)| (s, &self.masses[id as usize]))
    }

    pub fn mass(&self, s: Bits) -> Rational {
        match self.points.binary_search_by_key(&s, |&(p, _)| p) {
            Ok(i) => self.masses[self.points[i].1 as usize].clone(),
            Err(_) => self.default_mass.clone(),
        }
    }

    /// Number of strings not listed, `2^(n+m) - len`.
    pub fn unlisted(&self) -> BigInt {
        (BigInt::one() << (self.n + self.m) as usize) - BigInt::from(self.points.len())
    }

    /// Total mass over all `2^(n+m)` strings.
    pub fn total(&self) -> Rational {
        let mut counts = vec![0u64; self.masses.len()];
        for &(_, id) in &self.points {
            counts[id as usize] += 1;
        }
        let listed: Rational = counts.iter().zip(&self.masses).map(|(&c, p)| p * BigInt::from(c)).sum();
        listed + &self.default_mass * self.unlisted()
    }
}

/// Checks a full table of masses and reports its shape `(n + m)`.
fn check_dense(masses: &[Rational]) -> Result<u32> {
    let len = masses.len();
    if !len.is_power_of_two() || len.trailing_zeros() > MAX_DENSE_BITS {
        return Err(Error::invalid(format!("{len} masses is not a dense table")));
    }
    if masses.iter().any(|p| !in_unit_interval(p)) {
        return Err(Error::invalid("dense table holds a non-probability"));
    }
    if masses.iter().sum::<Rational>() > Rational::one() {
        return Err(Error::invalid("dense masses exceed 1"));
    }
    Ok(len.trailing_zeros())
}

/// A full table of masses over `{0,1}^(n+m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseEvaluator {
    n: u32,
    m: u32,
    masses: Vec<Rational>,
}

impl DenseEvaluator {
    pub fn new(n: u32, m: u32, masses: Vec<Rational>) -> Result<Self> {
        let bits = check_dense(&masses)?;
        if bits != n + m {
            return Err(Error::invalid(format!("table covers {bits} bits, expected {}", n + m)));
        }
        Ok(DenseEvaluator { n, m, masses })
    }

    pub fn from_evaluator<E: Evaluator + ?Sized>(e: &E) -> Result<Self> {
        Self::new(e.input_bits(), e.output_bits(), dense_masses(e)?)
    }

    pub fn masses(&self) -> &[Rational] {
        &self.masses
    }
}

impl Evaluator for DenseEvaluator {
    fn input_bits(&self) -> u32 {
        self.n
    }

    fn output_bits(&self) -> u32 {
        self.m
    }

    fn mass(&self, s: Bits) -> Result<Rational> {
        check_len(s, self.n + self.m)?;
        Ok(self.masses[s.value() as usize].clone())
    }

    fn support(&self) -> Option<SupportTable> {
        let entries =
            self.masses.iter().enumerate().map(|(i, p)| (Bits::truncated(i as u64, self.n + self.m), p.clone()));
        SupportTable::from_entries(self.n, self.m, entries).ok()
    }
}

/// `P(x)·[h(x) = y]`: the noiseless distribution induced by a hypothesis.
#[derive(Clone, Debug)]
pub struct GraphEvaluator {
    h: FiniteFunction,
    p: InputDist,
}

impl GraphEvaluator {
    pub fn new(h: FiniteFunction, p: InputDist) -> Result<Self> {
        if h.input_bits() != p.n() {
            return Err(Error::invalid("hypothesis and input distribution disagree on n"));
        }
        Ok(GraphEvaluator { h, p })
    }

    pub fn hypothesis(&self) -> &FiniteFunction {
        &self.h
    }
}

impl Evaluator for GraphEvaluator {
    fn input_bits(&self) -> u32 {
        self.h.input_bits()
    }

    fn output_bits(&self) -> u32 {
        self.h.output_bits()
    }

    fn mass(&self, s: Bits) -> Result<Rational> {
        check_len(s, self.string_bits())?;
        let (x, y) = s.split(self.input_bits())?;
        if self.h.apply(x) == y {
            Ok(self.p.mass(x))
        } else {
            Ok(Rational::zero())
        }
    }

    fn support(&self) -> Option<SupportTable> {
        let n = self.input_bits();
        let entries = Bits::all(n).map(|x| (x.concat(self.h.apply(x)).expect("fits"), self.p.mass(x)));
        SupportTable::from_entries(n, self.output_bits(), entries).ok()
    }
}

/// Raw empirical frequencies `count(s) / N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HistogramEvaluator {
    n: u32,
    m: u32,
    counts: BTreeMap<Bits, u64>,
    total: u64,
}

impl HistogramEvaluator {
    pub fn from_samples(n: u32, m: u32, samples: impl IntoIterator<Item = Bits>) -> Result<Self> {
        let mut counts = BTreeMap::new();
        let mut total = 0u64;
        for s in samples {
            check_len(s, n + m)?;
            *counts.entry(s).or_insert(0) += 1;
            total += 1;
        }
        if total == 0 {
            return Err(Error::invalid("histogram needs at least one sample"));
        }
        Ok(HistogramEvaluator { n, m, counts, total })
    }

    pub fn from_counts(n: u32, m: u32, counts: BTreeMap<Bits, u64>) -> Result<Self> {
        let total = counts.values().sum::<u64>();
        if total == 0 {
            return Err(Error::invalid("histogram needs at least one sample"));
        }
        if let Some(s) = counts.keys().find(|s| s.len() != n + m) {
            return Err(Error::LengthMismatch { expected: n + m, got: s.len() });
        }
        Ok(HistogramEvaluator { n, m, counts, total })
    }

    pub fn counts(&self) -> &BTreeMap<Bits, u64> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

impl Evaluator for HistogramEvaluator {
    fn input_bits(&self) -> u32 {
        self.n
    }

    fn output_bits(&self) -> u32 {
        self.m
    }

    fn mass(&self, s: Bits) -> Result<Rational> {
        check_len(s, self.n + self.m)?;
        Ok(ratio(self.counts.get(&s).copied().unwrap_or(0), self.total))
    }

    fn support(&self) -> Option<SupportTable> {
        let entries = self.counts.iter().map(|(&s, &c)| (s, ratio(c, self.total)));
        SupportTable::from_entries(self.n, self.m, entries).ok()
    }
}

/// Mass `2^-(n+m)` on every string.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UniformEvaluator {
    n: u32,
    m: u32,
}

impl UniformEvaluator {
    pub fn new(n: u32, m: u32) -> Result<Self> {
        if n + m > 64 {
            return Err(Error::invalid(format!("strings of {} bits", n + m)));
        }
        Ok(UniformEvaluator { n, m })
    }
}

impl Evaluator for UniformEvaluator {
    fn input_bits(&self) -> u32 {
        self.n
    }

    fn output_bits(&self) -> u32 {
        self.m
    }

    fn mass(&self, s: Bits) -> Result<Rational> {
        check_len(s, self.n + self.m)?;
        Ok(pow2_inv(self.n + self.m))
    }

    fn support(&self) -> Option<SupportTable> {
        SupportTable::constant(self.n, self.m, pow2_inv(self.n + self.m)).ok()
    }
}

/// The evaluator of an induced distribution.
#[derive(Clone, Debug)]
pub struct InducedEvaluator<F> {
    spec: InducedSpec<F>,
}

impl<F> InducedEvaluator<F> {
    pub fn spec(&self) -> &InducedSpec<F> {
        &self.spec
    }
}

pub fn induced_eval<F: FunctionView>(spec: InducedSpec<F>) -> Result<InducedEvaluator<F>> {
    if matches!(spec.input_dist(), InputDist::Weighted { .. }) && spec.n() + spec.m() > MAX_DENSE_BITS {
        return Err(Error::Unsupported(format!("dense input distribution with n + m = {}", spec.n() + spec.m())));
    }
    Ok(InducedEvaluator { spec })
}

impl<F: FunctionView + Send + Sync> Evaluator for InducedEvaluator<F> {
    fn input_bits(&self) -> u32 {
        self.spec.n()
    }

    fn output_bits(&self) -> u32 {
        self.spec.m()
    }

    fn mass(&self, s: Bits) -> Result<Rational> {
        self.spec.mass(s)
    }

    fn support(&self) -> Option<SupportTable> {
        let n = self.spec.n();
        if !self.spec.is_noiseless() || n > MAX_DENSE_BITS {
            return None;
        }
        let f = self.spec.function();
        let p = self.spec.input_dist();
        let entries = Bits::all(n).map(|x| (x.concat(f.apply(x)).expect("fits"), p.mass(x)));
        SupportTable::from_entries(n, self.spec.m(), entries).ok()
    }
}

/// Masses of every string in integer order. Requires `n + m <= 24`.
pub fn dense_masses<E: Evaluator + ?Sized>(e: &E) -> Result<Vec<Rational>> {
    let bits = e.string_bits();
    if bits > MAX_DENSE_BITS {
        return Err(Error::Unsupported(format!("dense table over 2^{bits} strings")));
    }
    if let Some(table) = e.support() {
        let mut out = vec![table.default_mass().clone(); 1usize << bits];
        for (s, p) in table.iter() {
            out[s.value() as usize] = p.clone();
        }
        return Ok(out);
    }
    Bits::all(bits).map(|s| e.mass(s)).collect()
}

/// Draws strings of a fixed length.
pub trait Generator {
    fn string_bits(&self) -> u32;
    fn draw(&mut self) -> Bits;
}

/// Samples the induced distribution with its own random stream.
#[derive(Clone, Debug)]
pub struct InducedGenerator<F, R> {
    spec: InducedSpec<F>,
    rng: R,
}

impl<F, R> InducedGenerator<F, R> {
    pub fn spec(&self) -> &InducedSpec<F> {
        &self.spec
    }
}

pub fn induced_generator<F: FunctionView, R: Rng>(spec: InducedSpec<F>, rng: R) -> InducedGenerator<F, R> {
    InducedGenerator { spec, rng }
}

impl<F: FunctionView, R: Rng> Generator for InducedGenerator<F, R> {
    fn string_bits(&self) -> u32 {
        self.spec.n() + self.spec.m()
    }

    fn draw(&mut self) -> Bits {
        self.spec.draw(&mut self.rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distlearn::{tv_distance, FiniteFunction};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn bits(s: &str) -> Bits {
        s.parse().unwrap()
    }

    #[test]
    fn induced_evaluator_queries() {
        let id = FiniteFunction::from_fn(1, 1, |x| x.value()).unwrap();
        let e = induced_eval(InducedSpec::noiseless(id, InputDist::uniform(1)).unwrap()).unwrap();
        assert_eq!(e.mass(bits("00")).unwrap(), ratio(1, 2));
        assert_eq!(e.mass(bits("01")).unwrap(), Rational::zero());
        assert!(matches!(e.mass(bits("000")), Err(Error::LengthMismatch { .. })));
        assert_eq!(e.support().unwrap().len(), 2);
    }

    #[test]
    fn support_table_lookup_and_totals() {
        let t = SupportTable::from_entries(1, 1, [(bits("10"), ratio(1, 4)), (bits("00"), ratio(1, 4))]).unwrap();
        assert_eq!(t.mass(bits("10")), ratio(1, 4));
        assert_eq!(t.mass(bits("11")), Rational::zero());
        assert_eq!(t.total(), ratio(1, 2));
        assert_eq!(t.distinct_masses().len(), 1);
        assert!(SupportTable::from_entries(1, 1, [(bits("10"), ratio(3, 4)), (bits("00"), ratio(1, 2))]).is_err());
        assert!(SupportTable::from_entries(1, 1, [(bits("10"), ratio(1, 4)), (bits("10"), ratio(1, 4))]).is_err());
        assert_eq!(SupportTable::constant(2, 2, ratio(1, 16)).unwrap().total(), Rational::one());
    }

    #[test]
    fn histogram_counts_duplicates() {
        let h = HistogramEvaluator::from_samples(1, 1, [bits("01"), bits("01"), bits("10"), bits("11")]).unwrap();
        assert_eq!(h.mass(bits("01")).unwrap(), ratio(1, 2));
        assert_eq!(h.mass(bits("00")).unwrap(), Rational::zero());
        assert!(HistogramEvaluator::from_samples(1, 1, []).is_err());
    }

    #[test]
    fn uniform_masses_sum_to_one() {
        let u = UniformEvaluator::new(1, 1).unwrap();
        assert!(Bits::all(2).all(|s| u.mass(s).unwrap() == ratio(1, 4)));
        assert_eq!(dense_masses(&u).unwrap().iter().sum::<Rational>(), Rational::one());
    }

    #[test]
    fn graph_evaluator_matches_noiseless_induced() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let f = FiniteFunction::random(3, 2, &mut rng).unwrap();
        let p = InputDist::from_weights(vec![1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        let g = GraphEvaluator::new(f.clone(), p.clone()).unwrap();
        let e = induced_eval(InducedSpec::noiseless(f, p).unwrap()).unwrap();
        assert_eq!(dense_masses(&g).unwrap(), dense_masses(&e).unwrap());
    }

    #[test]
    fn generator_is_seed_deterministic() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let f = FiniteFunction::random(3, 2, &mut rng).unwrap();
        let spec = InducedSpec::new(f, InputDist::uniform(3), ratio(1, 4)).unwrap();
        let run = |seed| {
            let mut g = induced_generator(spec.clone(), ChaCha20Rng::seed_from_u64(seed));
            (0..50).map(|_| g.draw()).collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn generator_matches_masses_empirically() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let f = FiniteFunction::random(3, 2, &mut rng).unwrap();
        for eta in [ratio(0, 1), ratio(1, 4)] {
            let spec = InducedSpec::new(f.clone(), InputDist::uniform(3), eta).unwrap();
            let target = dense_masses(&induced_eval(spec.clone()).unwrap()).unwrap();
            let mut g = induced_generator(spec, ChaCha20Rng::seed_from_u64(12));
            let draws = 1_000_000u64;
            let mut counts = vec![0u64; 32];
            for _ in 0..draws {
                counts[g.draw().value() as usize] += 1;
            }
            let empirical: Vec<Rational> = counts.iter().map(|&c| ratio(c, draws)).collect();
            let tv = tv_distance(&empirical, &target).unwrap();
            assert!(tv < ratio(1, 100), "tv {tv}");
        }
    }
}
