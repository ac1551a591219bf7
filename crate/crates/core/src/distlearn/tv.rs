use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::bits::Bits;
use crate::error::{Error, Result};

use super::{
    dense_masses, pow2_inv, Evaluator, FiniteFunction, FunctionView, InducedSpec, InputDist, Rational, MAX_DENSE_BITS,
};

/// Largest explicit support accepted by the closed-form distance.
pub const MAX_SUPPORT: usize = 10_000_000;

fn abs_diff(a: &Rational, b: &Rational) -> Rational {
    (a - b).abs()
}

/// `½ Σ |a(s) - b(s)|` over two dense tables of equal length.
///
/// Tables whose masses sum to less than one are completed with a single
/// outcome outside the strings carrying the missing mass.
pub fn tv_distance(a: &[Rational], b: &[Rational]) -> Result<Rational> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("tables of length {} and {}", a.len(), b.len())));
    }
    if !a.len().is_power_of_two() || a.len().trailing_zeros() > MAX_DENSE_BITS {
        return Err(Error::invalid(format!("{} entries is not a dense table", a.len())));
    }
    let mut sum = Rational::zero();
    let (mut ta, mut tb) = (Rational::zero(), Rational::zero());
    for (x, y) in a.iter().zip(b) {
        sum += abs_diff(x, y);
        ta += x;
        tb += y;
    }
    sum += abs_diff(&ta, &tb);
    Ok(sum / BigInt::from(2))
}

/// Floating point counterpart of [`tv_distance`].
pub fn tv_distance_f64(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("tables of length {} and {}", a.len(), b.len())));
    }
    let (ta, tb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    Ok((sum + (ta - tb).abs()) / 2.0)
}

/// `Σ_x P(x)·[f(x) ≠ h(x)]`.
pub fn function_loss(f: &FiniteFunction, h: &FiniteFunction, p: &InputDist) -> Result<Rational> {
    if f.input_bits() != h.input_bits() || f.output_bits() != h.output_bits() || p.n() != f.input_bits() {
        return Err(Error::invalid("function shapes disagree"));
    }
    Ok(Bits::all(f.input_bits()).filter(|&x| f.apply(x) != h.apply(x)).map(|x| p.mass(x)).sum())
}

/// Exact distance from `e` to a noiseless induced distribution with uniform
/// inputs, in closed form over the evaluator's support.
///
/// Falls back to dense enumeration when `e` has no explicit support and the
/// strings are short enough.
pub fn tv_against_induced<E, F>(e: &E, spec: &InducedSpec<F>) -> Result<Rational>
where
    E: Evaluator + ?Sized,
    F: FunctionView,
{
    if !spec.is_noiseless() || !matches!(spec.input_dist(), InputDist::Uniform { .. }) {
        return Err(Error::Unsupported("closed-form distance needs a noiseless uniform target".into()));
    }
    let (n, m) = (spec.n(), spec.m());
    if e.input_bits() != n || e.output_bits() != m {
        return Err(Error::invalid("evaluator and target disagree on shape"));
    }
    let Some(table) = e.support() else {
        if n + m > MAX_DENSE_BITS {
            return Err(Error::Unsupported("evaluator has no explicit support".into()));
        }
        let target: Vec<Rational> = Bits::all(n + m).map(|s| spec.mass(s)).collect::<Result<_>>()?;
        return tv_distance(&dense_masses(e)?, &target);
    };
    if table.len() > MAX_SUPPORT {
        return Err(Error::Unsupported(format!("support of {} strings", table.len())));
    }
    let f = spec.function();
    let target = pow2_inv(n);
    let ids = table.distinct_masses().len();
    let mut diag = vec![0u64; ids];
    let mut off = vec![0u64; ids];
    for &(s, id) in table.points() {
        let (x, y) = s.split(n)?;
        if f.apply(x) == y {
            diag[id as usize] += 1;
        } else {
            off[id as usize] += 1;
        }
    }
    let diag_listed: u64 = diag.iter().sum();
    let off_listed: u64 = off.iter().sum();
    let d = table.default_mass();
    let inputs = BigInt::one() << n as usize;
    let strings = BigInt::one() << (n + m) as usize;

    let mut sum = Rational::zero();
    let mut total = Rational::zero();
    for (i, p) in table.distinct_masses().iter().enumerate() {
        sum += abs_diff(&target, p) * BigInt::from(diag[i]) + p * BigInt::from(off[i]);
        total += p * BigInt::from(diag[i] + off[i]);
    }
    let diag_unlisted = &inputs - BigInt::from(diag_listed);
    let off_unlisted = &strings - &inputs - BigInt::from(off_listed);
    sum += abs_diff(&target, d) * &diag_unlisted + d * &off_unlisted;
    total += d * (diag_unlisted + off_unlisted);
    sum += abs_diff(&Rational::one(), &total);
    Ok(sum / BigInt::from(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distlearn::{induced_eval, ratio, SupportTable, UniformEvaluator};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    struct Listed(SupportTable);

    impl Evaluator for Listed {
        fn input_bits(&self) -> u32 {
            self.0.input_bits()
        }
        fn output_bits(&self) -> u32 {
            self.0.output_bits()
        }
        fn mass(&self, s: Bits) -> Result<Rational> {
            Ok(self.0.mass(s))
        }
        fn support(&self) -> Option<SupportTable> {
            Some(self.0.clone())
        }
    }

    struct Opaque<E>(E);

    impl<E: Evaluator> Evaluator for Opaque<E> {
        fn input_bits(&self) -> u32 {
            self.0.input_bits()
        }
        fn output_bits(&self) -> u32 {
            self.0.output_bits()
        }
        fn mass(&self, s: Bits) -> Result<Rational> {
            self.0.mass(s)
        }
    }

    #[test]
    fn dense_examples() {
        let half = vec![ratio(1, 2), ratio(1, 2)];
        let point = vec![Rational::one(), Rational::zero()];
        let other = vec![Rational::zero(), Rational::one()];
        assert_eq!(tv_distance(&half, &half).unwrap(), Rational::zero());
        assert_eq!(tv_distance(&point, &other).unwrap(), Rational::one());
        assert_eq!(tv_distance(&half, &point).unwrap(), ratio(1, 2));
        assert!(tv_distance(&half, &[Rational::one()]).is_err());
        assert_eq!(tv_distance_f64(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn loss_examples() {
        let f = FiniteFunction::from_fn(3, 2, |x| x.value() % 4).unwrap();
        let h = FiniteFunction::from_fn(3, 2, |x| if x.value() == 5 { 0 } else { x.value() % 4 }).unwrap();
        let p = InputDist::uniform(3);
        assert_eq!(function_loss(&f, &f, &p).unwrap(), Rational::zero());
        assert_eq!(function_loss(&f, &h, &p).unwrap(), ratio(1, 8));
    }

    fn spec(n: u32, seed: u64) -> InducedSpec<FiniteFunction> {
        let f = FiniteFunction::random(n, n, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
        InducedSpec::noiseless(f, InputDist::uniform(n)).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let s = spec(4, 1);
        let exact = induced_eval(s.clone()).unwrap();
        assert_eq!(tv_against_induced(&exact, &s).unwrap(), Rational::zero());
        let empty = Listed(SupportTable::from_entries(4, 4, []).unwrap());
        assert_eq!(tv_against_induced(&empty, &s).unwrap(), Rational::one());
        let uniform = UniformEvaluator::new(4, 4).unwrap();
        assert_eq!(tv_against_induced(&uniform, &s).unwrap(), ratio(15, 16));
    }

    #[test]
    fn closed_form_rejects_noisy_targets() {
        let f = FiniteFunction::random(2, 2, &mut ChaCha20Rng::seed_from_u64(0)).unwrap();
        let noisy = InducedSpec::new(f.clone(), InputDist::uniform(2), ratio(1, 10)).unwrap();
        let u = UniformEvaluator::new(2, 2).unwrap();
        assert!(matches!(tv_against_induced(&u, &noisy), Err(Error::Unsupported(_))));
        let weighted = InducedSpec::noiseless(f, InputDist::from_weights(vec![1, 1, 1, 5]).unwrap()).unwrap();
        assert!(tv_against_induced(&u, &weighted).is_err());
    }

    #[test]
    fn closed_form_agrees_with_dense() {
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        for seed in 0..30 {
            let s = spec(3, seed);
            let mut entries: Vec<(Bits, Rational)> = Vec::new();
            for b in Bits::all(6) {
                if rng.random_bool(0.3) {
                    entries.push((b, ratio(rng.random_range(0..4), 64)));
                }
            }
            let table = SupportTable::from_entries(3, 3, entries).unwrap();
            let listed = Listed(table);
            let closed = tv_against_induced(&listed, &s).unwrap();
            let dense = tv_against_induced(&Opaque(Listed(listed.0.clone())), &s).unwrap();
            assert_eq!(closed, dense);
        }
    }
}
