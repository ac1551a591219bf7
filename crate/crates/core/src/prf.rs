//! The DDH pseudo-random function collection over `QR_p`.
//!
//! An instance publishes `(p, g, g^a)`. Evaluating `F(k, x)` starts from the
//! key `b_0 = k` and applies one branch map per input bit, leftmost bit
//! first:
//!
//! * branch 0: `b -> fold(g^b mod p)`
//! * branch 1: `b -> fold((g^a)^b mod p)`
//!
//! Both maps are bijections on `Z_q`, so a chain can be walked backwards
//! with discrete logarithms.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::numtheory::{
    find_qr_generator, fold_unchecked, fp_unfold, gen_safe_prime, is_quadratic_residue, modpow, mul_mod, BsgsTable,
    SafePrime, ZqElement,
};

/// Largest input length accepted by an instance.
pub const MAX_INPUT_BITS: u32 = 32;
/// [`StepTable`] is only built for group orders up to this size.
pub const MAX_TABLE_ORDER: u64 = 1 << 22;

/// Public parameters of one member of the collection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "InstanceRecord", try_from = "InstanceRecord")]
pub struct Instance {
    sp: SafePrime,
    g: u64,
    ga: u64,
    n_in: u32,
}

/// Wire form of an [`Instance`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub p: u64,
    pub q: u64,
    pub g: u64,
    pub ga: u64,
    pub n_in: u32,
}

impl Instance {
    pub fn new(p: u64, g: u64, ga: u64, n_in: u32) -> Result<Self> {
        let sp = SafePrime::new(p)?;
        Self::from_parts(sp, g, ga, n_in)
    }

    pub fn from_parts(sp: SafePrime, g: u64, ga: u64, n_in: u32) -> Result<Self> {
        if !(1..=MAX_INPUT_BITS).contains(&n_in) {
            return Err(Error::invalid(format!("input length must lie in 1..={MAX_INPUT_BITS}")));
        }
        for (name, v) in [("g", g), ("ga", ga)] {
            if v <= 1 || v >= sp.p() || !is_quadratic_residue(v, &sp)? {
                return Err(Error::invalid(format!("{name} = {v} is not a non-identity residue modulo {}", sp.p())));
            }
        }
        Ok(Instance { sp, g, ga, n_in })
    }

    pub fn safe_prime(&self) -> &SafePrime {
        &self.sp
    }

    pub fn p(&self) -> u64 {
        self.sp.p()
    }

    pub fn q(&self) -> u64 {
        self.sp.q()
    }

    pub fn g(&self) -> u64 {
        self.g
    }

    pub fn ga(&self) -> u64 {
        self.ga
    }

    pub fn n_in(&self) -> u32 {
        self.n_in
    }

    /// Width of the output field when values of `Z_q` are written as
    /// bitstrings: `n_in` bits when `q <= 2^n_in`, wider otherwise.
    pub fn output_bits(&self) -> u32 {
        let needed = 64 - (self.q() - 1).leading_zeros();
        needed.max(self.n_in)
    }

    fn base(&self, branch: bool) -> u64 {
        if branch {
            self.ga
        } else {
            self.g
        }
    }
}

impl From<Instance> for InstanceRecord {
    fn from(i: Instance) -> Self {
        InstanceRecord { p: i.p(), q: i.q(), g: i.g, ga: i.ga, n_in: i.n_in }
    }
}

impl TryFrom<InstanceRecord> for Instance {
    type Error = Error;

    fn try_from(r: InstanceRecord) -> Result<Self> {
        let inst = Instance::new(r.p, r.g, r.ga, r.n_in)?;
        if inst.q() != r.q {
            return Err(Error::invalid(format!("q = {} does not match p = {}", r.q, r.p)));
        }
        Ok(inst)
    }
}

/// An instance together with its hidden exponent `a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "SecretInstanceRecord", try_from = "SecretInstanceRecord")]
pub struct SecretInstance {
    instance: Instance,
    a: ZqElement,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecretInstanceRecord {
    #[serde(flatten)]
    pub instance: InstanceRecord,
    pub a: u64,
}

impl SecretInstance {
    pub fn new(instance: Instance, a: u64) -> Result<Self> {
        if a == 0 || a >= instance.q() {
            return Err(Error::invalid(format!("a must lie in 1..{}", instance.q())));
        }
        if modpow(instance.g, a, instance.p()) != instance.ga {
            return Err(Error::invalid("g^a does not match the published ga"));
        }
        Ok(SecretInstance { instance, a: ZqElement::new(a, instance.q())? })
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn a(&self) -> ZqElement {
        self.a
    }
}

impl From<SecretInstance> for SecretInstanceRecord {
    fn from(s: SecretInstance) -> Self {
        SecretInstanceRecord { instance: s.instance.into(), a: s.a.value() }
    }
}

impl TryFrom<SecretInstanceRecord> for SecretInstance {
    type Error = Error;

    fn try_from(r: SecretInstanceRecord) -> Result<Self> {
        SecretInstance::new(Instance::try_from(r.instance)?, r.a)
    }
}

/// A key `k` in `Z_q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SecretKey(ZqElement);

impl SecretKey {
    pub fn new(k: u64, instance: &Instance) -> Result<Self> {
        Ok(SecretKey(ZqElement::new(k, instance.q())?))
    }

    pub fn value(self) -> u64 {
        self.0.value()
    }

    pub fn element(self) -> ZqElement {
        self.0
    }
}

/// Samples `(p, g, g^a)` with `p` a `bit_len`-bit safe prime and `a` uniform
/// in `1..q`.
pub fn instance_gen<R: Rng + ?Sized>(bit_len: u32, n_in: u32, rng: &mut R) -> Result<SecretInstance> {
    if !(4..=40).contains(&bit_len) {
        return Err(Error::invalid(format!("instance bit length must lie in 4..=40, got {bit_len}")));
    }
    let sp = gen_safe_prime(bit_len, rng)?;
    let g = find_qr_generator(&sp, rng);
    let a = rng.random_range(1..sp.q());
    let ga = modpow(g, a, sp.p());
    let instance = Instance::from_parts(sp, g, ga, n_in)?;
    SecretInstance::new(instance, a)
}

pub fn sample_key<R: Rng + ?Sized>(instance: &Instance, rng: &mut R) -> SecretKey {
    SecretKey(ZqElement::new(rng.random_range(0..instance.q()), instance.q()).expect("in range"))
}

/// One branch map applied to `b`.
pub fn g_step(instance: &Instance, branch: bool, b: ZqElement) -> ZqElement {
    debug_assert_eq!(b.modulus(), instance.q());
    fold_unchecked(modpow(instance.base(branch), b.value(), instance.p()), &instance.sp)
}

/// `F(k, x)`, consuming the bits of `x` from left to right.
pub fn prf_eval(instance: &Instance, key: &SecretKey, x: Bits) -> Result<ZqElement> {
    if x.len() != instance.n_in {
        return Err(Error::LengthMismatch { expected: instance.n_in, got: x.len() });
    }
    Ok(eval_chain(instance, key.0, x))
}

fn eval_chain(instance: &Instance, start: ZqElement, x: Bits) -> ZqElement {
    x.iter().fold(start, |b, bit| g_step(instance, bit, b))
}

/// The `b` with `g_step(branch, b) = b_next`.
pub fn invert_step(instance: &Instance, branch: bool, b_next: ZqElement) -> Result<ZqElement> {
    let table = BsgsTable::new(instance.base(branch), &instance.sp)?;
    table.log(fp_unfold(b_next, &instance.sp))
}

/// Step inversion with both logarithm tables built once.
#[derive(Clone, Debug)]
pub struct StepInverter {
    instance: Instance,
    zero: BsgsTable,
    one: BsgsTable,
}

impl StepInverter {
    pub fn new(instance: &Instance) -> Result<Self> {
        Ok(StepInverter {
            instance: *instance,
            zero: BsgsTable::new(instance.g, &instance.sp)?,
            one: BsgsTable::new(instance.ga, &instance.sp)?,
        })
    }

    pub fn invert(&self, branch: bool, b_next: ZqElement) -> Result<ZqElement> {
        let table = if branch { &self.one } else { &self.zero };
        table.log(fp_unfold(b_next, &self.instance.sp))
    }
}

/// Both branch maps tabulated over all of `Z_q`.
///
/// Building costs `2q` modular multiplications; afterwards each step is a
/// lookup. Used to enumerate `F(k, .)` over every input.
#[derive(Clone, Debug)]
pub struct StepTable {
    instance: Instance,
    zero: Vec<u32>,
    one: Vec<u32>,
}

impl StepTable {
    pub fn new(instance: &Instance) -> Result<Self> {
        let q = instance.q();
        if q > MAX_TABLE_ORDER {
            return Err(Error::Unsupported(format!("step tables need q <= 2^22, got {q}")));
        }
        let tabulate = |base: u64| {
            let mut out = Vec::with_capacity(q as usize);
            let mut cur = 1u64;
            for _ in 0..q {
                out.push(fold_unchecked(cur, &instance.sp).value() as u32);
                cur = mul_mod(cur, base, instance.p());
            }
            out
        };
        Ok(StepTable { instance: *instance, zero: tabulate(instance.g), one: tabulate(instance.ga) })
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    #[inline]
    pub fn step(&self, branch: bool, b: u64) -> u64 {
        let table = if branch { &self.one } else { &self.zero };
        table[b as usize] as u64
    }

    pub fn eval(&self, key: &SecretKey, x: Bits) -> Result<u64> {
        if x.len() != self.instance.n_in {
            return Err(Error::LengthMismatch { expected: self.instance.n_in, got: x.len() });
        }
        Ok(x.iter().fold(key.value(), |b, bit| self.step(bit, b)))
    }

    /// `F(k, x)` for every `x`, indexed by the integer value of `x`.
    ///
    /// Walks the evaluation tree level by level, so shared prefixes are
    /// computed once: `2^(n+1)` lookups in total.
    pub fn eval_all(&self, key: &SecretKey) -> Result<Vec<u32>> {
        let n = self.instance.n_in;
        if n > 26 {
            return Err(Error::Unsupported(format!("cannot enumerate 2^{n} inputs")));
        }
        let mut level = vec![key.value() as u32];
        for _ in 0..n {
            let mut next = Vec::with_capacity(level.len() * 2);
            for &b in &level {
                next.push(self.zero[b as usize]);
                next.push(self.one[b as usize]);
            }
            level = next;
        }
        Ok(level)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn toy() -> Instance {
        Instance::new(11, 3, 9, 2).unwrap()
    }

    fn z5(v: u64) -> ZqElement {
        ZqElement::new(v, 5).unwrap()
    }

    fn bits(s: &str) -> Bits {
        s.parse().unwrap()
    }

    #[test]
    fn toy_instance_is_consistent_with_a_equal_2() {
        // 3^2 = 9 mod 11
        let si = SecretInstance::new(toy(), 2).unwrap();
        assert_eq!(si.a().value(), 2);
        assert!(SecretInstance::new(toy(), 3).is_err());
        assert!(SecretInstance::new(toy(), 0).is_err());
    }

    #[test]
    fn instance_validation() {
        assert!(Instance::new(11, 1, 9, 2).is_err());
        assert!(Instance::new(11, 2, 9, 2).is_err());
        assert!(Instance::new(13, 3, 9, 2).is_err());
        assert!(Instance::new(11, 3, 9, 0).is_err());
    }

    #[test]
    fn instance_gen_at_four_bits_uses_p_11() {
        for seed in 0..10 {
            let si = instance_gen(4, 2, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
            let i = si.instance();
            assert_eq!(i.p(), 11);
            assert_eq!(modpow(i.g(), si.a().value(), i.p()), i.ga());
        }
    }

    #[test]
    fn instance_gen_is_deterministic() {
        let a = instance_gen(24, 8, &mut ChaCha20Rng::seed_from_u64(77)).unwrap();
        let b = instance_gen(24, 8, &mut ChaCha20Rng::seed_from_u64(77)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_key_stays_in_range_and_is_deterministic() {
        let i = toy();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert!(sample_key(&i, &mut rng).value() < 5);
        }
        let k1 = sample_key(&i, &mut ChaCha20Rng::seed_from_u64(8));
        let k2 = sample_key(&i, &mut ChaCha20Rng::seed_from_u64(8));
        assert_eq!(k1, k2);
    }

    #[test]
    fn sample_key_is_uniform_within_four_sigma() {
        let i = toy();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let draws = 100_000u64;
        let mut counts = [0u64; 5];
        for _ in 0..draws {
            counts[sample_key(&i, &mut rng).value() as usize] += 1;
        }
        let mean = draws as f64 / 5.0;
        let sigma = (draws as f64 * 0.2 * 0.8).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() <= 4.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn g_step_examples() {
        let i = toy();
        assert_eq!(g_step(&i, true, z5(2)).value(), 4);
        assert_eq!(g_step(&i, false, z5(4)).value(), 4);
        assert_eq!(g_step(&i, true, z5(4)).value(), 0);
    }

    #[test]
    fn prf_eval_examples() {
        let i = toy();
        let k = SecretKey::new(2, &i).unwrap();
        assert_eq!(prf_eval(&i, &k, bits("10")).unwrap().value(), 4);
        assert_eq!(prf_eval(&i, &k, bits("11")).unwrap().value(), 0);
        assert!(matches!(prf_eval(&i, &k, bits("101")), Err(Error::LengthMismatch { expected: 2, got: 3 })));
    }

    #[test]
    fn empty_input_returns_the_key() {
        let mut i = toy();
        i.n_in = 0;
        let k = SecretKey::new(3, &i).unwrap();
        assert_eq!(prf_eval(&i, &k, Bits::empty()).unwrap().value(), 3);
    }

    #[test]
    fn invert_step_examples() {
        let i = toy();
        assert_eq!(invert_step(&i, true, z5(0)).unwrap().value(), 4);
        assert_eq!(invert_step(&i, true, z5(4)).unwrap().value(), 2);
        for branch in [false, true] {
            for b in 0..5 {
                let next = g_step(&i, branch, z5(b));
                assert_eq!(invert_step(&i, branch, next).unwrap().value(), b);
            }
        }
    }

    #[test]
    fn key_to_output_is_a_bijection_at_p_11_and_23() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for bit_len in [4, 5] {
            let si = instance_gen(bit_len, 3, &mut rng).unwrap();
            let i = si.instance();
            for x in Bits::all(3) {
                let mut outs: Vec<u64> =
                    (0..i.q()).map(|k| prf_eval(i, &SecretKey::new(k, i).unwrap(), x).unwrap().value()).collect();
                outs.sort_unstable();
                assert_eq!(outs, (0..i.q()).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn outputs_depend_on_the_input_for_p_at_least_23() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        for _ in 0..50 {
            let si = instance_gen(rng.random_range(5..=16), 4, &mut rng).unwrap();
            let i = si.instance();
            let k = sample_key(i, &mut rng);
            if i.g() == i.ga() {
                // a = 1 makes both branch maps equal
                continue;
            }
            let outs: std::collections::HashSet<u64> =
                Bits::all(4).map(|x| prf_eval(i, &k, x).unwrap().value()).collect();
            assert!(outs.len() > 1);
        }
    }

    #[test]
    fn step_table_matches_direct_evaluation() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        for _ in 0..5 {
            let si = instance_gen(14, 6, &mut rng).unwrap();
            let i = si.instance();
            let table = StepTable::new(i).unwrap();
            let k = sample_key(i, &mut rng);
            let all = table.eval_all(&k).unwrap();
            for x in Bits::all(6) {
                let direct = prf_eval(i, &k, x).unwrap().value();
                assert_eq!(all[x.value() as usize] as u64, direct);
                assert_eq!(table.eval(&k, x).unwrap(), direct);
            }
        }
    }

    #[test]
    fn records_round_trip_and_reject_tampering() {
        let si = instance_gen(16, 5, &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
        let json = serde_json::to_string(si.instance()).unwrap();
        assert!(!json.contains("\"a\""));
        let back: Instance = serde_json::from_str(&json).unwrap();
        assert_eq!(&back, si.instance());

        let secret = serde_json::to_string(&si).unwrap();
        let back: SecretInstance = serde_json::from_str(&secret).unwrap();
        assert_eq!(back, si);

        let mut rec = InstanceRecord::from(*si.instance());
        rec.q += 2;
        assert!(Instance::try_from(rec).is_err());
    }
}
