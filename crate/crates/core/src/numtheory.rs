//! Safe primes, the quadratic-residue subgroup and its discrete logarithms.
//!
//! All arithmetic is on `u64` residues with `u128` intermediates. Moduli are
//! capped below 2^48, so every product fits comfortably.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

/// Largest supported bit length of a safe prime.
pub const MAX_PRIME_BITS: u32 = 48;
/// Baby-step giant-step refuses group orders at or above this bound.
pub const MAX_DLOG_ORDER: u64 = 1 << 40;
const SAFE_PRIME_ATTEMPTS: u64 = 1 << 20;
const MR_WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    if m <= u32::MAX as u64 {
        (a % m) * (b % m) % m
    } else {
        ((a as u128 * b as u128) % m as u128) as u64
    }
}

/// `base^exp mod p` by square-and-multiply.
pub fn modpow(base: u64, mut exp: u64, p: u64) -> u64 {
    debug_assert!(p >= 2);
    let mut result = 1 % p;
    let mut acc = base % p;
    while exp > 0 {
        if exp & 1 == 1 {
            result = mul_mod(result, acc, p);
        }
        acc = mul_mod(acc, acc, p);
        exp >>= 1;
    }
    result
}

/// Deterministic Miller-Rabin; the witness set is exact for all `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &w in &MR_WITNESSES {
        if n.is_multiple_of(w) {
            return n == w;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &MR_WITNESSES {
        let mut x = modpow(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

pub fn is_safe_prime(p: u64) -> bool {
    p >= 5 && p % 2 == 1 && is_prime((p - 1) / 2) && is_prime(p)
}

fn bit_length(v: u64) -> u32 {
    64 - v.leading_zeros()
}

/// A safe prime `p = 2q + 1` with `q` an odd prime.
///
/// Requiring `q` odd excludes `p = 5` and guarantees `p ≡ 3 (mod 4)`, so
/// `-1` is a non-residue and the folding map below is a bijection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SafePrime {
    p: u64,
    q: u64,
}

impl SafePrime {
    pub fn new(p: u64) -> Result<Self> {
        if bit_length(p) > MAX_PRIME_BITS {
            return Err(Error::invalid(format!("{p} exceeds the {MAX_PRIME_BITS}-bit cap")));
        }
        if p < 7 || !is_safe_prime(p) {
            return Err(Error::invalid(format!("{p} is not a safe prime with odd q")));
        }
        Ok(SafePrime { p, q: (p - 1) / 2 })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// Order of the quadratic-residue subgroup.
    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn bit_len(&self) -> u32 {
        bit_length(self.p)
    }
}

impl fmt::Display for SafePrime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = 2*{} + 1", self.p, self.q)
    }
}

/// Samples a safe prime with exactly `bit_len` bits.
///
/// The candidate `q` is drawn from `[2^(b-2), 2^(b-1) - 1]`, which is exactly
/// the range for which `2q + 1` has `b` bits.
pub fn gen_safe_prime<R: Rng + ?Sized>(bit_len: u32, rng: &mut R) -> Result<SafePrime> {
    if !(3..=MAX_PRIME_BITS).contains(&bit_len) {
        return Err(Error::invalid(format!("safe prime bit length must lie in 3..={MAX_PRIME_BITS}, got {bit_len}")));
    }
    let lo = 1u64 << (bit_len - 2);
    let hi = (1u64 << (bit_len - 1)) - 1;
    for _ in 0..SAFE_PRIME_ATTEMPTS {
        let mut q = rng.random_range(lo..=hi) | 1;
        if q > hi {
            q -= 2;
        }
        if q < 3 || !is_prime(q) {
            continue;
        }
        let p = 2 * q + 1;
        if is_prime(p) {
            return SafePrime::new(p);
        }
    }
    Err(Error::Exhausted { bit_len, attempts: SAFE_PRIME_ATTEMPTS })
}

/// An element of `Z_q`, canonically in `0..q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub struct ZqElement {
    value: u64,
    modulus: u64,
}

impl ZqElement {
    pub fn new(value: u64, modulus: u64) -> Result<Self> {
        if modulus == 0 || value >= modulus {
            return Err(Error::invalid(format!("{value} is not a residue modulo {modulus}")));
        }
        Ok(ZqElement { value, modulus })
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn modulus(self) -> u64 {
        self.modulus
    }
}

impl fmt::Display for ZqElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// Euler's criterion: `c` is a residue iff `c^q ≡ 1 (mod p)`.
pub fn is_quadratic_residue(c: u64, sp: &SafePrime) -> Result<bool> {
    if c == 0 || c >= sp.p {
        return Err(Error::invalid(format!("{c} is not a unit modulo {}", sp.p)));
    }
    Ok(modpow(c, sp.q, sp.p) == 1)
}

/// Returns a generator of `QR_p`. Any residue other than 1 works because the
/// subgroup has prime order.
pub fn find_qr_generator<R: Rng + ?Sized>(sp: &SafePrime, rng: &mut R) -> u64 {
    loop {
        let h = rng.random_range(2..=sp.p - 2);
        let g = mul_mod(h, h, sp.p);
        if g != 1 {
            return g;
        }
    }
}

/// The folding map `QR_p -> Z_q`: `x` if `x <= q`, else `p - x`, with the raw
/// value `q` identified with `0`.
pub fn fp_fold(x: u64, sp: &SafePrime) -> Result<ZqElement> {
    if x == 0 || x >= sp.p || !is_quadratic_residue(x, sp)? {
        return Err(Error::NotQuadraticResidue { value: x, p: sp.p });
    }
    Ok(fold_unchecked(x, sp))
}

#[inline]
pub(crate) fn fold_unchecked(x: u64, sp: &SafePrime) -> ZqElement {
    let raw = if x <= sp.q { x } else { sp.p - x };
    ZqElement { value: raw % sp.q, modulus: sp.q }
}

/// Inverse of [`fp_fold`]: picks whichever of `raw` and `p - raw` is a residue.
pub fn fp_unfold(y: ZqElement, sp: &SafePrime) -> u64 {
    debug_assert_eq!(y.modulus, sp.q);
    let raw = if y.value == 0 { sp.q } else { y.value };
    if modpow(raw, sp.q, sp.p) == 1 {
        raw
    } else {
        sp.p - raw
    }
}

/// Precomputed baby steps for logarithms to one fixed base.
#[derive(Clone, Debug)]
pub struct BsgsTable {
    base: u64,
    sp: SafePrime,
    step: u64,
    giant: u64,
    baby: HashMap<u64, u64>,
}

impl BsgsTable {
    /// Builds the table for `base`, which must generate `QR_p`.
    pub fn new(base: u64, sp: &SafePrime) -> Result<Self> {
        if sp.q >= MAX_DLOG_ORDER {
            return Err(Error::Unsupported(format!("discrete logarithms need q < 2^40, got {}", sp.q)));
        }
        if base <= 1 || !is_quadratic_residue(base, sp)? {
            return Err(Error::invalid(format!("{base} does not generate QR_{}", sp.p)));
        }
        let step = (sp.q as f64).sqrt().ceil() as u64;
        let mut baby = HashMap::with_capacity(step as usize);
        let mut cur = 1u64;
        for j in 0..step {
            baby.entry(cur).or_insert(j);
            cur = mul_mod(cur, base, sp.p);
        }
        // base^(-step) = base^(q - step) since the order is q.
        let giant = modpow(base, (sp.q - step % sp.q) % sp.q, sp.p);
        Ok(BsgsTable { base, sp: *sp, step, giant, baby })
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    /// The unique `e` in `0..q` with `base^e ≡ target (mod p)`.
    pub fn log(&self, target: u64) -> Result<ZqElement> {
        let p = self.sp.p;
        let not_found = Error::NotInSubgroup { base: self.base, target, p };
        if target == 0 || target >= p {
            return Err(not_found);
        }
        let mut gamma = target;
        for i in 0..=self.step {
            if let Some(&j) = self.baby.get(&gamma) {
                let e = (i * self.step + j) % self.sp.q;
                return Ok(ZqElement { value: e, modulus: self.sp.q });
            }
            gamma = mul_mod(gamma, self.giant, p);
        }
        Err(not_found)
    }
}

/// Baby-step giant-step discrete logarithm of `y` to base `g` in `QR_p`.
pub fn discrete_log(g: u64, y: u64, sp: &SafePrime) -> Result<ZqElement> {
    BsgsTable::new(g, sp)?.log(y)
}
