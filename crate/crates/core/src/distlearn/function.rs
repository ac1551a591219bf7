use rand::Rng;

use crate::bits::Bits;
use crate::error::{Error, Result};

use super::MAX_DENSE_BITS;

/// Read access to a function `{0,1}^n -> {0,1}^m`.
pub trait FunctionView {
    fn input_bits(&self) -> u32;
    fn output_bits(&self) -> u32;
    /// `x` must have length `input_bits()`.
    fn apply(&self, x: Bits) -> Bits;
}

impl<T: FunctionView + ?Sized> FunctionView for &T {
    fn input_bits(&self) -> u32 {
        (**self).input_bits()
    }
    fn output_bits(&self) -> u32 {
        (**self).output_bits()
    }
    fn apply(&self, x: Bits) -> Bits {
        (**self).apply(x)
    }
}

impl<T: FunctionView + ?Sized> FunctionView for std::sync::Arc<T> {
    fn input_bits(&self) -> u32 {
        (**self).input_bits()
    }
    fn output_bits(&self) -> u32 {
        (**self).output_bits()
    }
    fn apply(&self, x: Bits) -> Bits {
        (**self).apply(x)
    }
}

/// A function given by its full truth table, indexed by the integer value of
/// the input.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FiniteFunction {
    n: u32,
    m: u32,
    table: Vec<u64>,
}

impl FiniteFunction {
    pub fn new(n: u32, m: u32, table: Vec<u64>) -> Result<Self> {
        if n > MAX_DENSE_BITS || m == 0 || m > 32 {
            return Err(Error::invalid(format!("unsupported function shape {n} -> {m}")));
        }
        if table.len() != 1usize << n {
            return Err(Error::invalid(format!("table has {} rows, expected 2^{n}", table.len())));
        }
        if let Some(bad) = table.iter().find(|&&v| v >> m != 0) {
            return Err(Error::invalid(format!("output {bad} does not fit in {m} bits")));
        }
        Ok(FiniteFunction { n, m, table })
    }

    pub fn from_fn(n: u32, m: u32, mut f: impl FnMut(Bits) -> u64) -> Result<Self> {
        if n > MAX_DENSE_BITS {
            return Err(Error::invalid(format!("cannot tabulate 2^{n} inputs")));
        }
        Self::new(n, m, Bits::all(n).map(&mut f).collect())
    }

    /// Tabulates any view. Only feasible for small `n`.
    pub fn tabulate<F: FunctionView + ?Sized>(f: &F) -> Result<Self> {
        Self::from_fn(f.input_bits(), f.output_bits(), |x| f.apply(x).value())
    }

    pub fn random<R: Rng + ?Sized>(n: u32, m: u32, rng: &mut R) -> Result<Self> {
        Self::from_fn(n, m, |_| rng.random_range(0..1u64 << m))
    }

    pub fn value(&self, x: u64) -> u64 {
        self.table[x as usize]
    }

    pub fn table(&self) -> &[u64] {
        &self.table
    }

    /// Every function of the given shape, in mixed-radix counting order.
    pub fn enumerate_all(n: u32, m: u32) -> impl Iterator<Item = FiniteFunction> {
        let rows = 1usize << n;
        let radix = 1u64 << m;
        let total = (radix as u128).pow(rows as u32);
        assert!(total <= 1 << 24, "refusing to enumerate {total} functions");
        (0..total as u64).map(move |mut code| {
            let mut table = vec![0u64; rows];
            for slot in table.iter_mut() {
                *slot = code % radix;
                code /= radix;
            }
            FiniteFunction { n, m, table }
        })
    }
}

impl FunctionView for FiniteFunction {
    fn input_bits(&self) -> u32 {
        self.n
    }

    fn output_bits(&self) -> u32 {
        self.m
    }

    fn apply(&self, x: Bits) -> Bits {
        debug_assert_eq!(x.len(), self.n);
        Bits::truncated(self.table[x.value() as usize], self.m)
    }
}
