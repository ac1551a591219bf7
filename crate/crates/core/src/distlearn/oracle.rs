use rand::Rng;

use crate::bits::Bits;
use crate::error::{Error, Result};

use super::{FunctionView, InducedGenerator, InducedSpec};

/// Call counter with an optional cap.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueryCounter {
    count: u64,
    cap: Option<u64>,
}

impl QueryCounter {
    pub fn new(cap: Option<u64>) -> Self {
        QueryCounter { count: 0, cap }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn cap(&self) -> Option<u64> {
        self.cap
    }

    /// Records one call, failing once the cap would be passed.
    pub fn tick(&mut self) -> Result<()> {
        if let Some(cap) = self.cap {
            if self.count >= cap {
                return Err(Error::BudgetExceeded { cap });
            }
        }
        self.count += 1;
        Ok(())
    }
}

/// A stream of joint samples `x‖y`.
pub trait SampleSource {
    fn input_bits(&self) -> u32;
    fn output_bits(&self) -> u32;
    fn next_sample(&mut self) -> Result<Bits>;
}

/// A stream of labelled examples `(x, y)`.
pub trait ExampleSource {
    fn input_bits(&self) -> u32;
    fn output_bits(&self) -> u32;
    fn next_example(&mut self) -> Result<(Bits, Bits)>;
}

/// Membership queries `x ↦ (x, f(x))`.
#[derive(Clone, Debug)]
pub struct MqOracle<F> {
    f: F,
    counter: QueryCounter,
}

pub fn mq_oracle<F: FunctionView>(f: F, cap: Option<u64>) -> MqOracle<F> {
    MqOracle { f, counter: QueryCounter::new(cap) }
}

impl<F: FunctionView> MqOracle<F> {
    pub fn query(&mut self, x: Bits) -> Result<(Bits, Bits)> {
        let n = self.f.input_bits();
        if x.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: x.len() });
        }
        self.counter.tick()?;
        Ok((x, self.f.apply(x)))
    }

    pub fn calls(&self) -> u64 {
        self.counter.count()
    }

    pub fn function(&self) -> &F {
        &self.f
    }
}

/// Noisy random examples drawn from an induced distribution.
#[derive(Clone, Debug)]
pub struct RexOracle<F, R> {
    spec: InducedSpec<F>,
    rng: R,
    counter: QueryCounter,
}

pub fn rex_oracle<F: FunctionView, R: Rng>(spec: InducedSpec<F>, rng: R, cap: Option<u64>) -> RexOracle<F, R> {
    RexOracle { spec, rng, counter: QueryCounter::new(cap) }
}

impl<F: FunctionView, R: Rng> RexOracle<F, R> {
    pub fn query(&mut self) -> Result<(Bits, Bits)> {
        self.counter.tick()?;
        let x = self.spec.input_dist().sample(&mut self.rng);
        let y = self.spec.label(x, &mut self.rng);
        Ok((x, y))
    }

    pub fn calls(&self) -> u64 {
        self.counter.count()
    }

    pub fn spec(&self) -> &InducedSpec<F> {
        &self.spec
    }
}

impl<F: FunctionView, R: Rng> ExampleSource for RexOracle<F, R> {
    fn input_bits(&self) -> u32 {
        self.spec.n()
    }
    fn output_bits(&self) -> u32 {
        self.spec.m()
    }
    fn next_example(&mut self) -> Result<(Bits, Bits)> {
        self.query()
    }
}

impl<F: FunctionView, R: Rng> SampleSource for RexOracle<F, R> {
    fn input_bits(&self) -> u32 {
        self.spec.n()
    }
    fn output_bits(&self) -> u32 {
        self.spec.m()
    }
    fn next_sample(&mut self) -> Result<Bits> {
        let (x, y) = self.query()?;
        x.concat(y)
    }
}

impl<F: FunctionView, R: Rng> SampleSource for InducedGenerator<F, R> {
    fn input_bits(&self) -> u32 {
        self.spec().n()
    }
    fn output_bits(&self) -> u32 {
        self.spec().m()
    }
    fn next_sample(&mut self) -> Result<Bits> {
        Ok(super::Generator::draw(self))
    }
}

/// Caps the number of draws taken from an inner source.
#[derive(Clone, Debug)]
pub struct Budgeted<S> {
    inner: S,
    counter: QueryCounter,
}

impl<S> Budgeted<S> {
    pub fn new(inner: S, cap: u64) -> Self {
        Budgeted { inner, counter: QueryCounter::new(Some(cap)) }
    }

    pub fn used(&self) -> u64 {
        self.counter.count()
    }

    pub fn into_inner(self) -> S {
        self.inner
    }
}

impl<S: SampleSource> SampleSource for Budgeted<S> {
    fn input_bits(&self) -> u32 {
        self.inner.input_bits()
    }
    fn output_bits(&self) -> u32 {
        self.inner.output_bits()
    }
    fn next_sample(&mut self) -> Result<Bits> {
        self.counter.tick()?;
        self.inner.next_sample()
    }
}

impl<S: ExampleSource> ExampleSource for Budgeted<S> {
    fn input_bits(&self) -> u32 {
        self.inner.input_bits()
    }
    fn output_bits(&self) -> u32 {
        self.inner.output_bits()
    }
    fn next_example(&mut self) -> Result<(Bits, Bits)> {
        self.counter.tick()?;
        self.inner.next_example()
    }
}
