//! Evaluator learners for the parameter-appended distribution: exact key
//! recovery with an emulated discrete-log oracle, and classical baselines.
//!
//! A draw from the target is a record `x‖F(k, x)‖(p, g, g^a)` with `x`
//! uniform. Evaluators built here score the `x‖y` part; record-level queries
//! additionally check the appended parameters.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, OnceLock};

use num_traits::Zero;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::distlearn::{
    pow2_inv, Evaluator, FunctionView, HistogramEvaluator, InducedSpec, InputDist, Rational, SupportTable,
    UniformEvaluator, MAX_DENSE_BITS,
};
use crate::error::{Error, Result};
use crate::numtheory::{fp_unfold, BsgsTable, SafePrime, ZqElement};
use crate::prf::{prf_eval, Instance, SecretInstance, SecretKey, StepTable, MAX_TABLE_ORDER};

/// The public parameters appended to every record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PublicParams {
    pub p: u64,
    pub g: u64,
    pub ga: u64,
}

impl PublicParams {
    pub fn of(instance: &Instance) -> Self {
        PublicParams { p: instance.p(), g: instance.g(), ga: instance.ga() }
    }

    /// Recomputes safe-primality and residuosity before trusting the values.
    pub fn verify(&self, n_in: u32) -> Result<Instance> {
        Instance::new(self.p, self.g, self.ga, n_in)
    }
}

/// One draw `x‖y‖(p, g, g^a)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SampleRecord {
    pub x: Bits,
    pub y: u64,
    pub p: u64,
    pub g: u64,
    pub ga: u64,
}

impl SampleRecord {
    pub fn params(&self) -> PublicParams {
        PublicParams { p: self.p, g: self.g, ga: self.ga }
    }

    /// The instance named by the record, with `y` checked against `q`.
    pub fn instance(&self) -> Result<Instance> {
        if self.x.is_empty() {
            return Err(Error::invalid("record has an empty input"));
        }
        let inst = self.params().verify(self.x.len())?;
        if self.y >= inst.q() {
            return Err(Error::invalid(format!("y = {} is not below q = {}", self.y, inst.q())));
        }
        Ok(inst)
    }

    /// `x‖y` with `y` written in the instance's output width.
    pub fn joint(&self, instance: &Instance) -> Result<Bits> {
        self.x.concat(Bits::new(self.y, instance.output_bits())?)
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }

    pub fn from_line(line: &str) -> Result<Self> {
        Ok(serde_json::from_str(line)?)
    }
}

/// A draw from the parameter-appended distribution.
pub fn sample_dtilde<R: Rng + ?Sized>(si: &SecretInstance, k: &SecretKey, rng: &mut R) -> SampleRecord {
    let inst = si.instance();
    let x = InputDist::uniform(inst.n_in()).sample(rng);
    sample_dtilde_at(si, k, x).expect("x has the instance length")
}

/// The record for a chosen `x`. Deterministic counterpart of [`sample_dtilde`].
pub fn sample_dtilde_at(si: &SecretInstance, k: &SecretKey, x: Bits) -> Result<SampleRecord> {
    let inst = si.instance();
    let y = prf_eval(inst, k, x)?;
    Ok(SampleRecord { x, y: y.value(), p: inst.p(), g: inst.g(), ga: inst.ga() })
}

/// `F(k, ·)` as a function into `output_bits()`-bit strings.
#[derive(Clone, Debug)]
pub struct PrfFunction {
    instance: Instance,
    key: SecretKey,
    table: Option<Arc<StepTable>>,
}

impl PrfFunction {
    /// Tabulates the branch maps when the group is small enough.
    pub fn new(instance: Instance, key: SecretKey) -> Result<Self> {
        let table = if instance.q() <= MAX_TABLE_ORDER { Some(Arc::new(StepTable::new(&instance)?)) } else { None };
        Self::check(&instance)?;
        Ok(PrfFunction { instance, key, table })
    }

    pub fn with_table(table: Arc<StepTable>, key: SecretKey) -> Result<Self> {
        let instance = *table.instance();
        Self::check(&instance)?;
        Ok(PrfFunction { instance, key, table: Some(table) })
    }

    fn check(instance: &Instance) -> Result<()> {
        if instance.n_in() + instance.output_bits() > 64 {
            return Err(Error::Unsupported("records longer than 64 bits".into()));
        }
        Ok(())
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn key(&self) -> SecretKey {
        self.key
    }

    pub fn eval(&self, x: Bits) -> u64 {
        match &self.table {
            Some(t) => t.eval(&self.key, x).expect("length checked by caller"),
            None => prf_eval(&self.instance, &self.key, x).expect("length checked by caller").value(),
        }
    }

    /// `F(k, x)` for every `x`, indexed by `x`.
    pub fn eval_all(&self) -> Result<Vec<u64>> {
        let n = self.instance.n_in();
        if n > MAX_DENSE_BITS {
            return Err(Error::Unsupported(format!("cannot enumerate 2^{n} inputs")));
        }
        match &self.table {
            Some(t) => Ok(t.eval_all(&self.key)?.into_iter().map(u64::from).collect()),
            None => Ok(Bits::all(n).map(|x| self.eval(x)).collect()),
        }
    }
}

impl FunctionView for PrfFunction {
    fn input_bits(&self) -> u32 {
        self.instance.n_in()
    }

    fn output_bits(&self) -> u32 {
        self.instance.output_bits()
    }

    fn apply(&self, x: Bits) -> Bits {
        Bits::truncated(self.eval(x), self.output_bits())
    }
}

/// The noiseless, uniform-input distribution over `x‖F(k, x)`.
pub fn target_spec(instance: &Instance, k: &SecretKey) -> Result<InducedSpec<PrfFunction>> {
    let f = PrfFunction::new(*instance, *k)?;
    InducedSpec::noiseless(f, InputDist::uniform(instance.n_in()))
}

/// Mass `2^-n` exactly on the graph of `F(k, ·)`.
#[derive(Debug)]
pub struct KeyEvaluator {
    instance: Instance,
    key: SecretKey,
    table: OnceLock<Option<Arc<StepTable>>>,
}

pub fn exact_evaluator_from_key(instance: &Instance, k: &SecretKey) -> Result<KeyEvaluator> {
    if k.element().modulus() != instance.q() {
        return Err(Error::invalid("key does not belong to this instance"));
    }
    PrfFunction::check(instance)?;
    Ok(KeyEvaluator { instance: *instance, key: *k, table: OnceLock::new() })
}

impl KeyEvaluator {
    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn key(&self) -> SecretKey {
        self.key
    }

    /// Mass of a full record: zero when the parameters name another instance.
    pub fn record_mass(&self, r: &SampleRecord) -> Result<Rational> {
        if r.x.len() != self.instance.n_in() {
            return Err(Error::LengthMismatch { expected: self.instance.n_in(), got: r.x.len() });
        }
        if r.params() != PublicParams::of(&self.instance) || r.y >= self.instance.q() {
            return Ok(Rational::zero());
        }
        self.mass(r.joint(&self.instance)?)
    }

    fn table(&self) -> Option<&Arc<StepTable>> {
        self.table
            .get_or_init(|| {
                (self.instance.q() <= MAX_TABLE_ORDER)
                    .then(|| StepTable::new(&self.instance).ok().map(Arc::new))
                    .flatten()
            })
            .as_ref()
    }
}

impl Evaluator for KeyEvaluator {
    fn input_bits(&self) -> u32 {
        self.instance.n_in()
    }

    fn output_bits(&self) -> u32 {
        self.instance.output_bits()
    }

    fn mass(&self, s: Bits) -> Result<Rational> {
        let n = self.input_bits();
        if s.len() != self.string_bits() {
            return Err(Error::LengthMismatch { expected: self.string_bits(), got: s.len() });
        }
        let (x, y) = s.split(n)?;
        if prf_eval(&self.instance, &self.key, x)?.value() == y.value() {
            Ok(pow2_inv(n))
        } else {
            Ok(Rational::zero())
        }
    }

    fn support(&self) -> Option<SupportTable> {
        let n = self.input_bits();
        if n > MAX_DENSE_BITS {
            return None;
        }
        let m = self.output_bits();
        let ys: Vec<u64> = match self.table() {
            Some(t) => t.eval_all(&self.key).ok()?.into_iter().map(u64::from).collect(),
            None => Bits::all(n)
                .map(|x| prf_eval(&self.instance, &self.key, x).map(|y| y.value()))
                .collect::<Result<_>>()
                .ok()?,
        };
        let points = ys.into_iter().enumerate().map(|(x, y)| Bits::truncated(((x as u64) << m) | y, n + m)).collect();
        SupportTable::shared(n, m, points, pow2_inv(n)).ok()
    }
}

/// Discrete logarithms in `QR_p`, the only non-classical step of key
/// recovery.
pub trait DlogOracle {
    /// The `e` in `Z_q` with `base^e ≡ target (mod p)`.
    fn dlog(&mut self, base: u64, target: u64, sp: &SafePrime) -> Result<ZqElement>;
    fn calls(&self) -> u64;
}

/// Classical baby-step giant-step stand-in for the quantum subroutine.
#[derive(Debug, Default)]
pub struct BsgsEmulation {
    tables: HashMap<(u64, u64), BsgsTable>,
    calls: u64,
}

impl BsgsEmulation {
    pub fn new() -> Self {
        Self::default()
    }
}

impl DlogOracle for BsgsEmulation {
    fn dlog(&mut self, base: u64, target: u64, sp: &SafePrime) -> Result<ZqElement> {
        self.calls += 1;
        let table = match self.tables.entry((sp.p(), base)) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => e.insert(BsgsTable::new(base, sp)?),
        };
        table.log(target)
    }

    fn calls(&self) -> u64 {
        self.calls
    }
}

/// Result of [`key_recovery_with`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyRecovery {
    pub model: LearnedModel,
    pub instance: Instance,
    pub key: SecretKey,
    pub samples_used: u64,
    pub dlog_calls: u64,
}

/// Recovers the key from one record and returns the exact-key model.
pub fn key_recovery_learner(sample: &SampleRecord) -> Result<LearnedModel> {
    Ok(key_recovery_with(sample, &mut BsgsEmulation::new())?.model)
}

/// Walks the chain `b_n = y`, `b_(j-1) = G^(x_j)^-1(b_j)` back to `b_0 = k`.
pub fn key_recovery_with(sample: &SampleRecord, oracle: &mut dyn DlogOracle) -> Result<KeyRecovery> {
    let instance = sample.instance()?;
    let sp = instance.safe_prime();
    let before = oracle.calls();
    let mut b = ZqElement::new(sample.y, instance.q())?;
    for j in (0..sample.x.len()).rev() {
        let base = if sample.x.bit(j) { instance.ga() } else { instance.g() };
        b = oracle.dlog(base, fp_unfold(b, sp), sp)?;
    }
    let key = SecretKey::new(b.value(), &instance)?;
    if prf_eval(&instance, &key, sample.x)?.value() != sample.y {
        return Err(Error::Precondition("recovered key does not reproduce the sample".into()));
    }
    let model = LearnedModel::ExactKey { instance: instance.into(), k: key.value() };
    Ok(KeyRecovery { model, instance, key, samples_used: 1, dlog_calls: oracle.calls() - before })
}

/// Raw empirical frequencies of the records' `x‖y` parts.
pub fn histogram_learner(samples: &[SampleRecord]) -> Result<LearnedModel> {
    let first = samples.first().ok_or_else(|| Error::invalid("histogram needs at least one sample"))?;
    let params = first.params();
    let instance = first.instance()?;
    let mut counts: BTreeMap<(Bits, u64), u64> = BTreeMap::new();
    for r in samples {
        if r.params() != params {
            return Err(Error::MixedParams);
        }
        if r.x.len() != instance.n_in() || r.y >= instance.q() {
            return Err(Error::invalid(format!("record {} does not fit the instance", r.to_line())));
        }
        *counts.entry((r.x, r.y)).or_insert(0) += 1;
    }
    let entries = counts.into_iter().map(|((x, y), count)| HistogramEntry { x, y, count }).collect();
    Ok(LearnedModel::Histogram { params, n: instance.n_in(), m: instance.output_bits(), entries })
}

/// Mass `2^-(n+m)` on every string.
pub fn uniform_baseline(n: u32, m: u32) -> Result<LearnedModel> {
    if n + m > 40 {
        return Err(Error::invalid(format!("uniform baseline needs n + m <= 40, got {}", n + m)));
    }
    Ok(LearnedModel::Uniform { n, m })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramEntry {
    pub x: Bits,
    pub y: u64,
    pub count: u64,
}

/// What a learner produced. Exact-key models carry the public instance and
/// the key, never `a`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LearnedModel {
    ExactKey { instance: crate::prf::InstanceRecord, k: u64 },
    Histogram { params: PublicParams, n: u32, m: u32, entries: Vec<HistogramEntry> },
    Uniform { n: u32, m: u32 },
}

impl LearnedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            LearnedModel::ExactKey { .. } => "exact-key",
            LearnedModel::Histogram { .. } => "histogram",
            LearnedModel::Uniform { .. } => "uniform",
        }
    }

    pub fn evaluator(&self) -> Result<Box<dyn Evaluator>> {
        Ok(match self {
            LearnedModel::ExactKey { instance, k } => {
                let inst = Instance::try_from(*instance)?;
                Box::new(exact_evaluator_from_key(&inst, &SecretKey::new(*k, &inst)?)?)
            }
            LearnedModel::Histogram { n, m, entries, .. } => {
                let mut counts = BTreeMap::new();
                for e in entries {
                    counts.insert(e.x.concat(Bits::new(e.y, *m)?)?, e.count);
                }
                Box::new(HistogramEvaluator::from_counts(*n, *m, counts)?)
            }
            LearnedModel::Uniform { n, m } => Box::new(UniformEvaluator::new(*n, *m)?),
        })
    }

    /// The parameters the model is tied to, if any.
    pub fn params(&self) -> Option<PublicParams> {
        match self {
            LearnedModel::ExactKey { instance, .. } => {
                Some(PublicParams { p: instance.p, g: instance.g, ga: instance.ga })
            }
            LearnedModel::Histogram { params, .. } => Some(*params),
            LearnedModel::Uniform { .. } => None,
        }
    }
}

/// A stream of records from one unknown member of the collection.
pub trait RecordSource {
    /// Input length and output width of the records.
    fn shape(&self) -> (u32, u32);
    fn next_record(&mut self) -> Result<SampleRecord>;
    fn used(&self) -> u64;
}

/// Draws records from `(si, k)` under an optional cap.
pub struct DtildeSource<'a, R> {
    si: &'a SecretInstance,
    key: SecretKey,
    rng: R,
    counter: crate::distlearn::QueryCounter,
}

impl<'a, R: Rng> DtildeSource<'a, R> {
    pub fn new(si: &'a SecretInstance, key: SecretKey, rng: R, cap: Option<u64>) -> Self {
        DtildeSource { si, key, rng, counter: crate::distlearn::QueryCounter::new(cap) }
    }
}

impl<R: Rng> RecordSource for DtildeSource<'_, R> {
    fn shape(&self) -> (u32, u32) {
        let inst = self.si.instance();
        (inst.n_in(), inst.output_bits())
    }

    fn next_record(&mut self) -> Result<SampleRecord> {
        self.counter.tick()?;
        Ok(sample_dtilde(self.si, &self.key, &mut self.rng))
    }

    fn used(&self) -> u64 {
        self.counter.count()
    }
}

/// Learns a model from records.
pub trait RecordLearner: Send {
    fn name(&self) -> &'static str;
    fn fit(&mut self, source: &mut dyn RecordSource) -> Result<LearnedModel>;
}

/// Key recovery from a single record.
#[derive(Debug, Default)]
pub struct KeyRecoveryLearner {
    pub dlog: BsgsEmulation,
}

impl RecordLearner for KeyRecoveryLearner {
    fn name(&self) -> &'static str {
        "key-recovery"
    }

    fn fit(&mut self, source: &mut dyn RecordSource) -> Result<LearnedModel> {
        let r = source.next_record()?;
        Ok(key_recovery_with(&r, &mut self.dlog)?.model)
    }
}

/// Histogram over a fixed number of records.
#[derive(Clone, Copy, Debug)]
pub struct HistogramLearner {
    pub samples: u64,
}

impl RecordLearner for HistogramLearner {
    fn name(&self) -> &'static str {
        "histogram"
    }

    fn fit(&mut self, source: &mut dyn RecordSource) -> Result<LearnedModel> {
        let records = (0..self.samples.max(1)).map(|_| source.next_record()).collect::<Result<Vec<_>>>()?;
        histogram_learner(&records)
    }
}

/// The uniform baseline; reads no records.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformLearner;

impl RecordLearner for UniformLearner {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn fit(&mut self, source: &mut dyn RecordSource) -> Result<LearnedModel> {
        let (n, m) = source.shape();
        uniform_baseline(n, m)
    }
}
