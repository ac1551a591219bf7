use std::collections::BTreeMap;

use num_traits::{One, Zero};
use rand::Rng;

use crate::bits::Bits;
use crate::error::{Error, Result};

use super::{
    induced_generator, rex_oracle, Budgeted, Evaluator, ExampleSource, FiniteFunction, FunctionView, GraphEvaluator,
    HistogramEvaluator, InducedSpec, Rational, SampleSource,
};

/// Largest label width the argmax scan will enumerate.
pub const MAX_ARGMAX_LABEL_BITS: u32 = 20;

/// Accuracy, confidence and query budget handed to a learner.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LearnerConfig {
    pub epsilon: Rational,
    pub delta: Rational,
    pub sample_budget: u64,
}

impl LearnerConfig {
    pub fn new(epsilon: Rational, delta: Rational, sample_budget: u64) -> Result<Self> {
        let open_unit = |r: &Rational| r > &Rational::zero() && r < &Rational::one();
        if !open_unit(&epsilon) || !open_unit(&delta) {
            return Err(Error::invalid("epsilon and delta must lie in (0, 1)"));
        }
        if sample_budget == 0 {
            return Err(Error::invalid("sample budget must be at least 1"));
        }
        Ok(LearnerConfig { epsilon, delta, sample_budget })
    }
}

/// Learns an evaluator from joint samples.
pub trait EvaluatorLearner {
    type Model: Evaluator;
    fn learn(&mut self, source: &mut dyn SampleSource, cfg: &LearnerConfig) -> Result<Self::Model>;
}

/// Learns a hypothesis function from labelled examples.
pub trait FunctionLearner {
    fn learn(&mut self, source: &mut dyn ExampleSource, cfg: &LearnerConfig) -> Result<FiniteFunction>;
}

/// `h(x) = argmax_y E(x‖y)`, ties going to the smallest `y`.
pub fn argmax_hypothesis<E: Evaluator + ?Sized>(e: &E, n: u32, m: u32) -> Result<FiniteFunction> {
    if e.input_bits() != n || e.output_bits() != m {
        return Err(Error::invalid("evaluator shape disagrees with the requested hypothesis"));
    }
    if m > MAX_ARGMAX_LABEL_BITS || m == 0 {
        return Err(Error::Unsupported(format!("argmax over 2^{m} labels")));
    }
    if let Some(table) = e.support() {
        return argmax_from_support(&table, n, m);
    }
    FiniteFunction::from_fn(n, m, |x| {
        let mut best = (0u64, Rational::zero());
        for y in 0..1u64 << m {
            let p = e.mass(x.concat(Bits::truncated(y, m)).expect("fits")).expect("valid length");
            if y == 0 || p > best.1 {
                best = (y, p);
            }
        }
        best.0
    })
}

fn argmax_from_support(table: &super::SupportTable, n: u32, m: u32) -> Result<FiniteFunction> {
    let mut listed: BTreeMap<u64, Vec<(u64, &Rational)>> = BTreeMap::new();
    for (s, p) in table.iter() {
        let (x, y) = s.split(n)?;
        listed.entry(x.value()).or_default().push((y.value(), p));
    }
    let default = table.default_mass();
    let labels = 1u64 << m;
    FiniteFunction::from_fn(n, m, |x| {
        let Some(row) = listed.get(&x.value()) else {
            return 0;
        };
        let mut best: Option<(u64, &Rational)> = None;
        for &(y, p) in row {
            if best.is_none_or(|(_, b)| p > b) {
                best = Some((y, p));
            }
        }
        let (best_y, best_p) = best.expect("rows are nonempty");
        if row.len() as u64 == labels {
            return best_y;
        }
        let free = (0..).zip(row.iter()).find(|&(i, &(y, _))| i != y).map_or(row.len() as u64, |(i, _)| i);
        match default.cmp(best_p) {
            std::cmp::Ordering::Greater => free,
            std::cmp::Ordering::Equal => free.min(best_y),
            std::cmp::Ordering::Less => best_y,
        }
    })
}

/// Output of [`eval_to_function_learner`].
#[derive(Clone, Debug)]
pub struct EvalToFunction<M> {
    pub hypothesis: FiniteFunction,
    pub model: M,
    pub samples_used: u64,
}

/// Runs an evaluator learner on generated samples and rounds its output to
/// the argmax hypothesis.
pub fn eval_to_function_learner<A, F, R>(
    learner: &mut A,
    spec: &InducedSpec<F>,
    cfg: &LearnerConfig,
    rng: R,
) -> Result<EvalToFunction<A::Model>>
where
    A: EvaluatorLearner + ?Sized,
    F: FunctionView + Clone,
    R: Rng,
{
    let mut source = Budgeted::new(induced_generator(spec.clone(), rng), cfg.sample_budget);
    let model = learner.learn(&mut source, cfg)?;
    let hypothesis = argmax_hypothesis(&model, spec.n(), spec.m())?;
    Ok(EvalToFunction { hypothesis, model, samples_used: source.used() })
}

/// Output of [`function_to_eval_learner`].
#[derive(Clone, Debug)]
pub struct FunctionToEval {
    pub evaluator: GraphEvaluator,
    pub examples_used: u64,
}

/// Runs a function learner on noisy examples and wraps its hypothesis `h`
/// as the evaluator `P(x)·[h(x) = y]`.
pub fn function_to_eval_learner<A, F, R>(
    learner: &mut A,
    spec: &InducedSpec<F>,
    cfg: &LearnerConfig,
    rng: R,
) -> Result<FunctionToEval>
where
    A: FunctionLearner + ?Sized,
    F: FunctionView + Clone,
    R: Rng,
{
    let mut source = Budgeted::new(rex_oracle(spec.clone(), rng, None), cfg.sample_budget);
    let h = learner.learn(&mut source, cfg)?;
    if h.input_bits() != spec.n() || h.output_bits() != spec.m() {
        return Err(Error::invalid("learner returned a hypothesis of the wrong shape"));
    }
    let evaluator = GraphEvaluator::new(h, spec.input_dist().clone())?;
    Ok(FunctionToEval { evaluator, examples_used: source.used() })
}

/// Empirical frequencies over a fixed number of draws.
#[derive(Clone, Copy, Debug, Default)]
pub struct EmpiricalEvaluatorLearner {
    /// Draws to take; the whole budget when unset.
    pub samples: Option<u64>,
}

impl EvaluatorLearner for EmpiricalEvaluatorLearner {
    type Model = HistogramEvaluator;

    fn learn(&mut self, source: &mut dyn SampleSource, cfg: &LearnerConfig) -> Result<HistogramEvaluator> {
        let draws = self.samples.unwrap_or(cfg.sample_budget).min(cfg.sample_budget);
        let samples = (0..draws).map(|_| source.next_sample()).collect::<Result<Vec<_>>>()?;
        HistogramEvaluator::from_samples(source.input_bits(), source.output_bits(), samples)
    }
}

/// Majority label per observed input; ties go to the smallest label and
/// unseen inputs map to zero.
#[derive(Clone, Copy, Debug, Default)]
pub struct MajorityVoteLearner {
    pub examples: Option<u64>,
}

impl FunctionLearner for MajorityVoteLearner {
    fn learn(&mut self, source: &mut dyn ExampleSource, cfg: &LearnerConfig) -> Result<FiniteFunction> {
        let (n, m) = (source.input_bits(), source.output_bits());
        let draws = self.examples.unwrap_or(cfg.sample_budget).min(cfg.sample_budget);
        let mut votes: BTreeMap<(u64, u64), u64> = BTreeMap::new();
        for _ in 0..draws {
            let (x, y) = source.next_example()?;
            *votes.entry((x.value(), y.value())).or_insert(0) += 1;
        }
        let mut best: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
        for (&(x, y), &c) in &votes {
            let slot = best.entry(x).or_insert((y, c));
            if c > slot.1 {
                *slot = (y, c);
            }
        }
        FiniteFunction::from_fn(n, m, |x| best.get(&x.value()).map_or(0, |&(y, _)| y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distlearn::{
        dense_masses, function_loss, induced_eval, ratio, tv_distance, DenseEvaluator, InputDist, UniformEvaluator,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn cfg(budget: u64) -> LearnerConfig {
        LearnerConfig::new(ratio(1, 10), ratio(1, 10), budget).unwrap()
    }

    #[test]
    fn config_is_validated() {
        assert!(LearnerConfig::new(ratio(0, 1), ratio(1, 2), 1).is_err());
        assert!(LearnerConfig::new(ratio(1, 2), ratio(1, 1), 1).is_err());
        assert!(LearnerConfig::new(ratio(1, 2), ratio(1, 2), 0).is_err());
    }

    #[test]
    fn argmax_recovers_the_function() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let f = FiniteFunction::random(4, 3, &mut rng).unwrap();
        let e = induced_eval(InducedSpec::noiseless(f.clone(), InputDist::uniform(4)).unwrap()).unwrap();
        assert_eq!(argmax_hypothesis(&e, 4, 3).unwrap(), f);
        let dense = DenseEvaluator::from_evaluator(&e).unwrap();
        assert_eq!(argmax_hypothesis(&dense, 4, 3).unwrap(), f);
    }

    #[test]
    fn argmax_ties_go_to_zero() {
        let u = UniformEvaluator::new(3, 2).unwrap();
        assert!(argmax_hypothesis(&u, 3, 2).unwrap().table().iter().all(|&y| y == 0));
    }

    struct NoSupport(DenseEvaluator);

    impl Evaluator for NoSupport {
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
    fn support_and_scan_paths_agree() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for _ in 0..200 {
            let masses: Vec<Rational> = (0..32).map(|_| ratio(rng.random_range(0..3), 96)).collect();
            let dense = DenseEvaluator::new(3, 2, masses).unwrap();
            let a = argmax_hypothesis(&dense, 3, 2).unwrap();
            let b = argmax_hypothesis(&NoSupport(dense), 3, 2).unwrap();
            assert_eq!(a, b);
        }
    }

    struct Fixed(DenseEvaluator);

    impl EvaluatorLearner for Fixed {
        type Model = DenseEvaluator;
        fn learn(&mut self, source: &mut dyn SampleSource, _: &LearnerConfig) -> Result<DenseEvaluator> {
            source.next_sample()?;
            Ok(self.0.clone())
        }
    }

    #[test]
    fn exact_learner_yields_the_target() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let f = FiniteFunction::random(4, 2, &mut rng).unwrap();
        let spec = InducedSpec::noiseless(f.clone(), InputDist::uniform(4)).unwrap();
        let exact = DenseEvaluator::from_evaluator(&induced_eval(spec.clone()).unwrap()).unwrap();
        let out = eval_to_function_learner(&mut Fixed(exact), &spec, &cfg(10), rng).unwrap();
        assert_eq!(out.hypothesis, f);
        assert_eq!(out.samples_used, 1);
    }

    #[test]
    fn noisy_exact_learner_stays_within_twice_eta() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let f = FiniteFunction::random(4, 2, &mut rng).unwrap();
        let spec = InducedSpec::new(f.clone(), InputDist::uniform(4), ratio(1, 10)).unwrap();
        let exact = DenseEvaluator::from_evaluator(&induced_eval(spec.clone()).unwrap()).unwrap();
        let out = eval_to_function_learner(&mut Fixed(exact), &spec, &cfg(10), rng).unwrap();
        assert!(function_loss(&f, &out.hypothesis, &InputDist::uniform(4)).unwrap() <= ratio(2, 10));
    }

    struct Constant(FiniteFunction);

    impl FunctionLearner for Constant {
        fn learn(&mut self, _: &mut dyn ExampleSource, _: &LearnerConfig) -> Result<FiniteFunction> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn function_to_eval_examples() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let f = FiniteFunction::random(3, 2, &mut rng).unwrap();
        let p = InputDist::uniform(3);
        let spec = InducedSpec::noiseless(f.clone(), p.clone()).unwrap();
        let target = dense_masses(&induced_eval(spec.clone()).unwrap()).unwrap();

        let out = function_to_eval_learner(&mut Constant(f.clone()), &spec, &cfg(5), &mut rng).unwrap();
        assert_eq!(tv_distance(&dense_masses(&out.evaluator).unwrap(), &target).unwrap(), Rational::zero());

        let mut table = f.table().to_vec();
        table[3] ^= 1;
        let h = FiniteFunction::new(3, 2, table).unwrap();
        let out = function_to_eval_learner(&mut Constant(h), &spec, &cfg(5), &mut rng).unwrap();
        assert_eq!(tv_distance(&dense_masses(&out.evaluator).unwrap(), &target).unwrap(), ratio(1, 8));

        let noisy = InducedSpec::new(f.clone(), p, ratio(1, 10)).unwrap();
        let noisy_target = dense_masses(&induced_eval(noisy.clone()).unwrap()).unwrap();
        let out = function_to_eval_learner(&mut Constant(f), &noisy, &cfg(5), &mut rng).unwrap();
        let tv = tv_distance(&dense_masses(&out.evaluator).unwrap(), &noisy_target).unwrap();
        assert_eq!(tv, ratio(1, 10));
    }

    #[test]
    fn majority_vote_learns_noisy_labels() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let f = FiniteFunction::random(3, 2, &mut rng).unwrap();
        let spec = InducedSpec::new(f.clone(), InputDist::uniform(3), ratio(1, 10)).unwrap();
        let out = function_to_eval_learner(&mut MajorityVoteLearner::default(), &spec, &cfg(2000), rng).unwrap();
        assert_eq!(out.evaluator.hypothesis(), &f);
        assert_eq!(out.examples_used, 2000);
    }

    #[test]
    fn empirical_learner_respects_budget() {
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let f = FiniteFunction::random(2, 2, &mut rng).unwrap();
        let spec = InducedSpec::noiseless(f.clone(), InputDist::uniform(2)).unwrap();
        let mut learner = EmpiricalEvaluatorLearner { samples: Some(500) };
        let out = eval_to_function_learner(&mut learner, &spec, &cfg(100), rng).unwrap();
        assert_eq!(out.samples_used, 100);
        assert_eq!(out.model.total(), 100);
    }
}
