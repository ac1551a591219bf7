use std::collections::BTreeMap;

use densep_core::distlearn::{tv_against_induced, Evaluator};
use densep_core::learners::{histogram_learner, sample_dtilde, target_spec, uniform_baseline};
use densep_core::prf::{instance_gen, prf_eval, sample_key};
use densep_core::{Rational, SampleRecord};
use num_bigint::BigInt;
use num_traits::{One, Signed};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn r(num: u64, den: u64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

#[test]
fn histogram_distance_matches_a_direct_count() {
    let mut rng = ChaCha20Rng::seed_from_u64(20);
    let si = instance_gen(16, 12, &mut rng).unwrap();
    let k = sample_key(si.instance(), &mut rng);
    let n_samples = 3000u64;
    let records: Vec<SampleRecord> = (0..n_samples).map(|_| sample_dtilde(&si, &k, &mut rng)).collect();
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for rec in &records {
        assert_eq!(prf_eval(si.instance(), &k, rec.x).unwrap().value(), rec.y);
        *counts.entry(rec.x.value()).or_insert(0) += 1;
    }
    let cell = r(1, 1 << 12);
    let seen: Rational = counts.values().map(|&c| (r(c, n_samples) - &cell).abs()).sum();
    let unseen = Rational::from_integer(BigInt::from((1u64 << 12) - counts.len() as u64)) * &cell;
    let expected = (seen + unseen) / Rational::from_integer(BigInt::from(2));

    let model = histogram_learner(&records).unwrap();
    let spec = target_spec(si.instance(), &k).unwrap();
    assert_eq!(tv_against_induced(&model.evaluator().unwrap(), &spec).unwrap(), expected);
}

#[test]
fn uniform_baseline_distance_is_one_minus_the_graph_share() {
    let mut rng = ChaCha20Rng::seed_from_u64(21);
    let si = instance_gen(20, 20, &mut rng).unwrap();
    let k = sample_key(si.instance(), &mut rng);
    let m = si.instance().output_bits();
    assert_eq!(m, 20);
    let e = uniform_baseline(20, m).unwrap().evaluator().unwrap();
    assert_eq!(e.output_bits(), 20);
    let spec = target_spec(si.instance(), &k).unwrap();
    assert_eq!(tv_against_induced(&e, &spec).unwrap(), Rational::one() - r(1, 1 << 20));
}

#[test]
fn models_never_carry_the_secret_exponent() {
    let mut rng = ChaCha20Rng::seed_from_u64(22);
    let si = instance_gen(14, 8, &mut rng).unwrap();
    let k = sample_key(si.instance(), &mut rng);
    let records: Vec<SampleRecord> = (0..50).map(|_| sample_dtilde(&si, &k, &mut rng)).collect();
    let model = histogram_learner(&records).unwrap();
    let json = serde_json::to_value(&model).unwrap();
    assert_eq!(json["kind"], "histogram");
    assert!(json.get("a").is_none() && json["params"].get("a").is_none());
    let back: densep_core::LearnedModel = serde_json::from_value(json).unwrap();
    assert_eq!(back, model);
}
