use std::collections::HashMap;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::distlearn::{InputDist, QueryCounter};
use crate::error::{Error, Result};
use crate::learners::{key_recovery_with, BsgsEmulation, SampleRecord};
use crate::numtheory::{fp_unfold, BsgsTable, ZqElement};
use crate::prf::{instance_gen, prf_eval, sample_key, Instance, SecretKey};
use crate::seed;
use crate::stats::{newcombe_difference, Z_99};

use super::MIN_TRIALS;

/// Chosen-input queries (the classic game) or random examples only (the
/// weak game).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccessMode {
    Mq,
    Rex,
}

/// Which function sits behind the oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum World {
    Prf,
    Random,
}

/// Access to the hidden `Z_q`-valued function.
pub trait FunctionOracle {
    fn mode(&self) -> AccessMode;
    fn n_in(&self) -> u32;
    /// A chosen input. Fails in random-example mode.
    fn query(&mut self, x: Bits) -> Result<u64>;
    /// A uniform input with its value.
    fn example(&mut self) -> Result<(Bits, u64)>;
    fn calls(&self) -> u64;
}

enum Hidden {
    Prf(SecretKey),
    /// Values of a uniformly random function, sampled on first use.
    Random(HashMap<Bits, u64>),
}

struct WorldOracle<R> {
    mode: AccessMode,
    instance: Instance,
    hidden: Hidden,
    rng: R,
    counter: QueryCounter,
}

impl<R: Rng> WorldOracle<R> {
    fn value(&mut self, x: Bits) -> Result<u64> {
        if x.len() != self.instance.n_in() {
            return Err(Error::LengthMismatch { expected: self.instance.n_in(), got: x.len() });
        }
        let q = self.instance.q();
        Ok(match &mut self.hidden {
            Hidden::Prf(k) => prf_eval(&self.instance, k, x)?.value(),
            Hidden::Random(memo) => *memo.entry(x).or_insert_with(|| self.rng.random_range(0..q)),
        })
    }
}

impl<R: Rng> FunctionOracle for WorldOracle<R> {
    fn mode(&self) -> AccessMode {
        self.mode
    }

    fn n_in(&self) -> u32 {
        self.instance.n_in()
    }

    fn query(&mut self, x: Bits) -> Result<u64> {
        if self.mode == AccessMode::Rex {
            return Err(Error::Unsupported("chosen inputs are not available in the random-example game".into()));
        }
        self.counter.tick()?;
        self.value(x)
    }

    fn example(&mut self) -> Result<(Bits, u64)> {
        self.counter.tick()?;
        let x = InputDist::uniform(self.instance.n_in()).sample(&mut self.rng);
        Ok((x, self.value(x)?))
    }

    fn calls(&self) -> u64 {
        self.counter.count()
    }
}

/// Outputs one bit after interacting with the oracle.
pub trait Distinguisher: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, oracle: &mut dyn FunctionOracle, public: &Instance, rng: &mut dyn RngCore) -> Result<bool>;
}

/// Advantage estimate `|Pr[1 | PRF] - Pr[1 | random]|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvantageReport {
    pub distinguisher: String,
    pub mode: AccessMode,
    pub trials: u64,
    pub prf_trials: u64,
    pub prf_ones: u64,
    pub random_trials: u64,
    pub random_ones: u64,
    pub advantage: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// The interval excludes zero.
    pub significant: bool,
}

/// Each trial draws an instance, then a fair coin picks the keyed function
/// or a lazily sampled random function into `Z_q`. Distinguisher errors
/// count as output 0.
pub fn estimate_distinguishing_advantage(
    d: &dyn Distinguisher,
    mode: AccessMode,
    bit_len: u32,
    n_in: u32,
    trials: u64,
    master: u64,
) -> Result<AdvantageReport> {
    if trials < MIN_TRIALS {
        return Err(Error::invalid(format!("need at least {MIN_TRIALS} trials")));
    }
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::stream(master, "distinguish", i);
            let si = instance_gen(bit_len, n_in, &mut rng)?;
            let instance = *si.instance();
            let world = if rng.random::<bool>() { World::Prf } else { World::Random };
            let hidden = match world {
                World::Prf => Hidden::Prf(sample_key(&instance, &mut rng)),
                World::Random => Hidden::Random(HashMap::new()),
            };
            let mut oracle = WorldOracle { mode, instance, hidden, rng, counter: QueryCounter::new(None) };
            let mut own = seed::stream(master, "distinguisher", i);
            let out = d.run(&mut oracle, &instance, &mut own).unwrap_or(false);
            Ok((world, out))
        })
        .collect::<Result<Vec<_>>>()?;
    let tally = |w: World| {
        let runs: Vec<bool> = outcomes.iter().filter(|(x, _)| *x == w).map(|&(_, o)| o).collect();
        (runs.len() as u64, runs.iter().filter(|&&o| o).count() as u64)
    };
    let (n1, s1) = tally(World::Prf);
    let (n0, s0) = tally(World::Random);
    if n1 == 0 || n0 == 0 {
        return Err(Error::Precondition("one of the two worlds was never drawn".into()));
    }
    let diff = s1 as f64 / n1 as f64 - s0 as f64 / n0 as f64;
    let ci = newcombe_difference(s1, n1, s0, n0, Z_99);
    let (low, high) = if diff < 0.0 { (-ci.high, -ci.low) } else { (ci.low, ci.high) };
    Ok(AdvantageReport {
        distinguisher: d.name().into(),
        mode,
        trials,
        prf_trials: n1,
        prf_ones: s1,
        random_trials: n0,
        random_ones: s0,
        advantage: diff.abs(),
        ci_low: low,
        ci_high: high,
        significant: low > 0.0,
    })
}

/// Ignores the oracle.
#[derive(Clone, Copy, Debug)]
pub struct ConstantDistinguisher(pub bool);

impl Distinguisher for ConstantDistinguisher {
    fn name(&self) -> &'static str {
        "constant"
    }

    fn run(&self, _: &mut dyn FunctionOracle, _: &Instance, _: &mut dyn RngCore) -> Result<bool> {
        Ok(self.0)
    }
}

/// Counts sibling collisions. For inputs `u‖0` and `u‖1` the keyed function
/// shares the chain value `b_u`, so `G⁰⁻¹(F(u‖0)) = G¹⁻¹(F(u‖1))` always,
/// while a random function collides with probability `1/q`. Works from
/// random examples alone; outputs 1 when at least half of the observed
/// sibling pairs collide.
#[derive(Clone, Copy, Debug)]
pub struct SiblingCollisionDistinguisher {
    pub examples: u64,
}

impl Distinguisher for SiblingCollisionDistinguisher {
    fn name(&self) -> &'static str {
        "sibling-collision"
    }

    fn run(&self, oracle: &mut dyn FunctionOracle, public: &Instance, _: &mut dyn RngCore) -> Result<bool> {
        let mut seen: HashMap<Bits, u64> = HashMap::new();
        for _ in 0..self.examples {
            let (x, y) = oracle.example()?;
            seen.insert(x, y);
        }
        let sp = public.safe_prime();
        let zero = BsgsTable::new(public.g(), sp)?;
        let one = BsgsTable::new(public.ga(), sp)?;
        let preimage = |table: &BsgsTable, y: u64| -> Result<ZqElement> {
            table.log(fp_unfold(ZqElement::new(y, public.q())?, sp))
        };
        let (mut pairs, mut collisions) = (0u64, 0u64);
        for (&x, &y0) in &seen {
            if x.value() & 1 == 1 {
                continue;
            }
            if let Some(&y1) = seen.get(&Bits::truncated(x.value() | 1, x.len())) {
                pairs += 1;
                collisions += u64::from(preimage(&zero, y0)? == preimage(&one, y1)?);
            }
        }
        Ok(pairs > 0 && 2 * collisions >= pairs)
    }
}

/// Recovers a key from one input-output pair with the emulated discrete-log
/// oracle, then checks it on further inputs. Uses chosen inputs when
/// available and random examples otherwise.
#[derive(Clone, Copy, Debug)]
pub struct KeyRecoveryDistinguisher {
    pub checks: u32,
}

impl Distinguisher for KeyRecoveryDistinguisher {
    fn name(&self) -> &'static str {
        "key-recovery"
    }

    fn run(&self, oracle: &mut dyn FunctionOracle, public: &Instance, rng: &mut dyn RngCore) -> Result<bool> {
        let n = public.n_in();
        let mut draw = |oracle: &mut dyn FunctionOracle| -> Result<(Bits, u64)> {
            match oracle.mode() {
                AccessMode::Mq => {
                    let x = Bits::truncated(rng.random::<u64>(), n);
                    Ok((x, oracle.query(x)?))
                }
                AccessMode::Rex => oracle.example(),
            }
        };
        let (x, y) = draw(oracle)?;
        let record = SampleRecord { x, y, p: public.p(), g: public.g(), ga: public.ga() };
        let key = key_recovery_with(&record, &mut BsgsEmulation::new())?.key;
        for _ in 0..self.checks {
            let (x, y) = draw(oracle)?;
            if prf_eval(public, &key, x)?.value() != y {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
