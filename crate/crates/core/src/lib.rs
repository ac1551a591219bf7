//! Desk-scale density modelling separation toolkit.
//!
//! The crate builds the DDH-style pseudo-random function collection over
//! quadratic residues of safe primes, the distributions it induces, and the
//! learners and exams used to compare an emulated quantum key-recovery
//! learner with classical baselines. Every probability is exact: masses are
//! rationals, and total variation distances are computed in closed form.

pub mod bits;
pub mod distlearn;
pub mod error;
pub mod exam;
pub mod learners;
pub mod lemmas;
pub mod numtheory;
pub mod prf;
pub mod seed;
pub mod stats;

pub use bits::Bits;
pub use distlearn::{
    Evaluator, FiniteFunction, FunctionView, InducedSpec, InputDist, LearnerConfig, Rational, SupportTable,
};
pub use error::{Error, Result};
pub use learners::{LearnedModel, PublicParams, SampleRecord};
pub use numtheory::{SafePrime, ZqElement};
pub use prf::{Instance, SecretInstance, SecretKey};
