//! A differential privacy programming framework.
//!
//! Stable [`Transformation`]s and private [`Measurement`]s are assembled with
//! the chaining and composition rules in [`combinators`], run either as
//! non-adaptive batch [`plan`]s or through budget-managed interactive
//! [`interactive::Session`]s, and checked with the exact and statistical
//! verifiers in [`tester`].

pub mod accuracy;
pub mod calculus;
pub mod combinators;
pub mod error;
pub mod exact;
pub mod interactive;
pub mod mechanisms;
pub mod plan;
pub mod predicate;
pub mod repl;
pub mod sampagg;
pub mod tester;
pub mod transforms;

pub use calculus::{
    Bounds, Carrier, Cell, CellKind, Column, Dataset, DatasetDomain, Domain, ExactLoss, MeasureKind, Measurement,
    Metric, PrivacyLoss, PrivacyMap, Record, Schema, StabilityMap, Transformation, Value,
};
pub use error::{Error, Result};

/// The randomness source used throughout: a seeded ChaCha20 stream, so a
/// fixed seed replays bit-identically on every platform.
pub type NoiseRng = rand_chacha::ChaCha20Rng;

pub fn seeded_rng(seed: u64) -> NoiseRng {
    use rand::SeedableRng;
    NoiseRng::seed_from_u64(seed)
}
