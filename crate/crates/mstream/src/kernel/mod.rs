//! The two concrete process theories: deterministic functions and
//! finite-support stochastic kernels, with copy and discard.

mod dist;
mod kern;
mod rational;
mod value;

use std::sync::atomic::{AtomicUsize, Ordering};

use thiserror::Error;

pub use dist::{rat, rat_string, Dist, SampleRng};
pub use kern::{Kernel, StructuralKind};
pub use rational::Rat;
pub use value::{enumerate_tuples, Ty, TyKind, Value};

/// Default cap on distribution support sizes.
pub const DEFAULT_SUPPORT_CAP: usize = 1_000_000;

static SUPPORT_CAP: AtomicUsize = AtomicUsize::new(DEFAULT_SUPPORT_CAP);

/// The current cap on distribution support sizes. Exceeding it turns
/// exponential joint-distribution blow-up into a clean error.
pub fn support_cap() -> usize {
    SUPPORT_CAP.load(Ordering::Relaxed)
}

/// Override the support cap process-wide.
pub fn set_support_cap(cap: usize) {
    SUPPORT_CAP.store(cap.max(1), Ordering::Relaxed);
}

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("empty support")]
    EmptySupport,
    #[error("support overflow: limit {limit}, attempted {attempted}")]
    SupportOverflow { limit: usize, attempted: usize },
    #[error("negative weight {0}")]
    NegativeWeight(String),
    #[error("weights sum to {0}, not 1")]
    WeightsDoNotSumToOne(String),
    #[error("signature mismatch: {left} vs {right}")]
    SignatureMismatch { left: String, right: String },
    #[error("ill-typed value: {0}")]
    IllTyped(String),
    #[error("tuple index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("kernel `{0}` is stochastic, not deterministic")]
    NotDeterministic(String),
    #[error("type {0} has no finite domain")]
    MissingDomain(String),
}
