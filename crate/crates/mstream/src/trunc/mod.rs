//! Observational semantics: exact joint distributions of finite
//! truncations, causality checks, observational equivalence, the causal
//! function view, and the law suites.

mod equiv;
mod joint;
mod laws;

use thiserror::Error;

pub use equiv::{causal_eval, obs_equiv, EquivReport, EquivWitness, Verdict};
pub use joint::{
    check_causality, check_family_causality, proc_semantics, CausalityReport,
    CausalityWitness, InputSpec, JointDist,
};
pub use laws::{
    axiom_suite, category_law_suite, random_stoch_kernel, random_stream, LawEntry,
    LawFailure, LawReport,
};

use crate::kernel::KernelError;
use crate::stream::StreamError;

#[derive(Debug, Error)]
pub enum TruncError {
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("schedule mismatch: {left} vs {right}")]
    ScheduleMismatch { left: String, right: String },
    #[error("step {step}: expected {expected} inputs, got {got}")]
    InputArity { step: usize, expected: usize, got: usize },
    #[error("stream contains the stochastic kernel `{0}`")]
    NotDeterministic(String),
    #[error("law violated: {0}")]
    LawViolation(String),
}
