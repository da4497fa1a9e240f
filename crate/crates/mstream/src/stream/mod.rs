//! The coinductive monoidal-stream engine: now/later structure with memory
//! channels, composition, delay, `fby`, `wait`, and delayed feedback.

mod mstream;
mod sched;

use thiserror::Error;

pub use mstream::{later_force_count, MStream, RunInputs, StepKernel};
pub use sched::Schedule;

use crate::kernel::KernelError;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("schedule mismatch in {context}: {left} vs {right}")]
    ScheduleMismatch {
        context: &'static str,
        left: String,
        right: String,
    },
    #[error("feedback shape mismatch: {0}")]
    FeedbackShape(String),
    #[error("step {step}: expected {expected} inputs, got {got}")]
    InputArity { step: usize, expected: usize, got: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}
