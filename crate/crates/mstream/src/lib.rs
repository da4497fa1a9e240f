//! A monoidal stream engine for dataflow programming over theories of
//! processes.
//!
//! A stream here is a coinductive object: a "now" kernel that consumes an
//! incoming memory channel together with the current inputs and produces an
//! outgoing memory channel together with the current outputs, followed by a
//! deferred "later" stream for the remaining steps. Two process theories are
//! built in: deterministic functions and finite-support stochastic kernels
//! with exact rational weights.
//!
//! The crate is organized in four layers:
//!
//! - [`kernel`]: values, exact distributions, and one-step kernels with
//!   their monoidal structure (compose, tensor, copy, discard).
//! - [`stream`]: the coinductive stream type with sequential and parallel
//!   composition, delay, `fby`, `wait`, and delayed feedback.
//! - [`trunc`]: observational semantics at finite truncation depth — exact
//!   joint output distributions, the causality check, observational
//!   equivalence, and the feedback-axiom and category-law suites.
//! - [`dsl`]: a small Lucid-like surface language that elaborates to
//!   streams.

pub mod dsl;
pub mod kernel;
pub mod stream;
pub mod trunc;

pub use kernel::{Dist, Kernel, Rat, SampleRng, Ty, Value};
pub use stream::{MStream, Schedule};
