//! Conditional generation of multichannel physiological waveforms with
//! flow matching and a diffusion baseline, plus the distribution-level
//! metrics to compare them at matched sampling budgets.
//!
//! Everything is deterministic given the seeds: training, sampling,
//! evaluation, and the experiment harness derive per-component streams
//! from a master seed, and batch sampling is thread-count invariant.

mod binio;
mod par;

pub mod dataset_io;
pub mod diffusion;
pub mod error;
pub mod flow;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod ode;
pub mod rng;
pub mod signal;
pub mod synth;

pub use error::{Error, FormatError, Result};
