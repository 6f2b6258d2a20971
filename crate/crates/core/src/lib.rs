//! Training fully-visible Boltzmann machines through a nested quantum
//! annealing correction (NQAC) encoding, with classical Monte Carlo
//! emulators standing in for the annealer.
//!
//! The pipeline is nest → embed → sample → decode → estimate gradients →
//! update. Each stage lives in its own module:
//!
//! - [`ising`], [`gibbs`]: problems, energies and exact enumeration.
//! - [`nqac`]: repetition-code nesting, Chimera minor embedding, decoding.
//! - [`samplers`]: simulated quantum annealing and spin-vector Monte Carlo.
//! - [`metrics`]: effective temperature and distribution distances.
//! - [`datasets`]: bars-and-stripes, MNIST IDX ingestion, minibatching.
//! - [`trainer`]: the Boltzmann machine training loop.
//! - [`experiment`]: batch scans with persisted, resumable results.

pub mod datasets;
pub mod error;
pub mod experiment;
pub mod gibbs;
pub mod ising;
pub mod metrics;
pub mod moments;
pub mod nqac;
pub mod rng;
pub mod samplers;
pub mod samples;
pub mod trainer;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use gibbs::{enumerate_gibbs, exact_log_likelihood, exact_sample, operator_norm, GibbsTable};
pub use ising::{HardwareLimits, IsingProblem, SpinVector};
pub use moments::Moments;
pub use samples::{Level, SampleSet};
