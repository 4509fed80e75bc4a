//! Compressive multi-user detection for asynchronous random access.
//!
//! Users transmit cyclic-prefixed signature sequences with unknown discrete
//! delays. A receiver takes `M` mixed samples `y = X R b + w`, with
//! `X = H A` the unit-column measurement matrix, and recovers the active
//! users with matching pursuit.
//!
//! - [`waveforms`]: Gabor, Kerdock and random-block codebooks; shift dictionary `A`.
//! - [`coherence`]: worst-case and average coherence, spectral norm, wiggling.
//! - [`channel`]: measurement ensembles, channel draws, received-vector synthesis.
//! - [`detectors`]: coherent and noncoherent matching pursuit, guarantee checks.
//! - [`montecarlo`]: seeded, parallel error-rate experiments.
//! - [`cli`]: the `cs-mud` command line.

pub mod channel;
pub mod cli;
pub mod coherence;
pub mod detectors;
pub mod error;
pub mod linalg;
pub mod montecarlo;
pub mod waveforms;

pub use error::{Error, Result};
