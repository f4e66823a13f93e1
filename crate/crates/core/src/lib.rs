//! Seedable Monte Carlo simulator of spin-photon time-bin entanglement
//! distribution over a noisy frequency-conversion channel.
//!
//! The pipeline mirrors the measurement chain of a heralded spin-photon
//! experiment: an entangling pulse sequence produces a (possibly imperfect)
//! spin ⊗ time-bin Bell state per attempt; a conversion channel applies loss
//! and adds spin-uncorrelated noise clicks at a configured signal-to-noise
//! ratio; time-bin (Z) data is detected directly while X/Y data is routed
//! through a phase-stabilized imbalanced interferometer; and the tomography
//! stage corrects readout infidelity and dark counts, forms per-basis
//! contrasts, and combines them into the entangled-state fidelity
//! F = (1 + E_X + E_Y + E_Z)/4 with binomial error propagation.
//!
//! Everything is deterministic given (config, seed): random streams are
//! derived per trial / cycle / calibration epoch, so serial and parallel
//! execution produce identical event streams and reports.

pub mod config;
pub mod conversion;
pub mod error;
pub mod hilbert;
pub mod interferometer;
pub mod protocol;
pub mod report;
pub mod rng;
pub mod runner;
pub mod stats;
pub mod tomography;

pub use config::{ExperimentConfig, Scenario};
pub use error::{Error, Result};
pub use report::{OutputFormat, RunOutput, RunReport};
pub use runner::{run_phase_trace, run_scenario, sweep};
