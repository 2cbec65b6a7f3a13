//! Simulation of joint weak measurements in a two-photon Hardy interferometer.
//!
//! The pipeline mirrors the apparatus: a pair enters two overlapping
//! Mach-Zehnder interferometers, an absorptive switch removes the amplitude
//! for both photons to be in the Inner arms, weak polarization rotators mark
//! arm occupation, and the photons are post-selected at both dark ports.
//! Occupation weak values are recovered from polarization correlations and
//! checked against the exact `⟨f|C|i⟩/⟨f|i⟩`.

pub mod config;
pub mod counting;
pub mod error;
pub mod hardy;
pub mod optics;
pub mod qstate;
pub mod report;
pub mod weakmeas;

pub use error::{Error, Result};
