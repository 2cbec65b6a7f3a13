use thiserror::Error;

use crate::optics::ArmPair;
use crate::qstate::{Photon, Stage};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("stage mismatch: expected {expected:?}, found {found:?}")]
    StageMismatch { expected: Stage, found: Stage },

    #[error("basis label mixes path alphabets (I/O with D/B)")]
    MixedAlphabet,

    #[error("recombiner applied twice to photon {0:?}")]
    AlreadyRecombined(Photon),

    #[error("operator carries a recombiner and cannot be composed")]
    ComposeRecombiner,

    #[error("post-selection probability is zero (empty subensemble)")]
    EmptySubensemble,

    #[error("operator is not a projector")]
    NotProjector,

    #[error("observable is not Hermitian")]
    NotHermitian,

    #[error("weak value undefined: pre- and post-selected states are orthogonal")]
    UndefinedWeakValue,

    #[error("invalid occupation: {0}")]
    InvalidOccupation(&'static str),

    #[error("parameter `{name}` = {value} out of range: {expected}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("degenerate calibration: zero detection probability")]
    DegenerateCalibration,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("arm pair {pair}: {source}")]
    ArmPair {
        pair: ArmPair,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Stable snake_case identifier for error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::StageMismatch { .. } => "stage_mismatch",
            Error::MixedAlphabet => "mixed_alphabet",
            Error::AlreadyRecombined(_) => "already_recombined",
            Error::ComposeRecombiner => "compose_recombiner",
            Error::EmptySubensemble => "empty_subensemble",
            Error::NotProjector => "not_projector",
            Error::NotHermitian => "not_hermitian",
            Error::UndefinedWeakValue => "undefined_weak_value",
            Error::InvalidOccupation(_) => "invalid_occupation",
            Error::OutOfRange { .. } => "out_of_range",
            Error::ZeroDenominator(_) => "zero_denominator",
            Error::DegenerateCalibration => "degenerate_calibration",
            Error::NonFinite(_) => "non_finite",
            Error::ArmPair { source, .. } => source.code(),
        }
    }

    pub(crate) fn in_pair(self, pair: ArmPair) -> Self {
        Error::ArmPair {
            pair,
            source: Box::new(self),
        }
    }
}

pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
    expected: &'static str,
) -> Result<()> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            expected,
        })
    }
}
