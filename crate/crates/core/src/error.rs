//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by plan construction, the IM3 engine and the
/// waveform-level measurement harnesses.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Im3Error {
    #[error("channel spacing must be positive, got {0}")]
    NonPositiveSpacing(f64),

    #[error("channel amplitudes must be nonnegative, got {0} at position {1}")]
    NegativeAmplitude(f64, usize),

    #[error("a channel plan needs at least one channel")]
    EmptyPlan,

    #[error("frequencies must be strictly increasing (violated at position {0})")]
    NotIncreasing(usize),

    #[error("frequency/amplitude lists differ in length: {frequencies} vs {amplitudes}")]
    LengthMismatch {
        frequencies: usize,
        amplitudes: usize,
    },

    #[error(
        "incommensurate plan: no common channel spacing fits {worst_frequency} \
         within the requested tolerance"
    )]
    IncommensuratePlan { worst_frequency: f64 },

    #[error("gridded plan would need {required} channels, exceeding the cap of {cap}")]
    PlanTooLarge { required: usize, cap: usize },

    #[error("channel index {index} out of range 1..={n_channels}")]
    ChannelOutOfRange { index: usize, n_channels: usize },

    #[error("phase realization has {got} entries, plan has {expected} channels")]
    PhaseCountMismatch { expected: usize, got: usize },

    #[error("simulation grid incompatible with plan: {0}")]
    GridIncompatible(String),

    #[error("frequency {frequency} does not fall on a DFT bin (duration {duration})")]
    OffBinFrequency { frequency: f64, duration: f64 },

    #[error("simulation would need {required} samples, exceeding the cap of {cap}")]
    TooManySamples { required: usize, cap: usize },

    #[error("Monte-Carlo measurement needs at least one trial")]
    NoTrials,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("projection basis is singular (degenerate or duplicate channels)")]
    SingularProjection,
}

pub type Result<T> = std::result::Result<T, Im3Error>;
