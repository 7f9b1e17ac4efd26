use thiserror::Error;

use crate::model::Pair;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid system configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "dimension mismatch at pair ({}, {}): expected {expected:?}, found {found:?}",
        pair.rx + 1,
        pair.tx + 1
    )]
    DimensionMismatch {
        pair: Pair,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("beamformer {which}_{} has shape {found:?}, expected {expected:?}", user + 1)]
    BeamformerShape {
        user: usize,
        which: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("beamformer {which}_{} does not have full column rank", user + 1)]
    RankDeficientBeamformer { user: usize, which: &'static str },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("strategy {strategy} unavailable: {reason}")]
    StrategyUnavailable {
        strategy: &'static str,
        reason: String,
    },

    #[error("enumeration of {tuples} tuples exceeds the limit of {limit}")]
    EnumerationGuard { tuples: u128, limit: u128 },

    #[error("user {} requests {streams} streams but has only {antennas} antennas on one side", user + 1)]
    StreamsExceedAntennas {
        user: usize,
        streams: usize,
        antennas: usize,
    },

    #[error("matching does not cover every equation node")]
    IncompleteMatching,

    #[error("invalid options: {0}")]
    InvalidOptions(String),

    #[error("slope estimation needs at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
