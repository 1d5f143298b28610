// SPDX-License-Identifier: Apache-2.0

use alloc::string::String;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{0:?} is not a symmetric bounded f-divergence")]
    UnsupportedKind(crate::dist::DivergenceKind),

    #[error("oracle budget of {budget} calls exhausted")]
    BudgetExhausted { budget: u64 },

    #[error("index {index} out of range for base size {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("session has no second distribution")]
    NoSuchTarget,

    #[error("canonical plan has no samples left for this target")]
    PlanExhausted,

    #[error("probe of index {index} that the plan never recorded")]
    UnprobedIndex { index: usize },

    #[error("sampled item {index} has zero probe value")]
    ZeroMassSample { index: usize },

    #[error("normalized increment {value} outside [0, 1]")]
    IncrementOutOfRange { value: f64 },

    #[error("requested {requested} extra probes but only {available} unsampled indices exist")]
    TooManyExtraProbes { requested: usize, available: usize },

    #[error("stream length {len} exceeds the ladder maximum {max}")]
    StreamTooLong { len: u64, max: u64 },

    #[error("estimator requires a random-order stream")]
    NotRandomOrder,

    #[error("no solution in (0, 1): target {target} is below the attainable minimum {infimum}")]
    NoSolution { target: f64, infimum: f64 },
}
