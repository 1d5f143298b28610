// SPDX-License-Identifier: Apache-2.0

//! Sublinear-sample and small-space estimators for entropy and
//! information-theoretic distances between discrete distributions.
//!
//! The crate is `no_std` (it needs `alloc`) and is organized in layers:
//!
//! - [`dist`]: exact distributions, f-divergences and entropy. This is the
//!   ground truth everything else is checked against.
//! - [`oracle`]: budgeted generative/evaluative access to distributions and
//!   the canonical samples-then-probes discipline.
//! - [`testers`]: property testers and estimators in the oracle models.
//! - [`streaming`]: insert-only stream estimators and the stream-backed
//!   simulation of combined oracles.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod dist;
mod error;
pub mod oracle;
pub mod rng;
pub mod streaming;
pub mod testers;

pub use dist::{
    entropy_exact, entropy_of_counts, required_samples, tail_entropy_bound, DivergenceKind,
    Distribution,
};
pub use error::{Error, Result};
pub use oracle::{CanonicalPlan, CombinedOracle, OracleSession, Target, Trace};
pub use rng::SplitMix64;
