// SPDX-License-Identifier: Apache-2.0

//! File formats, experiment runner and parameter sweeps on top of
//! `infostream-core`.

pub mod error;
pub mod formats;
pub mod gen;
pub mod params;
pub mod report;
pub mod run;
pub mod sweep;

pub use error::{HarnessError, Result};
pub use params::Params;
pub use report::TrialReport;
pub use sweep::SweepSpec;
