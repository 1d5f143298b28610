// SPDX-License-Identifier: Apache-2.0

//! Testers and estimators in the oracle models.
//!
//! [`delta_test`] needs generative access only; the `combined_*` estimators
//! need both samples and probes. All of them run against any
//! [`CombinedOracle`](crate::oracle::CombinedOracle), so the same code serves
//! direct sessions, canonical plans and stream simulations.

mod combined;
mod delta;
mod hard;
mod l2;

pub use combined::{
    combined_distance_estimate, combined_distance_iterations, combined_entropy_estimate,
    combined_entropy_iterations, combined_l2_estimate, combined_l2_iterations,
    distance_iteration_count, entropy_iteration_count, l2_iteration_count, with_halving,
    HalvingOutcome, INCREMENT_SLACK,
};
pub use delta::{
    delta_test, heavy_sample_count, l2_stage_sample_count, DeltaTestOutcome, DeltaTestParams,
    C_HEAVY, DEFAULT_ALPHA, HEAVY_FAIL_DIVISOR,
};
pub use hard::{hard_l1_instance, HardInstance};
pub use l2::{
    collision_statistic, l2_closeness_test, l2_sample_count, l2_threshold, L2Outcome, C_L2,
};

/// Outcome of a property test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }

    pub fn name(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        }
    }
}
