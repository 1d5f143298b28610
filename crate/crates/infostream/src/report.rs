// SPDX-License-Identifier: Apache-2.0

use infostream_core::testers::Verdict;
use infostream_core::Trace;
use serde::{Deserialize, Serialize};

use crate::params::Params;

/// Outcome of one `run`.
///
/// Everything except `wall_ms` is a function of `(algo, params, seed)` and
/// the inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub algo: String,
    pub params: Params,
    pub estimate: Option<f64>,
    pub verdict: Option<Verdict>,
    pub exact_value: Option<f64>,
    pub calls: Trace,
    /// Peak live summary size in 64-bit words, for streaming algorithms.
    pub space_words: Option<usize>,
    pub seed: u64,
    pub wall_ms: f64,
    /// Algorithm-specific fields.
    pub details: serde_json::Value,
}

impl TrialReport {
    /// `|estimate − exact| / |exact|`, when both exist and exact is nonzero.
    pub fn relative_error(&self) -> Option<f64> {
        match (self.estimate, self.exact_value) {
            (Some(e), Some(x)) if x != 0.0 && x.is_finite() => Some((e - x).abs() / x.abs()),
            _ => None,
        }
    }

    /// A copy with the timing field cleared, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_ms: 0.0,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
