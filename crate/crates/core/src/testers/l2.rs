// SPDX-License-Identifier: Apache-2.0

use alloc::vec::Vec;

use super::Verdict;
use crate::error::{Error, Result};
use crate::oracle::{CombinedOracle, Target};

/// Leading constant of the ℓ2 tester's sample count, calibrated against the
/// two endpoint cases `ℓ2 = ε/2` and `ℓ2 = ε` at `b`-saturating inputs.
pub const C_L2: f64 = 6.0;

/// Result of one ℓ2 closeness test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L2Outcome {
    pub verdict: Verdict,
    /// Unbiased estimate of `ℓ2²(p, q)`.
    pub statistic: f64,
    pub threshold: f64,
    /// Samples drawn per distribution.
    pub samples: u64,
}

/// `s = ceil(C_L2 · ln(1/δ) · (b² + ε²√b) / ε⁴)`, at least 2.
pub fn l2_sample_count(epsilon: f64, delta: f64, b: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter("l2 test needs epsilon > 0".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter("l2 test needs delta in (0, 1)".into()));
    }
    if !(b > 0.0 && b <= 1.0) {
        return Err(Error::InvalidParameter("l2 test needs b in (0, 1]".into()));
    }
    let e2 = epsilon * epsilon;
    let s = C_L2 * libm::log(1.0 / delta) * (b * b + e2 * libm::sqrt(b)) / (e2 * e2);
    if !(s < 1e12) {
        return Err(Error::InvalidParameter("l2 sample count exceeds 1e12".into()));
    }
    Ok((libm::ceil(s) as u64).max(2))
}

/// Pass threshold on the `ℓ2²` statistic: `(3ε/4)²`.
pub fn l2_threshold(epsilon: f64) -> f64 {
    let t = 0.75 * epsilon;
    t * t
}

/// Per-item sample counts of two equal-length sample sets over `[n]`.
#[derive(Debug, Clone)]
pub(super) struct PairCounts {
    counts: Vec<[u32; 2]>,
    s: [u64; 2],
}

impl PairCounts {
    pub(super) fn new(n: usize) -> Self {
        Self {
            counts: alloc::vec![[0; 2]; n],
            s: [0; 2],
        }
    }

    #[inline]
    pub(super) fn add(&mut self, which: Target, i: usize) {
        self.counts[i][which.slot()] += 1;
        self.s[which.slot()] += 1;
    }

    /// `2·C_pp/(s(s−1)) + 2·C_qq/(s(s−1)) − 2·C_pq/s²`.
    pub(super) fn statistic(&self) -> f64 {
        let (mut cpp, mut cqq, mut cpq) = (0f64, 0f64, 0f64);
        for &[x, y] in &self.counts {
            let (x, y) = (f64::from(x), f64::from(y));
            cpp += x * (x - 1.0) / 2.0;
            cqq += y * (y - 1.0) / 2.0;
            cpq += x * y;
        }
        let (sp, sq) = (self.s[0] as f64, self.s[1] as f64);
        2.0 * cpp / (sp * (sp - 1.0)) + 2.0 * cqq / (sq * (sq - 1.0)) - 2.0 * cpq / (sp * sq)
    }
}

/// Unbiased collision estimate of `ℓ2²(p, q)` from two sample sets over
/// `[n]`: `C_pp` counts unordered equal pairs within the `p` samples, `C_qq`
/// within the `q` samples and `C_pq` equal cross pairs.
pub fn collision_statistic(
    n: usize,
    samples_p: impl IntoIterator<Item = usize>,
    samples_q: impl IntoIterator<Item = usize>,
) -> f64 {
    let mut c = PairCounts::new(n);
    samples_p.into_iter().for_each(|i| c.add(Target::P, i));
    samples_q.into_iter().for_each(|i| c.add(Target::Q, i));
    c.statistic()
}

/// ℓ2 closeness test with generative access to both targets.
///
/// Passes with probability `≥ 1−δ` when `ℓ2(p, q) ≤ ε/2` and with
/// probability `< δ` when `ℓ2(p, q) ≥ ε`, provided `b ≥ max_i(p_i, q_i)`.
pub fn l2_closeness_test<O: CombinedOracle>(
    oracle: &mut O,
    epsilon: f64,
    delta: f64,
    b_hint: f64,
) -> Result<L2Outcome> {
    let s = l2_sample_count(epsilon, delta, b_hint)?;
    let mut counts = PairCounts::new(oracle.n());
    for w in [Target::P, Target::Q] {
        for _ in 0..s {
            counts.add(w, oracle.sample(w)?);
        }
    }
    Ok(decide(counts.statistic(), epsilon, s))
}

pub(super) fn decide(statistic: f64, epsilon: f64, samples: u64) -> L2Outcome {
    let threshold = l2_threshold(epsilon);
    L2Outcome {
        verdict: if statistic <= threshold {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        statistic,
        threshold,
        samples,
    }
}
