// SPDX-License-Identifier: Apache-2.0

use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Leading constant of the per-insertion tracking probability
/// `min(1, C_TRACK·n^α·log2 n/(ε·m̃))`.
pub const C_TRACK: f64 = 4.0;

/// Multiple of the expected tracked-set size at which a rung stops starting
/// new counters.
const CAP_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LargeSmallParams {
    pub alpha: f64,
    pub epsilon: f64,
    pub n: usize,
    pub max_len: u64,
    pub c_track: f64,
    pub seed: u64,
}

impl LargeSmallParams {
    pub fn new(alpha: f64, epsilon: f64, n: usize, max_len: u64) -> Self {
        Self {
            alpha,
            epsilon,
            n,
            max_len,
            c_track: C_TRACK,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon must lie in (0, 1)");
        }
        if self.n < 2 {
            return bad("n must be at least 2");
        }
        if self.max_len == 0 {
            return bad("max_len must be positive");
        }
        if !(self.c_track > 0.0) {
            return bad("c_track must be positive");
        }
        Ok(())
    }

    /// `C·n^α·log2 n/ε`; the tracking probability is this over `m̃`.
    fn track_scale(&self) -> f64 {
        let n = self.n as f64;
        self.c_track * libm::pow(n, self.alpha) * libm::log2(n) / self.epsilon
    }
}

/// Outcome of the Large-Small estimator.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LargeSmallReport {
    /// `Ĥ` in bits.
    pub estimate: f64,
    pub m: u64,
    pub m_tilde: u64,
    /// Items with `c(i) ≥ m·n^(−α)` and their counts, ordered by item.
    pub heavy: Vec<(usize, u64)>,
    /// `Σ_{S̄} (c/m)·log2(m/c)`.
    pub heavy_part: f64,
    /// `ŵ = 1 − Σ_{S̄} c/m`.
    pub w_hat: f64,
    /// `ŵ·log2(n/ŵ)`.
    pub small_part: f64,
    pub tracked: usize,
    pub space_words: usize,
    pub peak_space_words: usize,
}

struct Rung {
    m_tilde: u64,
    prob: f64,
    cap: usize,
    counts: HashMap<usize, u64>,
}

/// Single-pass entropy upper estimate from exactly counted heavy items.
///
/// A ladder of guesses `m̃ = 2^i` runs concurrently. In each rung an
/// untracked item starts a counter with probability
/// `min(1, C·n^α·log2 n/(ε·m̃))`; counts are exact from then on. One
/// uniform per token serves all rungs. The residual mass `ŵ` is charged the
/// maximum entropy of spreading it over `n` items, so the output never falls
/// below the empirical entropy.
pub struct LargeSmallEstimator {
    params: LargeSmallParams,
    rng: SplitMix64,
    rungs: Vec<Rung>,
    front: usize,
    m: u64,
    words: usize,
    peak: usize,
}

impl LargeSmallEstimator {
    pub fn new(params: LargeSmallParams) -> Result<Self> {
        params.validate()?;
        let scale = params.track_scale();
        let cap = libm::ceil(CAP_FACTOR * 2.0 * scale).min(usize::MAX as f64) as usize;
        let mut rungs = Vec::new();
        let mut m_tilde = 1u64;
        loop {
            rungs.push(Rung {
                m_tilde,
                prob: (scale / m_tilde as f64).min(1.0),
                cap,
                counts: HashMap::new(),
            });
            if m_tilde > params.max_len / 2 {
                break;
            }
            m_tilde *= 2;
        }
        Ok(Self {
            rng: SplitMix64::derive(params.seed, 0x15),
            params,
            rungs,
            front: 0,
            m: 0,
            words: 0,
            peak: 0,
        })
    }

    pub fn params(&self) -> &LargeSmallParams {
        &self.params
    }

    pub fn len(&self) -> u64 {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn insert(&mut self, item: usize) -> Result<()> {
        if item >= self.params.n {
            return Err(Error::IndexOutOfRange {
                index: item,
                n: self.params.n,
            });
        }
        if self.m >= self.params.max_len {
            return Err(Error::StreamTooLong {
                len: self.m + 1,
                max: self.params.max_len,
            });
        }
        self.m += 1;
        while self.m > 2 * self.rungs[self.front].m_tilde {
            let rung = &mut self.rungs[self.front];
            self.words -= 2 * rung.counts.len();
            rung.counts = HashMap::new();
            self.front += 1;
        }
        let u = self.rng.next_f64();
        for rung in &mut self.rungs[self.front..] {
            if let Some(c) = rung.counts.get_mut(&item) {
                *c += 1;
            } else if u < rung.prob && rung.counts.len() < rung.cap {
                rung.counts.insert(item, 1);
                self.words += 2;
            }
        }
        self.peak = self.peak.max(self.words);
        Ok(())
    }

    pub fn extend(&mut self, items: impl IntoIterator<Item = usize>) -> Result<()> {
        items.into_iter().try_for_each(|i| self.insert(i))
    }

    /// Counters of the rung with `m̃ ≤ m ≤ 2m̃`, ordered by item.
    pub fn tracked_counts(&self) -> Vec<(usize, u64)> {
        let mut v: Vec<(usize, u64)> = self.rungs[self.front]
            .counts
            .iter()
            .map(|(&i, &c)| (i, c))
            .collect();
        v.sort_unstable();
        v
    }

    pub fn finish(&self) -> LargeSmallReport {
        let rung = &self.rungs[self.front];
        let mut report = LargeSmallReport {
            estimate: 0.0,
            m: self.m,
            m_tilde: rung.m_tilde,
            heavy: Vec::new(),
            heavy_part: 0.0,
            w_hat: 0.0,
            small_part: 0.0,
            tracked: rung.counts.len(),
            space_words: self.words,
            peak_space_words: self.peak,
        };
        if self.m == 0 {
            return report;
        }
        let m = self.m as f64;
        let n = self.params.n as f64;
        let threshold = m * libm::pow(n, -self.params.alpha);
        report.heavy = self
            .tracked_counts()
            .into_iter()
            .filter(|&(_, c)| c as f64 >= threshold)
            .collect();
        let mut mass = 0.0;
        for &(_, c) in &report.heavy {
            let c = c as f64;
            mass += c / m;
            report.heavy_part += (c / m) * libm::log2(m / c);
        }
        report.w_hat = (1.0 - mass).max(0.0);
        if report.w_hat > 0.0 {
            report.small_part = report.w_hat * libm::log2(n / report.w_hat);
        }
        report.estimate = report.heavy_part + report.small_part;
        report
    }
}

/// `(factor, additive)` with factor `(1/α)(1 + log2(1/ε)/log2 n)` and
/// additive `ε(log2(n/ε) + n^(−α))`.
pub fn large_small_error_bound(alpha: f64, epsilon: f64, n: usize) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter("alpha must lie in (0, 1)".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter("epsilon must lie in (0, 1)".into()));
    }
    if n < 2 {
        return Err(Error::InvalidParameter("n must be at least 2".into()));
    }
    let nf = n as f64;
    let ln = libm::log2(nf);
    let factor = (1.0 + libm::log2(1.0 / epsilon) / ln) / alpha;
    let additive = epsilon * (libm::log2(nf / epsilon) + libm::pow(nf, -alpha));
    Ok((factor, additive))
}

/// `ε′(ε) = α(ε·log2(n/ε) + n^(−α))/H + log2(1/ε)/log2 n`.
fn eps_prime(alpha: f64, n: f64, h: f64, eps: f64) -> f64 {
    alpha * (eps * libm::log2(n / eps) + libm::pow(n, -alpha)) / h + libm::log2(1.0 / eps) / libm::log2(n)
}

/// Solves `ε′(ε) = target` for the accuracy parameter `ε ∈ (0, 1]`.
///
/// `ε′` falls then rises in `ε`. Space scales as `1/ε`, so the largest
/// `ε` with `ε′(ε) ≤ target` is returned: the root on the rising branch, or
/// `1` when `ε′(1) ≤ target`. Targets below the minimum have no solution.
pub fn invert_error_bound(alpha: f64, n: usize, h: f64, target: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter("alpha must lie in (0, 1)".into()));
    }
    if n < 3 {
        return Err(Error::InvalidParameter("n must be at least 3".into()));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter("entropy must be positive".into()));
    }
    let nf = n as f64;
    let f = |e: f64| eps_prime(alpha, nf, h, e);

    // Locate the minimum on a log grid, then narrow it by ternary search.
    let (lo_exp, steps) = (-60.0f64, 2400);
    let at = |s: usize| libm::exp2(lo_exp * (1.0 - s as f64 / steps as f64));
    let best = (0..=steps)
        .min_by(|&a, &b| f(at(a)).total_cmp(&f(at(b))))
        .unwrap_or(steps);
    let (mut a, mut b) = (at(best.saturating_sub(1)), at((best + 1).min(steps)));
    for _ in 0..200 {
        let x1 = a + (b - a) / 3.0;
        let x2 = b - (b - a) / 3.0;
        if f(x1) < f(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let eps_min = 0.5 * (a + b);
    let infimum = f(eps_min);
    if !(target >= infimum) {
        return Err(Error::NoSolution { target, infimum });
    }
    if f(1.0) <= target {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (eps_min, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
