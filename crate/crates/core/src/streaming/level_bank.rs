// SPDX-License-Identifier: Apache-2.0

use alloc::vec::Vec;

use super::f0::{F0Sketch, KmvFamily};
use crate::error::{Error, Result};
use crate::rng::{hash3, unit_f64, SplitMix64};

const ONE_MINUS_INV_E: f64 = 1.0 - 1.0 / core::f64::consts::E;

/// Parameters of the F0 level-bank entropy estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct F0EntropyParams {
    /// Ladder ratio of the length guesses; also sets `t = (1+ε)²`.
    pub epsilon: f64,
    /// Relative accuracy of each level sketch.
    pub epsilon0: f64,
    /// Failure probability of each level sketch.
    pub delta0: f64,
    /// Concentration slack used only to widen the reported window.
    pub epsilon_c: f64,
    pub n: usize,
    /// Longest stream the ladder covers.
    pub max_len: u64,
    pub seed: u64,
}

impl F0EntropyParams {
    pub fn new(epsilon: f64, epsilon0: f64, epsilon_c: f64, n: usize, max_len: u64) -> Self {
        Self {
            epsilon,
            epsilon0,
            delta0: 0.05,
            epsilon_c,
            n,
            max_len,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_delta0(mut self, delta0: f64) -> Self {
        self.delta0 = delta0;
        self
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon must lie in (0, 1)");
        }
        if !(self.epsilon_c >= 0.0 && self.epsilon_c < 1.0) {
            return bad("epsilon_c must lie in [0, 1)");
        }
        if self.n < 2 {
            return bad("n must be at least 2");
        }
        if self.max_len == 0 {
            return bad("max_len must be positive");
        }
        Ok(())
    }

    /// `t = (1+ε)²`.
    pub fn dilation(&self) -> f64 {
        (1.0 + self.epsilon) * (1.0 + self.epsilon)
    }

    /// `k = ceil(log2(n/ε))`.
    pub fn levels(&self) -> usize {
        libm::ceil(libm::log2(self.n as f64 / self.epsilon)) as usize
    }
}

/// `Pr[χ_ij] = 1 − (1 − min(1, 2^j/(m̃·t)))^f` for an item with `f`
/// occurrences.
pub fn level_inclusion_probability(f: u64, m_tilde: f64, t: f64, j: u32) -> f64 {
    let x = (libm::ldexp(1.0, j as i32) / (m_tilde * t)).min(1.0);
    if x >= 1.0 {
        return if f > 0 { 1.0 } else { 0.0 };
    }
    -libm::expm1(f as f64 * libm::log1p(-x))
}

/// `[(1/t)(1−1/e)(H−1), (1/t)(1+ε)²·H + 2]`.
pub fn level_sum_sandwich(h: f64, epsilon: f64, t: f64) -> (f64, f64) {
    let g = (1.0 + epsilon) * (1.0 + epsilon);
    (ONE_MINUS_INV_E * (h - 1.0) / t, g * h / t + 2.0)
}

/// Outcome of the F0 level-bank estimator.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct F0EntropyReport {
    /// `Σ_j f_j/2^j` of the selected rung.
    pub raw: f64,
    /// `(raw − 2)·t/(1 − 1/e)`.
    pub bias_adjusted: f64,
    pub m: u64,
    pub m_tilde: f64,
    pub t: f64,
    pub epsilon: f64,
    pub epsilon0: f64,
    pub epsilon_c: f64,
    /// Distinct-count estimates `f_1..f_k` of the selected rung.
    pub level_counts: Vec<f64>,
    pub space_words: usize,
    pub peak_space_words: usize,
}

impl F0EntropyReport {
    pub fn sandwich(&self, h: f64) -> (f64, f64) {
        level_sum_sandwich(h, self.epsilon, self.t)
    }

    /// The sandwich widened by `(1±ε_c)` and `(1±ε0)`.
    pub fn window(&self, h: f64) -> (f64, f64) {
        let (lo, hi) = self.sandwich(h);
        (
            lo * (1.0 - self.epsilon_c) * (1.0 - self.epsilon0),
            hi * (1.0 + self.epsilon_c) * (1.0 + self.epsilon0),
        )
    }

    pub fn within_window(&self, h: f64) -> bool {
        let (lo, hi) = self.window(h);
        lo <= self.raw && self.raw <= hi
    }
}

struct Rung {
    m_tilde: f64,
    levels: Vec<Option<F0Sketch>>,
}

/// Single-pass entropy estimator built from per-level distinct counts.
///
/// Keeps a ladder of length guesses `m̃ = (1+ε)^i`. For each guess and level
/// `j ∈ 1..=k` a token enters the level sketch with probability
/// `min(1, 2^j/(m̃·t))`. The coin of a `(token, level)` pair is one hashed
/// uniform shared by every rung, so rungs are scanned in increasing `m̃` and
/// the scan stops at the first rejection. Each rung on its own sees
/// independent coins across tokens and levels.
///
/// Rungs with `m̃·t ≤ 2^j` take every token at level `j`, so they share one
/// level-`j` sketch until the front rung leaves that range.
pub struct F0EntropyEstimator {
    params: F0EntropyParams,
    t: f64,
    k: usize,
    family: KmvFamily,
    coin_seed: u64,
    rungs: Vec<Rung>,
    /// Per level, the number of rungs saturated at that level.
    saturated_end: Vec<usize>,
    shared: Vec<Option<F0Sketch>>,
    /// `m̃` of the rung after the last one.
    ladder_end: f64,
    front: usize,
    m: u64,
    hashes: Vec<u64>,
    words: usize,
    peak: usize,
}

impl F0EntropyEstimator {
    pub fn new(params: F0EntropyParams) -> Result<Self> {
        params.validate()?;
        let family = KmvFamily::new(params.epsilon0, params.delta0, params.seed)?;
        let coin_seed = SplitMix64::derive(params.seed, 0xC0).next_u64();
        let k = params.levels();
        let ratio = 1.0 + params.epsilon;
        let mut rungs = Vec::new();
        let mut i = 0i32;
        loop {
            let m_tilde = libm::pow(ratio, f64::from(i));
            if m_tilde > params.max_len as f64 {
                break;
            }
            rungs.push(Rung {
                m_tilde,
                levels: (0..k).map(|_| None).collect(),
            });
            i += 1;
        }
        let ladder_end = libm::pow(ratio, f64::from(i));
        let t = params.dilation();
        let saturated_end = (1..=k)
            .map(|j| {
                let accept = libm::ldexp(1.0, j as i32) / t;
                rungs.iter().take_while(|r| r.m_tilde <= accept).count()
            })
            .collect();
        let words = rungs.len() * k;
        let reps = family.repetitions();
        Ok(Self {
            t,
            k,
            coin_seed,
            rungs,
            saturated_end,
            shared: (0..k).map(|_| None).collect(),
            ladder_end,
            front: 0,
            m: 0,
            hashes: alloc::vec![0; reps],
            words,
            peak: words,
            family,
            params,
        })
    }

    pub fn params(&self) -> &F0EntropyParams {
        &self.params
    }

    pub fn len(&self) -> u64 {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn space_words(&self) -> usize {
        self.words
    }

    pub fn peak_space_words(&self) -> usize {
        self.peak
    }

    fn next_threshold(&self, r: usize) -> f64 {
        self.rungs.get(r + 1).map_or(self.ladder_end, |x| x.m_tilde)
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
        let token = self.m;
        self.m += 1;
        let m = self.m as f64;
        while self.front < self.rungs.len() && m >= self.next_threshold(self.front) {
            let rung = &mut self.rungs[self.front];
            let freed: usize = rung.levels.iter().flatten().map(F0Sketch::space_words).sum();
            self.words -= freed + rung.levels.len();
            rung.levels = Vec::new();
            self.front += 1;
            for j in 0..self.k {
                if self.saturated_end[j] <= self.front {
                    if let Some(s) = self.shared[j].take() {
                        self.words -= s.space_words();
                    }
                }
            }
        }

        self.family.hash_into(item as u64, &mut self.hashes);
        for j in 1..=self.k {
            let mut start = self.front;
            if start < self.saturated_end[j - 1] {
                let sketch = self.shared[j - 1].get_or_insert_with(|| self.family.sketch());
                let grew = sketch.insert_hashed(&self.hashes);
                self.words = (self.words as isize + grew) as usize;
                start = self.saturated_end[j - 1];
            }
            if start >= self.rungs.len() {
                continue;
            }
            let u = unit_f64(hash3(self.coin_seed, token, j as u64));
            let accept = libm::ldexp(1.0, j as i32) / self.t;
            for r in start..self.rungs.len() {
                let rung = &mut self.rungs[r];
                if u * rung.m_tilde >= accept {
                    break;
                }
                let sketch = rung.levels[j - 1].get_or_insert_with(|| self.family.sketch());
                let grew = sketch.insert_hashed(&self.hashes);
                self.words = (self.words as isize + grew) as usize;
            }
        }
        self.peak = self.peak.max(self.words);
        Ok(())
    }

    pub fn extend(&mut self, items: impl IntoIterator<Item = usize>) -> Result<()> {
        items.into_iter().try_for_each(|i| self.insert(i))
    }

    /// Reads out the rung with `m̃ ≤ m < (1+ε)·m̃`.
    pub fn finish(&self) -> F0EntropyReport {
        let (level_counts, m_tilde) = match self.rungs.get(self.front) {
            Some(rung) => (
                (0..self.k)
                    .map(|j| {
                        let s = if self.front < self.saturated_end[j] {
                            &self.shared[j]
                        } else {
                            &rung.levels[j]
                        };
                        s.as_ref().map_or(0.0, F0Sketch::estimate)
                    })
                    .collect::<Vec<f64>>(),
                rung.m_tilde,
            ),
            None => (alloc::vec![0.0; self.k], 1.0),
        };
        let raw: f64 = level_counts
            .iter()
            .enumerate()
            .map(|(j, f)| libm::ldexp(*f, -(j as i32 + 1)))
            .sum();
        F0EntropyReport {
            raw,
            bias_adjusted: (raw - 2.0) * self.t / ONE_MINUS_INV_E,
            m: self.m,
            m_tilde,
            t: self.t,
            epsilon: self.params.epsilon,
            epsilon0: self.params.epsilon0,
            epsilon_c: self.params.epsilon_c,
            level_counts,
            space_words: self.words,
            peak_space_words: self.peak,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::entropy_of_counts;

    fn exact_expectation(counts: &[u64], eps: f64, n: usize) -> f64 {
        let m: u64 = counts.iter().sum();
        let ratio = 1.0 + eps;
        let mut m_tilde = 1.0;
        while m_tilde * ratio <= m as f64 {
            m_tilde *= ratio;
        }
        let p = F0EntropyParams::new(eps, 0.05, 0.0, n, m);
        let t = p.dilation();
        (1..=p.levels() as u32)
            .map(|j| {
                let fj: f64 = counts.iter().map(|&f| level_inclusion_probability(f, m_tilde, t, j)).sum();
                libm::ldexp(fj, -(j as i32))
            })
            .sum()
    }

    #[test]
    fn inclusion_bounds_on_grid() {
        let eps = 0.1;
        let t = (1.0 + eps) * (1.0 + eps);
        for &m in &[1000u64, 5000, 20_000] {
            let mut m_tilde = 1.0;
            while m_tilde * (1.0 + eps) <= m as f64 {
                m_tilde *= 1.0 + eps;
            }
            for f in [1u64, 3, 10, 50, 200] {
                let p = f as f64 / m as f64;
                for j in 1..20u32 {
                    let s = libm::ldexp(p, j as i32);
                    if s > 1.0 {
                        continue;
                    }
                    let pr = level_inclusion_probability(f, m_tilde, t, j);
                    assert!(pr >= ONE_MINUS_INV_E * s / t - 1e-12, "m={m} f={f} j={j}");
                    assert!(pr <= (1.0 + eps) * (1.0 + eps) * s / t + 1e-12);
                }
            }
        }
    }

    #[test]
    fn inclusion_clamps() {
        assert_eq!(level_inclusion_probability(3, 1.0, 1.0, 4), 1.0);
        assert_eq!(level_inclusion_probability(0, 1.0, 1.0, 4), 0.0);
        assert_eq!(level_inclusion_probability(0, 1e6, 1.21, 4), 0.0);
    }

    #[test]
    fn sandwich_holds_for_exact_expectation() {
        let cases: [&[u64]; 4] = [
            &[4000, 4000, 4000, 4000],
            &[1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233, 377, 610, 987, 1597],
            &[10_000, 1],
            &[500; 32],
        ];
        for counts in cases {
            let n = counts.len().max(2);
            let h = entropy_of_counts(counts.iter().copied());
            let e = exact_expectation(counts, 0.1, n);
            let (lo, hi) = level_sum_sandwich(h, 0.1, 1.21);
            assert!(lo <= e && e <= hi, "{counts:?}: {lo} <= {e} <= {hi}");
        }
    }

    #[test]
    fn mean_matches_exact_expectation() {
        // 24 distinct items stay below the register count, so sketches are
        // exact and the only randomness is the level coins.
        let counts: Vec<u64> = (1..=24u64).map(|i| 10 * i).collect();
        let n = counts.len();
        let items: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| core::iter::repeat(i).take(c as usize))
            .collect();
        let m = items.len() as u64;
        let want = exact_expectation(&counts, 0.1, n);
        let trials = 300;
        let mut sum = 0.0;
        for seed in 0..trials {
            let p = F0EntropyParams::new(0.1, 0.05, 0.0, n, m).with_seed(seed);
            let mut est = F0EntropyEstimator::new(p).unwrap();
            est.extend(items.iter().copied()).unwrap();
            sum += est.finish().raw;
        }
        let mean = sum / trials as f64;
        assert!((mean - want).abs() < 0.03 * want, "{mean} vs {want}");
    }

    #[test]
    fn point_mass_raw_at_most_one() {
        let p = F0EntropyParams::new(0.1, 0.05, 0.1, 1024, 100_000).with_seed(2);
        let mut est = F0EntropyEstimator::new(p).unwrap();
        est.extend(core::iter::repeat(5).take(50_000)).unwrap();
        let r = est.finish();
        assert!(r.raw <= 1.0);
        assert!(r.level_counts.iter().all(|&f| f <= 1.0));
        assert!(r.within_window(0.0));
    }

    #[test]
    fn selected_rung_brackets_length() {
        let p = F0EntropyParams::new(0.1, 0.1, 0.1, 64, 10_000).with_seed(3);
        let mut est = F0EntropyEstimator::new(p).unwrap();
        est.extend((0..7777).map(|i| i % 64)).unwrap();
        let r = est.finish();
        assert!(r.m_tilde <= 7777.0 && 7777.0 < r.m_tilde * 1.1);
    }

    #[test]
    fn rejects_overlong_stream() {
        let p = F0EntropyParams::new(0.1, 0.1, 0.1, 64, 100);
        let mut est = F0EntropyEstimator::new(p).unwrap();
        est.extend((0..100).map(|i| i % 64)).unwrap();
        assert_eq!(
            est.insert(0),
            Err(Error::StreamTooLong { len: 101, max: 100 })
        );
    }

    #[test]
    fn uniform_stream_in_window() {
        let n = 1usize << 10;
        let m = 1u64 << 18;
        let p = F0EntropyParams::new(0.1, 0.05, 0.1, n, m).with_seed(4);
        let mut est = F0EntropyEstimator::new(p).unwrap();
        let mut rng = SplitMix64::new(8);
        for _ in 0..m {
            est.insert(rng.below_usize(n)).unwrap();
        }
        let r = est.finish();
        assert!(r.within_window(10.0), "{r:?}");
        assert!(r.peak_space_words >= r.space_words);
    }
}
