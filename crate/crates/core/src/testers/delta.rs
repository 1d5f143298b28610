// SPDX-License-Identifier: Apache-2.0


use hashbrown::{HashMap, HashSet};

use super::l2::{decide, l2_sample_count, L2Outcome, PairCounts};
use super::Verdict;
use crate::error::{Error, Result};
use crate::oracle::{CombinedOracle, Target};
use crate::rng::SplitMix64;

/// Default heaviness exponent.
pub const DEFAULT_ALPHA: f64 = 2.0 / 3.0;

/// Leading constant of the heavy-phase sample count.
pub const C_HEAVY: f64 = 1.0;

/// The heavy statistic fails the test above `ε / HEAVY_FAIL_DIVISOR`.
pub const HEAVY_FAIL_DIVISOR: f64 = 10.0;

/// Parameters of [`delta_test`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaTestParams {
    pub epsilon: f64,
    pub alpha: f64,
    pub delta: f64,
    /// Heavy-phase samples per distribution; `None` uses
    /// [`heavy_sample_count`].
    pub m: Option<u64>,
}

impl DeltaTestParams {
    pub fn new(epsilon: f64, delta: f64) -> Self {
        Self {
            epsilon,
            alpha: DEFAULT_ALPHA,
            delta,
            m: None,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_m(mut self, m: u64) -> Self {
        self.m = Some(m);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 2.0) {
            return Err(Error::InvalidParameter("delta test needs epsilon in (0, 2]".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter("alpha must lie in (0, 1)".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter("delta must lie in (0, 1)".into()));
        }
        if self.m == Some(0) {
            return Err(Error::InvalidParameter("m must be positive".into()));
        }
        Ok(())
    }
}

/// Heavy-phase samples per distribution:
/// `ceil(C_HEAVY · ln(2/δ) · n^α · ln n / ε²)`.
pub fn heavy_sample_count(n: usize, epsilon: f64, alpha: f64, delta: f64) -> u64 {
    let n = n.max(2) as f64;
    let m = C_HEAVY * libm::log(2.0 / delta) * libm::pow(n, alpha) * libm::log(n)
        / (epsilon * epsilon);
    (libm::ceil(m) as u64).max(1)
}

/// Samples that estimate every heavy item to within relative error `γ/100`:
/// `ceil(6 · n^α · ln(8·n^α/δ) / (γ/100)²)`.
///
/// This is a multiplicative Chernoff bound at mass `n^(−α)/2` with a union
/// bound over the at most `2n^α` such items per distribution.
pub fn l2_stage_sample_count(n: usize, alpha: f64, gamma: f64, delta: f64) -> u64 {
    let na = libm::pow(n as f64, alpha);
    let g = gamma / 100.0;
    libm::ceil(6.0 * na * libm::log(8.0 * na / delta) / (g * g)) as u64
}

/// Everything [`delta_test`] measured on the way to its verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTestOutcome {
    pub verdict: Verdict,
    pub m: u64,
    pub heavy_count: usize,
    /// `Σ_{i∈S} (p̃_i − q̃_i)² / (p̃_i + q̃_i)`.
    pub heavy_statistic: f64,
    /// Present when the heavy phase did not already fail.
    pub l2: Option<L2Outcome>,
    pub l2_epsilon: f64,
    pub b: f64,
}

/// Δ-tester with generative access only.
///
/// Heavy items (sample count `≥ m·n^(−α)` in either distribution) are
/// compared directly; the rest go through the ℓ2 tester on the filtered
/// distributions at `ε/(2√n)` with `b = n^(−α)(1+ε)`. `coins` supplies the
/// uniform replacements for filtered samples.
pub fn delta_test<O: CombinedOracle>(
    oracle: &mut O,
    params: &DeltaTestParams,
    coins: &mut SplitMix64,
) -> Result<DeltaTestOutcome> {
    params.validate()?;
    let n = oracle.n();
    let eps = params.epsilon;
    let m = params
        .m
        .unwrap_or_else(|| heavy_sample_count(n, eps, params.alpha, params.delta));

    let mut counts: HashMap<usize, [u64; 2]> = HashMap::new();
    for w in [Target::P, Target::Q] {
        for _ in 0..m {
            counts.entry(oracle.sample(w)?).or_default()[w.slot()] += 1;
        }
    }

    let n_alpha = libm::pow(n as f64, -params.alpha);
    let cutoff = m as f64 * n_alpha;
    let mf = m as f64;
    let mut heavy = HashSet::new();
    let mut heavy_statistic = 0.0;
    for (&i, &[np, nq]) in &counts {
        if np.max(nq) as f64 >= cutoff {
            heavy.insert(i);
            let (pt, qt) = (np as f64 / mf, nq as f64 / mf);
            heavy_statistic += (pt - qt) * (pt - qt) / (pt + qt);
        }
    }

    let l2_epsilon = eps / (2.0 * libm::sqrt(n as f64));
    let b = (n_alpha * (1.0 + eps)).min(1.0);
    let mut outcome = DeltaTestOutcome {
        verdict: Verdict::Fail,
        m,
        heavy_count: heavy.len(),
        heavy_statistic,
        l2: None,
        l2_epsilon,
        b,
    };
    if heavy_statistic > eps / HEAVY_FAIL_DIVISOR {
        return Ok(outcome);
    }

    let s = l2_sample_count(l2_epsilon, params.delta, b)?;
    let mut is_heavy = alloc::vec![false; n];
    for &i in &heavy {
        is_heavy[i] = true;
    }
    let mut filtered = PairCounts::new(n);
    for w in [Target::P, Target::Q] {
        for _ in 0..s {
            let i = oracle.sample(w)?;
            filtered.add(w, if is_heavy[i] { coins.below_usize(n) } else { i });
        }
    }
    let l2 = decide(filtered.statistic(), l2_epsilon, s);
    outcome.verdict = l2.verdict;
    outcome.l2 = Some(l2);
    Ok(outcome)
}

/// The filtered distribution: heavy items' mass spread uniformly over `[n]`.
#[cfg(test)]
pub(crate) fn filtered_probs(p: &[f64], heavy: &HashSet<usize>) -> Vec<f64> {
    let n = p.len();
    let moved: f64 = heavy.iter().map(|&i| p[i]).sum();
    (0..n)
        .map(|i| {
            let own = if heavy.contains(&i) { 0.0 } else { p[i] };
            own + moved / n as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{divergence_exact, Distribution, DivergenceKind};
    use crate::oracle::OracleSession;

    fn run(p: &Distribution, q: &Distribution, params: &DeltaTestParams, seed: u64) -> Verdict {
        let mut s = OracleSession::pair(p, q, seed).unwrap();
        let mut coins = SplitMix64::derive(seed, 2);
        delta_test(&mut s, params, &mut coins).unwrap().verdict
    }

    #[test]
    fn sample_counts() {
        let m = heavy_sample_count(10_000, 0.5, DEFAULT_ALPHA, 0.05);
        let direct = 40f64.ln() * 10_000f64.powf(2.0 / 3.0) * 10_000f64.ln() / 0.25;
        assert_eq!(m, direct.ceil() as u64);
        let l = l2_stage_sample_count(64, DEFAULT_ALPHA, 2.0, 0.05);
        let na = 64f64.powf(2.0 / 3.0);
        assert_eq!(l, (6.0 * na * (8.0 * na / 0.05).ln() / 0.0004).ceil() as u64);
    }

    #[test]
    fn rejects_bad_params() {
        let p = Distribution::uniform(4).unwrap();
        let mut s = OracleSession::pair(&p, &p, 0).unwrap();
        let mut coins = SplitMix64::new(0);
        for params in [
            DeltaTestParams::new(0.0, 0.05),
            DeltaTestParams::new(0.5, 0.05).with_alpha(1.0),
            DeltaTestParams::new(0.5, 0.0),
            DeltaTestParams::new(0.5, 0.05).with_m(0),
        ] {
            assert!(delta_test(&mut s, &params, &mut coins).is_err());
        }
    }

    #[test]
    fn identical_pair_passes() {
        let p = Distribution::from_weights(&(1..=200).map(|i| 1.0 / i as f64).collect::<Vec<_>>())
            .unwrap();
        let params = DeltaTestParams::new(0.5, 0.05);
        let passes = (0..40).filter(|&s| run(&p, &p, &params, s).passed()).count();
        assert!(passes >= 38, "{passes}/40");
    }

    #[test]
    fn disjoint_pair_fails() {
        let n = 400;
        let half = |lo: usize| {
            Distribution::new((0..n).map(|i| if (i >= lo) && i < lo + n / 2 { 2.0 / n as f64 } else { 0.0 }).collect())
                .unwrap()
        };
        let (p, q) = (half(0), half(n / 2));
        let params = DeltaTestParams::new(0.5, 0.05);
        let fails = (0..40).filter(|&s| !run(&p, &q, &params, s).passed()).count();
        assert!(fails >= 38, "{fails}/40");
    }

    #[test]
    fn pass_region_pair_with_heavy_difference() {
        // The pair differs only on two heavy items, by a Δ inside the
        // pass region ε²/n^(1−α).
        let n = 1000usize;
        let eps = 0.5;
        let target = eps * eps / libm::pow(n as f64, 1.0 - DEFAULT_ALPHA);
        let mut a = alloc::vec![0.5 / (n - 2) as f64; n];
        a[0] = 0.25;
        a[1] = 0.25;
        let mut c = a.clone();
        // Each item contributes d²/(1/2 ± d), about 2d².
        let d = libm::sqrt(target / 8.0);
        c[0] += d;
        c[1] -= d;
        let p = Distribution::new(a).unwrap();
        let q = Distribution::new(c).unwrap();
        let tri = divergence_exact(DivergenceKind::Triangle, &p, &q).unwrap();
        assert!(tri <= target, "{tri} > {target}");
        let params = DeltaTestParams::new(eps, 0.05);
        let passes = (0..40).filter(|&s| run(&p, &q, &params, s).passed()).count();
        assert!(passes >= 38, "{passes}/40");
    }

    #[test]
    fn heavy_estimates_meet_relative_accuracy() {
        // Every item whose estimate is heavy is within γ/100 relative error.
        let n = 64usize;
        let (alpha, gamma, delta) = (DEFAULT_ALPHA, 2.0, 0.05);
        let m = l2_stage_sample_count(n, alpha, gamma, delta);
        let w: Vec<f64> = (0..n).map(|i| 1.0 / (1 + i) as f64).collect();
        let p = Distribution::from_weights(&w).unwrap();
        let heavy_cut = libm::pow(n as f64, -alpha);
        let trials = 20;
        let mut good = 0;
        for seed in 0..trials {
            let mut s = OracleSession::single(&p, seed);
            let mut c = alloc::vec![0u64; n];
            for _ in 0..m {
                c[s.sample(Target::P).unwrap()] += 1;
            }
            let ok = (0..n).all(|i| {
                let est = c[i] as f64 / m as f64;
                est <= heavy_cut || (est - p.probs()[i]).abs() <= p.probs()[i] * gamma / 100.0
            });
            good += ok as u64;
        }
        assert!(good as f64 >= (1.0 - delta / 2.0) * trials as f64 - 1.0, "{good}/{trials}");
    }

    #[test]
    fn filtered_distribution_is_valid_and_flat() {
        let n = 500usize;
        let alpha = DEFAULT_ALPHA;
        let eps = 0.5;
        let w: Vec<f64> = (0..n).map(|i| 1.0 / (1 + i) as f64).collect();
        let p = Distribution::from_weights(&w).unwrap();
        let m = heavy_sample_count(n, eps, alpha, 0.05);
        let cutoff = m as f64 * libm::pow(n as f64, -alpha);
        let mut s = OracleSession::single(&p, 3);
        let mut c = alloc::vec![0u64; n];
        for _ in 0..m {
            c[s.sample(Target::P).unwrap()] += 1;
        }
        let heavy: HashSet<usize> = (0..n).filter(|&i| c[i] as f64 >= cutoff).collect();
        let f = filtered_probs(p.probs(), &heavy);
        let filtered = Distribution::new(f).unwrap();
        assert!(filtered.max_prob() < libm::pow(n as f64, -alpha) * (1.0 + eps));
    }
}
