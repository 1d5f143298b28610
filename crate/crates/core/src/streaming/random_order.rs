// SPDX-License-Identifier: Apache-2.0

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use hashbrown::HashMap;

use super::StreamOrder;
use crate::dist::entropy_of_counts;
use crate::error::{Error, Result};
use crate::oracle::{CombinedOracle, Target};
use crate::rng::{SplitMix64, UniformSource};
use crate::testers::combined_entropy_iterations;

/// Default multiplier of the accumulated multiset size `c1·log2 n`.
pub const C1_DEFAULT: f64 = 8.0;
/// Default multiplier of the query count `C·ε⁻²·log2 n`.
pub const C_QUERY_DEFAULT: f64 = 48.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RandomOrderParams {
    pub epsilon: f64,
    pub n: usize,
    pub c1: f64,
    pub c_query: f64,
    pub seed: u64,
}

impl RandomOrderParams {
    pub fn new(epsilon: f64, n: usize) -> Self {
        Self {
            epsilon,
            n,
            c1: C1_DEFAULT,
            c_query: C_QUERY_DEFAULT,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_constants(mut self, c1: f64, c_query: f64) -> Self {
        self.c1 = c1;
        self.c_query = c_query;
        self
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon must lie in (0, 1)");
        }
        if self.n < 2 {
            return bad("n must be at least 2");
        }
        if !(self.c1 > 0.0 && self.c_query > 0.0) {
            return bad("c1 and c_query must be positive");
        }
        Ok(())
    }

    /// `ceil(c1·log2 n)`.
    pub fn ms_size(&self) -> usize {
        (libm::ceil(self.c1 * libm::log2(self.n as f64)) as usize).max(1)
    }

    /// `t = ceil(C·ε⁻²·log2 n)`.
    pub fn queries(&self) -> u64 {
        let e = self.epsilon;
        (libm::ceil(self.c_query * libm::log2(self.n as f64) / (e * e)) as u64).max(1)
    }
}

/// Outcome of the random-order estimator.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RandomOrderReport {
    /// Entropy estimate in bits.
    pub estimate: f64,
    pub m: u64,
    /// Tokens outside `A`.
    pub m_proj: u64,
    /// `w = m_proj/m`.
    pub w: f64,
    /// `Σ_{A} (c/m)·log2(m/c)`.
    pub h_a: f64,
    /// Entropy of the stream projected off `A`, estimated or exact.
    pub h_proj: f64,
    /// Whether the projection was small enough to be counted exactly.
    pub exact_projection: bool,
    pub absorptions: u32,
    pub a_size: usize,
    pub queries: u64,
    pub space_words: usize,
    pub peak_space_words: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Accumulating,
    Simulating,
}

/// Single-pass entropy estimator for randomly ordered streams.
///
/// Items of `A` are counted exactly. Tokens outside `A` fill a multiset
/// `MS`; when one item holds half of `MS`, all of `MS` joins `A` and a new
/// round starts. Otherwise the projection off `A` is estimated by running
/// the combined-oracle entropy estimator on draws served from `MS` and the
/// following `t` tokens (`Prefix`), corrected to be i.i.d. A ring buffer of
/// the last `t + |MS|` projection tokens makes short projections exact.
pub struct RandomOrderEstimator {
    params: RandomOrderParams,
    ms_size: usize,
    t: u64,
    tail_cap: usize,
    phase: Phase,
    a: HashMap<usize, u64>,
    ms: Vec<usize>,
    proj_counts: HashMap<usize, u64>,
    prefix: Vec<usize>,
    tail: VecDeque<usize>,
    m: u64,
    m_proj: u64,
    absorptions: u32,
    peak: usize,
}

impl RandomOrderEstimator {
    /// The input must be flagged as randomly ordered.
    pub fn new(params: RandomOrderParams, order: StreamOrder) -> Result<Self> {
        params.validate()?;
        if order != StreamOrder::Shuffled {
            return Err(Error::NotRandomOrder);
        }
        let ms_size = params.ms_size();
        let t = params.queries();
        Ok(Self {
            params,
            ms_size,
            t,
            tail_cap: t as usize + ms_size,
            phase: Phase::Accumulating,
            a: HashMap::new(),
            ms: Vec::with_capacity(ms_size),
            proj_counts: HashMap::new(),
            prefix: Vec::new(),
            tail: VecDeque::new(),
            m: 0,
            m_proj: 0,
            absorptions: 0,
            peak: 0,
        })
    }

    pub fn len(&self) -> u64 {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn space_words(&self) -> usize {
        2 * self.a.len()
            + self.ms.len()
            + 2 * self.proj_counts.len()
            + self.prefix.len()
            + self.tail.len()
            + 8
    }

    pub fn insert(&mut self, item: usize) -> Result<()> {
        if item >= self.params.n {
            return Err(Error::IndexOutOfRange {
                index: item,
                n: self.params.n,
            });
        }
        self.m += 1;
        if let Some(c) = self.a.get_mut(&item) {
            *c += 1;
            return Ok(());
        }
        self.m_proj += 1;
        if self.tail.len() == self.tail_cap {
            self.tail.pop_front();
        }
        self.tail.push_back(item);
        match self.phase {
            Phase::Accumulating => {
                self.ms.push(item);
                if self.ms.len() == self.ms_size {
                    self.end_round();
                }
            }
            Phase::Simulating => {
                let in_prefix = (self.prefix.len() as u64) < self.t;
                if let Some(c) = self.proj_counts.get_mut(&item) {
                    *c += 1;
                } else if in_prefix {
                    self.proj_counts.insert(item, 1);
                }
                if in_prefix {
                    self.prefix.push(item);
                }
            }
        }
        self.peak = self.peak.max(self.space_words());
        Ok(())
    }

    fn end_round(&mut self) {
        let mut counts: HashMap<usize, u64> = HashMap::new();
        for &i in &self.ms {
            *counts.entry(i).or_default() += 1;
        }
        let top = counts.values().copied().max().unwrap_or(0);
        let dominant = top as f64 >= self.params.c1 * libm::log2(self.params.n as f64) / 2.0;
        if dominant {
            for (i, c) in counts {
                *self.a.entry(i).or_default() += c;
            }
            self.ms.clear();
            self.tail.clear();
            self.m_proj = 0;
            self.absorptions += 1;
        } else {
            self.proj_counts = counts;
            self.phase = Phase::Simulating;
        }
    }

    pub fn extend(&mut self, items: impl IntoIterator<Item = usize>) -> Result<()> {
        items.into_iter().try_for_each(|i| self.insert(i))
    }

    pub fn finish(&self) -> Result<RandomOrderReport> {
        self.finish_with(SplitMix64::derive(self.params.seed, 0x5A))
    }

    pub fn finish_with<U: UniformSource>(&self, source: U) -> Result<RandomOrderReport> {
        let m = self.m as f64;
        // Sorted so the floating-point sum does not depend on map order.
        let mut a_counts: Vec<u64> = self.a.values().copied().collect();
        a_counts.sort_unstable();
        let h_a: f64 = a_counts
            .iter()
            .map(|&c| (c as f64 / m) * libm::log2(m / c as f64))
            .sum();
        let mut report = RandomOrderReport {
            estimate: h_a,
            m: self.m,
            m_proj: self.m_proj,
            w: 0.0,
            h_a,
            h_proj: 0.0,
            exact_projection: true,
            absorptions: self.absorptions,
            a_size: self.a.len(),
            queries: 0,
            space_words: self.space_words(),
            peak_space_words: self.peak,
        };
        if self.m_proj == 0 {
            return Ok(report);
        }
        report.w = self.m_proj as f64 / m;
        if self.m_proj as usize <= self.tail_cap {
            let mut counts: HashMap<usize, u64> = HashMap::new();
            for &i in &self.tail {
                *counts.entry(i).or_default() += 1;
            }
            let mut counts: Vec<u64> = counts.into_values().collect();
            counts.sort_unstable();
            report.h_proj = entropy_of_counts(counts);
        } else {
            let mut urn = UrnOracle {
                sampler: UrnSampler::new(self.ms.clone(), &self.prefix, self.m_proj, source),
                counts: &self.proj_counts,
                n: self.params.n.max(cube_root_ceil(self.m_proj) + 1),
            };
            report.h_proj = combined_entropy_iterations(&mut urn, self.t)?;
            report.exact_projection = false;
            report.queries = self.t;
        }
        report.estimate = h_a + report.w * libm::log2(1.0 / report.w) + report.w * report.h_proj;
        Ok(report)
    }
}

fn cube_root_ceil(x: u64) -> usize {
    let mut r = libm::cbrt(x as f64) as u64;
    while r.saturating_mul(r).saturating_mul(r) < x {
        r += 1;
    }
    r as usize
}

/// I.i.d. draws from the empirical distribution of a randomly ordered
/// population of size `m`, given its first elements (`pool`) and a window
/// of the elements that follow (`fresh`).
///
/// Each draw picks `r ∈ [0, m)`: below the pool size it repeats `pool[r]`,
/// otherwise it takes the next fresh element and adds it to the pool.
pub(crate) struct UrnSampler<'a, U> {
    pool: Vec<usize>,
    fresh: &'a [usize],
    next: usize,
    m: u64,
    source: U,
}

impl<'a, U: UniformSource> UrnSampler<'a, U> {
    pub(crate) fn new(pool: Vec<usize>, fresh: &'a [usize], m: u64, source: U) -> Self {
        Self {
            pool,
            fresh,
            next: 0,
            m,
            source,
        }
    }

    pub(crate) fn draw(&mut self) -> Result<usize> {
        let r = self.source.below(self.m) as usize;
        if r < self.pool.len() {
            return Ok(self.pool[r]);
        }
        let x = *self.fresh.get(self.next).ok_or(Error::PlanExhausted)?;
        self.next += 1;
        self.pool.push(x);
        Ok(x)
    }
}

/// Combined oracle for the projection: draws from the urn, probes from the
/// exact projection counts.
struct UrnOracle<'a, U> {
    sampler: UrnSampler<'a, U>,
    counts: &'a HashMap<usize, u64>,
    n: usize,
}

impl<U: UniformSource> CombinedOracle for UrnOracle<'_, U> {
    fn n(&self) -> usize {
        self.n
    }

    fn sample(&mut self, which: Target) -> Result<usize> {
        match which {
            Target::P => self.sampler.draw(),
            Target::Q => Err(Error::NoSuchTarget),
        }
    }

    fn probe(&mut self, which: Target, index: usize) -> Result<f64> {
        if which == Target::Q {
            return Err(Error::NoSuchTarget);
        }
        let c = self.counts.get(&index).ok_or(Error::UnprobedIndex { index })?;
        Ok(*c as f64 / self.sampler.m as f64)
    }
}
