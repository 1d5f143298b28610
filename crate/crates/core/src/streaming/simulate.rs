// SPDX-License-Identifier: Apache-2.0

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Reverse;

use hashbrown::{HashMap, HashSet};

use super::{StreamOrder, StreamToken};
use crate::error::{Error, Result};
use crate::oracle::{CombinedOracle, Target};
use crate::rng::{SplitMix64, UniformSource};

fn check_token(n: usize, pair: bool, token: &StreamToken) -> Result<usize> {
    if token.item >= n {
        return Err(Error::IndexOutOfRange {
            index: token.item,
            n,
        });
    }
    if token.dist == Target::Q && !pair {
        return Err(Error::NoSuchTarget);
    }
    Ok(token.dist.slot())
}

/// Up to `count` distinct indices drawn uniformly from `[n] ∖ exclude`.
fn uniform_outside(
    n: usize,
    exclude: &HashSet<usize>,
    count: usize,
    rng: &mut SplitMix64,
) -> Vec<usize> {
    let available = n - exclude.len();
    let count = count.min(available);
    if count * 2 <= available {
        let mut chosen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let i = rng.below_usize(n);
            if !exclude.contains(&i) && chosen.insert(i) {
                out.push(i);
            }
        }
        out
    } else {
        let mut pool: Vec<usize> = (0..n).filter(|i| !exclude.contains(i)).collect();
        for k in 0..count {
            let j = k + rng.below_usize(pool.len() - k);
            pool.swap(k, j);
        }
        pool.truncate(count);
        pool
    }
}

/// One-pass stream simulation of a canonical combined-oracle algorithm on a
/// randomly ordered stream.
///
/// Stores the first `t` tokens of each distribution, exact counters for
/// every item seen until both prefixes are full, and counters for `t`
/// uniformly chosen unseen indices. For two distributions the counters start
/// at the first token of the stream, so probes of either distribution at
/// any prefix item are exact.
pub struct OnePassSimulator {
    n: usize,
    t: usize,
    pair: bool,
    rng: SplitMix64,
    window_open: bool,
    prefix: [Vec<usize>; 2],
    counts: HashMap<usize, [u64; 2]>,
    extra: Vec<usize>,
    m: [u64; 2],
    peak: usize,
}

impl OnePassSimulator {
    pub fn new(n: usize, t: usize, pair: bool, order: StreamOrder, seed: u64) -> Result<Self> {
        if order != StreamOrder::Shuffled {
            return Err(Error::NotRandomOrder);
        }
        if t == 0 || n == 0 {
            return Err(Error::InvalidParameter("n and t must be positive".into()));
        }
        Ok(Self {
            n,
            t,
            pair,
            rng: SplitMix64::derive(seed, 0x1F),
            window_open: true,
            prefix: [Vec::new(), Vec::new()],
            counts: HashMap::new(),
            extra: Vec::new(),
            m: [0; 2],
            peak: 0,
        })
    }

    pub fn space_words(&self) -> usize {
        self.prefix[0].len() + self.prefix[1].len() + 3 * self.counts.len() + self.extra.len() + 2
    }

    pub fn peak_space_words(&self) -> usize {
        self.peak.max(self.space_words())
    }

    pub fn lengths(&self) -> [u64; 2] {
        self.m
    }

    pub fn insert(&mut self, token: StreamToken) -> Result<()> {
        let w = check_token(self.n, self.pair, &token)?;
        self.m[w] += 1;
        if self.window_open {
            if self.prefix[w].len() < self.t {
                self.prefix[w].push(token.item);
            }
            self.counts.entry(token.item).or_default()[w] += 1;
            let full = self.prefix[0].len() == self.t && (!self.pair || self.prefix[1].len() == self.t);
            if full {
                self.close_window();
            }
            self.peak = self.peak.max(self.space_words());
        } else if let Some(c) = self.counts.get_mut(&token.item) {
            c[w] += 1;
        }
        Ok(())
    }

    pub fn extend(&mut self, tokens: impl IntoIterator<Item = StreamToken>) -> Result<()> {
        tokens.into_iter().try_for_each(|t| self.insert(t))
    }

    fn close_window(&mut self) {
        self.window_open = false;
        let sampled: HashSet<usize> = self.prefix.iter().flatten().copied().collect();
        self.extra = uniform_outside(self.n, &sampled, self.t, &mut self.rng);
        for &i in &self.extra {
            self.counts.entry(i).or_default();
        }
    }

    /// Ends the pass. Streams shorter than the prefix are fully counted.
    pub fn finish(&mut self) {
        if self.window_open {
            self.close_window();
        }
    }

    /// Indices chosen uniformly outside the sampled set.
    pub fn extra_indices(&self) -> &[usize] {
        &self.extra
    }

    /// A combined oracle answering from the stored state; `source` drives
    /// the resampling correction.
    pub fn oracle<U: UniformSource>(&self, source: U) -> Result<OnePassOracle<'_, U>> {
        if self.window_open {
            return Err(Error::InvalidParameter("pass not finished".into()));
        }
        Ok(OnePassOracle {
            sim: self,
            calls: [0; 2],
            source,
        })
    }
}

/// Combined oracle served by a finished [`OnePassSimulator`].
///
/// The `j`-th draw from a distribution with `m` tokens returns prefix token
/// `j` with probability `(m−j+1)/m` and otherwise a uniformly chosen earlier
/// prefix token, which makes the draws i.i.d. from the empirical
/// distribution.
pub struct OnePassOracle<'a, U> {
    sim: &'a OnePassSimulator,
    calls: [usize; 2],
    source: U,
}

impl<U: UniformSource> CombinedOracle for OnePassOracle<'_, U> {
    fn n(&self) -> usize {
        self.sim.n
    }

    fn sample(&mut self, which: Target) -> Result<usize> {
        if which == Target::Q && !self.sim.pair {
            return Err(Error::NoSuchTarget);
        }
        let w = which.slot();
        let prefix = &self.sim.prefix[w];
        let j = self.calls[w] + 1;
        if j > prefix.len() {
            return Err(Error::PlanExhausted);
        }
        let m = self.sim.m[w];
        let keep = m - j as u64 + 1;
        let r = self.source.below(m);
        self.calls[w] = j;
        Ok(if r < keep {
            prefix[j - 1]
        } else {
            prefix[(r - keep) as usize]
        })
    }

    fn probe(&mut self, which: Target, index: usize) -> Result<f64> {
        if which == Target::Q && !self.sim.pair {
            return Err(Error::NoSuchTarget);
        }
        if index >= self.sim.n {
            return Err(Error::IndexOutOfRange { index, n: self.sim.n });
        }
        let w = which.slot();
        let c = self.sim.counts.get(&index).ok_or(Error::UnprobedIndex { index })?;
        Ok(c[w] as f64 / self.sim.m[w] as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pass {
    First,
    Second,
}

/// Two-pass stream simulation of a canonical combined-oracle algorithm.
///
/// Pass one runs `t` independent size-one reservoirs per distribution
/// (a sample with replacement) using skip counts, then fixes the probe set
/// as the sampled items plus `t` uniform unsampled indices. Pass two counts
/// the probe set exactly. Any arrival order works.
pub struct TwoPassSimulator {
    n: usize,
    t: usize,
    pair: bool,
    rng: SplitMix64,
    pass: Pass,
    reservoirs: [Vec<usize>; 2],
    /// Next replacement position per reservoir, smallest first.
    schedule: [BinaryHeap<Reverse<(u64, usize)>>; 2],
    m: [u64; 2],
    m2: [u64; 2],
    counts: HashMap<usize, [u64; 2]>,
    extra: Vec<usize>,
}

impl TwoPassSimulator {
    pub fn new(n: usize, t: usize, pair: bool, seed: u64) -> Result<Self> {
        if t == 0 || n == 0 {
            return Err(Error::InvalidParameter("n and t must be positive".into()));
        }
        let start = || (0..t).map(|k| Reverse((1u64, k))).collect::<BinaryHeap<_>>();
        Ok(Self {
            n,
            t,
            pair,
            rng: SplitMix64::derive(seed, 0x2F),
            pass: Pass::First,
            reservoirs: [alloc::vec![usize::MAX; t], alloc::vec![usize::MAX; if pair { t } else { 0 }]],
            schedule: [start(), if pair { start() } else { BinaryHeap::new() }],
            m: [0; 2],
            m2: [0; 2],
            counts: HashMap::new(),
            extra: Vec::new(),
        })
    }

    pub fn space_words(&self) -> usize {
        3 * (self.reservoirs[0].len() + self.reservoirs[1].len()) + 3 * self.counts.len() + self.extra.len() + 4
    }

    /// Next position `K > k` at which a size-one reservoir replaces its
    /// item: `P(K > x) = k/x`.
    fn skip(&mut self, k: u64) -> u64 {
        let u = 1.0 - self.rng.next_f64();
        let next = libm::floor(k as f64 / u) + 1.0;
        if next >= u64::MAX as f64 {
            u64::MAX
        } else {
            (next as u64).max(k + 1)
        }
    }

    pub fn insert_first(&mut self, token: StreamToken) -> Result<()> {
        if self.pass != Pass::First {
            return Err(Error::InvalidParameter("first pass already ended".into()));
        }
        let w = check_token(self.n, self.pair, &token)?;
        self.m[w] += 1;
        let k = self.m[w];
        while let Some(&Reverse((pos, r))) = self.schedule[w].peek() {
            if pos != k {
                break;
            }
            self.schedule[w].pop();
            self.reservoirs[w][r] = token.item;
            let next = self.skip(k);
            self.schedule[w].push(Reverse((next, r)));
        }
        Ok(())
    }

    /// Ends pass one and fixes the probe set.
    pub fn begin_second_pass(&mut self) -> Result<()> {
        if self.pass != Pass::First {
            return Err(Error::InvalidParameter("first pass already ended".into()));
        }
        self.pass = Pass::Second;
        let sampled: HashSet<usize> = self
            .reservoirs
            .iter()
            .flatten()
            .copied()
            .filter(|&i| i != usize::MAX)
            .collect();
        self.extra = uniform_outside(self.n, &sampled, self.t, &mut self.rng);
        for &i in sampled.iter().chain(&self.extra) {
            self.counts.insert(i, [0; 2]);
        }
        Ok(())
    }

    pub fn insert_second(&mut self, token: StreamToken) -> Result<()> {
        if self.pass != Pass::Second {
            return Err(Error::InvalidParameter("second pass not started".into()));
        }
        let w = check_token(self.n, self.pair, &token)?;
        self.m2[w] += 1;
        if let Some(c) = self.counts.get_mut(&token.item) {
            c[w] += 1;
        }
        Ok(())
    }

    /// Runs both passes over a replayable token sequence.
    pub fn run(&mut self, tokens: &[StreamToken]) -> Result<()> {
        tokens.iter().try_for_each(|&t| self.insert_first(t))?;
        self.begin_second_pass()?;
        tokens.iter().try_for_each(|&t| self.insert_second(t))
    }

    pub fn extra_indices(&self) -> &[usize] {
        &self.extra
    }

    pub fn oracle(&self) -> Result<TwoPassOracle<'_>> {
        if self.pass != Pass::Second || self.m != self.m2 {
            return Err(Error::InvalidParameter(
                "second pass must replay the first pass".into(),
            ));
        }
        let active = if self.pair { 2 } else { 1 };
        if self.m[..active].contains(&0) {
            return Err(Error::InvalidParameter("empty stream".into()));
        }
        Ok(TwoPassOracle {
            sim: self,
            cursor: [0; 2],
        })
    }
}

/// Combined oracle served by a finished [`TwoPassSimulator`].
pub struct TwoPassOracle<'a> {
    sim: &'a TwoPassSimulator,
    cursor: [usize; 2],
}

impl CombinedOracle for TwoPassOracle<'_> {
    fn n(&self) -> usize {
        self.sim.n
    }

    fn sample(&mut self, which: Target) -> Result<usize> {
        if which == Target::Q && !self.sim.pair {
            return Err(Error::NoSuchTarget);
        }
        let w = which.slot();
        let i = *self.sim.reservoirs[w]
            .get(self.cursor[w])
            .ok_or(Error::PlanExhausted)?;
        self.cursor[w] += 1;
        Ok(i)
    }

    fn probe(&mut self, which: Target, index: usize) -> Result<f64> {
        if which == Target::Q && !self.sim.pair {
            return Err(Error::NoSuchTarget);
        }
        if index >= self.sim.n {
            return Err(Error::IndexOutOfRange { index, n: self.sim.n });
        }
        let w = which.slot();
        let c = self.sim.counts.get(&index).ok_or(Error::UnprobedIndex { index })?;
        Ok(c[w] as f64 / self.sim.m[w] as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{divergence_exact, Distribution, DivergenceKind};
    use crate::streaming::tests::{for_each_permutation, Replay};
    use crate::streaming::{generate_items, generate_pair_tokens};
    use crate::testers::{combined_distance_iterations, combined_entropy_iterations};

    fn tokens(items: &[usize]) -> Vec<StreamToken> {
        items.iter().map(|&i| StreamToken::p(i)).collect()
    }

    /// Tally of the first `draws` simulated calls over all permutations and
    /// all correction draws; checks it equals `m!·m^draws·Π f/m`.
    fn exhaustive(pop: &[usize], draws: u32) {
        let m = pop.len();
        let n = pop.iter().max().unwrap() + 1;
        let f: Vec<u64> = (0..n).map(|i| pop.iter().filter(|&&x| x == i).count() as u64).collect();
        let mut tally: HashMap<Vec<usize>, u64> = HashMap::new();
        let mut perms = 0u64;
        for_each_permutation(m, |perm| {
            let order: Vec<usize> = perm.iter().map(|&k| pop[k]).collect();
            let mut sim = OnePassSimulator::new(n, draws as usize, false, StreamOrder::Shuffled, 0).unwrap();
            sim.extend(tokens(&order)).unwrap();
            sim.finish();
            for code in 0..(m as u64).pow(draws) {
                let mut o = sim.oracle(Replay::from_code(code, m as u64, draws)).unwrap();
                let out: Vec<usize> = (0..draws).map(|_| o.sample(Target::P).unwrap()).collect();
                *tally.entry(out).or_default() += 1;
            }
            perms += 1;
        });
        let mut total = 0u64;
        for (tuple, &count) in &tally {
            let want: u64 = perms * tuple.iter().map(|&i| f[i]).product::<u64>();
            assert_eq!(count, want, "{pop:?} {tuple:?}");
            total += count;
        }
        assert_eq!(total, perms * (m as u64).pow(draws));
    }

    #[test]
    fn corrected_calls_are_multinomial() {
        exhaustive(&[0, 0, 1], 3);
        exhaustive(&[0, 0, 0, 1, 1, 2], 3);
        exhaustive(&[0, 1, 1, 2, 2, 2, 3], 2);
    }

    #[test]
    fn uniform_stream_gives_log_n() {
        let n = 64;
        let mut items: Vec<usize> = (0..n * 50).map(|i| i % n).collect();
        SplitMix64::new(1).shuffle(&mut items);
        let mut sim = OnePassSimulator::new(n, 500, false, StreamOrder::Shuffled, 2).unwrap();
        sim.extend(tokens(&items)).unwrap();
        sim.finish();
        let mut o = sim.oracle(SplitMix64::new(3)).unwrap();
        assert_eq!(combined_entropy_iterations(&mut o, 500).unwrap(), 6.0);
        assert_eq!(o.sample(Target::P), Err(Error::PlanExhausted));
    }

    #[test]
    fn probe_outside_counted_sets_is_rejected() {
        let mut sim = OnePassSimulator::new(1000, 4, false, StreamOrder::Shuffled, 2).unwrap();
        sim.extend(tokens(&[1, 2, 3, 4, 5, 6])).unwrap();
        sim.finish();
        let counted: HashSet<usize> = [1, 2, 3, 4].into_iter().chain(sim.extra_indices().iter().copied()).collect();
        let outside = (0..1000).find(|i| !counted.contains(i)).unwrap();
        let mut o = sim.oracle(SplitMix64::new(0)).unwrap();
        assert_eq!(o.probe(Target::P, outside), Err(Error::UnprobedIndex { index: outside }));
        // Items seen after the prefix but never sampled are not counted.
        if !counted.contains(&6) {
            assert!(o.probe(Target::P, 6).is_err());
        }
        assert_eq!(o.probe(Target::P, 2).unwrap(), 1.0 / 6.0);
        assert_eq!(sim.extra_indices().len(), 4);
        assert!(sim.extra_indices().iter().all(|i| ![1, 2, 3, 4].contains(i)));
    }

    #[test]
    fn one_pass_requires_random_order() {
        assert!(matches!(
            OnePassSimulator::new(4, 2, false, StreamOrder::AsGiven, 0),
            Err(Error::NotRandomOrder)
        ));
    }

    #[test]
    fn pair_probes_use_whole_stream_counts() {
        let p = Distribution::new(alloc::vec![0.5, 0.25, 0.25, 0.0]).unwrap();
        let q = Distribution::new(alloc::vec![0.25, 0.25, 0.25, 0.25]).unwrap();
        let toks = generate_pair_tokens(&p, &q, 4000, 4000, StreamOrder::Shuffled, 8).unwrap();
        let mut sim = OnePassSimulator::new(4, 100, true, StreamOrder::Shuffled, 1).unwrap();
        sim.extend(toks.iter().copied()).unwrap();
        sim.finish();
        let mut o = sim.oracle(SplitMix64::new(4)).unwrap();
        for w in [Target::P, Target::Q] {
            for i in 0..4 {
                let exact = toks.iter().filter(|t| t.dist == w && t.item == i).count() as f64 / 4000.0;
                assert_eq!(o.probe(w, i).unwrap(), exact);
            }
        }
        let js = combined_distance_iterations(&mut o, DivergenceKind::JensenShannon, 100).unwrap();
        let exact = divergence_exact(DivergenceKind::JensenShannon, &p, &q).unwrap();
        assert!((js - exact).abs() < 0.1, "{js} vs {exact}");
    }

    #[test]
    fn reservoirs_are_uniform() {
        let items: Vec<usize> = (0..8).collect();
        let mut hist = [0u32; 8];
        for seed in 0..2000 {
            let mut sim = TwoPassSimulator::new(8, 4, false, seed).unwrap();
            sim.run(&tokens(&items)).unwrap();
            let mut o = sim.oracle().unwrap();
            for _ in 0..4 {
                hist[o.sample(Target::P).unwrap()] += 1;
            }
        }
        // 8000 draws, 1000 expected per cell, sd about 30.
        assert!(hist.iter().all(|&h| (850..1150).contains(&h)), "{hist:?}");
    }

    #[test]
    fn two_pass_matches_exact_counts() {
        let d = Distribution::uniform(32).unwrap();
        let items = generate_items(&d, 5000, StreamOrder::AsGiven, 3);
        let mut sim = TwoPassSimulator::new(32, 300, false, 5).unwrap();
        sim.run(&tokens(&items)).unwrap();
        let mut o = sim.oracle().unwrap();
        let i = o.sample(Target::P).unwrap();
        let exact = items.iter().filter(|&&x| x == i).count() as f64 / 5000.0;
        assert_eq!(o.probe(Target::P, i).unwrap(), exact);
        for &e in sim.extra_indices() {
            assert!(o.probe(Target::P, e).is_ok());
        }
    }

    #[test]
    fn two_pass_rejects_mismatched_replay() {
        let mut sim = TwoPassSimulator::new(4, 2, false, 5).unwrap();
        sim.insert_first(StreamToken::p(1)).unwrap();
        sim.insert_first(StreamToken::p(2)).unwrap();
        sim.begin_second_pass().unwrap();
        sim.insert_second(StreamToken::p(1)).unwrap();
        assert!(sim.oracle().is_err());
        assert!(sim.insert_first(StreamToken::p(1)).is_err());
    }
}
