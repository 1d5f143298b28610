// SPDX-License-Identifier: Apache-2.0

//! Insert-only stream estimators and stream-to-oracle simulations.

use alloc::vec::Vec;

use crate::dist::Distribution;
use crate::error::Result;
use crate::oracle::Target;
use crate::rng::SplitMix64;

pub mod f0;
pub mod large_small;
pub mod level_bank;
pub mod random_order;
pub mod simulate;

pub use f0::{F0Sketch, KmvFamily, KMV_CONSTANT};
pub use large_small::{
    invert_error_bound, large_small_error_bound, LargeSmallEstimator, LargeSmallParams,
    LargeSmallReport, C_TRACK,
};
pub use level_bank::{
    level_inclusion_probability, level_sum_sandwich, F0EntropyEstimator, F0EntropyParams, F0EntropyReport,
};
pub use random_order::{RandomOrderEstimator, RandomOrderParams, RandomOrderReport, C1_DEFAULT, C_QUERY_DEFAULT};
pub use simulate::{OnePassOracle, OnePassSimulator, TwoPassOracle, TwoPassSimulator};

/// One insertion `⟨dist, item, +⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StreamToken {
    pub dist: Target,
    pub item: usize,
}

impl StreamToken {
    pub fn p(item: usize) -> Self {
        Self { dist: Target::P, item }
    }

    pub fn q(item: usize) -> Self {
        Self { dist: Target::Q, item }
    }
}

/// Arrival order of a generated stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum StreamOrder {
    #[default]
    AsGiven,
    Shuffled,
}

impl StreamOrder {
    pub fn name(self) -> &'static str {
        match self {
            Self::AsGiven => "as-given",
            Self::Shuffled => "shuffled",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "as-given" => Some(Self::AsGiven),
            "shuffled" => Some(Self::Shuffled),
            _ => None,
        }
    }
}

/// Draws `m` items i.i.d. from `p`, then (shuffled) applies a Fisher–Yates
/// permutation driven by the same generator.
pub fn generate_items(p: &Distribution, m: u64, order: StreamOrder, seed: u64) -> Vec<usize> {
    let mut rng = SplitMix64::new(seed);
    let table = p.alias();
    let mut items: Vec<usize> = (0..m).map(|_| table.sample(&mut rng)).collect();
    if order == StreamOrder::Shuffled {
        rng.shuffle(&mut items);
    }
    items
}

/// `m_p` draws from `p` followed by `m_q` draws from `q`; shuffled order
/// interleaves them uniformly.
pub fn generate_pair_tokens(
    p: &Distribution,
    q: &Distribution,
    m_p: u64,
    m_q: u64,
    order: StreamOrder,
    seed: u64,
) -> Result<Vec<StreamToken>> {
    crate::dist::check_same_base(p, q)?;
    let mut rng = SplitMix64::new(seed);
    let (tp, tq) = (p.alias(), q.alias());
    let mut tokens = Vec::with_capacity((m_p + m_q) as usize);
    for _ in 0..m_p {
        tokens.push(StreamToken::p(tp.sample(&mut rng)));
    }
    for _ in 0..m_q {
        tokens.push(StreamToken::q(tq.sample(&mut rng)));
    }
    if order == StreamOrder::Shuffled {
        rng.shuffle(&mut tokens);
    }
    Ok(tokens)
}

/// Exact frequency vector of a stream of items over `[n]`.
pub fn item_counts(n: usize, items: impl IntoIterator<Item = usize>) -> Vec<u64> {
    let mut c = alloc::vec![0u64; n];
    for i in items {
        c[i] += 1;
    }
    c
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rng::UniformSource;

    /// Calls `f` with every permutation of `0..m` (Heap's algorithm).
    pub(crate) fn for_each_permutation(m: usize, mut f: impl FnMut(&[usize])) {
        let mut a: Vec<usize> = (0..m).collect();
        let mut c = alloc::vec![0usize; m];
        f(&a);
        let mut i = 0;
        while i < m {
            if c[i] < i {
                if i % 2 == 0 {
                    a.swap(0, i);
                } else {
                    a.swap(c[i], i);
                }
                f(&a);
                c[i] += 1;
                i = 0;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
    }

    /// Replays a fixed sequence of uniform draws.
    pub(crate) struct Replay {
        seq: Vec<u64>,
        pos: usize,
    }

    impl Replay {
        /// Digits of `code` in base `base`, least significant first.
        pub(crate) fn from_code(mut code: u64, base: u64, len: u32) -> Self {
            let seq = (0..len)
                .map(|_| {
                    let d = code % base;
                    code /= base;
                    d
                })
                .collect();
            Self { seq, pos: 0 }
        }
    }

    impl UniformSource for Replay {
        fn below(&mut self, n: u64) -> u64 {
            let r = self.seq[self.pos];
            assert!(r < n);
            self.pos += 1;
            r
        }
    }

    #[test]
    fn permutations_are_complete() {
        let mut seen = hashbrown::HashSet::new();
        for_each_permutation(5, |p| {
            seen.insert(p.to_vec());
        });
        assert_eq!(seen.len(), 120);
    }

    #[test]
    fn point_mass_stream_is_constant() {
        let p = Distribution::point_mass(7, 3).unwrap();
        assert_eq!(generate_items(&p, 5, StreamOrder::AsGiven, 1), [3; 5]);
    }

    #[test]
    fn shuffled_is_permutation_of_as_given() {
        let p = Distribution::uniform(20).unwrap();
        let a = generate_items(&p, 500, StreamOrder::AsGiven, 9);
        let b = generate_items(&p, 500, StreamOrder::Shuffled, 9);
        assert_ne!(a, b);
        assert_eq!(item_counts(20, a), item_counts(20, b));
    }

    #[test]
    fn pair_tokens_keep_per_target_lengths() {
        let p = Distribution::uniform(4).unwrap();
        let q = Distribution::point_mass(4, 0).unwrap();
        let t = generate_pair_tokens(&p, &q, 30, 20, StreamOrder::Shuffled, 2).unwrap();
        assert_eq!(t.iter().filter(|x| x.dist == Target::P).count(), 30);
        assert!(t.iter().filter(|x| x.dist == Target::Q).all(|x| x.item == 0));
    }
}
