// SPDX-License-Identifier: Apache-2.0

use alloc::vec::Vec;

use crate::rng::SplitMix64;

/// Vose alias table: `O(n)` build, two random words per draw.
///
/// A draw picks a column `c = below(n)` and returns `c` when
/// `next_f64() < threshold[c]`, otherwise `alias[c]`.
#[derive(Debug, Clone)]
pub struct AliasTable {
    threshold: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    /// Builds the table from (already validated) probabilities.
    pub fn new(probs: &[f64]) -> Self {
        let n = probs.len();
        let total: f64 = probs.iter().sum();
        let scale = n as f64 / total;
        let mut scaled: Vec<f64> = probs.iter().map(|p| p * scale).collect();
        let mut threshold = alloc::vec![1.0; n];
        let mut alias: Vec<u32> = (0..n as u32).collect();

        let (mut small, mut large): (Vec<u32>, Vec<u32>) =
            (0..n as u32).partition(|&i| scaled[i as usize] < 1.0);

        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            let (si, li) = (s as usize, l as usize);
            threshold[si] = scaled[si];
            alias[si] = l;
            scaled[li] = (scaled[li] + scaled[si]) - 1.0;
            if scaled[li] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // Leftovers are 1 up to rounding; zero-mass columns must never win.
        for i in small.into_iter().chain(large) {
            let i = i as usize;
            threshold[i] = if probs[i] > 0.0 { 1.0 } else { 0.0 };
            if probs[i] == 0.0 {
                // Alias to any positive-mass item.
                if let Some(j) = probs.iter().position(|&p| p > 0.0) {
                    alias[i] = j as u32;
                }
            }
        }
        Self { threshold, alias }
    }

    #[inline]
    pub fn sample(&self, rng: &mut SplitMix64) -> usize {
        let column = rng.below_usize(self.threshold.len());
        if rng.next_f64() < self.threshold[column] {
            column
        } else {
            self.alias[column] as usize
        }
    }

    /// The exact probability the table assigns to each item.
    pub fn implied_probs(&self) -> Vec<f64> {
        let n = self.threshold.len();
        let mut out = alloc::vec![0.0; n];
        for (c, (&t, &a)) in self.threshold.iter().zip(&self.alias).enumerate() {
            out[c] += t / n as f64;
            out[a as usize] += (1.0 - t) / n as f64;
        }
        out
    }
}
