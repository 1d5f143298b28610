// SPDX-License-Identifier: Apache-2.0

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::hash::{BuildHasherDefault, Hasher};

use hashbrown::HashSet;

use crate::error::{Error, Result};
use crate::rng::{hash3, SplitMix64};

/// Leading constant of the per-repetition register count `K = ceil(c/ε0²)`.
pub const KMV_CONSTANT: f64 = 4.0;

/// Shared configuration of a family of k-minimum-values sketches.
///
/// Sketches built from one family use the same per-repetition hash seeds, so
/// a token's hashes can be computed once and offered to many sketches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KmvFamily {
    k: usize,
    seeds: Vec<u64>,
}

impl KmvFamily {
    /// `K = ceil(4/ε0²)` registers per repetition and an odd number
    /// `2·ceil(ln(1/δ)/2) + 1` of repetitions combined by median.
    pub fn new(epsilon0: f64, delta: f64, seed: u64) -> Result<Self> {
        if !(epsilon0 > 0.0 && epsilon0 < 1.0) {
            return Err(Error::InvalidParameter("epsilon0 must lie in (0, 1)".into()));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter("delta must lie in (0, 1)".into()));
        }
        let k = libm::ceil(KMV_CONSTANT / (epsilon0 * epsilon0)) as usize;
        let reps = 2 * libm::ceil(libm::log(1.0 / delta) / 2.0) as usize + 1;
        Ok(Self::with_shape(k.max(2), reps, seed))
    }

    pub fn with_shape(k: usize, reps: usize, seed: u64) -> Self {
        let mut rng = SplitMix64::derive(seed, 0xF0);
        Self {
            k,
            seeds: (0..reps).map(|_| rng.next_u64()).collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn repetitions(&self) -> usize {
        self.seeds.len()
    }

    /// Writes the per-repetition hashes of `item` into `out`.
    #[inline]
    pub fn hash_into(&self, item: u64, out: &mut [u64]) {
        for (o, &s) in out.iter_mut().zip(&self.seeds) {
            *o = hash3(s, item, 0);
        }
    }

    pub fn sketch(&self) -> F0Sketch {
        F0Sketch {
            k: self.k,
            regs: (0..self.seeds.len()).map(|_| Register::default()).collect(),
            bars: alloc::vec![u64::MAX; self.seeds.len()],
        }
    }
}

/// Hasher for keys that are already uniform 64-bit hashes.
#[derive(Default, Clone, Copy)]
struct Identity(u64);

impl Hasher for Identity {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0 << 8) | u64::from(b);
        }
    }

    fn write_u64(&mut self, x: u64) {
        self.0 = x;
    }
}

/// The `K` smallest distinct hashes of one repetition.
#[derive(Debug, Clone, Default)]
struct Register {
    heap: BinaryHeap<u64>,
    members: HashSet<u64, BuildHasherDefault<Identity>>,
}

impl Register {
    /// Returns whether the register grew.
    #[inline]
    fn offer(&mut self, h: u64, k: usize) -> bool {
        if self.heap.len() < k {
            if self.members.insert(h) {
                self.heap.push(h);
                return true;
            }
            return false;
        }
        let top = *self.heap.peek().expect("full register");
        if h < top && self.members.insert(h) {
            self.members.remove(&top);
            self.heap.pop();
            self.heap.push(h);
        }
        false
    }
}

impl PartialEq for Register {
    fn eq(&self, other: &Self) -> bool {
        self.members == other.members
    }
}

impl Eq for Register {}

/// k-minimum-values distinct-count sketch with median-of-repetitions.
///
/// Each repetition keeps the `K` smallest distinct hash values seen. Below
/// `K` values the count is exact; otherwise the estimate is `(K−1)/U_K` with
/// `U_K` the `K`-th smallest hash scaled to `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct F0Sketch {
    k: usize,
    regs: Vec<Register>,
    /// Per repetition, the largest kept hash once full, else `u64::MAX`.
    bars: Vec<u64>,
}

impl F0Sketch {
    /// A stand-alone sketch with its own family.
    pub fn new(epsilon0: f64, delta: f64, seed: u64) -> Result<(KmvFamily, Self)> {
        let family = KmvFamily::new(epsilon0, delta, seed)?;
        let sketch = family.sketch();
        Ok((family, sketch))
    }

    /// Offers precomputed hashes (one per repetition). Returns the change in
    /// stored words.
    #[inline]
    pub fn insert_hashed(&mut self, hashes: &[u64]) -> isize {
        let mut grew = 0isize;
        for (r, &h) in hashes.iter().enumerate() {
            if h >= self.bars[r] {
                continue;
            }
            let reg = &mut self.regs[r];
            if reg.offer(h, self.k) {
                grew += 2;
            }
            if reg.heap.len() == self.k {
                self.bars[r] = *reg.heap.peek().expect("full register");
            }
        }
        grew
    }

    pub fn insert(&mut self, family: &KmvFamily, item: u64) {
        let mut buf = alloc::vec![0u64; family.repetitions()];
        family.hash_into(item, &mut buf);
        self.insert_hashed(&buf);
    }

    fn rep_estimate(&self, reg: &Register) -> f64 {
        match reg.heap.peek() {
            Some(&top) if reg.heap.len() == self.k => {
                let u = (top as f64 + 1.0) / 18_446_744_073_709_551_616.0;
                (self.k - 1) as f64 / u
            }
            _ => reg.heap.len() as f64,
        }
    }

    /// Median of the per-repetition estimates; 0 on an empty stream.
    pub fn estimate(&self) -> f64 {
        let mut est: Vec<f64> = self.regs.iter().map(|r| self.rep_estimate(r)).collect();
        est.sort_by(f64::total_cmp);
        est[est.len() / 2]
    }

    /// 64-bit words held: each register value is stored in a heap and a set.
    pub fn space_words(&self) -> usize {
        self.regs.iter().map(|r| 2 * r.heap.len()).sum()
    }
}
