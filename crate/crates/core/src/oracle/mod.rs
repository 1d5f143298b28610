// SPDX-License-Identifier: Apache-2.0

//! Oracle access to one or two distributions.
//!
//! `sample(p)` returns `i` with probability `p_i`; `probe(p, i)` returns
//! `p_i`. Cost is the number of calls, which [`OracleSession`] counts and
//! optionally caps.

mod alias;
mod canonical;

pub use alias::AliasTable;
pub use canonical::{canonicalize, CanonicalPlan};

use crate::dist::{check_same_base, Distribution};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Which of the (up to two) distributions a call addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Target {
    P,
    Q,
}

impl Target {
    #[inline]
    pub(crate) fn slot(self) -> usize {
        match self {
            Target::P => 0,
            Target::Q => 1,
        }
    }
}

/// Call counts of a session.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trace {
    pub samples_p: u64,
    pub samples_q: u64,
    pub probes_p: u64,
    pub probes_q: u64,
    pub seed: u64,
}

impl Trace {
    pub fn total(&self) -> u64 {
        self.samples_p + self.samples_q + self.probes_p + self.probes_q
    }

    pub fn samples(&self) -> u64 {
        self.samples_p + self.samples_q
    }

    pub fn probes(&self) -> u64 {
        self.probes_p + self.probes_q
    }

    fn bump_sample(&mut self, which: Target) {
        match which {
            Target::P => self.samples_p += 1,
            Target::Q => self.samples_q += 1,
        }
    }

    fn bump_probe(&mut self, which: Target) {
        match which {
            Target::P => self.probes_p += 1,
            Target::Q => self.probes_q += 1,
        }
    }
}

/// Combined (generative + evaluative) access.
///
/// Implemented by direct sessions, by canonical plans that replay
/// pre-drawn calls, and by stream-backed simulations.
pub trait CombinedOracle {
    /// Base size `n`.
    fn n(&self) -> usize;

    /// Draws `i` with probability `p_i` from the addressed distribution.
    fn sample(&mut self, which: Target) -> Result<usize>;

    /// Returns the mass of item `i` in the addressed distribution.
    fn probe(&mut self, which: Target, i: usize) -> Result<f64>;
}

impl<O: CombinedOracle + ?Sized> CombinedOracle for &mut O {
    fn n(&self) -> usize {
        (**self).n()
    }
    fn sample(&mut self, which: Target) -> Result<usize> {
        (**self).sample(which)
    }
    fn probe(&mut self, which: Target, i: usize) -> Result<f64> {
        (**self).probe(which, i)
    }
}

/// Budgeted, seeded access to one or two distributions.
///
/// Samples consume the session's draw stream; algorithms that need their own
/// coins take them from [`aux_rng`](Self::aux_rng), a separate stream derived
/// from the same seed, so probes and coin flips never shift the sample
/// sequence.
#[derive(Debug, Clone)]
pub struct OracleSession<'a> {
    targets: [Option<&'a Distribution>; 2],
    draws: SplitMix64,
    aux: SplitMix64,
    trace: Trace,
    budget: Option<u64>,
}

impl<'a> OracleSession<'a> {
    pub fn single(p: &'a Distribution, seed: u64) -> Self {
        Self {
            targets: [Some(p), None],
            draws: SplitMix64::new(seed),
            aux: SplitMix64::derive(seed, 1),
            trace: Trace {
                seed,
                ..Trace::default()
            },
            budget: None,
        }
    }

    pub fn pair(p: &'a Distribution, q: &'a Distribution, seed: u64) -> Result<Self> {
        check_same_base(p, q)?;
        let mut s = Self::single(p, seed);
        s.targets[1] = Some(q);
        Ok(s)
    }

    /// Caps the total number of oracle calls.
    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn trace(&self) -> Trace {
        self.trace
    }

    pub fn budget(&self) -> Option<u64> {
        self.budget
    }

    pub fn is_pair(&self) -> bool {
        self.targets[1].is_some()
    }

    pub fn target(&self, which: Target) -> Result<&'a Distribution> {
        self.targets[which.slot()].ok_or(Error::NoSuchTarget)
    }

    /// Coins for the algorithm itself (not oracle calls).
    pub fn aux_rng(&mut self) -> &mut SplitMix64 {
        &mut self.aux
    }

    fn charge(&self) -> Result<()> {
        match self.budget {
            Some(budget) if self.trace.total() >= budget => Err(Error::BudgetExhausted { budget }),
            _ => Ok(()),
        }
    }
}

impl CombinedOracle for OracleSession<'_> {
    fn n(&self) -> usize {
        self.targets[0].map_or(0, Distribution::n)
    }

    fn sample(&mut self, which: Target) -> Result<usize> {
        let dist = self.target(which)?;
        self.charge()?;
        let i = dist.alias().sample(&mut self.draws);
        self.trace.bump_sample(which);
        Ok(i)
    }

    fn probe(&mut self, which: Target, i: usize) -> Result<f64> {
        let dist = self.target(which)?;
        let value = dist.prob(i).ok_or(Error::IndexOutOfRange {
            index: i,
            n: dist.n(),
        })?;
        self.charge()?;
        self.trace.bump_probe(which);
        Ok(value)
    }
}
