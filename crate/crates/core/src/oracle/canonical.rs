// SPDX-License-Identifier: Apache-2.0

use alloc::vec::Vec;

use hashbrown::{HashMap, HashSet};

use super::{CombinedOracle, OracleSession, Target};
use crate::error::{Error, Result};

/// Pre-drawn oracle answers: all samples first, then probes of every sampled
/// index (in every target) plus optional uniform extra indices.
///
/// Replaying a plan through [`CombinedOracle`] hands out the samples in draw
/// order and answers probes from the recorded table.
#[derive(Debug, Clone)]
pub struct CanonicalPlan {
    n: usize,
    t: usize,
    samples: [Vec<usize>; 2],
    cursor: [usize; 2],
    probes: HashMap<usize, [f64; 2]>,
    extra: Vec<usize>,
    targets: usize,
}

impl CanonicalPlan {
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn samples(&self, which: Target) -> &[usize] {
        &self.samples[which.slot()]
    }

    /// Indices probed beyond the sampled ones, in draw order.
    pub fn extra_indices(&self) -> &[usize] {
        &self.extra
    }

    /// Every index with a recorded probe value.
    pub fn probe_set(&self) -> impl Iterator<Item = usize> + '_ {
        self.probes.keys().copied()
    }

    pub fn remaining(&self, which: Target) -> usize {
        self.samples[which.slot()].len() - self.cursor[which.slot()]
    }
}

impl CombinedOracle for CanonicalPlan {
    fn n(&self) -> usize {
        self.n
    }

    fn sample(&mut self, which: Target) -> Result<usize> {
        let slot = which.slot();
        if slot >= self.targets {
            return Err(Error::NoSuchTarget);
        }
        let i = *self.samples[slot]
            .get(self.cursor[slot])
            .ok_or(Error::PlanExhausted)?;
        self.cursor[slot] += 1;
        Ok(i)
    }

    fn probe(&mut self, which: Target, i: usize) -> Result<f64> {
        let slot = which.slot();
        if slot >= self.targets {
            return Err(Error::NoSuchTarget);
        }
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        self.probes
            .get(&i)
            .map(|v| v[slot])
            .ok_or(Error::UnprobedIndex { index: i })
    }
}

/// Runs the canonical discipline against `session`: `t` samples per target,
/// then one probe per target of each distinct sampled index, then
/// `extra_probes` indices drawn uniformly without replacement from the
/// unsampled part of `[n]` (coins from the session's auxiliary stream).
pub fn canonicalize(
    t: usize,
    extra_probes: usize,
    session: &mut OracleSession<'_>,
) -> Result<CanonicalPlan> {
    if t == 0 {
        return Err(Error::InvalidParameter("canonical plan needs t >= 1".into()));
    }
    let n = session.n();
    let targets: &[Target] = if session.is_pair() {
        &[Target::P, Target::Q]
    } else {
        &[Target::P]
    };

    let mut samples = [Vec::new(), Vec::new()];
    for &w in targets {
        samples[w.slot()] = (0..t)
            .map(|_| session.sample(w))
            .collect::<Result<Vec<_>>>()?;
    }

    let mut order: Vec<usize> = Vec::new();
    let mut seen: HashSet<usize> = HashSet::new();
    for &i in samples.iter().flatten() {
        if seen.insert(i) {
            order.push(i);
        }
    }

    let available = n - seen.len();
    if extra_probes > available {
        return Err(Error::TooManyExtraProbes {
            requested: extra_probes,
            available,
        });
    }
    let extra = draw_complement(n, &seen, extra_probes, session);

    let mut probes = HashMap::with_capacity(order.len() + extra.len());
    for &i in order.iter().chain(&extra) {
        let mut v = [0.0; 2];
        for &w in targets {
            v[w.slot()] = session.probe(w, i)?;
        }
        probes.insert(i, v);
    }

    Ok(CanonicalPlan {
        n,
        t,
        samples,
        cursor: [0, 0],
        probes,
        extra,
        targets: targets.len(),
    })
}

fn draw_complement(
    n: usize,
    taken: &HashSet<usize>,
    count: usize,
    session: &mut OracleSession<'_>,
) -> Vec<usize> {
    let rng = session.aux_rng();
    let available = n - taken.len();
    if count == 0 {
        return Vec::new();
    }
    if count * 2 <= available {
        // Rejection against the union of sampled and already chosen indices.
        let mut chosen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let i = rng.below_usize(n);
            if !taken.contains(&i) && chosen.insert(i) {
                out.push(i);
            }
        }
        out
    } else {
        let mut pool: Vec<usize> = (0..n).filter(|i| !taken.contains(i)).collect();
        for k in 0..count {
            let j = k + rng.below_usize(pool.len() - k);
            pool.swap(k, j);
        }
        pool.truncate(count);
        pool
    }
}
