// SPDX-License-Identifier: Apache-2.0

use alloc::vec::Vec;

use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// A near or far member of the ℓ1 lower-bound family.
///
/// `p` has a head of mass `1 − 3a/2` and `K = k/ε` atoms of `3aε/(2k)`;
/// `q` is `p` with the atom block shifted by `r`. Both bases are permuted by
/// the same seeded permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct HardInstance {
    pub p: Distribution,
    pub q: Distribution,
    pub a: f64,
    pub k: u64,
    pub epsilon: f64,
    pub r: u64,
    pub far: bool,
}

impl HardInstance {
    /// The ℓ1 distance the construction guarantees: `a` or `a(1+3ε)`.
    pub fn designed_l1(&self) -> f64 {
        if self.far {
            self.a * (1.0 + 3.0 * self.epsilon)
        } else {
            self.a
        }
    }

    pub fn atom_count(&self) -> u64 {
        as_integer(self.k as f64 / self.epsilon).unwrap_or(0)
    }
}

fn as_integer(x: f64) -> Option<u64> {
    let r = libm::round(x);
    (r >= 1.0 && (x - r).abs() <= 1e-9 * r.max(1.0)).then_some(r as u64)
}

/// Builds the instance with shift `r = k/(3ε)` (near) or `k/(3ε) + k` (far).
///
/// Requires `k/ε` and `k/(3ε)` to be integers, `0 < a ≤ 2/3`,
/// `0 < ε ≤ 2/3` (so the far shift stays inside the block) and
/// `n ≥ max(k/(a·ε²), 1 + r + k/ε)`.
pub fn hard_l1_instance(
    k: u64,
    epsilon: f64,
    a: f64,
    far: bool,
    n: usize,
    permute_seed: u64,
) -> Result<HardInstance> {
    let bad = |msg: &str| Err(Error::InvalidParameter(msg.into()));
    if k == 0 {
        return bad("k must be positive");
    }
    if !(epsilon > 0.0 && epsilon <= 2.0 / 3.0) {
        return bad("epsilon must lie in (0, 2/3]");
    }
    if !(a > 0.0 && a <= 2.0 / 3.0) {
        return bad("a must lie in (0, 2/3]");
    }
    let kf = k as f64;
    let Some(atoms) = as_integer(kf / epsilon) else {
        return bad("k/epsilon must be an integer");
    };
    let Some(r_near) = as_integer(kf / (3.0 * epsilon)) else {
        return bad("k/(3 epsilon) must be an integer");
    };
    let r = if far { r_near + k } else { r_near };
    let min_n = libm::ceil(kf / (a * epsilon * epsilon)).max((1 + r + atoms) as f64);
    if (n as f64) < min_n {
        return Err(Error::InvalidParameter(alloc::format!(
            "n = {n} is below the required {min_n}"
        )));
    }

    let atom = 3.0 * a * epsilon / (2.0 * kf);
    let head = 1.0 - 1.5 * a;
    let mut p = alloc::vec![0.0; n];
    let mut q = alloc::vec![0.0; n];
    p[0] = head;
    q[0] = head;
    for t in 0..atoms as usize {
        p[1 + t] = atom;
        q[1 + r as usize + t] = atom;
    }

    let mut perm: Vec<usize> = (0..n).collect();
    SplitMix64::new(permute_seed).shuffle(&mut perm);
    let permute = |v: &[f64]| {
        let mut out = alloc::vec![0.0; n];
        for (i, &x) in v.iter().enumerate() {
            out[perm[i]] = x;
        }
        out
    };
    Ok(HardInstance {
        p: Distribution::new(permute(&p))?,
        q: Distribution::new(permute(&q))?,
        a,
        k,
        epsilon,
        r,
        far,
    })
}
