// SPDX-License-Identifier: Apache-2.0

//! Named distribution families.

use infostream_core::testers::hard_l1_instance;
use infostream_core::Distribution;

use crate::error::{HarnessError, Result};
use crate::params::Params;

pub const KINDS: [&str; 6] = ["uniform", "pointmass", "dyadic", "zipf", "two-block", "hard-l1"];

/// A generated distribution, plus its partner for pair families.
#[derive(Debug, Clone)]
pub struct Generated {
    pub p: Distribution,
    pub q: Option<Distribution>,
}

/// Splits `zipf(1.5)` into `("zipf", Some("1.5"))`.
fn split_kind(kind: &str) -> Result<(&str, Option<&str>)> {
    match kind.split_once('(') {
        None => Ok((kind, None)),
        Some((name, rest)) => match rest.strip_suffix(')') {
            Some(arg) => Ok((name, Some(arg))),
            None => Err(HarnessError::contract(format!("malformed kind `{kind}`"))),
        },
    }
}

/// Builds the family `kind` from `params`.
///
/// | kind | parameters |
/// |---|---|
/// | `uniform` | `n` |
/// | `pointmass` | `n`, `item` (0) |
/// | `dyadic` | `n`: `2^-(i+1)`, the last item takes the remainder |
/// | `zipf` | `n`, `s` (1): `p_i ∝ (i+1)^-s` |
/// | `two-block` | `n`, `block` (n/2), `mass` (0.5), `support` (n) |
/// | `hard-l1` | `n`, `k` (1), `eps`, `a`, `far`, `seed` |
///
/// `two-block` spreads `mass` evenly over items `[0, block)` and the rest
/// evenly over `[block, support)`.
pub fn generate(kind: &str, params: &Params) -> Result<Generated> {
    let (name, arg) = split_kind(kind)?;
    let n: usize = params.require("n")?;
    if n == 0 {
        return Err(HarnessError::contract("n must be positive"));
    }
    let single = |p: Distribution| Ok(Generated { p, q: None });
    match name {
        "uniform" => single(Distribution::uniform(n)?),
        "pointmass" => single(Distribution::point_mass(n, params.get_or("item", 0)?)?),
        "dyadic" => {
            let mut probs: Vec<f64> = (0..n).map(|i| (-(i as f64 + 1.0)).exp2()).collect();
            probs[n - 1] = (-((n - 1) as f64)).exp2();
            single(Distribution::new(probs)?)
        }
        "zipf" => {
            let s: f64 = match arg {
                Some(a) => a
                    .parse()
                    .map_err(|_| HarnessError::contract(format!("bad zipf exponent `{a}`")))?,
                None => params.get_or("s", 1.0)?,
            };
            let w: Vec<f64> = (1..=n).map(|i| (i as f64).powf(-s)).collect();
            single(Distribution::from_weights(&w)?)
        }
        "two-block" => {
            let block: usize = params.get_or("block", (n / 2).max(1))?;
            let support: usize = params.get_or("support", n)?;
            let mass: f64 = params.get_or("mass", 0.5)?;
            if block == 0 || support > n || block > support {
                return Err(HarnessError::contract("two-block needs 0 < block <= support <= n"));
            }
            if !(0.0..=1.0).contains(&mass) || (block == support && mass != 1.0) {
                return Err(HarnessError::contract("two-block mass must lie in [0, 1] and fill the support"));
            }
            let mut probs = vec![0.0; n];
            for (i, x) in probs.iter_mut().enumerate().take(support) {
                *x = if i < block {
                    mass / block as f64
                } else {
                    (1.0 - mass) / (support - block) as f64
                };
            }
            single(Distribution::new(probs)?)
        }
        "hard-l1" => {
            let inst = hard_l1_instance(
                params.get_or("k", 1)?,
                params.require("eps")?,
                params.require("a")?,
                params.flag("far")?,
                n,
                params.get_or("seed", 0)?,
            )?;
            Ok(Generated {
                p: inst.p,
                q: Some(inst.q),
            })
        }
        _ => Err(HarnessError::contract(format!(
            "unknown distribution kind `{kind}` (expected one of {})",
            KINDS.join(", ")
        ))),
    }
}
