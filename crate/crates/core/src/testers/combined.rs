// SPDX-License-Identifier: Apache-2.0

use crate::dist::{required_samples, DivergenceKind};
use crate::error::{Error, Result};
use crate::oracle::{CombinedOracle, Target};

/// Rounding allowance on the `[0, 1]` increment check.
pub const INCREMENT_SLACK: f64 = 1e-12;

fn check_increment(value: f64) -> Result<()> {
    if (-INCREMENT_SLACK..=1.0 + INCREMENT_SLACK).contains(&value) {
        Ok(())
    } else {
        Err(Error::IncrementOutOfRange { value })
    }
}

fn check_iterations(m: u64) -> Result<()> {
    if m == 0 {
        Err(Error::InvalidParameter("iteration count must be positive".into()))
    } else {
        Ok(())
    }
}

fn probe_sampled<O: CombinedOracle>(oracle: &mut O, which: Target, i: usize) -> Result<f64> {
    let v = oracle.probe(which, i)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::ZeroMassSample { index: i })
    }
}

/// Iterations of the distance estimator for a lower bound `d_lb` on the
/// divergence: `required_samples(ε, δ, d_lb/(2τ), 1)`.
pub fn distance_iteration_count(
    kind: DivergenceKind,
    epsilon: f64,
    delta: f64,
    d_lb: f64,
) -> Result<u64> {
    let tau = bounded_tau(kind)?;
    required_samples(epsilon, delta, d_lb / (2.0 * tau), 1.0)
}

fn bounded_tau(kind: DivergenceKind) -> Result<f64> {
    match kind.tau() {
        Some(t) if kind.is_symmetric() => Ok(t),
        _ => Err(Error::UnsupportedKind(kind)),
    }
}

/// Runs `m` iterations of the combined-oracle distance estimator.
///
/// Each iteration draws `i ~ p` and `j ~ q` and probes both targets at both
/// indices. The `p` draw contributes `g(q_i/p_i)` when `q_i < p_i`, the `q`
/// draw contributes `g(p_j/q_j)` when `p_j < q_j`; both arguments lie in
/// `[0, 1)` where `g ≤ τ`. The mean of the sum is exactly `D_f(p, q)`.
pub fn combined_distance_iterations<O: CombinedOracle>(
    oracle: &mut O,
    kind: DivergenceKind,
    m: u64,
) -> Result<f64> {
    let tau = bounded_tau(kind)?;
    check_iterations(m)?;
    let mut e = 0.0;
    for _ in 0..m {
        let i = oracle.sample(Target::P)?;
        let qi = oracle.probe(Target::Q, i)?;
        let pi = probe_sampled(oracle, Target::P, i)?;
        let a = if qi < pi { kind.g(qi / pi) } else { 0.0 };

        let j = oracle.sample(Target::Q)?;
        let qj = probe_sampled(oracle, Target::Q, j)?;
        let pj = oracle.probe(Target::P, j)?;
        let b = if pj < qj { kind.g(pj / qj) } else { 0.0 };

        let inc = (a + b) / (2.0 * tau);
        check_increment(inc)?;
        e += inc;
    }
    Ok(2.0 * tau * e / m as f64)
}

/// `(1±ε)` estimate of a bounded symmetric divergence given a lower bound
/// `d_lb ≤ D_f(p, q)`.
pub fn combined_distance_estimate<O: CombinedOracle>(
    oracle: &mut O,
    kind: DivergenceKind,
    epsilon: f64,
    delta: f64,
    d_lb: f64,
) -> Result<f64> {
    let m = distance_iteration_count(kind, epsilon, delta, d_lb)?;
    combined_distance_iterations(oracle, kind, m)
}

/// Iterations of the `ℓ2²` estimator: `required_samples(ε, δ, lb/2, 1)`.
pub fn l2_iteration_count(epsilon: f64, delta: f64, l2sq_lb: f64) -> Result<u64> {
    required_samples(epsilon, delta, l2sq_lb / 2.0, 1.0)
}

/// Runs `m` iterations of the `ℓ2²` variant: the `p` draw contributes
/// `(p_i − q_i)²/p_i` when `q_i < p_i`, the `q` draw `(p_j − q_j)²/q_j` when
/// `p_j < q_j`. Each term is at most 1, so `(a+b)/2` is the increment.
pub fn combined_l2_iterations<O: CombinedOracle>(oracle: &mut O, m: u64) -> Result<f64> {
    check_iterations(m)?;
    let mut e = 0.0;
    for _ in 0..m {
        let i = oracle.sample(Target::P)?;
        let qi = oracle.probe(Target::Q, i)?;
        let pi = probe_sampled(oracle, Target::P, i)?;
        let a = if qi < pi { (pi - qi) * (pi - qi) / pi } else { 0.0 };

        let j = oracle.sample(Target::Q)?;
        let qj = probe_sampled(oracle, Target::Q, j)?;
        let pj = oracle.probe(Target::P, j)?;
        let b = if pj < qj { (pj - qj) * (pj - qj) / qj } else { 0.0 };

        let inc = (a + b) / 2.0;
        check_increment(inc)?;
        e += inc;
    }
    Ok(2.0 * e / m as f64)
}

pub fn combined_l2_estimate<O: CombinedOracle>(
    oracle: &mut O,
    epsilon: f64,
    delta: f64,
    l2sq_lb: f64,
) -> Result<f64> {
    let m = l2_iteration_count(epsilon, delta, l2sq_lb)?;
    combined_l2_iterations(oracle, m)
}

/// Iterations of the entropy estimator:
/// `required_samples(ε/2, δ, h_lb/(3·log2 n), 1)`.
pub fn entropy_iteration_count(n: usize, epsilon: f64, delta: f64, h_lb: f64) -> Result<u64> {
    if n < 2 {
        return Err(Error::InvalidParameter("entropy estimation needs n >= 2".into()));
    }
    let log_n = libm::log2(n as f64);
    required_samples(epsilon / 2.0, delta, h_lb / (3.0 * log_n), 1.0)
}

/// Runs `m` iterations of the combined-oracle entropy estimator.
///
/// Each draw `i` contributes `log2(1/p_i)` when `p_i ≥ 1/n³`, and the mean
/// is returned. The per-iteration increment after dividing by `3·log2 n` is
/// checked to lie in `[0, 1]`. Summing unnormalized surprisals keeps dyadic
/// inputs exact.
pub fn combined_entropy_iterations<O: CombinedOracle>(oracle: &mut O, m: u64) -> Result<f64> {
    let n = oracle.n();
    if n < 2 {
        return Err(Error::InvalidParameter("entropy estimation needs n >= 2".into()));
    }
    check_iterations(m)?;
    let nf = n as f64;
    let cutoff = 1.0 / (nf * nf * nf);
    let scale = 3.0 * libm::log2(nf);
    let mut e = 0.0;
    for _ in 0..m {
        let i = oracle.sample(Target::P)?;
        let pi = probe_sampled(oracle, Target::P, i)?;
        if pi >= cutoff {
            let a = -libm::log2(pi);
            check_increment(a / scale)?;
            e += a;
        }
    }
    Ok(e / m as f64)
}

pub fn combined_entropy_estimate<O: CombinedOracle>(
    oracle: &mut O,
    epsilon: f64,
    delta: f64,
    h_lb: f64,
) -> Result<f64> {
    let m = entropy_iteration_count(oracle.n(), epsilon, delta, h_lb)?;
    combined_entropy_iterations(oracle, m)
}

/// Result of [`with_halving`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalvingOutcome {
    pub estimate: f64,
    /// The lower-bound guess of the accepted round.
    pub guess: f64,
    pub rounds: u32,
}

/// Geometric halving over an unknown lower bound.
///
/// Runs `estimate(guess)` starting at `start`; while the estimate falls
/// below `guess/2` the guess is halved and the run repeated. Stops at the
/// first accepted round, or when the next guess would drop below `floor`.
pub fn with_halving<F>(start: f64, floor: f64, mut estimate: F) -> Result<HalvingOutcome>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(start > 0.0 && floor > 0.0 && floor <= start) {
        return Err(Error::InvalidParameter("halving needs 0 < floor <= start".into()));
    }
    let mut guess = start;
    let mut rounds = 0;
    loop {
        rounds += 1;
        let value = estimate(guess)?;
        if value >= guess / 2.0 || guess / 2.0 < floor {
            return Ok(HalvingOutcome {
                estimate: value,
                guess,
                rounds,
            });
        }
        guess /= 2.0;
    }
}
