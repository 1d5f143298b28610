// SPDX-License-Identifier: Apache-2.0

//! Single-trial execution of every estimator and tester.

use std::path::Path;
use std::time::Instant;

use infostream_core::dist::{divergence_exact, l2_squared};
use infostream_core::rng::hash3;
use infostream_core::streaming::{
    generate_items, generate_pair_tokens, item_counts, F0EntropyEstimator, F0EntropyParams,
    LargeSmallEstimator, LargeSmallParams, OnePassSimulator, RandomOrderEstimator, RandomOrderParams,
    StreamOrder, StreamToken, TwoPassSimulator,
};
use infostream_core::testers::{
    combined_distance_iterations, combined_entropy_iterations, combined_l2_iterations, delta_test,
    distance_iteration_count, entropy_iteration_count, l2_iteration_count, with_halving,
    DeltaTestParams,
};
use infostream_core::{
    entropy_exact, entropy_of_counts, CombinedOracle, Result as CoreResult, DivergenceKind, Distribution, OracleSession,
    SplitMix64, Target, Trace,
};
use serde_json::json;

use crate::error::{HarnessError, Result};
use crate::formats::{read_dist, read_stream, StreamData};
use crate::gen::generate;
use crate::params::Params;
use crate::report::TrialReport;

pub const ALGOS: [&str; 10] = [
    "delta-test",
    "combined-distance",
    "combined-entropy",
    "combined-l2",
    "f0-entropy",
    "large-small",
    "random-ptas",
    "oracle-sim-1p",
    "oracle-sim-2p",
    "exact",
];

/// Sub-seed tags, so a trial's stream and its estimator coins never share
/// a generator.
const STREAM_TAG: u64 = 1;
const COIN_TAG: u64 = 2;

/// Distributions and/or a stream for one trial.
#[derive(Debug, Clone, Default)]
pub struct Inputs {
    pub p: Option<Distribution>,
    pub q: Option<Distribution>,
    pub stream: Option<StreamData>,
}

impl Inputs {
    /// Resolves `dist`/`dist_q`/`stream` file paths and `gen`/`gen_q`
    /// family names. A pair family (`hard-l1`) fills both slots.
    pub fn from_params(params: &Params) -> Result<Self> {
        let mut out = Self::default();
        if let Some(path) = params.str("dist") {
            out.p = Some(read_dist(Path::new(path))?);
        } else if let Some(kind) = params.str("gen") {
            let g = generate(kind, params)?;
            out.p = Some(g.p);
            out.q = g.q;
        }
        if let Some(path) = params.str("dist_q") {
            out.q = Some(read_dist(Path::new(path))?);
        } else if let Some(kind) = params.str("gen_q") {
            out.q = Some(generate(kind, params)?.p);
        }
        if let Some(path) = params.str("stream") {
            out.stream = Some(read_stream(Path::new(path))?);
        }
        Ok(out)
    }

    fn p(&self) -> Result<&Distribution> {
        self.p
            .as_ref()
            .ok_or_else(|| HarnessError::contract("this algorithm needs a distribution (dist or gen)"))
    }

    fn q(&self) -> Result<&Distribution> {
        self.q
            .as_ref()
            .ok_or_else(|| HarnessError::contract("this algorithm needs a second distribution (dist_q or gen_q)"))
    }

    /// The input stream, or one drawn from the distributions with `m`
    /// (and `m_q`) tokens in the requested `order`.
    fn stream(&self, params: &Params, seed: u64) -> Result<StreamData> {
        if let Some(s) = &self.stream {
            return Ok(s.clone());
        }
        let p = self.p()?;
        let m: u64 = params.require("m")?;
        if m == 0 {
            return Err(HarnessError::contract("m must be at least 1"));
        }
        let order = order_param(params)?;
        let seed = hash3(seed, STREAM_TAG, 0);
        let tokens = match &self.q {
            None => generate_items(p, m, order, seed).into_iter().map(StreamToken::p).collect(),
            Some(q) => generate_pair_tokens(p, q, m, params.get_or("m_q", m)?, order, seed)?,
        };
        Ok(StreamData {
            n: p.n(),
            order,
            tokens,
        })
    }
}

pub fn order_param(params: &Params) -> Result<StreamOrder> {
    let name = params.str("order").unwrap_or("as-given");
    StreamOrder::from_name(name)
        .ok_or_else(|| HarnessError::contract(format!("unknown order `{name}` (as-given or shuffled)")))
}

fn kind_param(params: &Params) -> Result<DivergenceKind> {
    let name = params.str("kind").unwrap_or("js");
    DivergenceKind::from_name(name).ok_or_else(|| HarnessError::contract(format!("unknown divergence kind `{name}`")))
}

/// Counts calls made through any combined oracle.
struct Counted<O> {
    inner: O,
    trace: Trace,
}

impl<O: CombinedOracle> Counted<O> {
    fn new(inner: O, seed: u64) -> Self {
        Self {
            inner,
            trace: Trace {
                seed,
                ..Trace::default()
            },
        }
    }
}

impl<O: CombinedOracle> CombinedOracle for Counted<O> {
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn sample(&mut self, which: Target) -> CoreResult<usize> {
        let i = self.inner.sample(which)?;
        match which {
            Target::P => self.trace.samples_p += 1,
            Target::Q => self.trace.samples_q += 1,
        }
        Ok(i)
    }

    fn probe(&mut self, which: Target, i: usize) -> CoreResult<f64> {
        let x = self.inner.probe(which, i)?;
        match which {
            Target::P => self.trace.probes_p += 1,
            Target::Q => self.trace.probes_q += 1,
        }
        Ok(x)
    }
}

/// What a combined-oracle estimator measures.
#[derive(Debug, Clone, Copy)]
enum Quantity {
    Entropy,
    Distance(DivergenceKind),
    L2,
}

impl Quantity {
    /// `inner` selects the quantity for the stream simulations; it defaults
    /// to entropy for one distribution and `kind` for two.
    fn for_simulation(params: &Params, pair: bool) -> Result<Self> {
        match params.str("inner") {
            None if pair => Ok(Self::Distance(kind_param(params)?)),
            None | Some("entropy") => Ok(Self::Entropy),
            Some("distance") => Ok(Self::Distance(kind_param(params)?)),
            Some("l2") => Ok(Self::L2),
            Some(other) => Err(HarnessError::contract(format!("unknown inner estimator `{other}`"))),
        }
    }

    fn needs_pair(self) -> bool {
        !matches!(self, Self::Entropy)
    }

    fn iteration_count(self, n: usize, eps: f64, delta: f64, lb: f64) -> CoreResult<u64> {
        match self {
            Self::Entropy => entropy_iteration_count(n, eps, delta, lb),
            Self::Distance(kind) => distance_iteration_count(kind, eps, delta, lb),
            Self::L2 => l2_iteration_count(eps, delta, lb),
        }
    }

    /// `iters` if given, else the count for `eps`, `delta` and lower bound `lb`.
    fn iterations(self, params: &Params, n: usize) -> Result<u64> {
        if let Some(it) = params.get::<u64>("iters")? {
            return Ok(it);
        }
        let Some(lb) = params.get::<f64>("lb")? else {
            return Err(HarnessError::contract("set `iters`, or `lb` (with eps and delta)"));
        };
        Ok(self.iteration_count(n, params.get_or("eps", 0.1)?, params.get_or("delta", 0.05)?, lb)?)
    }

    fn run<O: CombinedOracle>(self, oracle: &mut O, iters: u64) -> CoreResult<f64> {
        match self {
            Self::Entropy => combined_entropy_iterations(oracle, iters),
            Self::Distance(kind) => combined_distance_iterations(oracle, kind, iters),
            Self::L2 => combined_l2_iterations(oracle, iters),
        }
    }

    fn exact(self, p: &Distribution, q: Option<&Distribution>) -> Result<f64> {
        Ok(match (self, q) {
            (Self::Entropy, _) => entropy_exact(p),
            (Self::Distance(kind), Some(q)) => divergence_exact(kind, p, q)?,
            (Self::L2, Some(q)) => l2_squared(p, q)?,
            _ => return Err(HarnessError::contract("this quantity needs two distributions")),
        })
    }

    /// A safe upper bound used as the first guess when halving.
    fn ceiling(self, n: usize) -> f64 {
        match self {
            Self::Entropy => (n as f64).log2().max(1.0),
            Self::Distance(kind) => 2.0 * kind.tau().unwrap_or(2.0),
            Self::L2 => 2.0,
        }
    }
}

/// Loads inputs from `params` and runs one trial.
pub fn run(algo: &str, params: &Params, seed: u64) -> Result<TrialReport> {
    let inputs = Inputs::from_params(params)?;
    run_with(algo, &inputs, params, seed)
}

/// Runs one trial on already-loaded inputs.
pub fn run_with(algo: &str, inputs: &Inputs, params: &Params, seed: u64) -> Result<TrialReport> {
    let start = Instant::now();
    let mut r = TrialReport {
        algo: algo.to_string(),
        params: params.clone(),
        estimate: None,
        verdict: None,
        exact_value: None,
        calls: Trace {
            seed,
            ..Trace::default()
        },
        space_words: None,
        seed,
        wall_ms: 0.0,
        details: json!({}),
    };
    match algo {
        "exact" => run_exact(inputs, params, &mut r)?,
        "combined-entropy" => run_direct(Quantity::Entropy, inputs, params, seed, &mut r)?,
        "combined-distance" => run_direct(Quantity::Distance(kind_param(params)?), inputs, params, seed, &mut r)?,
        "combined-l2" => run_direct(Quantity::L2, inputs, params, seed, &mut r)?,
        "delta-test" => run_delta(inputs, params, seed, &mut r)?,
        "f0-entropy" => run_f0(inputs, params, seed, &mut r)?,
        "large-small" => run_large_small(inputs, params, seed, &mut r)?,
        "random-ptas" => run_random_order(inputs, params, seed, &mut r)?,
        "oracle-sim-1p" => run_simulated(false, inputs, params, seed, &mut r)?,
        "oracle-sim-2p" => run_simulated(true, inputs, params, seed, &mut r)?,
        _ => {
            return Err(HarnessError::contract(format!(
                "unknown algorithm `{algo}` (expected one of {})",
                ALGOS.join(", ")
            )))
        }
    }
    r.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(r)
}

fn run_exact(inputs: &Inputs, params: &Params, r: &mut TrialReport) -> Result<()> {
    let (p, q) = match (&inputs.p, &inputs.stream) {
        (Some(p), _) => (p.clone(), inputs.q.clone()),
        (None, Some(s)) => empirical(s)?,
        (None, None) => return Err(HarnessError::contract("exact needs a distribution or a stream")),
    };
    let quantity = match (params.str("kind"), &q) {
        (None, None) | (Some("entropy"), _) => Quantity::Entropy,
        (Some("l2-squared") | Some("l2"), _) => Quantity::L2,
        _ => Quantity::Distance(kind_param(params)?),
    };
    let v = quantity.exact(&p, q.as_ref())?;
    r.estimate = Some(v);
    r.exact_value = Some(v);
    r.details = json!({ "quantity": format!("{quantity:?}").to_lowercase() });
    Ok(())
}

/// Empirical distributions of the P and (if present) Q tokens.
fn empirical(s: &StreamData) -> Result<(Distribution, Option<Distribution>)> {
    let p = Distribution::from_counts(&item_counts(s.n, s.items(Target::P)))?;
    let q = if s.has_q() {
        Some(Distribution::from_counts(&item_counts(s.n, s.items(Target::Q)))?)
    } else {
        None
    };
    Ok((p, q))
}

fn run_direct(quantity: Quantity, inputs: &Inputs, params: &Params, seed: u64, r: &mut TrialReport) -> Result<()> {
    let p = inputs.p()?;
    let mut session = if quantity.needs_pair() {
        OracleSession::pair(p, inputs.q()?, seed)?
    } else {
        OracleSession::single(p, seed)
    };
    if let Some(budget) = params.get::<u64>("budget")? {
        session = session.with_budget(budget);
    }
    let n = p.n();
    if params.flag("halving")? {
        let eps = params.get_or("eps", 0.1)?;
        let delta = params.get_or("delta", 0.05)?;
        let floor: f64 = params.get_or("lb_floor", 1e-3)?;
        let start = params.get_or("lb_start", quantity.ceiling(n))?;
        let mut total = 0;
        let out = with_halving(start, floor.min(start), |guess| {
            let it = quantity.iteration_count(n, eps, delta, guess)?;
            total += it;
            quantity.run(&mut session, it)
        })?;
        r.estimate = Some(out.estimate);
        r.details = json!({ "iterations": total, "final_guess": out.guess, "rounds": out.rounds });
    } else {
        let it = quantity.iterations(params, n)?;
        r.estimate = Some(quantity.run(&mut session, it)?);
        r.details = json!({ "iterations": it });
    }
    r.exact_value = Some(quantity.exact(p, inputs.q.as_ref())?);
    r.calls = session.trace();
    Ok(())
}

fn run_delta(inputs: &Inputs, params: &Params, seed: u64, r: &mut TrialReport) -> Result<()> {
    let (p, q) = (inputs.p()?, inputs.q()?);
    let mut tp = DeltaTestParams::new(params.get_or("eps", 0.5)?, params.get_or("delta", 0.05)?)
        .with_alpha(params.get_or("alpha", infostream_core::testers::DEFAULT_ALPHA)?);
    if let Some(m) = params.get::<u64>("samples")? {
        tp = tp.with_m(m);
    }
    let mut session = OracleSession::pair(p, q, seed)?;
    let mut coins = SplitMix64::derive(seed, COIN_TAG);
    let out = delta_test(&mut session, &tp, &mut coins)?;
    r.verdict = Some(out.verdict);
    r.exact_value = Some(divergence_exact(DivergenceKind::Triangle, p, q)?);
    r.calls = session.trace();
    r.details = json!({
        "m": out.m,
        "heavy_count": out.heavy_count,
        "heavy_statistic": out.heavy_statistic,
        "l2_epsilon": out.l2_epsilon,
        "b": out.b,
        "l2_statistic": out.l2.map(|l| l.statistic),
        "l2_threshold": out.l2.map(|l| l.threshold),
        "l2_samples": out.l2.map(|l| l.samples),
    });
    Ok(())
}

fn p_items(s: &StreamData) -> Vec<usize> {
    s.items(Target::P).collect()
}

fn run_f0(inputs: &Inputs, params: &Params, seed: u64, r: &mut TrialReport) -> Result<()> {
    let s = inputs.stream(params, seed)?;
    let items = p_items(&s);
    let max_len = params.get_or("max_len", (items.len() as u64).max(1))?;
    let fp = F0EntropyParams::new(
        params.get_or("eps", 0.1)?,
        params.get_or("eps0", 0.05)?,
        params.get_or("eps_c", 0.1)?,
        s.n,
        max_len,
    )
    .with_delta0(params.get_or("delta0", 0.05)?)
    .with_seed(seed);
    let mut e = F0EntropyEstimator::new(fp)?;
    e.extend(items.iter().copied())?;
    let rep = e.finish();
    let h = entropy_of_counts(item_counts(s.n, items));
    let (lo, hi) = rep.sandwich(h);
    let (wlo, whi) = rep.window(h);
    r.estimate = Some(rep.raw);
    r.exact_value = Some(h);
    r.space_words = Some(rep.peak_space_words);
    r.details = json!({
        "raw": rep.raw,
        "bias_adjusted": rep.bias_adjusted,
        "sandwich": [lo, hi],
        "window": [wlo, whi],
        "within_window": rep.within_window(h),
        "m": rep.m,
        "m_tilde": rep.m_tilde,
        "t": rep.t,
        "level_counts": rep.level_counts,
    });
    Ok(())
}

fn run_large_small(inputs: &Inputs, params: &Params, seed: u64, r: &mut TrialReport) -> Result<()> {
    let s = inputs.stream(params, seed)?;
    let items = p_items(&s);
    let max_len = params.get_or("max_len", (items.len() as u64).max(1))?;
    let mut lp = LargeSmallParams::new(params.get_or("alpha", 0.5)?, params.get_or("eps", 0.05)?, s.n, max_len)
        .with_seed(seed);
    if let Some(c) = params.get::<f64>("c_track")? {
        lp.c_track = c;
    }
    let mut e = LargeSmallEstimator::new(lp)?;
    e.extend(items.iter().copied())?;
    let rep = e.finish();
    r.estimate = Some(rep.estimate);
    r.exact_value = Some(entropy_of_counts(item_counts(s.n, items)));
    r.space_words = Some(rep.peak_space_words);
    r.details = json!({
        "heavy_part": rep.heavy_part,
        "small_part": rep.small_part,
        "w_hat": rep.w_hat,
        "heavy_items": rep.heavy.len(),
        "tracked": rep.tracked,
        "m": rep.m,
        "m_tilde": rep.m_tilde,
    });
    Ok(())
}

fn run_random_order(inputs: &Inputs, params: &Params, seed: u64, r: &mut TrialReport) -> Result<()> {
    let s = inputs.stream(params, seed)?;
    let items = p_items(&s);
    let mut rp = RandomOrderParams::new(params.get_or("eps", 0.2)?, s.n).with_seed(seed);
    rp = rp.with_constants(params.get_or("c1", rp.c1)?, params.get_or("c_query", rp.c_query)?);
    let mut e = RandomOrderEstimator::new(rp, s.order)?;
    e.extend(items.iter().copied())?;
    let rep = e.finish()?;
    r.estimate = Some(rep.estimate);
    r.exact_value = Some(entropy_of_counts(item_counts(s.n, items)));
    r.space_words = Some(rep.peak_space_words);
    r.details = json!({
        "w": rep.w,
        "h_a": rep.h_a,
        "h_proj": rep.h_proj,
        "m_proj": rep.m_proj,
        "exact_projection": rep.exact_projection,
        "absorptions": rep.absorptions,
        "a_size": rep.a_size,
        "queries": rep.queries,
    });
    Ok(())
}

fn run_simulated(two_pass: bool, inputs: &Inputs, params: &Params, seed: u64, r: &mut TrialReport) -> Result<()> {
    let s = inputs.stream(params, seed)?;
    let pair = s.has_q();
    let quantity = Quantity::for_simulation(params, pair)?;
    if quantity.needs_pair() && !pair {
        return Err(HarnessError::contract("a distance needs a stream with Q tokens"));
    }
    let t = quantity.iterations(params, s.n)?;
    let t_usize = usize::try_from(t).map_err(|_| HarnessError::contract("iteration count too large"))?;
    let (estimate, trace, space) = if two_pass {
        let mut sim = TwoPassSimulator::new(s.n, t_usize, pair, seed)?;
        sim.run(&s.tokens)?;
        let mut o = Counted::new(sim.oracle()?, seed);
        let v = quantity.run(&mut o, t)?;
        (v, o.trace, sim.space_words())
    } else {
        let mut sim = OnePassSimulator::new(s.n, t_usize, pair, s.order, seed)?;
        sim.extend(s.tokens.iter().copied())?;
        sim.finish();
        let mut o = Counted::new(sim.oracle(SplitMix64::derive(seed, COIN_TAG))?, seed);
        let v = quantity.run(&mut o, t)?;
        (v, o.trace, sim.peak_space_words())
    };
    let (p, q) = empirical(&s)?;
    r.estimate = Some(estimate);
    r.exact_value = Some(quantity.exact(&p, q.as_ref())?);
    r.calls = trace;
    r.space_words = Some(space);
    r.details = json!({ "iterations": t, "quantity": format!("{quantity:?}").to_lowercase() });
    Ok(())
}
