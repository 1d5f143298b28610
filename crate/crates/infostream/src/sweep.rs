// SPDX-License-Identifier: Apache-2.0

//! Parameter sweeps: a cross product of axes, several trials per cell.

use std::io::Write;

use infostream_core::rng::hash3;
use rayon::prelude::*;

use crate::error::{HarnessError, Result};
use crate::params::Params;
use crate::report::TrialReport;
use crate::run::{run_with, Inputs};

/// A sweep read from flat parameters.
///
/// `axis.<key> = v1, v2, ...` declares an axis; `algo`, `trials` and `seed`
/// are control keys; everything else is passed to every trial unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub algo: String,
    pub base: Params,
    /// Axes in key order; the first varies slowest.
    pub axes: Vec<(String, Vec<String>)>,
    pub trials: u64,
    pub seed: u64,
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cell: usize,
    pub trial: u64,
    pub seed: u64,
    pub values: Vec<String>,
    pub outcome: std::result::Result<TrialReport, String>,
}

impl SweepSpec {
    pub fn from_params(params: &Params) -> Result<Self> {
        let mut base = Params::new();
        let mut axes = Vec::new();
        for (k, v) in params.iter() {
            if let Some(name) = k.strip_prefix("axis.") {
                let values: Vec<String> = v
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect();
                if values.is_empty() {
                    return Err(HarnessError::contract(format!("axis `{name}` has no values")));
                }
                axes.push((name.to_string(), values));
            } else if !matches!(k, "algo" | "trials" | "seed" | "workers" | "out") {
                base.set(k, v);
            }
        }
        Ok(Self {
            algo: params.require_str("algo")?.to_string(),
            base,
            axes,
            trials: params.get_or("trials", 1)?,
            seed: params.get_or("seed", 0)?,
        })
    }

    /// Axis values of every cell, in row-major order.
    pub fn cells(&self) -> Vec<Vec<String>> {
        let mut cells = vec![Vec::new()];
        for (_, values) in &self.axes {
            cells = cells
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |v| {
                        let mut c = prefix.clone();
                        c.push(v.clone());
                        c
                    })
                })
                .collect();
        }
        cells
    }

    fn cell_params(&self, values: &[String]) -> Params {
        let mut p = self.base.clone();
        for ((k, _), v) in self.axes.iter().zip(values) {
            p.set(k.clone(), v.clone());
        }
        p
    }

    /// Seed of trial `trial` in cell `cell`.
    pub fn trial_seed(&self, cell: usize, trial: u64) -> u64 {
        hash3(self.seed, cell as u64, trial)
    }

    /// Runs every (cell, trial) on up to `workers` threads; rows come back in
    /// (cell, trial) order regardless of scheduling.
    pub fn execute(&self, workers: usize) -> Result<Vec<SweepRow>> {
        let cells = self.cells();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| HarnessError::contract(format!("thread pool: {e}")))?;
        let rows = pool.install(|| {
            cells
                .par_iter()
                .enumerate()
                .flat_map_iter(|(cell, values)| {
                    let params = self.cell_params(values);
                    let inputs = Inputs::from_params(&params).map_err(|e| e.to_string());
                    (0..self.trials)
                        .map(|trial| {
                            let seed = self.trial_seed(cell, trial);
                            let outcome = match &inputs {
                                Ok(inp) => run_with(&self.algo, inp, &params, seed).map_err(|e| e.to_string()),
                                Err(e) => Err(e.clone()),
                            };
                            SweepRow {
                                cell,
                                trial,
                                seed,
                                values: values.clone(),
                                outcome,
                            }
                        })
                        .collect::<Vec<_>>()
                })
                .collect::<Vec<_>>()
        });
        Ok(rows)
    }

    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["cell", "trial", "seed"].map(String::from).to_vec();
        h.extend(self.axes.iter().map(|(k, _)| k.clone()));
        h.extend(
            [
                "algo",
                "estimate",
                "verdict",
                "exact",
                "rel_error",
                "samples",
                "probes",
                "calls",
                "space_words",
                "error",
            ]
            .map(String::from),
        );
        h
    }

    /// Writes rows as CSV. Timing is left out so output is reproducible.
    pub fn write_csv(&self, rows: &[SweepRow], out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for row in rows {
            let mut rec = vec![row.cell.to_string(), row.trial.to_string(), row.seed.to_string()];
            rec.extend(row.values.iter().cloned());
            rec.push(self.algo.clone());
            match &row.outcome {
                Ok(r) => {
                    let c = r.calls;
                    rec.push(opt(r.estimate));
                    rec.push(r.verdict.map(|v| v.name().to_string()).unwrap_or_default());
                    rec.push(opt(r.exact_value));
                    rec.push(opt(r.relative_error()));
                    rec.push((c.samples_p + c.samples_q).to_string());
                    rec.push((c.probes_p + c.probes_q).to_string());
                    rec.push(c.total().to_string());
                    rec.push(r.space_words.map(|s| s.to_string()).unwrap_or_default());
                    rec.push(String::new());
                }
                Err(e) => {
                    rec.extend(std::iter::repeat(String::new()).take(8));
                    rec.push(e.clone());
                }
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| HarnessError::io("<csv>", e))?;
        Ok(())
    }
}
