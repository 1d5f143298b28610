// SPDX-License-Identifier: Apache-2.0

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use infostream::formats::{format_dist, write_dist, write_stream, write_stream_to, StreamData};
use infostream::gen::generate;
use infostream::run::{order_param, run, Inputs};
use infostream::{HarnessError, Params, Result, SweepSpec};
use infostream_core::streaming::{generate_items, generate_pair_tokens, StreamToken};

#[derive(Parser)]
#[command(name = "infostream", version, about = "Entropy and distance estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a distribution file (two files for pair families).
    GenDist {
        /// uniform, pointmass, dyadic, zipf, zipf(s), two-block or hard-l1.
        #[arg(long)]
        kind: String,
        /// Output path for the partner of a pair family.
        #[arg(long)]
        out_q: Option<PathBuf>,
        /// Build the far member of the hard-l1 family.
        #[arg(long)]
        far: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Draw a stream file from one or two distribution files.
    GenStream {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        dist_q: Option<PathBuf>,
        /// Number of Q tokens (defaults to --m).
        #[arg(long)]
        m_q: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Run one algorithm and print its JSON report.
    Run {
        /// delta-test, combined-distance, combined-entropy, combined-l2,
        /// f0-entropy, large-small, random-ptas, oracle-sim-1p,
        /// oracle-sim-2p or exact.
        algo: String,
        #[command(flatten)]
        inputs: InputArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Run a parameter sweep and write CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Exact entropy or divergence of the inputs.
    Exact {
        #[command(flatten)]
        inputs: InputArgs,
        /// entropy, l1, l2-squared, hellinger, js, triangle or kl.
        #[arg(long)]
        kind: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    dist: Option<PathBuf>,
    #[arg(long)]
    dist_q: Option<PathBuf>,
    #[arg(long)]
    stream: Option<PathBuf>,
}

/// Flags shared by every command. Each maps to the parameter of the same
/// name and overrides the config file; `--set key=value` overrides both.
#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<u64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    eps0: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    order: Option<String>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn params(&self) -> Result<Params> {
        let mut p = match &self.config {
            Some(path) => Params::load(path)?,
            None => Params::new(),
        };
        let flags: [(&str, Option<String>); 10] = [
            ("n", self.n.map(|x| x.to_string())),
            ("m", self.m.map(|x| x.to_string())),
            ("eps", self.eps.map(|x| x.to_string())),
            ("eps0", self.eps0.map(|x| x.to_string())),
            ("alpha", self.alpha.map(|x| x.to_string())),
            ("delta", self.delta.map(|x| x.to_string())),
            ("seed", self.seed.map(|x| x.to_string())),
            ("order", self.order.clone()),
            ("trials", self.trials.map(|x| x.to_string())),
            ("workers", self.workers.map(|x| x.to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                p.set(k, v);
            }
        }
        for s in &self.set {
            let (k, v) = Params::parse_assignment(s)?;
            p.set(k, v);
        }
        if let Some(out) = &self.out {
            p.set("out", out.display().to_string());
        }
        Ok(p)
    }
}

impl InputArgs {
    fn apply(&self, p: &mut Params) {
        for (k, v) in [("dist", &self.dist), ("dist_q", &self.dist_q), ("stream", &self.stream)] {
            if let Some(path) = v {
                p.set(k, path.display().to_string());
            }
        }
    }
}

/// Writes `text` to the `out` parameter, or to standard output.
fn emit(params: &Params, text: &str) -> Result<()> {
    match params.str("out") {
        Some(path) => std::fs::write(path, text).map_err(|e| HarnessError::io(path, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| HarnessError::io("<stdout>", e)),
    }
}

/// The report body: `out` is an output path, not a run parameter.
fn run_params(mut p: Params) -> (Params, Params) {
    let mut io = Params::new();
    if let Some(out) = p.remove("out") {
        io.set("out", out);
    }
    (p, io)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenDist { kind, out_q, far, common } => {
            let mut p = common.params()?;
            if far {
                p.set("far", "true");
            }
            let g = generate(&kind, &p)?;
            match (g.q, out_q) {
                (None, _) => emit(&p, &format_dist(&g.p)),
                (Some(q), Some(path_q)) => {
                    let path = p
                        .str("out")
                        .ok_or_else(|| HarnessError::contract("pair families need --out and --out-q"))?;
                    write_dist(Path::new(path), &g.p)?;
                    write_dist(&path_q, &q)
                }
                (Some(_), None) => Err(HarnessError::contract("pair families need --out and --out-q")),
            }
        }
        Command::GenStream { dist, dist_q, m_q, common } => {
            let p = common.params()?;
            let seed = p.get_or("seed", 0)?;
            let m: u64 = p.require("m")?;
            if m == 0 {
                return Err(HarnessError::contract("m must be at least 1"));
            }
            let order = order_param(&p)?;
            let dp = infostream::formats::read_dist(&dist)?;
            let tokens = match dist_q {
                None => generate_items(&dp, m, order, seed).into_iter().map(StreamToken::p).collect(),
                Some(path) => {
                    let dq = infostream::formats::read_dist(&path)?;
                    generate_pair_tokens(&dp, &dq, m, m_q.unwrap_or(m), order, seed)?
                }
            };
            let s = StreamData { n: dp.n(), order, tokens };
            match p.str("out") {
                Some(path) => write_stream(Path::new(path), &s),
                None => {
                    let mut out = std::io::BufWriter::new(std::io::stdout().lock());
                    write_stream_to(&mut out, &s)
                        .and_then(|_| out.flush())
                        .map_err(|e| HarnessError::io("<stdout>", e))
                }
            }
        }
        Command::Run { algo, inputs, common } => {
            let mut p = common.params()?;
            inputs.apply(&mut p);
            let (p, io) = run_params(p);
            let seed = p.get_or("seed", 0)?;
            let report = run(&algo, &p, seed)?;
            emit(&io, &(report.to_json() + "\n"))
        }
        Command::Exact { inputs, kind, common } => {
            let mut p = common.params()?;
            inputs.apply(&mut p);
            if let Some(k) = kind {
                p.set("kind", k);
            }
            let (p, io) = run_params(p);
            let report = infostream::run::run_with("exact", &Inputs::from_params(&p)?, &p, 0)?;
            let v = report.estimate.unwrap_or(f64::NAN);
            emit(&io, &format!("{v}\n"))
        }
        Command::Sweep { common } => {
            let p = common.params()?;
            let spec = SweepSpec::from_params(&p)?;
            let workers = p.get_or("workers", 1)?;
            let rows = spec.execute(workers)?;
            let mut buf = Vec::new();
            spec.write_csv(&rows, &mut buf)?;
            emit(&p, &String::from_utf8(buf).expect("csv is utf-8"))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
