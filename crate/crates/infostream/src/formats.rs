// SPDX-License-Identifier: Apache-2.0

//! Text formats for distributions and streams.
//!
//! A distribution file starts with `#n=<n>` and lists `index<TAB>prob` for
//! every item of positive mass. A stream file starts with `#n=<n>`, may carry
//! `#order=shuffled` (or `#order=as-given`), and lists one token per line as
//! `P<TAB>index` or `Q<TAB>index`. Other `#` lines are comments.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use infostream_core::streaming::{StreamOrder, StreamToken};
use infostream_core::{Distribution, Target};

use crate::error::{HarnessError, Result};

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> HarnessError {
    HarnessError::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Renders `p`; probabilities use the shortest round-trip decimal form.
pub fn format_dist(p: &Distribution) -> String {
    let mut s = format!("#n={}\n", p.n());
    for (i, &x) in p.probs().iter().enumerate() {
        if x > 0.0 {
            writeln!(s, "{i}\t{x:?}").unwrap();
        }
    }
    s
}

pub fn parse_dist(text: &str, path: &Path) -> Result<Distribution> {
    let mut n: Option<usize> = None;
    let mut entries = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(h) = line.strip_prefix('#') {
            if let Some(v) = h.trim().strip_prefix("n=") {
                n = Some(v.trim().parse().map_err(|_| parse_err(path, k + 1, "bad #n header"))?);
            }
            continue;
        }
        let mut cols = line.split_whitespace();
        let (Some(i), Some(x), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(parse_err(path, k + 1, "expected `index<TAB>prob`"));
        };
        let i: usize = i.parse().map_err(|_| parse_err(path, k + 1, "bad index"))?;
        let x: f64 = x.parse().map_err(|_| parse_err(path, k + 1, "bad probability"))?;
        entries.push((k + 1, i, x));
    }
    let n = n.ok_or_else(|| parse_err(path, 1, "missing #n header"))?;
    let mut probs = vec![0.0; n];
    for (line, i, x) in entries {
        if i >= n {
            return Err(parse_err(path, line, format!("index {i} out of range for n = {n}")));
        }
        if probs[i] != 0.0 {
            return Err(parse_err(path, line, format!("index {i} listed twice")));
        }
        probs[i] = x;
    }
    Ok(Distribution::new(probs)?)
}

pub fn read_dist(path: &Path) -> Result<Distribution> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_dist(&text, path)
}

pub fn write_dist(path: &Path, p: &Distribution) -> Result<()> {
    std::fs::write(path, format_dist(p)).map_err(|e| HarnessError::io(path, e))
}

/// Tokens of a stream file plus its header.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamData {
    pub n: usize,
    pub order: StreamOrder,
    pub tokens: Vec<StreamToken>,
}

impl StreamData {
    /// Items addressed to `which`, in arrival order.
    pub fn items(&self, which: Target) -> impl Iterator<Item = usize> + '_ {
        self.tokens.iter().filter(move |t| t.dist == which).map(|t| t.item)
    }

    pub fn has_q(&self) -> bool {
        self.tokens.iter().any(|t| t.dist == Target::Q)
    }

    pub fn len(&self, which: Target) -> u64 {
        self.items(which).count() as u64
    }
}

pub fn write_stream_to(out: &mut impl Write, s: &StreamData) -> std::io::Result<()> {
    writeln!(out, "#n={}", s.n)?;
    writeln!(out, "#order={}", s.order.name())?;
    for t in &s.tokens {
        let tag = match t.dist {
            Target::P => 'P',
            Target::Q => 'Q',
        };
        writeln!(out, "{tag}\t{}", t.item)?;
    }
    Ok(())
}

pub fn write_stream(path: &Path, s: &StreamData) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_stream_to(&mut w, s)
        .and_then(|_| w.flush())
        .map_err(|e| HarnessError::io(path, e))
}

pub fn parse_stream(reader: impl BufRead, path: &Path) -> Result<StreamData> {
    let mut n: Option<usize> = None;
    let mut order = StreamOrder::AsGiven;
    let mut tokens = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(h) = line.strip_prefix('#') {
            let h = h.trim();
            if let Some(v) = h.strip_prefix("n=") {
                n = Some(v.trim().parse().map_err(|_| parse_err(path, k + 1, "bad #n header"))?);
            } else if let Some(v) = h.strip_prefix("order=") {
                order = StreamOrder::from_name(v.trim())
                    .ok_or_else(|| parse_err(path, k + 1, format!("unknown order `{}`", v.trim())))?;
            }
            continue;
        }
        let mut cols = line.split_whitespace();
        let (Some(tag), Some(i), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(parse_err(path, k + 1, "expected `P|Q<TAB>index`"));
        };
        let dist = match tag {
            "P" | "p" => Target::P,
            "Q" | "q" => Target::Q,
            _ => return Err(parse_err(path, k + 1, format!("unknown target `{tag}`"))),
        };
        let item: usize = i.parse().map_err(|_| parse_err(path, k + 1, "bad index"))?;
        tokens.push((k + 1, StreamToken { dist, item }));
    }
    let n = n.ok_or_else(|| parse_err(path, 1, "missing #n header"))?;
    let mut out = Vec::with_capacity(tokens.len());
    for (line, t) in tokens {
        if t.item >= n {
            return Err(parse_err(path, line, format!("index {} out of range for n = {n}", t.item)));
        }
        out.push(t);
    }
    Ok(StreamData { n, order, tokens: out })
}

pub fn read_stream(path: &Path) -> Result<StreamData> {
    let f = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    parse_stream(BufReader::new(f), path)
}
