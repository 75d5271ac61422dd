//! Exact text checkpoints of a coupled-replica run.
//!
//! ```text
//! qavb-checkpoint 1
//! [config]
//! <run configuration, as written by RunConfig::to_text>
//! [run]
//! next_t = <next outer iteration>
//! streams = <sub-seed stream of each slice>
//! [slice j]                       (one block per slice, j = 1..m)
//! forward = <K topic ids>
//! backward = <K topic ids>
//! resp = <entries x K, row-major>
//! lambda = <K x V, row-major>
//! gamma_doc = <D x K, row-major>
//! [history]
//! <t> <beta_eff> <gamma> <f> <f_clamped> <F_c> <F_q> <E_1> ... <E_m>
//! ```
//!
//! Numbers are written in shortest round-trip decimal form, so a restored run
//! continues bit-for-bit.

use std::fmt::{Display, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use qavb_core::{Corpus, HistoryRow, ProjectionMap, QavbRun, ReplicaState};

use crate::config::{parse_config, RunConfig};
use crate::error::{Error, Result};

const MAGIC: &str = "qavb-checkpoint 1";

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn join<T: Display>(xs: &[T]) -> String {
    let mut s = String::new();
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{x}");
    }
    s
}

fn numbers<T: FromStr>(what: &str, raw: &str) -> Result<Vec<T>> {
    raw.split_whitespace()
        .map(|s| s.parse().map_err(|_| bad(format!("{what}: cannot parse `{s}`"))))
        .collect()
}

pub fn format_checkpoint(config: &RunConfig, run: &QavbRun) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}\n[config]");
    out.push_str(&config.to_text());
    let _ = writeln!(out, "[run]\nnext_t = {}\nstreams = {}", run.next_t(), join(run.streams()));
    for (j, (replica, proj)) in run.replicas().iter().zip(run.projections()).enumerate() {
        let _ = writeln!(out, "[slice {}]", j + 1);
        let _ = writeln!(out, "forward = {}", join(&proj.forward));
        let _ = writeln!(out, "backward = {}", join(&proj.backward));
        let _ = writeln!(out, "resp = {}", join(replica.resp()));
        let _ = writeln!(out, "lambda = {}", join(replica.lambda()));
        let _ = writeln!(out, "gamma_doc = {}", join(replica.gamma_doc()));
    }
    out.push_str("[history]\n");
    for row in run.history() {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {}",
            row.t,
            row.beta_eff,
            row.gamma,
            row.f,
            row.f_clamped,
            row.f_c,
            row.f_q,
            join(&row.energies)
        );
    }
    out
}

pub fn save_checkpoint(config: &RunConfig, run: &QavbRun, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    crate::experiment::write_atomic(path, &format_checkpoint(config, run))
}

#[derive(Debug, Default)]
struct RawSlice {
    forward: Option<Vec<usize>>,
    backward: Option<Vec<usize>>,
    resp: Option<Vec<f64>>,
    lambda: Option<Vec<f64>>,
    gamma_doc: Option<Vec<f64>>,
}

/// A parsed checkpoint, not yet checked against a corpus.
#[derive(Debug)]
pub struct Checkpoint {
    pub config: RunConfig,
    next_t: u32,
    streams: Vec<u64>,
    slices: Vec<RawSlice>,
    history: Vec<HistoryRow>,
}

enum Section {
    Config,
    Run,
    Slice,
    History,
}

pub fn parse_checkpoint(text: &str) -> Result<Checkpoint> {
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(bad(format!("missing `{MAGIC}` header")));
    }
    let mut section = None;
    let mut config_text = String::new();
    let mut next_t = None;
    let mut streams = None;
    let mut slices: Vec<RawSlice> = Vec::new();
    let mut history = Vec::new();

    for line in lines {
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = Some(match name {
                "config" => Section::Config,
                "run" => Section::Run,
                "history" => Section::History,
                _ => {
                    let j: usize = name
                        .strip_prefix("slice ")
                        .and_then(|n| n.parse().ok())
                        .ok_or_else(|| bad(format!("unknown section `{name}`")))?;
                    if j != slices.len() + 1 {
                        return Err(bad(format!("slice {j} out of order")));
                    }
                    slices.push(RawSlice::default());
                    Section::Slice
                }
            });
            continue;
        }
        match section {
            None => return Err(bad("content before the first section")),
            Some(Section::Config) => {
                config_text.push_str(line);
                config_text.push('\n');
            }
            Some(Section::History) => history.push(parse_history_row(line)?),
            Some(Section::Run) | Some(Section::Slice) => {
                let (key, raw) = line
                    .split_once('=')
                    .map(|(k, v)| (k.trim(), v.trim()))
                    .ok_or_else(|| bad(format!("expected `key = value`, got `{line}`")))?;
                if matches!(section, Some(Section::Run)) {
                    match key {
                        "next_t" => next_t = Some(raw.parse().map_err(|_| bad("next_t is not an integer"))?),
                        "streams" => streams = Some(numbers(key, raw)?),
                        _ => return Err(bad(format!("unknown run key `{key}`"))),
                    }
                } else {
                    let slice = slices.last_mut().expect("slice section opened");
                    match key {
                        "forward" => slice.forward = Some(numbers(key, raw)?),
                        "backward" => slice.backward = Some(numbers(key, raw)?),
                        "resp" => slice.resp = Some(numbers(key, raw)?),
                        "lambda" => slice.lambda = Some(numbers(key, raw)?),
                        "gamma_doc" => slice.gamma_doc = Some(numbers(key, raw)?),
                        _ => return Err(bad(format!("unknown slice key `{key}`"))),
                    }
                }
            }
        }
    }

    Ok(Checkpoint {
        config: parse_config(&config_text)?,
        next_t: next_t.ok_or_else(|| bad("missing next_t"))?,
        streams: streams.ok_or_else(|| bad("missing streams"))?,
        slices,
        history,
    })
}

fn parse_history_row(line: &str) -> Result<HistoryRow> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 8 {
        return Err(bad(format!("history row too short: `{line}`")));
    }
    let num = |i: usize| -> Result<f64> {
        fields[i]
            .parse()
            .map_err(|_| bad(format!("history: cannot parse `{}`", fields[i])))
    };
    Ok(HistoryRow {
        t: fields[0].parse().map_err(|_| bad("history: bad t"))?,
        beta_eff: num(1)?,
        gamma: num(2)?,
        f: num(3)?,
        f_clamped: fields[4].parse().map_err(|_| bad("history: bad clamp flag"))?,
        f_c: num(5)?,
        f_q: num(6)?,
        energies: fields[7..].iter().map(|s| s.parse().map_err(|_| bad("history: bad energy"))).collect::<Result<_>>()?,
    })
}

impl Checkpoint {
    /// Rebuilds the run against `corpus`, checking every array's shape.
    pub fn into_run(self, corpus: &Corpus) -> Result<QavbRun> {
        let anneal = self.config.anneal_config(corpus.vocab_size())?;
        let mut replicas = Vec::with_capacity(self.slices.len());
        let mut projections = Vec::with_capacity(self.slices.len());
        for (j, s) in self.slices.into_iter().enumerate() {
            let missing = |what: &str| bad(format!("slice {}: missing {what}", j + 1));
            projections.push(ProjectionMap {
                forward: s.forward.ok_or_else(|| missing("forward"))?,
                backward: s.backward.ok_or_else(|| missing("backward"))?,
            });
            replicas.push(ReplicaState::from_parts(
                corpus,
                &anneal.hyper,
                s.resp.ok_or_else(|| missing("resp"))?,
                s.lambda.ok_or_else(|| missing("lambda"))?,
                s.gamma_doc.ok_or_else(|| missing("gamma_doc"))?,
            )?);
        }
        Ok(QavbRun::from_parts(
            anneal,
            self.streams,
            replicas,
            projections,
            self.next_t,
            self.history,
        )?)
    }
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&text)
}
