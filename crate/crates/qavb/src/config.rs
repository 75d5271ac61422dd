//! Run configuration: one `key = value` pair per line, `#` starts a comment.
//!
//! ```text
//! algorithm = qavb          # vb | savb | qavb
//! corpus_path = docs.txt    # or the synthetic_* keys
//! k = 20
//! m = 10
//! beta0 = 0.6
//! r_beta = 1.05
//! beta_eff0 = 0.6           # defaults to beta0
//! gamma0 = 1.0
//! l_out = 300
//! l_in = 20
//! alpha = 2.5               # defaults to 50 / k
//! eta = 0.1
//! seed = 0
//! f_max = 1000
//! gamma0_grid = 0.5, 1, 2, 4   # compare only
//! restarts = 10                # compare only, defaults to m
//! seeds = 1, 2, 3, 4, 5        # compare only
//! ```
//!
//! `algorithm = vb` forces `m = 1` with tempering and coupling off;
//! `algorithm = savb` forces `m = 1` with coupling off.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use qavb_core::{AnnealConfig, AnnealSchedule, Coupling, LdaHyper, Tempering};

use crate::corpus_io::SyntheticSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Vb,
    Savb,
    Qavb,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Vb => "vb",
            Algorithm::Savb => "savb",
            Algorithm::Qavb => "qavb",
        }
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "vb" => Ok(Algorithm::Vb),
            "savb" => Ok(Algorithm::Savb),
            "qavb" => Ok(Algorithm::Qavb),
            other => Err(format!("unknown algorithm `{other}`, expected vb, savb or qavb")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CorpusSource {
    Path(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus: Option<CorpusSource>,
    pub algorithm: Algorithm,
    pub k: usize,
    pub m: usize,
    pub beta0: f64,
    pub r_beta: f64,
    pub beta_eff0: f64,
    pub gamma0: f64,
    pub l_out: u32,
    pub l_in: u32,
    pub alpha: f64,
    pub eta: f64,
    pub seed: u64,
    pub f_max: f64,
    pub gamma0_grid: Vec<f64>,
    pub restarts: Option<usize>,
    pub seeds: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config("").expect("defaults are valid")
    }
}

const SYNTHETIC_DEFAULTS: SyntheticSpec = SyntheticSpec {
    seed: 0,
    docs: 100,
    vocab: 200,
    topics: 5,
    doc_len: 50,
    alpha: 0.1,
    eta: 0.05,
};

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{raw}`")))
}

fn list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| value(key, s))
        .collect()
}

fn positive(key: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be positive and finite, got {x}")))
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut corpus_path = None;
    let mut synthetic: Option<SyntheticSpec> = None;
    let mut algorithm = Algorithm::Qavb;
    let mut k = 20usize;
    let mut m = 10usize;
    let mut beta0: f64 = 0.6;
    let mut r_beta: f64 = 1.05;
    let mut beta_eff0 = None;
    let mut gamma0: f64 = 1.0;
    let mut l_out = 300u32;
    let mut l_in = 20u32;
    let mut alpha = None;
    let mut eta: f64 = 0.1;
    let mut seed = 0u64;
    let mut f_max: f64 = 1e3;
    let mut gamma0_grid: Vec<f64> = vec![0.5, 1.0, 2.0, 4.0];
    let mut restarts = None;
    let mut seeds: Vec<u64> = (1..=5).collect();

    for (i, raw_line) in text.lines().enumerate() {
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, raw)) = line.split_once('=') else {
            return Err(Error::config(format!("line {}", i + 1), format!("expected `key = value`, got `{line}`")));
        };
        let (key, raw) = (key.trim(), raw.trim());
        let syn = || synthetic.unwrap_or(SYNTHETIC_DEFAULTS);
        match key {
            "corpus_path" => corpus_path = Some(PathBuf::from(raw)),
            "synthetic_docs" => synthetic = Some(SyntheticSpec { docs: value(key, raw)?, ..syn() }),
            "synthetic_vocab" => synthetic = Some(SyntheticSpec { vocab: value(key, raw)?, ..syn() }),
            "synthetic_topics" => synthetic = Some(SyntheticSpec { topics: value(key, raw)?, ..syn() }),
            "synthetic_doc_len" => synthetic = Some(SyntheticSpec { doc_len: value(key, raw)?, ..syn() }),
            "synthetic_alpha" => synthetic = Some(SyntheticSpec { alpha: value(key, raw)?, ..syn() }),
            "synthetic_eta" => synthetic = Some(SyntheticSpec { eta: value(key, raw)?, ..syn() }),
            "synthetic_seed" => synthetic = Some(SyntheticSpec { seed: value(key, raw)?, ..syn() }),
            "algorithm" => algorithm = raw.parse().map_err(|e| Error::config(key, e))?,
            "k" => k = value(key, raw)?,
            "m" => m = value(key, raw)?,
            "beta0" => beta0 = value(key, raw)?,
            "r_beta" => r_beta = value(key, raw)?,
            "beta_eff0" => beta_eff0 = Some(value(key, raw)?),
            "gamma0" => gamma0 = value(key, raw)?,
            "l_out" => l_out = value(key, raw)?,
            "l_in" => l_in = value(key, raw)?,
            "alpha" => alpha = Some(value(key, raw)?),
            "eta" => eta = value(key, raw)?,
            "seed" => seed = value(key, raw)?,
            "f_max" => f_max = value(key, raw)?,
            "gamma0_grid" => gamma0_grid = list(key, raw)?,
            "restarts" => restarts = Some(value(key, raw)?),
            "seeds" => seeds = list(key, raw)?,
            other => return Err(Error::config(other, "unknown key")),
        }
    }

    if corpus_path.is_some() && synthetic.is_some() {
        return Err(Error::config("corpus_path", "give either a corpus path or synthetic_* keys, not both"));
    }
    if k < 2 {
        return Err(Error::config("k", "need at least 2 topics"));
    }
    if m == 0 {
        return Err(Error::config("m", "Trotter number must be at least 1"));
    }
    if l_out == 0 {
        return Err(Error::config("l_out", "must be at least 1"));
    }
    if l_in == 0 {
        return Err(Error::config("l_in", "must be at least 1"));
    }
    positive("beta0", beta0)?;
    if !(r_beta > 1.0 && r_beta.is_finite()) {
        return Err(Error::config("r_beta", format!("ratio must exceed 1, got {r_beta}")));
    }
    let beta_eff0 = beta_eff0.unwrap_or(beta0);
    positive("beta_eff0", beta_eff0)?;
    positive("gamma0", gamma0)?;
    let alpha = alpha.unwrap_or(50.0 / k as f64);
    positive("alpha", alpha)?;
    positive("eta", eta)?;
    if !(f_max > 0.0) {
        return Err(Error::config("f_max", format!("must be positive, got {f_max}")));
    }
    if let Some(g) = gamma0_grid.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
        return Err(Error::config("gamma0_grid", format!("field strengths must be positive, got {g}")));
    }
    if restarts == Some(0) {
        return Err(Error::config("restarts", "must be at least 1"));
    }
    if seeds.is_empty() {
        return Err(Error::config("seeds", "need at least one seed"));
    }
    if let Some(s) = &synthetic {
        if s.docs == 0 || s.vocab == 0 || s.topics == 0 {
            return Err(Error::config("synthetic_docs", "synthetic sizes must be at least 1"));
        }
        positive("synthetic_alpha", s.alpha)?;
        positive("synthetic_eta", s.eta)?;
    }
    if algorithm != Algorithm::Qavb {
        m = 1;
    }

    let corpus = corpus_path.map(CorpusSource::Path).or(synthetic.map(CorpusSource::Synthetic));
    Ok(RunConfig {
        corpus,
        algorithm,
        k,
        m,
        beta0,
        r_beta,
        beta_eff0,
        gamma0,
        l_out,
        l_in,
        alpha,
        eta,
        seed,
        f_max,
        gamma0_grid,
        restarts,
        seeds,
    })
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    /// Canonical text form; `parse_config(&c.to_text()) == c`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("algorithm", &self.algorithm.as_str());
        match &self.corpus {
            Some(CorpusSource::Path(p)) => kv("corpus_path", &p.display()),
            Some(CorpusSource::Synthetic(s)) => {
                kv("synthetic_docs", &s.docs);
                kv("synthetic_vocab", &s.vocab);
                kv("synthetic_topics", &s.topics);
                kv("synthetic_doc_len", &s.doc_len);
                kv("synthetic_alpha", &s.alpha);
                kv("synthetic_eta", &s.eta);
                kv("synthetic_seed", &s.seed);
            }
            None => {}
        }
        kv("k", &self.k);
        kv("m", &self.m);
        kv("beta0", &self.beta0);
        kv("r_beta", &self.r_beta);
        kv("beta_eff0", &self.beta_eff0);
        kv("gamma0", &self.gamma0);
        kv("l_out", &self.l_out);
        kv("l_in", &self.l_in);
        kv("alpha", &self.alpha);
        kv("eta", &self.eta);
        kv("seed", &self.seed);
        kv("f_max", &self.f_max);
        kv("gamma0_grid", &join(&self.gamma0_grid));
        if let Some(r) = self.restarts {
            kv("restarts", &r);
        }
        kv("seeds", &join(&self.seeds));
        out
    }

    /// Engine configuration for a corpus with vocabulary size `v`.
    pub fn anneal_config(&self, v: usize) -> Result<AnnealConfig> {
        let (tempering, coupling) = match self.algorithm {
            Algorithm::Vb => (Tempering::Off, Coupling::Off),
            Algorithm::Savb => (Tempering::Annealed, Coupling::Off),
            Algorithm::Qavb => (Tempering::Annealed, Coupling::Annealed),
        };
        Ok(AnnealConfig {
            hyper: LdaHyper::new(self.k, v, self.alpha, self.eta)?,
            schedule: AnnealSchedule::new(self.beta0, self.r_beta, self.gamma0, self.beta_eff0)?,
            m: self.m,
            l_out: self.l_out,
            l_in: self.l_in,
            seed: self.seed,
            f_max: self.f_max,
            tempering,
            coupling,
        })
    }

    pub fn restarts(&self) -> usize {
        self.restarts.unwrap_or(self.m)
    }
}
