//! Bag-of-words corpus files and planted synthetic corpora.
//!
//! File format, ASCII, newline-delimited:
//!
//! ```text
//! D
//! W
//! NNZ
//! docId wordId count      (NNZ lines, 1-based ids)
//! ```
//!
//! Repeated `(docId, wordId)` pairs are summed on load. [`write_bow`] emits
//! one line per entry in document-then-word order, single spaces.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use qavb_core::{Corpus, WordCount};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;

use crate::error::{Error, Result};

pub fn load_bow(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_bow(&text)
}

pub fn parse_bow(text: &str) -> Result<Corpus> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut header = |name: &str| -> Result<usize> {
        let (no, line) = lines
            .next()
            .ok_or_else(|| Error::parse(0, format!("missing {name} header")))?;
        line.parse()
            .map_err(|_| Error::parse(no, format!("{name} header `{line}` is not a non-negative integer")))
    };
    let d = header("D")?;
    let w = header("W")?;
    let nnz = header("NNZ")?;

    let mut docs: Vec<BTreeMap<usize, u32>> = vec![BTreeMap::new(); d];
    let mut seen = 0usize;
    let mut last_line = 3;
    for (no, line) in lines {
        last_line = no;
        if line.is_empty() {
            continue;
        }
        seen += 1;
        if seen > nnz {
            return Err(Error::parse(no, format!("more entries than the declared NNZ = {nnz}")));
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [doc, word, count] = fields[..] else {
            return Err(Error::parse(no, format!("expected `docId wordId count`, got `{line}`")));
        };
        let id = |s: &str, what: &str, max: usize| -> Result<usize> {
            match s.parse::<usize>() {
                Ok(v) if (1..=max).contains(&v) => Ok(v - 1),
                _ => Err(Error::parse(no, format!("{what} `{s}` outside 1..={max}"))),
            }
        };
        let doc = id(doc, "docId", d)?;
        let word = id(word, "wordId", w)?;
        let count: u32 = match count.parse() {
            Ok(c) if c >= 1 => c,
            _ => return Err(Error::parse(no, format!("count `{count}` must be a positive integer"))),
        };
        let slot = docs[doc].entry(word).or_insert(0);
        *slot = slot
            .checked_add(count)
            .ok_or_else(|| Error::parse(no, "summed count overflows"))?;
    }
    if seen != nnz {
        return Err(Error::parse(last_line, format!("found {seen} entries, header declares NNZ = {nnz}")));
    }

    let docs = docs
        .into_iter()
        .map(|m| m.into_iter().map(|(word, count)| WordCount { word, count }).collect())
        .collect();
    Ok(Corpus::new(w, docs)?)
}

pub fn format_bow(corpus: &Corpus) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}\n{}\n{}", corpus.num_docs(), corpus.vocab_size(), corpus.num_entries());
    for (d, w, c) in corpus.entries() {
        let _ = writeln!(out, "{} {} {}", d + 1, w + 1, c);
    }
    out
}

pub fn write_bow(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_bow(corpus)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub docs: usize,
    pub vocab: usize,
    pub topics: usize,
    pub doc_len: usize,
    pub alpha: f64,
    pub eta: f64,
}

/// A planted-topic corpus and its `topics x vocab` row-stochastic topic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub corpus: Corpus,
    pub topics: Vec<f64>,
}

/// Samples an LDA corpus: topics from `Dir(eta)`, per-document proportions
/// from `Dir(alpha)`, then `doc_len` tokens per document.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Synthetic> {
    let SyntheticSpec {
        seed,
        docs,
        vocab,
        topics: k,
        doc_len,
        alpha,
        eta,
    } = *spec;
    if docs == 0 || vocab == 0 || k == 0 {
        return Err(Error::config("synthetic", "documents, vocabulary and topics must all be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dirichlet = |conc: f64, dim: usize| -> Result<Vec<f64>> {
        let gamma = Gamma::new(conc, 1.0).map_err(|e| Error::config("synthetic", format!("concentration {conc}: {e}")))?;
        let mut draw: Vec<f64> = (0..dim).map(|_| gamma.sample(&mut rng)).collect();
        let total: f64 = draw.iter().sum();
        // tiny concentrations can underflow every component to zero
        if total > 0.0 && total.is_finite() {
            draw.iter_mut().for_each(|x| *x /= total);
        } else {
            draw.fill(1.0 / dim as f64);
        }
        Ok(draw)
    };

    let mut topic_matrix = Vec::with_capacity(k * vocab);
    for _ in 0..k {
        topic_matrix.extend(dirichlet(eta, vocab)?);
    }
    let proportions = (0..docs).map(|_| dirichlet(alpha, k)).collect::<Result<Vec<_>>>()?;

    let word_dists = topic_matrix
        .chunks_exact(vocab)
        .map(|row| WeightedIndex::new(row).expect("normalized topic row"))
        .collect::<Vec<_>>();
    let mut out = Vec::with_capacity(docs);
    for theta in &proportions {
        let topic_dist = WeightedIndex::new(theta).expect("normalized proportions");
        let mut counts = BTreeMap::new();
        for _ in 0..doc_len {
            let z = topic_dist.sample(&mut rng);
            let w = word_dists[z].sample(&mut rng);
            *counts.entry(w).or_insert(0u32) += 1;
        }
        out.push(counts.into_iter().map(|(word, count)| WordCount { word, count }).collect());
    }
    Ok(Synthetic {
        corpus: Corpus::new(vocab, out)?,
        topics: topic_matrix,
    })
}
