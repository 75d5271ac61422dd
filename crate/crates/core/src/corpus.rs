//! Bag-of-words corpus.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WordCount {
    pub word: usize,
    pub count: u32,
}

/// Documents as sparse word counts over a fixed vocabulary.
///
/// Within a document, entries are sorted by word id and each word occurs at
/// most once. Latent responsibilities are stored per entry (document, word
/// type), so the flat entry order here is the layout used everywhere else.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    vocab_size: usize,
    docs: Vec<Vec<WordCount>>,
    offsets: Vec<usize>,
    total_tokens: u64,
}

impl Corpus {
    pub fn new(vocab_size: usize, mut docs: Vec<Vec<WordCount>>) -> Result<Self> {
        let mut total_tokens = 0u64;
        for (d, doc) in docs.iter_mut().enumerate() {
            doc.sort_unstable_by_key(|wc| wc.word);
            for (i, wc) in doc.iter().enumerate() {
                if wc.word >= vocab_size {
                    return Err(Error::Corpus(format!(
                        "document {d}: word id {} outside vocabulary of {vocab_size}",
                        wc.word
                    )));
                }
                if wc.count == 0 {
                    return Err(Error::Corpus(format!(
                        "document {d}: word {} has zero count",
                        wc.word
                    )));
                }
                if i > 0 && doc[i - 1].word == wc.word {
                    return Err(Error::Corpus(format!(
                        "document {d}: word {} listed twice",
                        wc.word
                    )));
                }
                total_tokens += u64::from(wc.count);
            }
        }
        let mut offsets = Vec::with_capacity(docs.len() + 1);
        offsets.push(0);
        for doc in &docs {
            offsets.push(offsets.last().copied().unwrap_or(0) + doc.len());
        }
        Ok(Self {
            vocab_size,
            docs,
            offsets,
            total_tokens,
        })
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn docs(&self) -> &[Vec<WordCount>] {
        &self.docs
    }

    pub fn doc(&self, d: usize) -> &[WordCount] {
        &self.docs[d]
    }

    /// Number of (document, word type) entries.
    pub fn num_entries(&self) -> usize {
        self.offsets.last().copied().unwrap_or(0)
    }

    /// Index of the first entry of document `d` in the flat entry order.
    pub fn doc_offset(&self, d: usize) -> usize {
        self.offsets[d]
    }

    /// Count-weighted token total.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// `(doc, word, count)` for every entry, in flat entry order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.docs
            .iter()
            .enumerate()
            .flat_map(|(d, doc)| doc.iter().map(move |wc| (d, wc.word, wc.count)))
    }
}
