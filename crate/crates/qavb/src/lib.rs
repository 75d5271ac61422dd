//! File formats, run configuration and experiment drivers around
//! [`qavb_core`].
//!
//! * [`corpus_io`]: bag-of-words corpora and planted synthetic corpora.
//! * [`config`]: the line-based run configuration.
//! * [`checkpoint`]: exact save/restore of a coupled-replica run.
//! * [`experiment`]: `run` and `compare` as library calls, writing CSV results.
//! * [`oracle`]: small exact checks of the replica kernel, runnable from the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod config;
pub mod corpus_io;
mod error;
pub mod experiment;
pub mod oracle;

pub use error::{Error, Result};
pub use qavb_core;
