//! Variational Bayes for latent Dirichlet allocation with simulated and
//! quantum annealing.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only numerics:
//!
//! * [`quantum_kernel`]: the closed-form Trotter interaction kernel and the
//!   dense brute-force oracles (transverse-field Hamiltonian, exact traces,
//!   enumerated Trotter marginal) used to check it.
//! * [`schedules`]: inverse-temperature and transverse-field schedules.
//! * [`lda`]: tempered VB-E / VB-M updates and the variational free energy.
//! * [`toy_mixture`]: an enumerable multinomial mixture with exact marginals.
//! * [`annealer`]: the coupled-replica engine (plain VB, SAVB and QAVB).
//!
//! File formats, the CLI and experiment drivers live in the `qavb` crate.
#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod annealer;
pub mod corpus;
mod error;
pub mod linalg;
pub mod lda;
pub mod math;
pub mod quantum_kernel;
pub mod schedules;
pub mod seed;
pub mod toy_mixture;

pub use annealer::{AnnealConfig, Coupling, HistoryRow, ProjectionMap, QavbRun, Tempering};
pub use corpus::{Corpus, WordCount};
pub use error::{Error, Result};
pub use lda::{LdaHyper, ReplicaState};
pub use quantum_kernel::{Assignment, DenseSystem, KernelConstants};
pub use schedules::AnnealSchedule;
pub use toy_mixture::ToyInstance;
