//! Coupled-replica annealing engine.
//!
//! `m` replicas (Trotter slices) of the LDA variational posterior are updated
//! in turn. Each replica's VB-E step adds an interaction that pulls its
//! responsibilities toward those of its two ring neighbours, after the topic
//! labels of the neighbours have been aligned by a label projection. The
//! coupling strength `f` follows from the current effective inverse
//! temperature and transverse field via [`kernel_constants`].
//!
//! With the coupling switched off the replicas are independent SAVB runs; with
//! tempering off as well and `m = 1` the engine is plain VB.
//!
//! Update order within one outer iteration `t`:
//!
//! 1. for each slice `j` in order, `l_in` sweeps of (E-step, M-step). The
//!    E-step reads neighbours as they currently are, so slice `j - 1` has
//!    already been updated this iteration and slice `j + 1` has not;
//! 2. recompute every label projection;
//! 3. record a [`HistoryRow`].
//!
//! Projections stay fixed during step 1.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::Corpus;
use crate::error::{domain, Error, Result};
use crate::lda::{self, LdaHyper, ReplicaState};
use crate::quantum_kernel::kernel_constants;
use crate::schedules::AnnealSchedule;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tempering {
    /// `beta_eff` follows the schedule.
    Annealed,
    /// `beta_eff = 1` throughout.
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    /// `f` follows from the schedule's `beta_eff` and transverse field.
    Annealed,
    /// `f = 0` throughout.
    Off,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealConfig {
    pub hyper: LdaHyper,
    pub schedule: AnnealSchedule,
    /// Trotter number.
    pub m: usize,
    pub l_out: u32,
    pub l_in: u32,
    pub seed: u64,
    /// Upper clamp for the coupling, keeps E-step exponents finite as the
    /// field vanishes.
    pub f_max: f64,
    pub tempering: Tempering,
    pub coupling: Coupling,
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(domain("Trotter number m must be at least 1"));
        }
        if self.l_in == 0 {
            return Err(domain("l_in must be at least 1"));
        }
        if !(self.f_max > 0.0) {
            return Err(domain(format!("f_max must be positive, got {}", self.f_max)));
        }
        Ok(())
    }

    /// Total inner sweeps over all replicas for a full run.
    pub fn total_sweeps(&self) -> u64 {
        self.m as u64 * u64::from(self.l_out) * u64::from(self.l_in)
    }

    /// Schedule values used during outer iteration `t` (1-based).
    pub fn iteration_params(&self, t: u32) -> Result<IterationParams> {
        if t == 0 {
            return Err(domain("outer iterations are numbered from 1"));
        }
        let beta_eff = match self.tempering {
            Tempering::Annealed => self.schedule.beta_eff_at(t - 1),
            Tempering::Off => 1.0,
        };
        match self.coupling {
            Coupling::Off => Ok(IterationParams {
                beta_eff,
                gamma: 0.0,
                f: 0.0,
                ln_b: 0.0,
                f_clamped: false,
            }),
            Coupling::Annealed => {
                let gamma = self.schedule.gamma_at(t)?;
                let kc = kernel_constants(beta_eff, gamma, self.hyper.k)?;
                let f_clamped = kc.f > self.f_max;
                Ok(IterationParams {
                    beta_eff,
                    gamma,
                    f: kc.f.min(self.f_max),
                    ln_b: kc.ln_b,
                    f_clamped,
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationParams {
    pub beta_eff: f64,
    /// Zero when coupling is off.
    pub gamma: f64,
    pub f: f64,
    pub ln_b: f64,
    pub f_clamped: bool,
}

/// Topic alignment of slice `j` with its ring neighbours.
///
/// Neither map needs to be a permutation: two topics may share a target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectionMap {
    /// Topic `k` of slice `j` to its best match in slice `j + 1`.
    pub forward: Vec<usize>,
    /// Topic `k` of slice `j` to its best match in slice `j - 1`.
    pub backward: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub t: u32,
    pub beta_eff: f64,
    pub gamma: f64,
    pub f: f64,
    pub f_clamped: bool,
    pub f_c: f64,
    pub f_q: f64,
    /// Negative untempered ELBO of each slice.
    pub energies: Vec<f64>,
}

/// Count-weighted correlation `C[k][k'] = sum_e count_e a(e, k) b(e, k')`.
pub fn label_correlation(corpus: &Corpus, a: &ReplicaState, b: &ReplicaState) -> Vec<f64> {
    let k = a.k();
    let mut corr = vec![0.0; k * k];
    for (entry, (_, _, c)) in corpus.entries().enumerate() {
        let c = f64::from(c);
        let ra = a.entry_resp(entry);
        let rb = b.entry_resp(entry);
        for (i, &x) in ra.iter().enumerate() {
            let cx = c * x;
            for (slot, &y) in corr[i * k..(i + 1) * k].iter_mut().zip(rb) {
                *slot += cx * y;
            }
        }
    }
    corr
}

/// Greedy label projection: each topic of `a` maps to the topic of `b` with
/// the largest count-weighted correlation, smallest index on ties.
pub fn project_labels(corpus: &Corpus, a: &ReplicaState, b: &ReplicaState) -> Vec<usize> {
    let k = a.k();
    let corr = label_correlation(corpus, a, b);
    corr.chunks_exact(k)
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// State of one coupled-replica run.
#[derive(Debug, Clone, PartialEq)]
pub struct QavbRun {
    config: AnnealConfig,
    streams: Vec<u64>,
    replicas: Vec<ReplicaState>,
    projections: Vec<ProjectionMap>,
    next_t: u32,
    history: Vec<HistoryRow>,
}

impl QavbRun {
    /// Replica `j` is initialized from stream `j` of the config seed.
    pub fn new(corpus: &Corpus, config: AnnealConfig) -> Result<Self> {
        let streams = (0..config.m as u64).collect();
        Self::with_streams(corpus, config, streams)
    }

    /// Replica `j` is initialized from stream `streams[j]` of the config seed.
    pub fn with_streams(corpus: &Corpus, config: AnnealConfig, streams: Vec<u64>) -> Result<Self> {
        config.validate()?;
        if streams.len() != config.m {
            return Err(Error::LengthMismatch {
                expected: config.m,
                actual: streams.len(),
            });
        }
        let beta_eff = config.iteration_params(1)?.beta_eff;
        let replicas = streams
            .iter()
            .map(|&s| {
                let mut rng = seed::stream_rng(config.seed, s);
                ReplicaState::initialize(corpus, &config.hyper, beta_eff, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut run = Self {
            config,
            streams,
            replicas,
            projections: Vec::new(),
            next_t: 1,
            history: Vec::new(),
        };
        run.projections = run.compute_projections(corpus);
        Ok(run)
    }

    /// Reassembles a run from saved parts (checkpoint restore).
    pub fn from_parts(
        config: AnnealConfig,
        streams: Vec<u64>,
        replicas: Vec<ReplicaState>,
        projections: Vec<ProjectionMap>,
        next_t: u32,
        history: Vec<HistoryRow>,
    ) -> Result<Self> {
        config.validate()?;
        let m = config.m;
        for len in [streams.len(), replicas.len(), projections.len()] {
            if len != m {
                return Err(Error::LengthMismatch { expected: m, actual: len });
            }
        }
        let k = config.hyper.k;
        for p in &projections {
            let ok = p.forward.len() == k
                && p.backward.len() == k
                && p.forward.iter().chain(&p.backward).all(|&x| x < k);
            if !ok {
                return Err(Error::State(format!("projection map out of range for k = {k}")));
            }
        }
        if next_t == 0 || history.len() != (next_t - 1) as usize {
            return Err(Error::State(format!(
                "history has {} rows but next iteration is {next_t}",
                history.len()
            )));
        }
        if history.iter().enumerate().any(|(i, r)| r.t != i as u32 + 1 || r.energies.len() != m) {
            return Err(Error::State("history rows are not consecutive from t = 1".into()));
        }
        Ok(Self {
            config,
            streams,
            replicas,
            projections,
            next_t,
            history,
        })
    }

    pub fn config(&self) -> &AnnealConfig {
        &self.config
    }

    pub fn streams(&self) -> &[u64] {
        &self.streams
    }

    pub fn replicas(&self) -> &[ReplicaState] {
        &self.replicas
    }

    pub fn projections(&self) -> &[ProjectionMap] {
        &self.projections
    }

    pub fn history(&self) -> &[HistoryRow] {
        &self.history
    }

    /// The iteration [`QavbRun::outer_iteration`] will perform next.
    pub fn next_t(&self) -> u32 {
        self.next_t
    }

    pub fn is_finished(&self) -> bool {
        self.next_t > self.config.l_out
    }

    fn m(&self) -> usize {
        self.config.m
    }

    fn prev(&self, j: usize) -> usize {
        (j + self.m() - 1) % self.m()
    }

    fn next(&self, j: usize) -> usize {
        (j + 1) % self.m()
    }

    /// `f * (resp_{j-1}(e, backward_j[k]) + resp_{j+1}(e, forward_j[k]))`, ring indices.
    pub fn interaction_term(&self, entry: usize, topic: usize, j: usize, f: f64) -> f64 {
        let proj = &self.projections[j];
        let before = self.replicas[self.prev(j)].entry_resp(entry)[proj.backward[topic]];
        let after = self.replicas[self.next(j)].entry_resp(entry)[proj.forward[topic]];
        f * (before + after)
    }

    fn compute_projections(&self, corpus: &Corpus) -> Vec<ProjectionMap> {
        (0..self.m())
            .map(|j| {
                let slice = &self.replicas[j];
                ProjectionMap {
                    forward: project_labels(corpus, slice, &self.replicas[self.next(j)]),
                    backward: project_labels(corpus, slice, &self.replicas[self.prev(j)]),
                }
            })
            .collect()
    }

    /// One interaction-augmented VB-E step on slice `j`, followed by a tempered
    /// VB-M step.
    fn sweep(&mut self, corpus: &Corpus, j: usize, beta_eff: f64, f: f64) -> Result<()> {
        let hyper = self.config.hyper;
        let exp = self.replicas[j].expectations(&hyper);
        let resp = lda::e_step(corpus, &exp, beta_eff, |entry, logits| {
            for (topic, slot) in logits.iter_mut().enumerate() {
                *slot += self.interaction_term(entry, topic, j, f);
            }
        });
        let (lambda, gamma_doc) = lda::m_step(&resp, corpus, &hyper, beta_eff)?;
        let slice = &mut self.replicas[j];
        slice.set_resp(resp);
        slice.set_params(lambda, gamma_doc);
        Ok(())
    }

    /// Runs outer iteration `next_t` and returns its history row.
    pub fn outer_iteration(&mut self, corpus: &Corpus) -> Result<&HistoryRow> {
        let t = self.next_t;
        let params = self.config.iteration_params(t)?;
        for j in 0..self.m() {
            for _ in 0..self.config.l_in {
                self.sweep(corpus, j, params.beta_eff, params.f)?;
            }
        }
        self.projections = self.compute_projections(corpus);

        let (f_c, f_q) = self.free_energy_terms_with(corpus, &params);
        let energies = self.energies(corpus);
        self.history.push(HistoryRow {
            t,
            beta_eff: params.beta_eff,
            gamma: params.gamma,
            f: params.f,
            f_clamped: params.f_clamped,
            f_c,
            f_q,
            energies,
        });
        self.next_t += 1;
        Ok(self.history.last().expect("row just pushed"))
    }

    /// Runs the remaining outer iterations up to `l_out`.
    pub fn run(&mut self, corpus: &Corpus) -> Result<()> {
        while !self.is_finished() {
            self.outer_iteration(corpus)?;
        }
        Ok(())
    }

    /// Negative untempered ELBO of each slice in its current state.
    pub fn energies(&self, corpus: &Corpus) -> Vec<f64> {
        self.replicas
            .iter()
            .map(|r| -lda::classical_free_energy(r, corpus, &self.config.hyper))
            .collect()
    }

    /// `sum_j sum_e count_e sum_k resp_j(e, k) resp_{j+1}(e, forward_j[k])`.
    pub fn correlation_sum(&self, corpus: &Corpus) -> f64 {
        let mut total = 0.0;
        for j in 0..self.m() {
            let here = &self.replicas[j];
            let there = &self.replicas[self.next(j)];
            let forward = &self.projections[j].forward;
            for (entry, (_, _, c)) in corpus.entries().enumerate() {
                let a = here.entry_resp(entry);
                let b = there.entry_resp(entry);
                let s: f64 = a.iter().zip(forward).map(|(&x, &k2)| x * b[k2]).sum();
                total += f64::from(c) * s;
            }
        }
        total
    }

    /// `(F_c, F_q)` for the current state, evaluated with the schedule values
    /// of iteration `t`.
    ///
    /// `F_c` is the sum of tempered per-slice ELBOs; `F_q` is
    /// `m N ln b + f * correlation_sum`, and zero when coupling is off.
    pub fn free_energy_terms(&self, corpus: &Corpus, t: u32) -> Result<(f64, f64)> {
        let params = self.config.iteration_params(t)?;
        Ok(self.free_energy_terms_with(corpus, &params))
    }

    fn free_energy_terms_with(&self, corpus: &Corpus, params: &IterationParams) -> (f64, f64) {
        let hyper = &self.config.hyper;
        let f_c = self
            .replicas
            .iter()
            .map(|r| lda::tempered_free_energy(r, corpus, hyper, params.beta_eff))
            .sum();
        let f_q = match self.config.coupling {
            Coupling::Off => 0.0,
            Coupling::Annealed => {
                let mn = self.m() as f64 * corpus.total_tokens() as f64;
                mn * params.ln_b + params.f * self.correlation_sum(corpus)
            }
        };
        (f_c, f_q)
    }

    /// `(slice, energy)` of the lowest negative ELBO in the latest history
    /// row; the smallest slice index wins ties.
    pub fn best_replica(&self) -> Result<(usize, f64)> {
        let row = self
            .history
            .last()
            .ok_or_else(|| Error::State("run has no completed iterations".into()))?;
        let mut best = (0, row.energies[0]);
        for (j, &e) in row.energies.iter().enumerate().skip(1) {
            if e < best.1 {
                best = (j, e);
            }
        }
        Ok(best)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartOutcome {
    /// Lowest final energy over all restarts.
    pub best: f64,
    /// Final energy of each restart, in restart order.
    pub energies: Vec<f64>,
    /// Outer iterations given to each restart.
    pub l_out_per_restart: u32,
}

/// Independent SAVB restarts under a fixed total sweep budget.
///
/// Each restart is a single-replica run with tempering on and coupling off,
/// initialized from stream `r` of the config seed, so restart `r` starts
/// from the same state as replica `r` of a coupled run with the same seed.
/// The budget is split evenly: every restart gets
/// `budget / (restarts * l_in)` outer iterations, which must be a whole
/// number.
pub fn savb_restart_harness(
    corpus: &Corpus,
    config: &AnnealConfig,
    restarts: usize,
    budget_sweeps: u64,
) -> Result<RestartOutcome> {
    if restarts == 0 {
        return Err(domain("need at least one restart"));
    }
    let per_restart = restarts as u64 * u64::from(config.l_in);
    if budget_sweeps == 0 || budget_sweeps % per_restart != 0 {
        return Err(domain(format!(
            "budget of {budget_sweeps} sweeps does not split into {restarts} restarts of whole outer iterations (l_in = {})",
            config.l_in
        )));
    }
    let l_out = u32::try_from(budget_sweeps / per_restart)
        .map_err(|_| domain("per-restart iteration count overflows"))?;
    let savb = AnnealConfig {
        m: 1,
        l_out,
        tempering: Tempering::Annealed,
        coupling: Coupling::Off,
        ..config.clone()
    };
    let mut energies = Vec::with_capacity(restarts);
    for r in 0..restarts {
        let mut run = QavbRun::with_streams(corpus, savb.clone(), vec![r as u64])?;
        run.run(corpus)?;
        energies.push(run.best_replica()?.1);
    }
    let best = energies.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(RestartOutcome {
        best,
        energies,
        l_out_per_restart: l_out,
    })
}
