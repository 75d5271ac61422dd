//! `run` and `compare` as library calls.
//!
//! `run` writes `history.csv` (`t,beta_eff,gamma,f,F_c,F_q,E_1..E_m`, one row
//! per outer iteration, `E_j` the negative untempered ELBO of slice `j`) and
//! `summary.txt`. `compare` writes `comparison.csv`
//! (`seed,gamma0,qavb_min_energy,savb_min_energy,savb_all_energies`, the last
//! field `;`-separated) and `comparison_summary.csv` with per-field-strength
//! aggregates. Every number is printed in shortest round-trip form, so equal
//! inputs give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use qavb_core::annealer::savb_restart_harness;
use qavb_core::{Corpus, QavbRun};
use rayon::prelude::*;

use crate::checkpoint::save_checkpoint;
use crate::config::{CorpusSource, RunConfig};
use crate::corpus_io::{gen_synthetic, load_bow};
use crate::error::{Error, Result};

/// Writes via a temporary sibling and a rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_corpus(config: &RunConfig) -> Result<Corpus> {
    match &config.corpus {
        Some(CorpusSource::Path(p)) => load_bow(p),
        Some(CorpusSource::Synthetic(spec)) => Ok(gen_synthetic(spec)?.corpus),
        None => Err(Error::config("corpus_path", "no corpus given: set corpus_path or the synthetic_* keys")),
    }
}

pub fn format_history(run: &QavbRun) -> String {
    let mut out = String::from("t,beta_eff,gamma,f,F_c,F_q");
    for j in 1..=run.config().m {
        let _ = write!(out, ",E_{j}");
    }
    out.push('\n');
    for row in run.history() {
        let _ = write!(out, "{},{},{},{},{},{}", row.t, row.beta_eff, row.gamma, row.f, row.f_c, row.f_q);
        for e in &row.energies {
            let _ = write!(out, ",{e}");
        }
        out.push('\n');
    }
    out
}

/// `min_energy`, 1-based `slice` and the iterations at which the coupling
/// hit its clamp.
pub fn format_summary(run: &QavbRun) -> Result<String> {
    let (j, e) = run.best_replica()?;
    let clamped: Vec<String> = run
        .history()
        .iter()
        .filter(|r| r.f_clamped)
        .map(|r| r.t.to_string())
        .collect();
    let t = run.history().last().map_or(0, |r| r.t);
    let mut s = format!("t={t} min_energy={e} slice={}", j + 1);
    if !clamped.is_empty() {
        let _ = write!(s, " f_clamped_at={}", clamped.join(";"));
    }
    Ok(s)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Where to save the checkpoint.
    pub checkpoint: Option<PathBuf>,
    /// Save every this many outer iterations; 0 saves only when stopping.
    pub checkpoint_every: u32,
    /// Stop after this outer iteration even if `l_out` is not reached.
    pub stop_after: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub finished: bool,
    pub summary: Option<String>,
}

/// Runs (or continues) `run` and writes `history.csv` and `summary.txt` to
/// `out_dir`.
pub fn run_command(
    config: &RunConfig,
    corpus: &Corpus,
    mut run: QavbRun,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<RunReport> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    while !run.is_finished() {
        if opts.stop_after.is_some_and(|s| run.next_t() > s) {
            break;
        }
        run.outer_iteration(corpus)?;
        if let Some(path) = &opts.checkpoint {
            let t = run.next_t() - 1;
            if opts.checkpoint_every > 0 && t % opts.checkpoint_every == 0 {
                save_checkpoint(config, &run, path)?;
            }
        }
    }
    if let Some(path) = &opts.checkpoint {
        save_checkpoint(config, &run, path)?;
    }
    write_atomic(&out_dir.join("history.csv"), &format_history(&run))?;
    let summary = if run.history().is_empty() {
        None
    } else {
        let s = format_summary(&run)?;
        write_atomic(&out_dir.join("summary.txt"), &format!("{s}\n"))?;
        Some(s)
    };
    Ok(RunReport {
        finished: run.is_finished(),
        summary,
    })
}

pub fn new_run(config: &RunConfig, corpus: &Corpus) -> Result<QavbRun> {
    let anneal = config.anneal_config(corpus.vocab_size())?;
    Ok(QavbRun::new(corpus, anneal)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub seed: u64,
    pub gamma0: f64,
    pub qavb_min_energy: f64,
    pub savb_min_energy: f64,
    pub savb_all_energies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareSummary {
    pub gamma0: f64,
    pub runs: usize,
    pub qavb_mean: f64,
    /// Mean squared deviation from `qavb_mean`.
    pub qavb_mse: f64,
    pub savb_mean: f64,
    pub savb_mse: f64,
    /// Seeds on which the coupled run is at or below the best restart.
    pub qavb_le_savb_best: usize,
    /// Seeds on which the coupled run is at or below the median restart.
    pub qavb_le_savb_median: usize,
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean_and_mse(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let mse = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, mse)
}

/// Coupled run versus equal-budget SAVB restarts for every
/// `(seed, gamma0)` cell; rows are seed-major in configuration order.
///
/// Restarts ignore the field strength, so they run once per seed. Both sides
/// spend `m * l_out * l_in` inner sweeps.
pub fn compare(config: &RunConfig, corpus: &Corpus) -> Result<Vec<CompareRow>> {
    let restarts = config.restarts();
    let base = config.anneal_config(corpus.vocab_size())?;
    let budget = base.total_sweeps();

    let savb: Vec<(u64, Vec<f64>, f64)> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let cfg = qavb_core::AnnealConfig { seed, ..base.clone() };
            let out = savb_restart_harness(corpus, &cfg, restarts, budget)?;
            Ok((seed, out.energies, out.best))
        })
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, f64)> = (0..config.seeds.len())
        .flat_map(|i| config.gamma0_grid.iter().map(move |&g| (i, g)))
        .collect();
    cells
        .par_iter()
        .map(|&(i, gamma0)| {
            let (seed, ref energies, best) = savb[i];
            let cell = RunConfig {
                seed,
                gamma0,
                ..config.clone()
            };
            let mut run = new_run(&cell, corpus)?;
            run.run(corpus)?;
            Ok(CompareRow {
                seed,
                gamma0,
                qavb_min_energy: run.best_replica()?.1,
                savb_min_energy: best,
                savb_all_energies: energies.clone(),
            })
        })
        .collect()
}

pub fn summarize(grid: &[f64], rows: &[CompareRow]) -> Vec<CompareSummary> {
    grid.iter()
        .map(|&gamma0| {
            let cell: Vec<&CompareRow> = rows.iter().filter(|r| r.gamma0 == gamma0).collect();
            let q: Vec<f64> = cell.iter().map(|r| r.qavb_min_energy).collect();
            let s: Vec<f64> = cell.iter().map(|r| r.savb_min_energy).collect();
            let (qavb_mean, qavb_mse) = mean_and_mse(&q);
            let (savb_mean, savb_mse) = mean_and_mse(&s);
            CompareSummary {
                gamma0,
                runs: cell.len(),
                qavb_mean,
                qavb_mse,
                savb_mean,
                savb_mse,
                qavb_le_savb_best: cell.iter().filter(|r| r.qavb_min_energy <= r.savb_min_energy).count(),
                qavb_le_savb_median: cell
                    .iter()
                    .filter(|r| r.qavb_min_energy <= median(&r.savb_all_energies))
                    .count(),
            }
        })
        .collect()
}

pub fn format_comparison(rows: &[CompareRow]) -> String {
    let mut out = String::from("seed,gamma0,qavb_min_energy,savb_min_energy,savb_all_energies\n");
    for r in rows {
        let all: Vec<String> = r.savb_all_energies.iter().map(f64::to_string).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.seed,
            r.gamma0,
            r.qavb_min_energy,
            r.savb_min_energy,
            all.join(";")
        );
    }
    out
}

pub fn format_comparison_summary(summary: &[CompareSummary]) -> String {
    let mut out =
        String::from("gamma0,runs,qavb_mean,qavb_mse,savb_mean,savb_mse,qavb_le_savb_best,qavb_le_savb_median\n");
    for s in summary {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.gamma0, s.runs, s.qavb_mean, s.qavb_mse, s.savb_mean, s.savb_mse, s.qavb_le_savb_best, s.qavb_le_savb_median
        );
    }
    out
}

/// Runs [`compare`] and writes both CSV files to `out_dir`.
pub fn compare_command(config: &RunConfig, corpus: &Corpus, out_dir: &Path) -> Result<Vec<CompareSummary>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let rows = compare(config, corpus)?;
    let summary = summarize(&config.gamma0_grid, &rows);
    write_atomic(&out_dir.join("comparison.csv"), &format_comparison(&rows))?;
    write_atomic(&out_dir.join("comparison_summary.csv"), &format_comparison_summary(&summary))?;
    Ok(summary)
}
