use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use qavb::checkpoint::load_checkpoint;
use qavb::config::parse_config;
use qavb::corpus_io::{gen_synthetic, write_bow, SyntheticSpec};
use qavb::experiment::{self, RunOptions};
use qavb::oracle;

#[derive(Parser)]
#[command(version, about = "Coupled-replica annealing for variational LDA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run vb, savb or qavb and write history.csv and summary.txt.
    Run {
        /// Run configuration file.
        #[arg(long, required_unless_present = "resume")]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Save the run state here when stopping (and periodically with --checkpoint-every).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 0, requires = "checkpoint")]
        checkpoint_every: u32,
        /// Stop after this outer iteration.
        #[arg(long)]
        stop_after: Option<u32>,
        /// Continue from a checkpoint; its embedded configuration is used.
        #[arg(long, conflicts_with = "config")]
        resume: Option<PathBuf>,
    },
    /// Coupled runs against equal-budget SAVB restarts over seeds and field strengths.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Write a planted-topic corpus in bag-of-words format.
    Gen {
        #[arg(long)]
        out: PathBuf,
        /// Also write the planted topic-word matrix as CSV.
        #[arg(long)]
        topics_out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        docs: usize,
        #[arg(long, default_value_t = 200)]
        vocab: usize,
        #[arg(long, default_value_t = 5)]
        topics: usize,
        #[arg(long, default_value_t = 50)]
        doc_len: usize,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, default_value_t = 0.05)]
        eta: f64,
    },
    /// Exact checks of the replica kernel on enumerable systems.
    Oracle,
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            checkpoint,
            checkpoint_every,
            stop_after,
            resume,
        } => {
            let (cfg, corpus, run) = if let Some(path) = resume {
                let ck = load_checkpoint(&path).with_context(|| format!("reading {}", path.display()))?;
                let cfg = ck.config.clone();
                let corpus = experiment::load_corpus(&cfg)?;
                let run = ck.into_run(&corpus)?;
                (cfg, corpus, run)
            } else {
                let path = config.expect("clap enforces --config without --resume");
                let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                let cfg = parse_config(&text)?;
                let corpus = experiment::load_corpus(&cfg)?;
                let run = experiment::new_run(&cfg, &corpus)?;
                (cfg, corpus, run)
            };
            let opts = RunOptions {
                checkpoint,
                checkpoint_every,
                stop_after,
            };
            let report = experiment::run_command(&cfg, &corpus, run, &out, &opts)?;
            match report.summary {
                Some(s) => println!("{s}"),
                None => println!("no iterations run"),
            }
            if !report.finished {
                println!("stopped before l_out = {}", cfg.l_out);
            }
        }
        Command::Compare { config, out } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let cfg = parse_config(&text)?;
            let corpus = experiment::load_corpus(&cfg)?;
            let summary = experiment::compare_command(&cfg, &corpus, &out)?;
            print!("{}", experiment::format_comparison_summary(&summary));
        }
        Command::Gen {
            out,
            topics_out,
            seed,
            docs,
            vocab,
            topics,
            doc_len,
            alpha,
            eta,
        } => {
            let spec = SyntheticSpec {
                seed,
                docs,
                vocab,
                topics,
                doc_len,
                alpha,
                eta,
            };
            let synth = gen_synthetic(&spec)?;
            write_bow(&synth.corpus, &out)?;
            if let Some(path) = topics_out {
                let rows: String = synth
                    .topics
                    .chunks_exact(vocab)
                    .map(|row| row.iter().map(f64::to_string).collect::<Vec<_>>().join(",") + "\n")
                    .collect();
                fs::write(&path, rows).with_context(|| format!("writing {}", path.display()))?;
            }
            println!(
                "wrote {} documents, {} tokens to {}",
                synth.corpus.num_docs(),
                synth.corpus.total_tokens(),
                out.display()
            );
        }
        Command::Oracle => {
            let checks = oracle::run_checks()?;
            print!("{}", oracle::format_table(&checks));
            if checks.iter().any(|c| !c.passed) {
                bail!("oracle checks failed");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
