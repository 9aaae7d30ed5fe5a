//! `ossmm-kit`: synth → ingest → extract → cv → train → eval, plus online
//! replay and single-epoch inspection.

pub mod commands;
pub mod config;
pub mod error;
pub mod provenance;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use log::info;

pub use commands::*;
pub use config::{Overrides, RunConfig, Settings};
pub use error::CliError;

pub const THREADS_ENV: &str = "OSSMM_KIT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ossmm-kit", version, about = "Sleep staging from headband recordings")]
pub struct Cli {
    /// JSON run configuration; flags take precedence over its keys.
    #[arg(long, global = true, value_name = "JSON")]
    pub config: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Paths {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic corpus.
    Synth {
        #[command(flatten)]
        paths: Paths,
        #[arg(long)]
        nights: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Validate a corpus and report epoch bookkeeping.
    Ingest {
        #[command(flatten)]
        paths: Paths,
    },
    /// Compute the feature table and fix the train/test split.
    Extract {
        #[command(flatten)]
        paths: Paths,
    },
    /// Grouped cross-validation of the configuration grid.
    Cv {
        #[command(flatten)]
        paths: Paths,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Fit the best configuration of each classifier on all train nights.
    Train {
        #[command(flatten)]
        paths: Paths,
    },
    /// Score trained models on the test nights.
    Eval {
        #[command(flatten)]
        paths: Paths,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Replay one night through the online classifier as JSON lines.
    Simulate {
        #[command(flatten)]
        paths: Paths,
        #[arg(long)]
        night: String,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Pace playback at the recording's own rate.
        #[arg(long)]
        realtime: bool,
    },
    /// Export spectra and raw signals of one epoch as CSV.
    Inspect {
        #[command(flatten)]
        paths: Paths,
        #[arg(long)]
        night: String,
        #[arg(long)]
        epoch: usize,
    },
    /// Describe the feature set.
    Features {
        #[arg(long)]
        catalog: bool,
    },
}

fn settings(config: Option<&PathBuf>, paths: &Paths, folds: Option<usize>) -> Result<Settings, CliError> {
    let file = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    Settings::resolve(
        file,
        Overrides {
            corpus: paths.corpus.clone(),
            out: paths.out.clone(),
            seed: paths.seed,
            k_folds: folds,
        },
    )
}

fn init_threads(n: Option<usize>) -> Result<(), CliError> {
    let Some(n) = n else { return Ok(()) };
    if n == 0 {
        return Err(CliError::invalid(format!("{THREADS_ENV} must be at least 1")));
    }
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs one command, printing its summary to `stdout`.
pub fn run<W: Write>(cli: Cli, stdout: &mut W) -> Result<(), CliError> {
    init_threads(cli.threads)?;
    let cfg = cli.config.as_ref();
    match &cli.command {
        Command::Synth { paths, nights, epochs } => {
            let s = settings(cfg, paths, None)?;
            let m = cmd_synth(&s, *nights, *epochs)?;
            writeln!(
                stdout,
                "wrote {} nights of {} epochs; test nights {}",
                m.nights.len(),
                m.epochs_per_night,
                m.split.test_nights.join(", ")
            )?;
        }
        Command::Ingest { paths } => {
            let s = settings(cfg, paths, None)?;
            let r = cmd_ingest(&s)?;
            for n in &r.nights {
                writeln!(
                    stdout,
                    "{}: {} labels, {} qualified, {} short, {} not detected",
                    n.night_id,
                    n.summary.labels_total,
                    n.summary.epochs_qualified,
                    n.summary.excluded_short,
                    n.summary.excluded_not_detected
                )?;
            }
            let t = r.total;
            writeln!(
                stdout,
                "total: {} labels -> {} short + {} not detected excluded -> {} qualified",
                t.labels_total, t.excluded_short, t.excluded_not_detected, t.epochs_qualified
            )?;
        }
        Command::Extract { paths } => {
            let s = settings(cfg, paths, None)?;
            let m = cmd_extract(&s)?;
            writeln!(stdout, "wrote {} feature rows from {} nights", m.rows, m.rows_per_night.len())?;
        }
        Command::Cv { paths, folds } => {
            let s = settings(cfg, paths, *folds)?;
            let r = cmd_cv(&s)?;
            for c in &r.results.summaries {
                writeln!(
                    stdout,
                    "config {} {}: macro F1 {:.3} ± {:.3}, accuracy {:.3} ± {:.3}",
                    c.config_index,
                    c.config.kind().name(),
                    c.mean_macro_f1,
                    c.std_macro_f1,
                    c.mean_accuracy,
                    c.std_accuracy
                )?;
            }
        }
        Command::Train { paths } => {
            let s = settings(cfg, paths, None)?;
            for (kind, path, n) in cmd_train(&s)?.models {
                writeln!(stdout, "{}: {} rows -> {}", kind.name(), n, path.display())?;
            }
        }
        Command::Eval { paths, model } => {
            let s = settings(cfg, paths, None)?;
            let r = cmd_eval(&s, model.as_deref())?;
            write!(stdout, "{}", render_eval(&r))?;
        }
        Command::Simulate {
            paths,
            night,
            model,
            realtime,
        } => {
            let s = settings(cfg, paths, None)?;
            let sum = cmd_simulate(&s, night, model.as_deref(), *realtime, &mut *stdout)?;
            info!(
                "{night}: {} epochs, {} qualified, {} triggers",
                sum.epochs, sum.qualified, sum.triggers
            );
        }
        Command::Inspect { paths, night, epoch } => {
            let s = settings(cfg, paths, None)?;
            let r = cmd_inspect(&s, night, *epoch)?;
            writeln!(
                stdout,
                "{} epoch {} ({}, {} samples): {} spindles; wrote {}",
                r.night_id,
                r.epoch_idx,
                r.stage.as_label(),
                r.sample_count,
                r.spindles_s.len(),
                inspect_dir(s.out()?, night, *epoch).display()
            )?;
        }
        Command::Features { catalog } => {
            if *catalog {
                let text = serde_json::to_string_pretty(&ossmm_core::features::catalog_json())
                    .map_err(anyhow::Error::from)?;
                writeln!(stdout, "{text}")?;
            } else {
                for n in ossmm_core::features::names() {
                    writeln!(stdout, "{n}")?;
                }
            }
        }
    }
    Ok(())
}
