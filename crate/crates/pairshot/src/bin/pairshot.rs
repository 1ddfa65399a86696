//! Command-line entry point: reproducible experiment runs over the library.
//!
//! Subcommands mirror the experiment lifecycle: `gen-synth` writes a
//! synthetic paired dataset, `train` fits a model at one seed, `eval` runs
//! the episodic protocol and emits a table plus CSV, and `report` merges
//! CSV files into one table. Flags override config-file values; the
//! PAIRSHOT_DATA_DIR environment variable supplies a default data directory.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pairshot::error::{Error, Result};
use pairshot::eval::TaskKind;
use pairshot::experiment::{
    cmd_eval, cmd_gen_synth, cmd_report, cmd_train, format_report_table, ExperimentConfig,
    ModelKind, DATA_DIR_ENV,
};

#[derive(Parser)]
#[command(name = "pairshot", version, about = "Multimodal one-shot learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic paired dataset (FSA1 + IDX + manifest).
    GenSynth(CommonArgs),
    /// Train a model at one seed; writes checkpoints and a training log.
    Train(CommonArgs),
    /// Run the episodic evaluation protocol; prints a table and writes CSV.
    Eval(EvalArgs),
    /// Merge previously written CSV results into one table.
    Report(ReportArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Key/value config file ([experiment] and [synthetic] sections).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    ways: Option<usize>,
    #[arg(long)]
    shots: Option<usize>,
    /// Matching-set size.
    #[arg(long)]
    matching: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Queries per episode.
    #[arg(long)]
    queries: Option<usize>,
    /// Evaluation seeds.
    #[arg(long)]
    seeds: Option<usize>,
    /// Triplet margin m.
    #[arg(long)]
    margin: Option<f64>,
    /// Classes per balanced batch.
    #[arg(long)]
    p: Option<usize>,
    /// Examples per class per balanced batch.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Training / base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for episode evaluation.
    #[arg(long)]
    threads: Option<usize>,
    /// Measure wall time in the CSV (off keeps reports byte-reproducible).
    #[arg(long)]
    timing: bool,
    /// Dataset directory holding manifest.txt (default: $PAIRSHOT_DATA_DIR,
    /// else an in-memory synthetic dataset).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Synthetic noise scale sigma.
    #[arg(long)]
    sigma: Option<f64>,
    /// Synthetic speaker-offset scale tau.
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Directory holding checkpoints written by `train` (neural models).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// CSV files written by `eval`.
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

impl CommonArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            cfg.apply_file(&text)?;
        }
        if let Some(task) = &self.task {
            cfg.task = TaskKind::parse(task)?;
        }
        if let Some(model) = &self.model {
            cfg.model = ModelKind::parse(model)?;
        }
        if let Some(v) = self.ways {
            cfg.ways = v;
        }
        if let Some(v) = self.shots {
            cfg.shots = v;
        }
        if let Some(v) = self.matching {
            cfg.matching_size = v;
        }
        if let Some(v) = self.episodes {
            cfg.episodes = v;
        }
        if let Some(v) = self.queries {
            cfg.queries = v;
        }
        if let Some(v) = self.seeds {
            cfg.seeds = v;
        }
        if let Some(v) = self.margin {
            cfg.margin = v;
        }
        if let Some(v) = self.p {
            cfg.classes_per_batch = v;
        }
        if let Some(v) = self.k {
            cfg.examples_per_class = v;
        }
        if let Some(v) = self.lr {
            cfg.base_lr = v;
        }
        if let Some(v) = self.decay {
            cfg.lr_decay = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.threads {
            cfg.threads = v;
        }
        if self.timing {
            cfg.timing = true;
        }
        if let Some(v) = &self.data {
            cfg.data_dir = Some(v.clone());
        } else if cfg.data_dir.is_none() {
            if let Ok(dir) = std::env::var(DATA_DIR_ENV) {
                if !dir.is_empty() {
                    cfg.data_dir = Some(PathBuf::from(dir));
                }
            }
        }
        if let Some(v) = &self.out {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = self.sigma {
            cfg.synth.noise_sigma = v;
        }
        if let Some(v) = self.tau {
            cfg.synth.speaker_offset_tau = v;
        }
        // The speaker-invariance construction pins one query class and
        // speaker per episode, so default to a single query unless asked.
        if cfg.task == TaskKind::SpeakerInvariance && self.queries.is_none() {
            cfg.queries = 1;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run() -> Result<()> {
    let cli = Cli::try_parse().map_err(|e| {
        // clap usage errors are config errors; help/version print and exit 0.
        if e.use_stderr() {
            Error::Config(e.to_string())
        } else {
            e.print().ok();
            std::process::exit(0);
        }
    })?;

    match cli.command {
        Command::GenSynth(args) => {
            let cfg = args.resolve()?;
            let manifest_path = cmd_gen_synth(&cfg)?;
            println!("wrote {}", manifest_path.display());
        }
        Command::Train(args) => {
            let cfg = args.resolve()?;
            let (speech, vision) = cmd_train(&cfg)?;
            println!("wrote {}", speech.display());
            println!("wrote {}", vision.display());
        }
        Command::Eval(args) => {
            let cfg = args.common.resolve()?;
            let (report, csv_path) = cmd_eval(&cfg, args.checkpoint.as_deref())?;
            let rows = vec![(
                report.model.clone(),
                report.task.as_str().to_string(),
                report.mean_accuracy,
                report.ci95_halfwidth,
            )];
            print!("{}", format_report_table(&rows));
            println!("{}", report.to_record());
            println!("wrote {}", csv_path.display());
        }
        Command::Report(args) => {
            let table = cmd_report(&args.files)?;
            print!("{table}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
