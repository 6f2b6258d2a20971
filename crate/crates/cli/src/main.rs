use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nqac_core::datasets::{bars_vs_stripes, coarse_grain_binarize, generate_bas, load_mnist_idx, prepare_supervised};
use nqac_core::datasets::{BasSpec, BinaryDataset};
use nqac_core::experiment::{self, ExperimentConfig, RunOptions};
use nqac_core::metrics::classification_accuracy;
use nqac_core::trainer::{predict_dataset, Checkpoint};
use nqac_core::Error;

#[derive(Parser)]
#[command(name = "nqac", version, about = "Boltzmann machine training through nested annealing correction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML file.
    Run {
        config: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Continue in an output directory that already holds records.
        #[arg(long)]
        resume: bool,
        /// Result directory; overrides `output` in the config.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Aggregate a result directory into summary.csv and summary.json.
    Report { dir: PathBuf },
    /// Generate or convert a dataset.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Predict labels with a saved model.
    Predict {
        checkpoint: PathBuf,
        /// Dataset file; labelled files also report accuracy.
        images: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Bars-and-stripes images.
    Bas {
        #[arg(long, default_value_t = 4)]
        d: usize,
        #[arg(long, default_value_t = 5000)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// MNIST IDX files to the 12-pixel, 4-label-bit supervised layout.
    Mnist {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Two-class bars-vs-stripes task.
    BarsVsStripes {
        #[arg(long, default_value_t = 1000)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Failure with its exit status.
enum Failure {
    Config(Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e),
            other => Failure::Runtime(other),
        }
    }
}

fn config_stage(e: Error) -> Failure {
    Failure::Config(e)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run {
            config,
            workers,
            resume,
            output,
        } => {
            let exp = ExperimentConfig::from_path(&config).map_err(config_stage)?;
            exp.validate().map_err(config_stage)?;
            let out = output
                .or_else(|| exp.output.clone())
                .ok_or_else(|| Failure::Config(Error::Config("no output directory: set `output` or pass --output".into())))?;
            let summary = experiment::run(&exp, &out, RunOptions { workers, resume })?;
            println!(
                "{}: {} completed, {} already present",
                out.display(),
                summary.completed,
                summary.skipped
            );
        }
        Command::Report { dir } => {
            let rows = experiment::report(&dir)?;
            println!("{} summary rows written to {}", rows.len(), dir.join("summary.csv").display());
        }
        Command::Dataset(cmd) => {
            let (data, out) = build_dataset(cmd)?;
            data.save(&out)?;
            println!("{} vectors of width {} written to {}", data.len(), data.width(), out.display());
        }
        Command::Predict {
            checkpoint,
            images,
            seed,
        } => predict(&checkpoint, &images, seed)?,
    }
    Ok(())
}

fn build_dataset(cmd: DatasetCommand) -> Result<(BinaryDataset, PathBuf), Failure> {
    Ok(match cmd {
        DatasetCommand::Bas { d, size, seed, out } => {
            let spec = BasSpec { d, size, seed };
            spec.validate().map_err(config_stage)?;
            (generate_bas(&spec)?, out)
        }
        DatasetCommand::Mnist {
            images,
            labels,
            limit,
            out,
        } => {
            let raw = load_mnist_idx(&images, &labels)?;
            let n = limit.unwrap_or(raw.images.len()).min(raw.images.len());
            let coarse = raw.images[..n]
                .iter()
                .map(|im| coarse_grain_binarize(im))
                .collect::<Result<Vec<_>, _>>()?;
            (prepare_supervised(&coarse, &raw.labels[..n])?, out)
        }
        DatasetCommand::BarsVsStripes { size, seed, out } => (bars_vs_stripes(size, seed)?, out),
    })
}

fn predict(checkpoint: &Path, images: &Path, seed: u64) -> Result<(), Failure> {
    let ck = Checkpoint::load(checkpoint).map_err(config_stage)?;
    if ck.label_bits == 0 {
        return Err(Failure::Config(Error::Config(format!(
            "{} holds an unsupervised model",
            checkpoint.display()
        ))));
    }
    let data = BinaryDataset::load(images)?;
    let predictions = predict_dataset(&ck, &data, seed)?;
    for p in &predictions {
        println!("{}", p.class);
    }
    if let Some(labels) = data.labels() {
        let classes: Vec<usize> = predictions.iter().map(|p| p.class).collect();
        let acc = classification_accuracy(&classes, labels)?;
        eprintln!("accuracy {acc}");
    }
    Ok(())
}
