use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use credo::config::{LimeParams, MorrisParams, PipelineConfig, SmotePlacement};
use credo::error::{CliError, Result};
use credo::pipeline::{self, ExplainMethod, Outputs};
use credo_core::synth::{generate, SynthSpec};

#[derive(Parser)]
#[command(name = "credo", version, about = "Transparent credit-scoring experiments")]
struct Cli {
    /// Oversample before the train/test split instead of after it.
    #[arg(long, global = true)]
    smote_before_split: bool,

    /// Output directory; overrides the config's `output`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline for every configured model.
    Run {
        #[arg(short, long, value_name = "FILE")]
        config: PathBuf,
    },
    /// Run every configured model with and without the LDA projection.
    Compare {
        #[arg(short, long, value_name = "FILE")]
        config: PathBuf,
    },
    /// Explain an archived model on a CSV.
    Explain {
        #[arg(short, long, value_enum)]
        method: Method,
        /// Model archive directory.
        #[arg(short, long, value_name = "DIR")]
        archive: PathBuf,
        #[arg(short, long, value_name = "FILE")]
        data: PathBuf,
        /// Row of the CSV to explain (LIME).
        #[arg(long, default_value_t = 0)]
        row: usize,
        /// LIME perturbation samples.
        #[arg(long, default_value_t = 5000)]
        samples: usize,
        /// Morris trajectories.
        #[arg(long, default_value_t = 20)]
        trajectories: usize,
        /// Morris grid levels.
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a synthetic lending-style CSV.
    Synth {
        #[arg(short, long, value_name = "FILE")]
        output: PathBuf,
        #[arg(long, default_value_t = 20_000)]
        rows: usize,
        #[arg(long, default_value_t = 30)]
        features: usize,
        #[arg(long, default_value_t = 10)]
        classes: usize,
        /// Exponent of the long-tailed class weights.
        #[arg(long, default_value_t = 1.0)]
        imbalance: f64,
        /// Spread of the class prototypes.
        #[arg(long, default_value_t = 1.5)]
        separation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Lime,
    Morris,
}

fn load_config(path: &Path, cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(path)?;
    if cli.smote_before_split {
        cfg.smote.placement = SmotePlacement::BeforeSplit;
    }
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    Ok(cfg)
}

fn commit(outputs: &Outputs, dir: &Path) -> Result<()> {
    outputs.commit(dir)?;
    eprintln!("wrote {} files to {}", outputs.files.len(), dir.display());
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = load_config(config, cli)?;
            let r = pipeline::run(&cfg)?;
            commit(&r.outputs, &cfg.output)?;
            print!("{}", r.table.to_markdown());
        }
        Command::Compare { config } => {
            let cfg = load_config(config, cli)?;
            let r = pipeline::compare(&cfg)?;
            commit(&r.outputs, &cfg.output)?;
            print!("{}", r.table.to_markdown());
        }
        Command::Explain { method, archive, data, row, samples, trajectories, levels, seed } => {
            let m = match method {
                Method::Lime => ExplainMethod::Lime {
                    row: *row,
                    params: LimeParams { n_samples: *samples, seed: *seed, ..LimeParams::default() },
                },
                Method::Morris => ExplainMethod::Morris(MorrisParams {
                    trajectories: *trajectories,
                    levels: *levels,
                    seed: *seed,
                    ..MorrisParams::default()
                }),
            };
            let files = pipeline::explain_archive(archive, data, &m)?;
            let mut outputs = Outputs::default();
            for (name, bytes) in files {
                outputs.add(Path::new("explanations").join(name), bytes);
            }
            commit(&outputs, cli.out.as_deref().unwrap_or(Path::new(".")))?;
        }
        Command::Synth { output, rows, features, classes, imbalance, separation, seed } => {
            let spec = SynthSpec {
                rows: *rows,
                features: *features,
                classes: *classes,
                imbalance: *imbalance,
                separation: *separation,
                seed: *seed,
                ..SynthSpec::default()
            };
            let frame = generate(&spec).map_err(|e| CliError::Config(e.to_string()))?;
            let path = match &cli.out {
                Some(dir) if output.is_relative() => dir.join(output),
                _ => output.clone(),
            };
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            }
            credo::io::save_csv(&frame, &path)?;
            eprintln!("wrote {} rows x {} columns to {}", frame.n_rows(), frame.n_cols(), path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
