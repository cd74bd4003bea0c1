use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tabsynth::diffusion::{TrainConfig, DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_STEPS};
use tabsynth::pipeline::{cmd_evaluate, cmd_sample, cmd_train};
use tabsynth::transforms::ScalerMethod;
use tabsynth::Error;

#[derive(Parser)]
#[command(name = "tabsynth", version, about = "Diffusion-based synthetic tabular data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on the 70% split of a CSV table and write a checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, default_value_t = 3000)]
        epochs: usize,
        #[arg(long, default_value_t = 512)]
        batch_size: usize,
        /// Diffusion steps T.
        #[arg(long, default_value_t = DEFAULT_STEPS)]
        steps: usize,
        #[arg(long, default_value_t = 2)]
        embed_dim: usize,
        #[arg(long, default_value_t = 1024)]
        hidden: usize,
        #[arg(long, default_value_t = 6)]
        layers: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value = "standard", value_parser = ["standard", "yeo-johnson", "quantile"])]
        scaler: String,
        /// Keep category embeddings at their initial values (the default).
        #[arg(long, conflicts_with = "train_embeddings")]
        freeze_embeddings: bool,
        /// Update category embeddings jointly with the network.
        #[arg(long)]
        train_embeddings: bool,
        #[arg(long, default_value_t = DEFAULT_BETA_START)]
        beta_start: f64,
        #[arg(long, default_value_t = DEFAULT_BETA_END)]
        beta_end: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate rows from a checkpoint.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        /// Condition every row on this value of the label column.
        #[arg(long)]
        label: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a synthetic table against a real one.
    Evaluate {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        synth: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        /// Overrides the schema's label column.
        #[arg(long)]
        label_column: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long)]
        report: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train {
            data,
            schema,
            epochs,
            batch_size,
            steps,
            embed_dim,
            hidden,
            layers,
            lr,
            scaler,
            freeze_embeddings: _,
            train_embeddings,
            beta_start,
            beta_end,
            seed,
            out,
        } => {
            let config = TrainConfig {
                epochs,
                batch_size,
                steps,
                embed_dim,
                hidden_width: hidden,
                hidden_layers: layers,
                learning_rate: lr,
                seed,
                scaler: scaler.parse::<ScalerMethod>()?,
                freeze_embeddings: !train_embeddings,
                beta_start,
                beta_end,
                ..TrainConfig::default()
            };
            let summary = cmd_train(&data, &schema, config, &out, |log| {
                eprintln!("{}", serde_json::to_string(log).expect("log line serializes"));
            })?;
            println!(
                "trained {} epochs on {} rows, final loss {:.6}; wrote {}",
                summary.epochs_run,
                summary.train_rows,
                summary.final_loss,
                out.display()
            );
        }
        Command::Sample {
            model,
            n,
            label,
            seed,
            out,
        } => {
            cmd_sample(&model, n, label.as_deref(), seed, &out)?;
            println!("wrote {n} rows to {}", out.display());
        }
        Command::Evaluate {
            real,
            synth,
            schema,
            label_column,
            seed,
            repeats,
            report,
        } => {
            let output = cmd_evaluate(
                &real,
                &synth,
                &schema,
                label_column.as_deref(),
                seed,
                repeats,
                &report,
            )?;
            let name = synth
                .file_stem()
                .map_or_else(|| "synthetic".to_string(), |s| s.to_string_lossy().into_owned());
            print!("{}", output.render_table(&name));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
