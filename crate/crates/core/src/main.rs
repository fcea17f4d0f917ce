use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dce::cli::{cmd_encode, cmd_evaluate, cmd_inspect, cmd_synth, cmd_train, TrainOverrides};
use dce::pipeline::ClassifierKind;

#[derive(Parser)]
#[command(name = "dce", version, about = "Deep Class-Encoder training, encoding and evaluation")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_classifier)]
        classifier: Option<ClassifierKind>,
        /// Overrides the config's model_out.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a model on a manifest or table and write a report.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write top-layer features for a manifest or table.
    Encode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the config's synthetic dataset as a table.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print model metadata.
    Inspect {
        #[arg(long)]
        model: PathBuf,
    },
}

fn parse_classifier(s: &str) -> Result<ClassifierKind, String> {
    s.parse().map_err(|e: dce::Error| e.to_string())
}

fn run(args: Args) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    match args.command {
        Command::Train { config, seed, classifier, out: model_out } => {
            let overrides = TrainOverrides { seed, classifier, model_out };
            cmd_train(&config, &overrides, &mut out)?;
        }
        Command::Evaluate { model, manifest, out: report } => {
            cmd_evaluate(&model, &manifest, &report, &mut out)?;
        }
        Command::Encode { model, manifest, out: path } => {
            cmd_encode(&model, &manifest, &path, &mut out)?;
        }
        Command::Synth { config, seed, out: path } => {
            cmd_synth(&config, seed, &path, &mut out)?;
        }
        Command::Inspect { model } => {
            cmd_inspect(&model, &mut out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
