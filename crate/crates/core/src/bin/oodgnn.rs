use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use oodgnn::graphdata::{gen_digits_dataset, gen_triangles_dataset, load_dataset, save_dataset};
use oodgnn::harness::{
    render_report, run_experiment, train, write_run, ExperimentName, ExperimentSpec, Mode, TrainConfig,
};
use oodgnn::Error;

#[derive(Parser)]
#[command(name = "oodgnn", version, about = "Graph classification under distribution shift with decorrelating sample weights")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Triangles,
    Digits,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as line-delimited JSON.
    Gen {
        #[arg(long, value_enum, default_value = "triangles")]
        kind: Kind,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        min_nodes: usize,
        #[arg(long)]
        max_nodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model and write checkpoint and results into a directory.
    Train {
        /// Flat key = value file; missing keys keep their defaults.
        #[arg(long)]
        config: PathBuf,
        /// Training graphs.
        #[arg(long)]
        data: PathBuf,
        /// Graphs to report test accuracy on; the training graphs if omitted.
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a named experiment over several seeds and every mode.
    Experiment {
        #[arg(long)]
        name: String,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2, 3, 4])]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated subset of modes; all modes if omitted.
        #[arg(long, value_delimiter = ',')]
        modes: Vec<String>,
        /// Override the number of training epochs.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Print a table from a results directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Divergence { .. }) => 3,
        Some(Error::Config(_)) => 1,
        _ => 2,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen { kind, count, min_nodes, max_nodes, seed, out } => {
            let d = match kind {
                Kind::Triangles => gen_triangles_dataset(count, min_nodes, max_nodes, seed)?,
                Kind::Digits => gen_digits_dataset(count, min_nodes, max_nodes, seed)?,
            };
            save_dataset(&d, &out).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {} graphs to {}", d.len(), out.display());
        }
        Command::Train { config, data, test, out } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| Error::Config(format!("{}: {e}", config.display())))?;
            let cfg = TrainConfig::parse(&text)?;
            let train_set = load_dataset(&data, None)?;
            let test_set = match test {
                Some(p) => load_dataset(&p, Some(train_set.num_classes()))?,
                None => train_set.clone(),
            };
            let output = train(&cfg, &train_set, &test_set)?;
            write_run(&output, &out)?;
            println!(
                "{}: train accuracy {:.3}, test accuracy {:.3}, results in {}",
                cfg.mode,
                output.report.final_train_accuracy,
                output.report.final_test_accuracy,
                out.display()
            );
        }
        Command::Experiment { name, seeds, out, modes, epochs } => {
            let mut spec = ExperimentSpec::new(name.parse::<ExperimentName>()?);
            if !modes.is_empty() {
                spec.modes = modes.iter().map(|m| m.parse::<Mode>()).collect::<Result<_, _>>()?;
            }
            if let Some(e) = epochs {
                spec.train.epochs = e;
            }
            let result = run_experiment(&spec, &seeds)?;
            result.write(&out)?;
            print!("{}", result.format());
        }
        Command::Report { input } => print!("{}", render_report(&input)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
