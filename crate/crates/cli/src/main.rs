//! `rrl`: train, evaluate and verify rotation-invariant LeNet-5 models.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or parse error,
//! 3 I/O error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "rrl", version, about = "Regional rotation layers for rotation-invariant CNNs")]
struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Rotate {
    None,
    Rot,
    #[value(name = "rot+")]
    RotPlus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Window,
    Layer,
    Model,
    All,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train on the upright training split of an MNIST-style directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, default_value_t = 16)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Overrides the config's precision.
        #[arg(long, value_parser = ["32", "64"])]
        precision: Option<String>,
        /// Use only the first N training images.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Accuracy on the test split, upright or rotated; prints one accuracy
    /// line followed by per-image CSV.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = Rotate::None)]
        rotate: Rotate,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Run verification suites; exits 1 if any check fails.
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Network for the model suite (default: the lenet5-rrl preset).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Weights for the model suite (default: random, from --seed).
        #[arg(long, requires = "config")]
        checkpoint: Option<PathBuf>,
    },
    /// Agreement and feature distance over rotation angles, as CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 12.0)]
        step_degrees: f64,
        /// Test images used (from the start of the split).
        #[arg(long, default_value_t = 100)]
        limit: usize,
    },
    /// Write one layer's output as a PGM grid, one tile per channel.
    DumpFeatures {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// A binary PGM or PPM image matching the config's input shape.
        #[arg(long)]
        image: PathBuf,
        /// Layer index; 0 is the first layer's output.
        #[arg(long)]
        layer: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rotate a box list (`label x1 y1 x2 y2` per line) by quarter turns.
    TransformBoxes {
        #[arg(long)]
        boxes: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=3))]
        n: u8,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
    },
    /// Write a synthetic MNIST-style glyph dataset.
    MakeSynthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2000)]
        train: usize,
        #[arg(long, default_value_t = 1000)]
        test: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train several configs and compare upright, rot and rot+ accuracy.
    Trend {
        #[arg(long)]
        data: PathBuf,
        /// Config files; default: the lenet5 and lenet5-rrl presets.
        #[arg(long = "config")]
        configs: Vec<PathBuf>,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, default_value_t = 16)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        train_limit: usize,
        #[arg(long, default_value_t = 1000)]
        test_limit: usize,
        /// Also write the table as CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
