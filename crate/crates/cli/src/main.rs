//! `snn`: preprocess datasets, train and evaluate networks, and export neuron
//! response curves.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

mod curves;
mod eval;
mod preprocess;
mod train;

/// Directory searched for raw dataset files when `--input` is omitted.
pub const DATA_DIR_ENV: &str = "SNN_DATA_DIR";

#[derive(Parser)]
#[command(name = "snn", version, about = "Single-spike temporal-coded spiking neural networks")]
struct Cli {
    /// Worker threads for batched forward and backward passes.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a raw dataset split into a feature container plus manifest.
    Preprocess(preprocess::Args),
    /// Train a network on an encoded dataset.
    Train(train::Args),
    /// Evaluate a checkpoint on an encoded dataset.
    Eval(eval::Args),
    /// Sweep one input spike time and export closed-form and oracle responses.
    PlotCurves(curves::Args),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DatasetName {
    NslKdd,
    Awid,
    /// Built-in four-sample XOR problem, for smoke tests.
    Xor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    Original,
    Resampled,
}

/// Error caused by the invocation rather than by a bug; exits with code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `$SNN_DATA_DIR/<name>`, or a usage error if the variable is unset.
pub fn data_file(name: &str) -> anyhow::Result<PathBuf> {
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) => Ok(PathBuf::from(dir).join(name)),
        None => Err(usage(format!("no --input given and {DATA_DIR_ENV} is not set (looking for {name})"))),
    }
}

pub fn create_dir(dir: &std::path::Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| anyhow::anyhow!(snn_core::Error::Io { path: dir.into(), source: e }))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<snn_core::Error>() {
            return if e.is_input_error() { 2 } else { 1 };
        }
        if cause.is::<UsageError>() || cause.is::<std::io::Error>() {
            return 2;
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Preprocess(a) => preprocess::run(a),
        Command::Train(a) => train::run(a),
        Command::Eval(a) => eval::run(a),
        Command::PlotCurves(a) => curves::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
