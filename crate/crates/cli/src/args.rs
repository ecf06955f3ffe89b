use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "procval", version, about = "Check process matrices for validity", max_term_width = 100)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check positivity, normalization and the term rule.
    Validate(ValidateArgs),
    /// Decide whether the product of two processes is a process.
    Product(ProductArgs),
    /// List the Hilbert-Schmidt terms of a process with their types.
    Decompose(DecomposeArgs),
    /// Probe normalization with random and deterministic local channels.
    Oracle(OracleArgs),
    /// Trace out sub-parties and renormalize.
    Reduce(ReduceArgs),
    /// Built-in example processes.
    Gallery(GalleryArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Product(_) => "product",
            Command::Decompose(_) => "decompose",
            Command::Oracle(_) => "oracle",
            Command::Reduce(_) => "reduce",
            Command::Gallery(_) => "gallery",
        }
    }

    pub fn json(&self) -> bool {
        match self {
            Command::Validate(a) => a.json,
            Command::Product(a) => a.json,
            Command::Decompose(a) => a.json,
            Command::Oracle(a) => a.json,
            Command::Reduce(_) => false,
            Command::Gallery(a) => match &a.action {
                GalleryAction::List { json } => *json,
                GalleryAction::Export { .. } => false,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub file: PathBuf,
    /// Relative tolerance for positivity, trace and term cut-off.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Print a JSON report.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ProductArgs {
    pub file_w: PathBuf,
    pub file_z: PathBuf,
    /// Party pairing as `W:Z=MERGED,...`; `=MERGED` may be omitted. Defaults
    /// to pairing equal names, or by position when the names differ.
    #[arg(long)]
    pub pairing: Option<String>,
    /// Relative tolerance for the term cut-off and validity checks.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Largest product dimension checked directly as a cross-check.
    #[arg(long, default_value_t = 4096)]
    pub max_direct_dim: usize,
    /// Write the product process to this file.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    pub file: PathBuf,
    /// Absolute coefficient cut-off. Without it a relative cut-off of 1e-9
    /// is used. The identity term is always listed.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    pub file: PathBuf,
    /// Number of random channel tuples on top of the deterministic battery.
    #[arg(long, default_value_t = procval_core::oracle::DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, env = "PROCVAL_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    pub file: PathBuf,
    /// Split a party into sub-parties: `NAME=DIN:DOUT,DIN:DOUT,...`.
    /// Repeatable.
    #[arg(long = "split", value_name = "SPEC")]
    pub splits: Vec<String>,
    /// Sub-parties to keep: `NAME` (all), `NAME.K`, `NAME.K.in` or
    /// `NAME.K.out`. Comma separated, repeatable.
    #[arg(long, value_delimiter = ',', required = true)]
    pub keep: Vec<String>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GalleryArgs {
    #[command(subcommand)]
    pub action: GalleryAction,
}

#[derive(Debug, Subcommand)]
pub enum GalleryAction {
    /// List fixture names.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Write a fixture as a `.procmat.json` document.
    Export {
        name: String,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}
