//! `chemreason`: SMILES utilities, rewards, data generation and evaluation
//! from the command line.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "chemreason", version, about = "Chemistry kernels and data tooling for chemical reasoning models")]
pub struct Cli {
    /// TOML config with optional [generation] and [reward] tables
    #[arg(long, global = true, env = "CHEMREASON_CONFIG", value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Seed for randomized output
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// More log output on stderr (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct FingerprintArgs {
    /// Neighbourhood radius in bonds
    #[arg(long, default_value_t = chemreason::fingerprint::DEFAULT_RADIUS)]
    pub radius: u32,
    /// Bit-vector width, a power of two
    #[arg(long, default_value_t = chemreason::fingerprint::DEFAULT_WIDTH)]
    pub width: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpectArg {
    Smiles,
    Iupac,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Canonical SMILES for molecules or reactions, one per line
    Canonicalize {
        /// SMILES strings; read from --input or stdin when absent
        smiles: Vec<String>,
        /// File with one SMILES per line
        #[arg(long, short)]
        input: Option<PathBuf>,
        /// Also print this many random spellings of each molecule, tab separated
        #[arg(long, value_name = "N")]
        spellings: Option<u64>,
    },
    /// Morgan fingerprint as set-bit count and hex (or bit list)
    Fingerprint {
        smiles: Vec<String>,
        #[arg(long, short)]
        input: Option<PathBuf>,
        /// Print set bit positions instead of hex
        #[arg(long)]
        bits: bool,
        #[command(flatten)]
        fp: FingerprintArgs,
    },
    /// Tanimoto similarity of two molecules or reactions
    Tanimoto {
        a: String,
        b: String,
        #[command(flatten)]
        fp: FingerprintArgs,
    },
    /// Functional groups present in each molecule
    Groups {
        smiles: Vec<String>,
        #[arg(long, short)]
        input: Option<PathBuf>,
        /// Pattern catalog, one `name<TAB>pattern` per line
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
    /// Final answers from model outputs (JSONL records, or one text with --text)
    Extract {
        #[arg(long, short)]
        input: Option<PathBuf>,
        /// Answer type; defaults to the record's task, else smiles
        #[arg(long, value_enum)]
        expect: Option<ExpectArg>,
        /// Record field holding the model output
        #[arg(long, default_value = "raw_output")]
        field: String,
        /// Treat the whole input as one output
        #[arg(long)]
        text: bool,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Score predictions with the accuracy and format rewards
    Reward {
        /// JSONL with id, prediction (or raw_output), ground_truth and optional task
        #[arg(long)]
        pred: PathBuf,
        /// struct_id, dense_tanimoto or exact_string; overrides the config
        #[arg(long)]
        variant: Option<String>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Group-normalized advantages and the clipped objective per rollout group
    Advantages {
        /// JSONL with rewards and optional per-token ratios
        #[arg(long, short)]
        input: Option<PathBuf>,
        #[arg(long)]
        eps_low: Option<f64>,
        #[arg(long)]
        eps_high: Option<f64>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Enrich samples with anchors and generate reasoning traces
    Generate {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Progress file; overrides the config
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Structural, consistency and verifier filtering with a retention report
    Filter {
        #[arg(long, short)]
        input: PathBuf,
        /// Retained samples
        #[arg(long, short)]
        out: PathBuf,
        /// Every sample with its verdicts
        #[arg(long)]
        all: Option<PathBuf>,
        /// Retention table; printed to stdout when absent
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        report_json: Option<PathBuf>,
        /// Answer-only instruction records for retained samples
        #[arg(long)]
        instruct: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Keep instances whose rollouts disagree
    DifficultyFilter {
        /// JSONL with id and either correctness flags or rollouts plus ground_truth
        #[arg(long, short)]
        input: Option<PathBuf>,
        #[arg(long)]
        variant: Option<String>,
        /// Verdict per instance
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Average similarity and Tani@1.0 of a prediction file
    Evaluate {
        /// JSONL with id, task, raw_output, ground_truth
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Summary as JSON
        #[arg(long)]
        json: Option<PathBuf>,
        #[command(flatten)]
        fp: FingerprintArgs,
    },
    /// Token count mean and SD per category
    Stats {
        #[arg(long, short)]
        input: Option<PathBuf>,
        /// Record field with the text
        #[arg(long, default_value = "generated_text")]
        field: String,
        /// Record field naming the category
        #[arg(long, default_value = "task")]
        group_by: String,
        /// One text per line instead of JSONL
        #[arg(long)]
        lines: bool,
        /// Merge table for subword counting
        #[arg(long)]
        merges: Option<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

/// A failure with its exit status.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Config(String),
    Provider(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Config(_) => 2,
            CliError::Provider(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Config(m) | CliError::Provider(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
