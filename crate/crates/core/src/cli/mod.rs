//! The `rotsense` batch tool.
//!
//! Every subcommand resolves a [`RunConfig`] (TOML file, then flags), runs,
//! and writes JSON and/or Markdown artifacts into the output directory. All
//! artifacts carry the SHA-256 of the resolved configuration. Exit codes:
//! 0 on success, 2 for input errors, 3 for numerical failures.

mod commands;
pub mod config;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{RunConfig, SynthKind};

use crate::embedding_io::NormMode;
use crate::hypotest::PConvention;
use crate::spectra::ResampleMethod;
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Md,
    Both,
}

#[derive(Debug, Parser)]
#[command(
    name = "rotsense",
    version,
    about = "Rotation-sensitivity tests and Varimax concept decomposition for embedding matrices",
    after_help = "Examples:\n  \
        rotsense test --input emb.npy --k 20 --resamples 199 --seed 7\n  \
        rotsense decompose --input emb.npy --k 32 --norm l2_rows --output-dir out\n  \
        rotsense interpret --model out/model.rsm --texts desc.jsonl --text-embeddings desc.npy --r 5\n  \
        rotsense synth --kind spurious --seed 3 --output-dir bench"
)]
pub struct Cli {
    /// Master random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML configuration file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value = ".")]
    pub output_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value = "both")]
    pub format: OutputFormat,
    /// Re-read written artifacts and re-check their invariants.
    #[arg(long, global = true)]
    pub verify: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct InputArgs {
    /// Embedding matrix (.npy, .csv, or rawbin container).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// JSON sidecar with optional "ids", "labels" and "groups" arrays.
    #[arg(long)]
    pub meta: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct DecomposeArgs {
    /// Number of concepts (rank).
    #[arg(long)]
    pub k: Option<usize>,
    /// Normalization: none, l2_rows or degree.
    #[arg(long = "norm")]
    pub norm_mode: Option<NormMode>,
    /// Regularizer added to degree factors.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Varimax stopping tolerance on the relative objective gain.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Random starts; the best objective wins.
    #[arg(long)]
    pub restarts: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct TestArgs {
    #[arg(long = "resamples")]
    pub n_resample: Option<usize>,
    #[arg(long, value_parser = parse_convention)]
    pub p_convention: Option<PConvention>,
    /// Drop the leading singular vector before testing.
    #[arg(long)]
    pub drop_leading: Option<bool>,
    #[arg(long, value_parser = parse_resample)]
    pub resample_method: Option<ResampleMethod>,
    /// Optimizer tolerance inside the test.
    #[arg(long)]
    pub test_tol: Option<f64>,
    /// Iteration cap for each Varimax fit inside the test.
    #[arg(long)]
    pub test_max_iter: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct ModelArg {
    /// Concept model written by `decompose`.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte-Carlo test for rotation-sensitive structure.
    Test {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        decomp: DecomposeArgs,
        #[command(flatten)]
        test: TestArgs,
    },
    /// Run the test for several ranks.
    Ranksweep {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        decomp: DecomposeArgs,
        #[command(flatten)]
        test: TestArgs,
        /// Comma-separated ranks.
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<usize>>,
    },
    /// Factor embeddings into sparse loadings and a concept dictionary.
    Decompose {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        decomp: DecomposeArgs,
    },
    /// Top samples and descriptions per concept.
    Interpret {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        texts: Option<PathBuf>,
        #[arg(long)]
        text_embeddings: Option<PathBuf>,
        /// Entries per concept.
        #[arg(long)]
        r: Option<usize>,
    },
    /// Combine concepts and score samples and texts along the result.
    Arith {
        #[command(flatten)]
        model: ModelArg,
        /// Terms as index:weight, e.g. "3:1,5:-1,7:1".
        #[arg(long, value_parser = parse_terms_arg)]
        terms: Option<Terms>,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        texts: Option<PathBuf>,
        #[arg(long)]
        text_embeddings: Option<PathBuf>,
        #[arg(long)]
        r: Option<usize>,
    },
    /// Flag concepts closer to a nuisance corpus than to a target corpus.
    Spurious {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        target_texts: Option<PathBuf>,
        #[arg(long)]
        target_embeddings: Option<PathBuf>,
        #[arg(long)]
        spurious_texts: Option<PathBuf>,
        #[arg(long)]
        spurious_embeddings: Option<PathBuf>,
        #[arg(long)]
        margin: Option<f64>,
    },
    /// Rebuild embeddings with some concepts removed.
    Reconstruct {
        #[command(flatten)]
        model: ModelArg,
        /// Comma-separated concept indices to zero.
        #[arg(long, value_delimiter = ',')]
        remove: Option<Vec<usize>>,
        #[arg(long)]
        invert_scaling: Option<bool>,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Reconstruction fidelity as a function of the number of concepts.
    Fidelity {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        decomp: DecomposeArgs,
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<usize>>,
    },
    /// Zero-shot classification with class prompts, optionally after
    /// removing concepts.
    Zershot {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        prompts: Option<PathBuf>,
        #[arg(long)]
        prompt_embeddings: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, value_delimiter = ',')]
        remove: Option<Vec<usize>>,
    },
    /// Generate synthetic data with ground truth.
    Synth {
        #[arg(long, value_enum)]
        kind: Option<SynthKind>,
        /// Rows.
        #[arg(long)]
        n: Option<usize>,
        /// Columns.
        #[arg(long)]
        d: Option<usize>,
        /// Planted concepts (planted kind only).
        #[arg(long)]
        k: Option<usize>,
        /// Isotropic noise level (planted kind only).
        #[arg(long)]
        noise: Option<f64>,
    },
}

fn parse_convention(s: &str) -> Result<PConvention, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_resample(s: &str) -> Result<ResampleMethod, String> {
    match s {
        "haar_rotation" => Ok(ResampleMethod::HaarRotation),
        "sphere_direction" => Ok(ResampleMethod::SphereDirection),
        other => Err(format!("unknown resample method {other:?}")),
    }
}

/// Parsed `--terms` value.
#[derive(Debug, Clone)]
pub struct Terms(pub Vec<(usize, f64)>);

fn parse_terms_arg(s: &str) -> Result<Terms, String> {
    config::parse_terms(s).map(Terms).map_err(|e| e.to_string())
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match commands::execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input() {
                EXIT_INPUT
            } else {
                EXIT_NUMERIC
            }
        }
    }
}
