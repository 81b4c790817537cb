// SPDX-License-Identifier: Apache-2.0

//! Command-line front end: model training, perplexity, encipherment,
//! solving, the accuracy/perplexity experiment tables and the Dorabella
//! pipeline.
//!
//! Every command that consumes randomness takes an explicit `--seed`, and
//! every written file ends with a [`manifest::RunManifest`] block, so two runs
//! with equal manifests produce byte-identical output.

pub mod commands;
pub mod error;
pub mod formats;
pub mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::formats::{Format, FORMAT_HELP};

#[derive(Debug, Parser)]
#[command(name = "dorabella", version, about = "Character n-gram models and substitution cipher solving over symbolic alphabets", after_help = FORMAT_HELP)]
pub struct Cli {
    /// Worker threads for restart/cipher parallelism (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a trigram model and write it in the versioned text format.
    #[command(after_help = FORMAT_HELP)]
    Train(TrainArgs),
    /// Perplexity of a corpus under a trained model.
    #[command(after_help = FORMAT_HELP)]
    Perplexity(PerplexityArgs),
    /// Encipher a sequence file with a key file or a seeded random key.
    #[command(after_help = KEY_HELP)]
    Encipher(EncipherArgs),
    /// Break a substitution ciphertext with restart hill climbing.
    #[command(after_help = SOLVE_HELP)]
    Solve(SolveArgs),
    /// Synthetic decipherment and perplexity experiments.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Decipher the Dorabella transcription as a melody.
    #[command(after_help = DORABELLA_HELP)]
    Dorabella(DorabellaArgs),
}

pub const KEY_HELP: &str = "\
Key files hold a `key <plain-alphabet> <cipher-alphabet>` header followed by two
column-aligned rows: plaintext symbols and their cipher images.
Built-in alphabets: dorabella (A1..H3), melody (F3..E6), pitch-duration, english, cipherN (x1..xN).";

pub const SOLVE_HELP: &str = "\
The ciphertext file is a sequence file over --cipher-alphabet; all lines are
concatenated into one ciphertext. The report is JSON: decipherment, key,
log-probability, perplexity, per-restart traces and the run manifest.";

pub const DORABELLA_HELP: &str = "\
The transcription is whitespace-separated glyphs `[A-H][1-3]` (orientation letter,
semicircle count); line breaks are kept in the melody output. The report lists the
melody, the key in two-row form, the score and an ABC rendering (quarter notes, 4/4).";

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Model order; only 3 is supported.
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    /// Corpus files or directories.
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Format,
    /// Alphabet for the `sequences` format.
    #[arg(long)]
    pub alphabet: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PerplexityArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Format,
    /// Score this many random excerpts instead of whole sources (needs --seed).
    #[arg(long, requires = "seed")]
    pub excerpts: Option<usize>,
    #[arg(long, default_value_t = 87)]
    pub length: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EncipherArgs {
    /// Key file in two-row format.
    #[arg(long, conflicts_with = "seed", required_unless_present = "seed")]
    pub key: Option<PathBuf>,
    /// Draw a random key from this seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Plaintext alphabet (with --seed).
    #[arg(long, default_value = "melody")]
    pub alphabet: String,
    /// Ciphertext alphabet (with --seed).
    #[arg(long, default_value = "dorabella")]
    pub cipher_alphabet: String,
    /// Also write the random key here.
    #[arg(long, requires = "seed")]
    pub key_out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct SearchArgs {
    #[arg(long, default_value_t = 4000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 90)]
    pub restarts: usize,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub cipher: PathBuf,
    #[arg(long, default_value = "dorabella")]
    pub cipher_alphabet: String,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestFrom {
    Heldout,
    Train,
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCommand {
    /// Key and decipherment accuracy on synthetic ciphers, one row per corpus.
    #[command(after_help = FORMAT_HELP)]
    Decipher(DecipherArgs),
    /// Average held-out excerpt perplexity, one row per corpus.
    #[command(after_help = FORMAT_HELP)]
    Perplexity(TablePerplexityArgs),
}

#[derive(Debug, Args)]
pub struct DecipherArgs {
    /// LABEL=FORMAT:PATH[@TRAIN_COUNT], repeatable.
    #[arg(long = "corpus", required = true)]
    pub corpora: Vec<String>,
    #[arg(long, default_value_t = 300)]
    pub ciphers: usize,
    #[arg(long, default_value_t = 87)]
    pub length: usize,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long, value_enum, default_value_t = TestFrom::Heldout)]
    pub test_from: TestFrom,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TablePerplexityArgs {
    /// LABEL=FORMAT:PATH[@TRAIN_COUNT], repeatable.
    #[arg(long = "corpus", required = true)]
    pub corpora: Vec<String>,
    #[arg(long, default_value_t = 300)]
    pub excerpts: usize,
    #[arg(long, default_value_t = 87)]
    pub length: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DorabellaArgs {
    #[arg(long)]
    pub transcription: PathBuf,
    /// Melody model (24-symbol alphabet).
    #[arg(long)]
    pub model: PathBuf,
    /// Apply this key instead of searching.
    #[arg(long)]
    pub key: Option<PathBuf>,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long, required_unless_present = "key")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the ABC tune on its own.
    #[arg(long)]
    pub abc: Option<PathBuf>,
}

/// Runs a parsed command line, writing outputs and printing warnings.
pub fn run(cli: Cli) -> error::CliResult<()> {
    let exec = || commands::execute(cli.command);
    match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| error::CliError::Usage(e.to_string()))?
            .install(exec),
        None => exec(),
    }
}
