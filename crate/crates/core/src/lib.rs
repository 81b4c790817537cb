// SPDX-License-Identifier: Apache-2.0

//! Character n-gram language models over symbolic alphabets and a
//! hill-climbing solver for monoalphabetic substitution ciphers.
//!
//! The pieces, bottom up:
//!
//! * [`symbols`]: alphabets, sequences and the Dorabella glyph grammar;
//! * [`corpus`]: note-event, melody and English normalization, sampling and splits;
//! * [`lm`]: the trigram modified Kneser-Ney model;
//! * [`cipher`]: substitution keys;
//! * [`solver`]: restart-based steepest-ascent search and accuracy metrics;
//! * [`abc`]: ABC notation export;
//! * [`synthetic`]: trigram sources of known entropy for experiments.

pub mod abc;
pub mod cipher;
pub mod corpus;
pub mod error;
pub mod lm;
pub mod solver;
pub mod symbols;
pub mod synthetic;

pub use cipher::Key;
pub use corpus::{CorpusSplit, NoteEvent};
pub use error::{Error, Result};
pub use lm::{Discounts, NgramModel};
pub use solver::{ExperimentReport, SolveResult, SolverConfig, TestSource};
pub use symbols::{Alphabet, DorabellaToken, Sequence};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator behind every seeded operation in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
