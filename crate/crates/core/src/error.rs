// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid alphabet: {0}")]
    Alphabet(String),

    #[error("parse error at line {line}, column {column} (token {token}): {message}")]
    Parse {
        line: usize,
        column: usize,
        token: usize,
        message: String,
    },

    #[error("alphabet mismatch: expected `{expected}`, found `{found}`")]
    AlphabetMismatch { expected: String, found: String },

    #[error("symbol index {index} out of range for alphabet of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),

    #[error("pitch `{pitch}` outside the supported range {low}..={high}")]
    PitchRange {
        pitch: String,
        low: String,
        high: String,
    },

    #[error("invalid note data: {0}")]
    Note(String),

    #[error("insufficient material: {available} available, {requested} requested")]
    Insufficient { available: usize, requested: usize },

    #[error("invalid key: {0}")]
    Key(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid model: {0}")]
    Model(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(String),
}
