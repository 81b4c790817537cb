// SPDX-License-Identifier: Apache-2.0

//! Corpus loading for the input formats the CLI accepts.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::ValueEnum;
use dorabella_core::corpus::{normalize_pitch_duration, parse_note_file, read_english, read_melodies};
use dorabella_core::symbols::{
    builtin_alphabet, english_alphabet, melody_alphabet, pitch_duration_alphabet, read_sequences,
};
use dorabella_core::{Alphabet, Sequence};

use crate::error::{CliError, CliResult};
use crate::manifest::{read_input, RunManifest};

pub const FORMAT_HELP: &str = "\
Input formats:
  melody     one melody per line, pitch tokens in scientific notation (C4 D4 Bb4);
             pitches F3..E6, non-members snap to the nearest alphabet pitch
  notes      one tune per file: header `key: <C|C#|Db|...|B>`, then one
             `<midi-pitch> <num>/<den> [onset]` note per line; `rest <dur>` lines are dropped
  english    raw UTF-8 text; blank-line separated paragraphs, letters only
  sequences  one sequence per line, space-separated symbols of --alphabet
Lines starting with `#` are comments in every format except english.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Melody,
    Notes,
    English,
    Sequences,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Melody => "melody",
            Format::Notes => "notes",
            Format::English => "english",
            Format::Sequences => "sequences",
        }
    }

    pub fn parse(name: &str) -> CliResult<Format> {
        Format::from_str(name, false)
            .map_err(|_| CliError::Usage(format!("unknown format `{name}`\n{FORMAT_HELP}")))
    }

    /// Alphabet produced by this format, if fixed.
    pub fn alphabet(self) -> Option<Arc<Alphabet>> {
        match self {
            Format::Melody => Some(melody_alphabet()),
            Format::Notes => Some(pitch_duration_alphabet()),
            Format::English => Some(english_alphabet()),
            Format::Sequences => None,
        }
    }
}

pub fn resolve_alphabet(name: &str) -> CliResult<Arc<Alphabet>> {
    builtin_alphabet(name).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown alphabet `{name}` (expected dorabella, melody, pitch-duration, english or cipherN)"
        ))
    })
}

/// Expands directories into their files, sorted by name.
fn expand(paths: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| CliError::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file())
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Loads every source sequence from `paths`. `alphabet` is required for the
/// `sequences` format and must match the format's alphabet otherwise.
pub fn load_corpus(
    manifest: &mut RunManifest,
    format: Format,
    paths: &[PathBuf],
    alphabet: Option<&Arc<Alphabet>>,
) -> CliResult<(Arc<Alphabet>, Vec<Sequence>)> {
    let alphabet = match (format.alphabet(), alphabet) {
        (Some(fixed), Some(given)) if fixed != *given => {
            return Err(CliError::Data(format!(
                "format `{}` produces alphabet `{}`, but `{}` is required",
                format.name(),
                fixed.name(),
                given.name()
            )))
        }
        (Some(fixed), _) => fixed,
        (None, Some(given)) => Arc::clone(given),
        (None, None) => {
            return Err(CliError::Usage("the `sequences` format needs --alphabet".into()));
        }
    };
    let mut sequences = Vec::new();
    for path in expand(paths)? {
        let text = read_input(manifest, &path)?;
        let at = |e: dorabella_core::Error| CliError::Data(format!("{}: {e}", path.display()));
        match format {
            Format::Melody => sequences.extend(read_melodies(&text).map_err(at)?),
            Format::English => sequences.extend(read_english(&text)),
            Format::Sequences => sequences.extend(read_sequences(&alphabet, &text).map_err(at)?),
            Format::Notes => {
                let file = parse_note_file(&text).map_err(at)?;
                sequences.push(normalize_pitch_duration(&file.events, file.key).map_err(at)?);
            }
        }
    }
    if sequences.iter().all(Sequence::is_empty) {
        return Err(CliError::Data(format!(
            "no data in {} input(s) for format `{}`\n{FORMAT_HELP}",
            paths.len(),
            format.name()
        )));
    }
    Ok((alphabet, sequences))
}

/// A `LABEL=FORMAT:PATH[@TRAIN_COUNT]` corpus argument.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub label: String,
    pub format: Format,
    pub path: PathBuf,
    pub train_count: Option<usize>,
}

impl CorpusSpec {
    pub fn parse(arg: &str) -> CliResult<CorpusSpec> {
        let bad = || {
            CliError::Usage(format!(
                "corpus `{arg}` is not of the form LABEL=FORMAT:PATH[@TRAIN_COUNT]\n{FORMAT_HELP}"
            ))
        };
        let (label, rest) = arg.split_once('=').ok_or_else(bad)?;
        let (format, path) = rest.split_once(':').ok_or_else(bad)?;
        let (path, train_count) = match path.rsplit_once('@') {
            Some((p, n)) if !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()) => {
                (p, Some(n.parse().map_err(|_| bad())?))
            }
            _ => (path, None),
        };
        if label.trim().is_empty() || path.is_empty() {
            return Err(bad());
        }
        Ok(CorpusSpec {
            label: label.trim().to_string(),
            format: Format::parse(format)?,
            path: Path::new(path).to_path_buf(),
            train_count,
        })
    }

    /// Explicit count, else 80% of the sources (at least one on each side).
    pub fn train_count_for(&self, sources: usize) -> CliResult<usize> {
        if sources < 2 {
            return Err(CliError::Data(format!(
                "corpus `{}` has {sources} source(s); a train/test split needs at least 2",
                self.label
            )));
        }
        Ok(self
            .train_count
            .unwrap_or((sources * 4 / 5).clamp(1, sources - 1)))
    }
}
