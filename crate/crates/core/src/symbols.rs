// SPDX-License-Identifier: Apache-2.0

//! Alphabets, symbol sequences and the Dorabella transcription grammar.
//!
//! An [`Alphabet`] is an ordered set of token strings; a [`Sequence`] is a
//! list of indices into one alphabet. Alphabets compare by name and symbol
//! list, so two structurally identical symbol sets under different names
//! (say, melody pitches and cipher glyphs) never compare equal.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};

/// Reserved token used for start padding in serialized models.
pub const START_TOKEN: &str = "<s>";

/// Rewrites Unicode accidentals to their ASCII spelling (`♭` to `b`, `♯` to `#`).
pub fn canonical_token(token: &str) -> String {
    token.replace('♭', "b").replace('♯', "#")
}

#[derive(Clone)]
pub struct Alphabet {
    name: String,
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl Alphabet {
    /// Builds an alphabet. Symbols are canonicalized with [`canonical_token`]
    /// and must be distinct, non-empty and free of whitespace.
    pub fn new<S: AsRef<str>>(name: &str, symbols: &[S]) -> Result<Alphabet> {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::Alphabet(format!("bad alphabet name `{name}`")));
        }
        if symbols.len() < 2 {
            return Err(Error::Alphabet(format!(
                "alphabet `{name}` needs at least 2 symbols, got {}",
                symbols.len()
            )));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        let mut canon = Vec::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            let s = canonical_token(s.as_ref());
            if s.is_empty() {
                return Err(Error::Alphabet(format!("empty symbol at position {i}")));
            }
            if s.chars().any(char::is_whitespace) {
                return Err(Error::Alphabet(format!("symbol `{s}` contains whitespace")));
            }
            if s == START_TOKEN {
                return Err(Error::Alphabet(format!("`{START_TOKEN}` is reserved")));
            }
            if index.insert(s.clone(), i).is_some() {
                return Err(Error::Alphabet(format!("duplicate symbol `{s}`")));
            }
            canon.push(s);
        }
        Ok(Alphabet {
            name: name.to_string(),
            symbols: canon,
            index,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    /// Always false; alphabets hold at least two symbols.
    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, index: usize) -> Option<&str> {
        self.symbols.get(index).map(String::as_str)
    }

    /// Looks up a symbol, accepting Unicode accidentals.
    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        match self.index.get(symbol) {
            Some(&i) => Some(i),
            None => self.index.get(&canonical_token(symbol)).copied(),
        }
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.index_of(symbol).is_some()
    }

    pub(crate) fn ensure_same(&self, other: &Alphabet) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::AlphabetMismatch {
                expected: self.name.clone(),
                found: other.name.clone(),
            })
        }
    }
}

impl PartialEq for Alphabet {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.symbols == other.symbols
    }
}

impl Eq for Alphabet {}

impl fmt::Debug for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Alphabet")
            .field("name", &self.name)
            .field("symbols", &self.symbols)
            .finish()
    }
}

/// Builds a shared alphabet from a symbol list.
pub fn make_alphabet<S: AsRef<str>>(symbols: &[S], name: &str) -> Result<Arc<Alphabet>> {
    Alphabet::new(name, symbols).map(Arc::new)
}

/// An ordered list of symbol indices into one alphabet.
#[derive(Clone, PartialEq, Eq)]
pub struct Sequence {
    alphabet: Arc<Alphabet>,
    tokens: Vec<usize>,
}

impl Sequence {
    pub fn new(alphabet: Arc<Alphabet>, tokens: Vec<usize>) -> Result<Sequence> {
        let size = alphabet.len();
        if let Some(&index) = tokens.iter().find(|&&t| t >= size) {
            return Err(Error::IndexOutOfRange { index, size });
        }
        Ok(Sequence { alphabet, tokens })
    }

    pub fn empty(alphabet: Arc<Alphabet>) -> Sequence {
        Sequence {
            alphabet,
            tokens: Vec::new(),
        }
    }

    pub fn from_symbols<S: AsRef<str>>(alphabet: Arc<Alphabet>, symbols: &[S]) -> Result<Sequence> {
        let tokens = symbols
            .iter()
            .map(|s| {
                alphabet
                    .index_of(s.as_ref())
                    .ok_or_else(|| Error::UnknownSymbol(s.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Sequence { alphabet, tokens })
    }

    /// Parses whitespace-separated symbols.
    pub fn parse(alphabet: Arc<Alphabet>, text: &str) -> Result<Sequence> {
        let symbols: Vec<&str> = text.split_whitespace().collect();
        Sequence::from_symbols(alphabet, &symbols)
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    pub fn tokens(&self) -> &[usize] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Contiguous sub-span `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Sequence {
        Sequence {
            alphabet: Arc::clone(&self.alphabet),
            tokens: self.tokens[start..start + len].to_vec(),
        }
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> + '_ {
        self.tokens.iter().map(|&t| self.alphabet.symbols[t].as_str())
    }

    /// Space-separated canonical rendering.
    pub fn render(&self) -> String {
        self.symbols().collect::<Vec<_>>().join(" ")
    }
}

impl fmt::Debug for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sequence<{}>[{}]", self.alphabet.name, self.render())
    }
}

/// Reads a sequence file: one sequence per line. Blank lines and lines
/// starting with `#` are skipped.
pub fn read_sequences(alphabet: &Arc<Alphabet>, text: &str) -> Result<Vec<Sequence>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = Vec::new();
        for (column, word) in split_with_columns(line) {
            match alphabet.index_of(word) {
                Some(i) => tokens.push(i),
                None => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        column,
                        token: tokens.len() + 1,
                        message: format!("`{word}` is not in alphabet `{}`", alphabet.name()),
                    })
                }
            }
        }
        out.push(Sequence {
            alphabet: Arc::clone(alphabet),
            tokens,
        });
    }
    Ok(out)
}

/// Renders sequences one per line, tokens separated by single spaces.
pub fn write_sequences(sequences: &[Sequence]) -> String {
    let mut out = String::new();
    for s in sequences {
        out.push_str(&s.render());
        out.push('\n');
    }
    out
}

/// Whitespace-split words with their 1-based character column.
fn split_with_columns(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut words = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    for (col, (byte, ch)) in line.char_indices().enumerate() {
        if ch.is_whitespace() {
            if let Some((c, b)) = start.take() {
                words.push((c + 1, &line[b..byte]));
            }
        } else if start.is_none() {
            start = Some((col, byte));
        }
    }
    if let Some((c, b)) = start {
        words.push((c + 1, &line[b..]));
    }
    words.into_iter()
}

/// One Dorabella glyph: an orientation letter `A`..=`H` and a semicircle
/// count `1..=3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DorabellaToken {
    orientation: char,
    semicircles: u8,
}

impl DorabellaToken {
    pub fn new(orientation: char, semicircles: u8) -> Option<DorabellaToken> {
        if ('A'..='H').contains(&orientation) && (1..=3).contains(&semicircles) {
            Some(DorabellaToken {
                orientation,
                semicircles,
            })
        } else {
            None
        }
    }

    pub fn orientation(&self) -> char {
        self.orientation
    }

    pub fn semicircles(&self) -> u8 {
        self.semicircles
    }

    /// Position in [`dorabella_alphabet`]: `A1, A2, A3, B1, ... H3`.
    pub fn index(&self) -> usize {
        (self.orientation as usize - 'A' as usize) * 3 + (self.semicircles as usize - 1)
    }

    pub fn from_index(index: usize) -> Option<DorabellaToken> {
        if index >= 24 {
            return None;
        }
        let orientation = char::from(b'A' + (index / 3) as u8);
        DorabellaToken::new(orientation, (index % 3) as u8 + 1)
    }

    fn parse(word: &str) -> Option<DorabellaToken> {
        let mut chars = word.chars();
        let (o, d, rest) = (chars.next()?, chars.next()?, chars.next());
        if rest.is_some() {
            return None;
        }
        DorabellaToken::new(o, d.to_digit(10)? as u8)
    }
}

impl fmt::Display for DorabellaToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.orientation, self.semicircles)
    }
}

fn cached(cell: &'static OnceLock<Arc<Alphabet>>, build: impl FnOnce() -> Alphabet) -> Arc<Alphabet> {
    Arc::clone(cell.get_or_init(|| Arc::new(build())))
}

/// All 24 glyph classes, ordered `A1, A2, A3, B1, ... H3`.
pub fn dorabella_alphabet() -> Arc<Alphabet> {
    static CELL: OnceLock<Arc<Alphabet>> = OnceLock::new();
    cached(&CELL, || {
        let symbols: Vec<String> = (0..24)
            .map(|i| DorabellaToken::from_index(i).unwrap().to_string())
            .collect();
        Alphabet::new("dorabella", &symbols).unwrap()
    })
}

/// The 24 melody pitches F3..E6, ascending.
pub const MELODY_PITCHES: [&str; 24] = [
    "F3", "G3", "A3", "Bb3", "B3", "C4", "D4", "E4", "F4", "G4", "A4", "Bb4", "B4", "C5", "D5", "E5", "F5",
    "G5", "A5", "Bb5", "B5", "C6", "D6", "E6",
];

pub fn melody_alphabet() -> Arc<Alphabet> {
    static CELL: OnceLock<Arc<Alphabet>> = OnceLock::new();
    cached(&CELL, || Alphabet::new("melody", &MELODY_PITCHES).unwrap())
}

/// Pitch classes of the pitch/duration encoding.
pub const PD_PITCHES: [&str; 8] = ["A", "B", "C", "D", "E", "F", "F#", "G"];

/// Duration classes relative to a quarter note.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DurationClass {
    Short,
    Quarter,
    Long,
}

impl DurationClass {
    pub const ALL: [DurationClass; 3] = [DurationClass::Short, DurationClass::Quarter, DurationClass::Long];

    pub fn as_str(self) -> &'static str {
        match self {
            DurationClass::Short => "short",
            DurationClass::Quarter => "quarter",
            DurationClass::Long => "long",
        }
    }
}

/// 8 pitches x 3 duration classes, pitch-major (`A:short, A:quarter, A:long, B:short, ...`).
pub fn pitch_duration_alphabet() -> Arc<Alphabet> {
    static CELL: OnceLock<Arc<Alphabet>> = OnceLock::new();
    cached(&CELL, || {
        let symbols: Vec<String> = PD_PITCHES
            .iter()
            .flat_map(|p| {
                DurationClass::ALL
                    .iter()
                    .map(move |d| format!("{p}:{}", d.as_str()))
            })
            .collect();
        Alphabet::new("pitch-duration", &symbols).unwrap()
    })
}

/// Lowercase `a`..=`z`.
pub fn english_alphabet() -> Arc<Alphabet> {
    static CELL: OnceLock<Arc<Alphabet>> = OnceLock::new();
    cached(&CELL, || {
        let symbols: Vec<String> = ('a'..='z').map(String::from).collect();
        Alphabet::new("english", &symbols).unwrap()
    })
}

/// A generic cipher alphabet `x1..xN` named `cipherN`.
pub fn cipher_alphabet(size: usize) -> Result<Arc<Alphabet>> {
    let symbols: Vec<String> = (1..=size).map(|i| format!("x{i}")).collect();
    make_alphabet(&symbols, &format!("cipher{size}"))
}

/// Resolves a built-in alphabet by name: `dorabella`, `melody`,
/// `pitch-duration`, `english` or `cipherN`.
pub fn builtin_alphabet(name: &str) -> Option<Arc<Alphabet>> {
    match name {
        "dorabella" => Some(dorabella_alphabet()),
        "melody" => Some(melody_alphabet()),
        "pitch-duration" => Some(pitch_duration_alphabet()),
        "english" => Some(english_alphabet()),
        other => other
            .strip_prefix("cipher")
            .and_then(|n| n.parse::<usize>().ok())
            .and_then(|n| cipher_alphabet(n).ok()),
    }
}

/// Parses a Dorabella transcription, keeping its line structure. Empty
/// lines and lines starting with `#` are dropped.
pub fn parse_dorabella_lines(text: &str) -> Result<Vec<Sequence>> {
    let alphabet = dorabella_alphabet();
    let mut lines = Vec::new();
    let mut count = 0;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim_start().starts_with('#') {
            continue;
        }
        let mut tokens = Vec::new();
        for (column, word) in split_with_columns(line) {
            count += 1;
            let token = DorabellaToken::parse(word).ok_or_else(|| Error::Parse {
                line: lineno + 1,
                column,
                token: count,
                message: format!("`{word}` is not a glyph of the form [A-H][1-3]"),
            })?;
            tokens.push(token.index());
        }
        if !tokens.is_empty() {
            lines.push(Sequence {
                alphabet: Arc::clone(&alphabet),
                tokens,
            });
        }
    }
    Ok(lines)
}

/// Parses a Dorabella transcription into one sequence in reading order.
pub fn parse_dorabella(text: &str) -> Result<Sequence> {
    let tokens = parse_dorabella_lines(text)?
        .into_iter()
        .flat_map(|s| s.tokens)
        .collect();
    Ok(Sequence {
        alphabet: dorabella_alphabet(),
        tokens,
    })
}
