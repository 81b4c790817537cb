// SPDX-License-Identifier: Apache-2.0

//! ABC notation export for melodies over the melody alphabet.
//!
//! Every note is a quarter note (`L:1/4`) in 4/4, four notes to a bar and
//! four bars to a line. Accidentals in ABC persist to the end of the bar,
//! so a natural following a flat of the same pitch in one bar is written
//! with an explicit `=`.

use std::collections::HashSet;

use crate::corpus::parse_pitch_name;
use crate::error::{Error, Result};
use crate::symbols::{melody_alphabet, Sequence};

const NOTES_PER_BAR: usize = 4;
const BARS_PER_LINE: usize = 4;

/// ABC spelling of one melody pitch, without accidental: `(letter-with-octave, flat)`.
fn abc_pitch(symbol: &str) -> Result<(String, bool)> {
    let midi = parse_pitch_name(symbol)?;
    let mut chars = symbol.chars();
    let letter = chars.next().unwrap();
    let flat = symbol[1..].starts_with('b');
    let octave = (midi as i32 - if flat { -1 } else { 0 }) / 12 - 1;
    let (base, marks) = match octave {
        o if o <= 4 => (
            letter.to_ascii_uppercase().to_string(),
            ",".repeat((4 - o) as usize),
        ),
        o => (
            letter.to_ascii_lowercase().to_string(),
            "'".repeat((o - 5) as usize),
        ),
    };
    Ok((base + &marks, flat))
}

/// Renders a melody as an ABC tune.
pub fn melody_to_abc(melody: &Sequence, title: &str) -> Result<String> {
    melody_alphabet().ensure_same(melody.alphabet())?;
    if melody.is_empty() {
        return Err(Error::Empty("melody has no notes".into()));
    }
    let mut out = format!("X:1\nT:{title}\nM:4/4\nL:1/4\nK:C\n");
    let mut flats_in_bar: HashSet<String> = HashSet::new();
    let notes: Vec<&str> = melody.symbols().collect();
    let bars: Vec<&[&str]> = notes.chunks(NOTES_PER_BAR).collect();
    for (b, bar) in bars.iter().enumerate() {
        flats_in_bar.clear();
        let mut cells = Vec::with_capacity(bar.len());
        for note in bar.iter() {
            let (pitch, flat) = abc_pitch(note)?;
            let cell = if flat {
                flats_in_bar.insert(pitch.clone());
                format!("_{pitch}")
            } else if flats_in_bar.remove(&pitch) {
                format!("={pitch}")
            } else {
                pitch
            };
            cells.push(cell);
        }
        out.push_str(&cells.join(" "));
        let last = b + 1 == bars.len();
        if last {
            out.push_str(" |]\n");
        } else if (b + 1) % BARS_PER_LINE == 0 {
            out.push_str(" |\n");
        } else {
            out.push_str(" | ");
        }
    }
    Ok(out)
}
