// SPDX-License-Identifier: Apache-2.0

//! Corpus ingestion and normalization.
//!
//! Three source formats are understood:
//!
//! * note-event files (`key: <pitch-class>` header, then `pitch duration [onset]`
//!   per line) normalized to the 24-symbol pitch/duration alphabet;
//! * melody files (one melody per line, pitch tokens such as `C4 D4 Bb4`)
//!   normalized to the 24-pitch melody alphabet;
//! * raw English text, reduced to lowercase letters.

use std::sync::Arc;

use num_rational::Ratio;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seeded_rng;
use crate::symbols::{
    english_alphabet, melody_alphabet, pitch_duration_alphabet, Alphabet, DurationClass, Sequence,
    MELODY_PITCHES,
};

/// Note length in whole-note units.
pub type Duration = Ratio<u32>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoteEvent {
    pitch: u8,
    duration: Duration,
}

impl NoteEvent {
    pub fn new(pitch: u8, duration: Duration) -> Result<NoteEvent> {
        if pitch > 127 {
            return Err(Error::Note(format!("pitch {pitch} outside 0..=127")));
        }
        if *duration.numer() == 0 {
            return Err(Error::Note("duration must be positive".into()));
        }
        Ok(NoteEvent { pitch, duration })
    }

    pub fn pitch(&self) -> u8 {
        self.pitch
    }

    pub fn duration(&self) -> Duration {
        self.duration
    }
}

/// Parses a pitch class name (`C`, `F#`, `Bb`, `E♭`, ...) into 0..=11.
pub fn parse_pitch_class(name: &str) -> Result<u8> {
    let (pc, rest) = parse_letter_and_accidentals(name)?;
    if !rest.is_empty() {
        return Err(Error::Note(format!("bad pitch class `{name}`")));
    }
    Ok(pc.rem_euclid(12) as u8)
}

fn parse_letter_and_accidentals(name: &str) -> Result<(i32, &str)> {
    let mut chars = name.char_indices();
    let base = match chars.next() {
        Some((_, 'C')) => 0,
        Some((_, 'D')) => 2,
        Some((_, 'E')) => 4,
        Some((_, 'F')) => 5,
        Some((_, 'G')) => 7,
        Some((_, 'A')) => 9,
        Some((_, 'B')) => 11,
        _ => return Err(Error::Note(format!("bad pitch name `{name}`"))),
    };
    let mut offset = 0;
    let mut rest = "";
    for (i, c) in chars {
        match c {
            '#' | '♯' => offset += 1,
            'b' | '♭' => offset -= 1,
            _ => {
                rest = &name[i..];
                break;
            }
        }
    }
    Ok((base + offset, rest))
}

/// Parses scientific pitch notation (`C4` is MIDI 60) into a MIDI number.
pub fn parse_pitch_name(name: &str) -> Result<u8> {
    let (pc, rest) = parse_letter_and_accidentals(name)?;
    let octave: i32 = rest
        .parse()
        .map_err(|_| Error::Note(format!("bad octave in pitch `{name}`")))?;
    let midi = 12 * (octave + 1) + pc;
    u8::try_from(midi)
        .ok()
        .filter(|&m| m <= 127)
        .ok_or_else(|| Error::Note(format!("pitch `{name}` outside MIDI range")))
}

/// Pitch class to index in [`crate::symbols::PD_PITCHES`] (`A, B, C, D, E, F, F#, G`):
/// nearest member by semitone distance, ties resolved downward.
pub const PITCH_CLASS_MAP: [usize; 12] = [
    2, // C
    2, // C#
    3, // D
    3, // D#
    4, // E
    5, // F
    6, // F#
    7, // G
    7, // G#
    0, // A
    0, // A#
    1, // B
];

pub fn duration_class(duration: Duration) -> DurationClass {
    let quarter = Ratio::new(1, 4);
    match duration.cmp(&quarter) {
        std::cmp::Ordering::Less => DurationClass::Short,
        std::cmp::Ordering::Equal => DurationClass::Quarter,
        std::cmp::Ordering::Greater => DurationClass::Long,
    }
}

/// Transposes to C by `declared_key`, folds to one octave, maps each pitch
/// class onto the 8-pitch set and classifies durations against a quarter.
pub fn normalize_pitch_duration(events: &[NoteEvent], declared_key: u8) -> Result<Sequence> {
    if events.is_empty() {
        return Err(Error::Empty("note event list".into()));
    }
    if declared_key > 11 {
        return Err(Error::Note(format!(
            "declared key {declared_key} is not a pitch class"
        )));
    }
    let tokens = events
        .iter()
        .map(|e| {
            let pc = (e.pitch as i32 - declared_key as i32).rem_euclid(12) as usize;
            let dur = DurationClass::ALL
                .iter()
                .position(|&d| d == duration_class(e.duration))
                .unwrap();
            PITCH_CLASS_MAP[pc] * DurationClass::ALL.len() + dur
        })
        .collect();
    Sequence::new(pitch_duration_alphabet(), tokens)
}

fn melody_midi() -> [u8; 24] {
    let mut out = [0u8; 24];
    for (slot, name) in out.iter_mut().zip(MELODY_PITCHES) {
        *slot = parse_pitch_name(name).unwrap();
    }
    out
}

/// Maps pitch names onto the melody alphabet. Pitches inside F3..=E6 that
/// are not alphabet members snap to the nearest member, ties downward.
pub fn normalize_melody<S: AsRef<str>>(pitches: &[S]) -> Result<Sequence> {
    let table = melody_midi();
    let (low, high) = (table[0], table[23]);
    let tokens = pitches
        .iter()
        .map(|p| {
            let p = p.as_ref();
            let midi = parse_pitch_name(p)?;
            if midi < low || midi > high {
                return Err(Error::PitchRange {
                    pitch: p.to_string(),
                    low: MELODY_PITCHES[0].into(),
                    high: MELODY_PITCHES[23].into(),
                });
            }
            // Ascending table: the first minimum is the lower neighbour on ties.
            let best = table
                .iter()
                .enumerate()
                .min_by_key(|(_, &m)| (m as i32 - midi as i32).abs())
                .map(|(i, _)| i)
                .unwrap();
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?;
    Sequence::new(melody_alphabet(), tokens)
}

/// Keeps ASCII letters only, folded to lowercase.
pub fn prepare_english(text: &str) -> Sequence {
    let tokens = text
        .chars()
        .filter(char::is_ascii_alphabetic)
        .map(|c| (c.to_ascii_lowercase() as u8 - b'a') as usize)
        .collect();
    Sequence::new(english_alphabet(), tokens).unwrap()
}

/// A parsed note-event file.
#[derive(Debug, Clone, PartialEq)]
pub struct NoteFile {
    pub key: u8,
    pub events: Vec<NoteEvent>,
}

/// Parses a note-event file.
///
/// ```text
/// key: D
/// 62 1/8
/// 64 1/4
/// rest 1/4
/// ```
///
/// An optional third column gives the onset (a rational in whole notes).
/// When present on every note, events are flattened in onset order with
/// ties broken by ascending pitch; otherwise file order is kept. Rests
/// (`rest` or `r`) are dropped. Lines starting with `#` are comments.
pub fn parse_note_file(text: &str) -> Result<NoteFile> {
    let mut key = None;
    let mut events: Vec<(Option<Duration>, NoteEvent)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let at = |msg: String| Error::Note(format!("line {}: {msg}", lineno + 1));
        if key.is_none() {
            let value = line
                .strip_prefix("key:")
                .ok_or_else(|| at("expected `key: <pitch-class>` header".into()))?;
            key = Some(parse_pitch_class(value.trim()).map_err(|e| at(e.to_string()))?);
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(at(format!("expected `pitch duration [onset]`, got `{line}`")));
        }
        if matches!(fields[0], "r" | "rest") {
            continue;
        }
        let pitch = match fields[0].parse::<u8>() {
            Ok(p) => p,
            Err(_) => parse_pitch_name(fields[0]).map_err(|e| at(e.to_string()))?,
        };
        let duration = parse_ratio(fields[1]).map_err(at)?;
        let onset = fields
            .get(2)
            .map(|f| parse_ratio_allow_zero(f))
            .transpose()
            .map_err(at)?;
        let event = NoteEvent::new(pitch, duration).map_err(|e| at(e.to_string()))?;
        events.push((onset, event));
    }
    let key = key.ok_or_else(|| Error::Note("missing `key:` header".into()))?;
    let with_onsets = events.iter().filter(|(o, _)| o.is_some()).count();
    if with_onsets != 0 && with_onsets != events.len() {
        return Err(Error::Note("onsets must be given for every note or none".into()));
    }
    if with_onsets != 0 {
        events.sort_by_key(|(o, e)| (o.unwrap(), e.pitch));
    }
    Ok(NoteFile {
        key,
        events: events.into_iter().map(|(_, e)| e).collect(),
    })
}

fn parse_ratio_allow_zero(field: &str) -> std::result::Result<Duration, String> {
    let (n, d) = match field.split_once('/') {
        Some((n, d)) => (n, d),
        None => (field, "1"),
    };
    let n: u32 = n.parse().map_err(|_| format!("bad rational `{field}`"))?;
    let d: u32 = d.parse().map_err(|_| format!("bad rational `{field}`"))?;
    if d == 0 {
        return Err(format!("zero denominator in `{field}`"));
    }
    Ok(Ratio::new(n, d))
}

fn parse_ratio(field: &str) -> std::result::Result<Duration, String> {
    let r = parse_ratio_allow_zero(field)?;
    if *r.numer() == 0 {
        return Err(format!("duration `{field}` must be positive"));
    }
    Ok(r)
}

/// Parses a melody file: one melody per line, pitch tokens separated by
/// whitespace. Errors carry the line number.
pub fn read_melodies(text: &str) -> Result<Vec<Sequence>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let pitches: Vec<&str> = line.split_whitespace().collect();
        out.push(normalize_melody(&pitches).map_err(|e| match e {
            Error::Note(m) => Error::Note(format!("line {}: {m}", lineno + 1)),
            other => other,
        })?);
    }
    Ok(out)
}

/// Splits raw English text into blank-line separated paragraphs, each
/// prepared with [`prepare_english`]. Paragraphs with no letters are dropped.
pub fn read_english(text: &str) -> Vec<Sequence> {
    let mut out = Vec::new();
    let mut paragraph = String::new();
    let mut flush = |p: &mut String| {
        let s = prepare_english(p);
        if !s.is_empty() {
            out.push(s);
        }
        p.clear();
    };
    for line in text.lines() {
        if line.trim().is_empty() {
            flush(&mut paragraph);
        } else {
            paragraph.push_str(line);
            paragraph.push('\n');
        }
    }
    flush(&mut paragraph);
    out
}

fn common_alphabet(sequences: &[Sequence]) -> Result<Option<Arc<Alphabet>>> {
    let Some(first) = sequences.first() else {
        return Ok(None);
    };
    let alphabet = Arc::clone(first.alphabet());
    for s in sequences {
        alphabet.ensure_same(s.alphabet())?;
    }
    Ok(Some(alphabet))
}

/// Draws `count` contiguous excerpts of exactly `length` tokens, no two
/// sharing a (source, start) position. Sources shorter than `length` are
/// skipped. Deterministic per seed.
pub fn sample_excerpts(
    sequences: &[Sequence],
    count: usize,
    length: usize,
    seed: u64,
) -> Result<Vec<Sequence>> {
    Ok(sample_spans(sequences, count, length, seed)?
        .into_iter()
        .map(|(source, start)| sequences[source].slice(start, length))
        .collect())
}

/// The `(source, start)` pairs behind [`sample_excerpts`].
pub fn sample_spans(
    sequences: &[Sequence],
    count: usize,
    length: usize,
    seed: u64,
) -> Result<Vec<(usize, usize)>> {
    if count == 0 || length == 0 {
        return Err(Error::Config("count and length must be at least 1".into()));
    }
    common_alphabet(sequences)?;
    // (source index, first flat position) for every source with room for one span.
    let mut offsets = Vec::new();
    let mut available = 0usize;
    for (i, s) in sequences.iter().enumerate() {
        if s.len() >= length {
            offsets.push((i, available));
            available += s.len() - length + 1;
        }
    }
    if available < count {
        return Err(Error::Insufficient {
            available,
            requested: count,
        });
    }
    let mut rng = seeded_rng(seed);
    let picks = rand::seq::index::sample(&mut rng, available, count);
    Ok(picks
        .iter()
        .map(|flat| {
            let slot = offsets.partition_point(|&(_, start)| start <= flat) - 1;
            let (source, start) = offsets[slot];
            (source, flat - start)
        })
        .collect())
}

/// A train/test partition of source sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplit {
    pub train: Vec<Sequence>,
    pub test: Vec<Sequence>,
    pub seed: u64,
}

impl CorpusSplit {
    pub fn alphabet(&self) -> Option<&Arc<Alphabet>> {
        self.train.first().or(self.test.first()).map(Sequence::alphabet)
    }
}

/// Shuffles the sources with `seed` and moves the first `train_count` into
/// the training set; the remainder is the test pool.
pub fn split_corpus(sequences: &[Sequence], train_count: usize, seed: u64) -> Result<CorpusSplit> {
    if train_count >= sequences.len() {
        return Err(Error::Insufficient {
            available: sequences.len(),
            requested: train_count + 1,
        });
    }
    common_alphabet(sequences)?;
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    order.shuffle(&mut seeded_rng(seed));
    let (train, test) = order.split_at(train_count);
    Ok(CorpusSplit {
        train: train.iter().map(|&i| sequences[i].clone()).collect(),
        test: test.iter().map(|&i| sequences[i].clone()).collect(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(pitch: u8, n: u32, d: u32) -> NoteEvent {
        NoteEvent::new(pitch, Ratio::new(n, d)).unwrap()
    }

    /// Nearest 8-pitch member on the pitch-class circle, ties downward.
    fn brute_force_map(pc: i32) -> usize {
        let members = [9, 11, 0, 2, 4, 5, 6, 7];
        let mut best = (i32::MAX, 0usize);
        for down in 0..12 {
            // Walk downward first so equal distances prefer the lower member.
            for (dist, cand) in [(down, pc - down), (down, pc + down)] {
                let c = cand.rem_euclid(12);
                if let Some(i) = members.iter().position(|&m| m == c) {
                    if dist < best.0 {
                        best = (dist, i);
                    }
                }
            }
        }
        best.1
    }

    #[test]
    fn pitch_class_table_is_nearest_with_downward_ties() {
        for (pc, &mapped) in PITCH_CLASS_MAP.iter().enumerate() {
            assert_eq!(mapped, brute_force_map(pc as i32), "pc {pc}");
        }
    }

    #[test]
    fn pitch_duration_examples() {
        let c = normalize_pitch_duration(&[ev(60, 1, 4)], 0).unwrap();
        assert_eq!(c.render(), "C:quarter");
        let d = normalize_pitch_duration(&[ev(62, 1, 8)], 2).unwrap();
        assert_eq!(d.render(), "C:short");
        let cs = normalize_pitch_duration(&[ev(61, 1, 2)], 0).unwrap();
        assert_eq!(cs.render(), "C:long");
        assert!(normalize_pitch_duration(&[], 0).is_err());
        assert!(normalize_pitch_duration(&[ev(60, 1, 4)], 12).is_err());
    }

    #[test]
    fn exact_rational_quarter() {
        assert_eq!(duration_class(Ratio::new(2, 8)), DurationClass::Quarter);
        assert_eq!(
            duration_class(Ratio::new(25_000_001, 100_000_000)),
            DurationClass::Long
        );
        assert_eq!(duration_class(Ratio::new(3, 16)), DurationClass::Short);
    }

    #[test]
    fn melody_examples() {
        assert_eq!(
            normalize_melody(&["C4", "D4", "E4"]).unwrap().render(),
            "C4 D4 E4"
        );
        assert_eq!(normalize_melody(&["C#4"]).unwrap().render(), "C4");
        assert_eq!(
            normalize_melody(&["A#4", "B♭4", "F#5"]).unwrap().render(),
            "Bb4 Bb4 F5"
        );
        match normalize_melody(&["E6", "F6"]) {
            Err(Error::PitchRange { pitch, .. }) => assert_eq!(pitch, "F6"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(normalize_melody(&["E3"]).is_err());
    }

    #[test]
    fn melody_snap_matches_distance_table() {
        let table = melody_midi();
        for midi in table[0]..=table[23] {
            let name = format!(
                "{}{}",
                ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"][midi as usize % 12],
                midi / 12 - 1
            );
            let got = normalize_melody(&[&name]).unwrap().tokens()[0];
            let dists: Vec<i32> = table.iter().map(|&m| (m as i32 - midi as i32).abs()).collect();
            let min = *dists.iter().min().unwrap();
            let expected = dists.iter().position(|&d| d == min).unwrap();
            assert_eq!(got, expected, "{name}");
        }
    }

    #[test]
    fn english_examples() {
        assert_eq!(
            prepare_english("Dear Dora!").symbols().collect::<String>(),
            "deardora"
        );
        assert!(prepare_english("").is_empty());
        assert_eq!(prepare_english("A1 b2-C").symbols().collect::<String>(), "abc");
        assert_eq!(prepare_english("café").symbols().collect::<String>(), "caf");
    }

    #[test]
    fn english_paragraphs() {
        let seqs = read_english("My dear Cassandra,\nI have\n\n\n1234\n\nYours ever");
        assert_eq!(seqs.len(), 2);
        assert_eq!(seqs[0].symbols().collect::<String>(), "mydearcassandraihave");
    }

    #[test]
    fn note_file_parsing() {
        let f = parse_note_file("# a tune\nkey: D\n62 1/8\nrest 1/4\n66 1/4\n").unwrap();
        assert_eq!(f.key, 2);
        assert_eq!(f.events, vec![ev(62, 1, 8), ev(66, 1, 4)]);
        let s = normalize_pitch_duration(&f.events, f.key).unwrap();
        assert_eq!(s.render(), "C:short E:quarter");

        let poly = parse_note_file("key: C\n64 1/4 0\n60 1/4 0\n67 1/2 1/4\n").unwrap();
        assert_eq!(
            poly.events.iter().map(|e| e.pitch()).collect::<Vec<_>>(),
            vec![60, 64, 67]
        );

        assert!(parse_note_file("62 1/8\n").is_err());
        assert!(parse_note_file("key: H\n").is_err());
        assert!(parse_note_file("key: C\n60 0/4\n").is_err());
        assert!(parse_note_file("key: C\n60 1/4 0\n62 1/4\n").is_err());
        assert!(parse_note_file("key: C\n200 1/4\n").is_err());
    }

    fn pool(lengths: &[usize]) -> Vec<Sequence> {
        lengths
            .iter()
            .enumerate()
            .map(|(k, &n)| Sequence::new(english_alphabet(), (0..n).map(|i| (i + k) % 26).collect()).unwrap())
            .collect()
    }

    #[test]
    fn excerpt_examples() {
        let one = pool(&[87]);
        assert_eq!(sample_excerpts(&one, 1, 87, 7).unwrap(), one);

        let many = pool(&[500, 40, 300, 1000]);
        let ex = sample_excerpts(&many, 300, 87, 11).unwrap();
        assert_eq!(ex.len(), 300);
        assert!(ex.iter().all(|e| e.len() == 87));
        assert_eq!(ex, sample_excerpts(&many, 300, 87, 11).unwrap());

        match sample_excerpts(&pool(&[50]), 1, 87, 3) {
            Err(Error::Insufficient {
                available: 0,
                requested: 1,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(sample_excerpts(&one, 2, 87, 3).is_err());
    }

    #[test]
    fn split_examples() {
        let ten = pool(&[5; 10]);
        let split = split_corpus(&ten, 7, 1).unwrap();
        assert_eq!((split.train.len(), split.test.len()), (7, 3));
        assert_eq!(split, split_corpus(&ten, 7, 1).unwrap());
        assert!(split_corpus(&ten, 10, 1).is_err());

        // Sources are distinguishable by their first token, so disjointness is checkable.
        let firsts = |v: &[Sequence]| v.iter().map(|s| s.tokens()[0]).collect::<Vec<_>>();
        let (tr, te) = (firsts(&split.train), firsts(&split.test));
        assert!(tr.iter().all(|t| !te.contains(t)));
    }

    #[test]
    fn split_of_1576_keeps_467() {
        let sources = pool(&[9; 1576]);
        let split = split_corpus(&sources, 467, 2021).unwrap();
        assert_eq!(split.train.len(), 467);
        assert_eq!(split.test.len(), 1109);
    }

    proptest! {
        #[test]
        fn transposition_equivariance(
            pitches in proptest::collection::vec(0u8..100, 1..40),
            durs in proptest::collection::vec((1u32..9, 1u32..17), 40),
            k in 0u8..12,
        ) {
            let base: Vec<NoteEvent> = pitches.iter().zip(&durs).map(|(&p, &(n, d))| ev(p, n, d)).collect();
            let shifted: Vec<NoteEvent> = base.iter().map(|e| ev(e.pitch() + k, *e.duration().numer(), *e.duration().denom())).collect();
            prop_assert_eq!(
                normalize_pitch_duration(&shifted, k).unwrap(),
                normalize_pitch_duration(&base, 0).unwrap()
            );
        }

        #[test]
        fn english_is_case_invariant(text in "\\PC{0,80}") {
            let plain = prepare_english(&text);
            prop_assert!(plain.tokens().iter().all(|&t| t < 26));
            prop_assert_eq!(prepare_english(&text.to_ascii_uppercase()), plain.clone());
            prop_assert_eq!(prepare_english(&text.to_ascii_lowercase()), plain);
        }

        #[test]
        fn excerpts_have_distinct_starts(seed in 0u64..1000, count in 1usize..50) {
            let sources = pool(&[60, 90, 30]);
            let spans = sample_spans(&sources, count, 20, seed).unwrap();
            let mut unique = spans.clone();
            unique.sort_unstable();
            unique.dedup();
            prop_assert_eq!(unique.len(), count);
            prop_assert!(spans.iter().all(|&(src, start)| start + 20 <= sources[src].len()));
            prop_assert_eq!(spans, sample_spans(&sources, count, 20, seed).unwrap());
        }
    }
}
