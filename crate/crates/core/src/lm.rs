// SPDX-License-Identifier: Apache-2.0

//! Trigram character language model with interpolated modified Kneser-Ney
//! smoothing.
//!
//! Every sequence is padded with two start tokens at the front and none at
//! the end, so a sequence of `N` tokens contributes exactly `N` predictions.
//! The highest order uses raw counts; lower orders use continuation counts
//! (number of distinct left extensions), except bigrams whose first token
//! is the start token, which keep raw counts since nothing can precede it.
//! The unigram level interpolates with the uniform distribution so every
//! symbol has non-zero probability in every context.
//!
//! Discounts are estimated per order from counts-of-counts:
//!
//! ```text
//! Y  = n1 / (n1 + 2 n2)
//! Dk = k - (k + 1) Y n(k+1) / nk     for k = 1, 2, 3
//! ```
//!
//! When the closed form is undefined or yields a discount outside
//! `0 <= Dk < k`, that order falls back to absolute discounting with 0.5.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::symbols::{Alphabet, Sequence, START_TOKEN};

/// Model order. Fixed.
pub const ORDER: usize = 3;

const FORMAT_HEADER: &str = "ngram-model 1";

/// The three modified Kneser-Ney discounts of one order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discounts {
    pub d1: f64,
    pub d2: f64,
    pub d3plus: f64,
}

impl Discounts {
    pub const FALLBACK: Discounts = Discounts {
        d1: 0.5,
        d2: 0.5,
        d3plus: 0.5,
    };

    pub const ZERO: Discounts = Discounts {
        d1: 0.0,
        d2: 0.0,
        d3plus: 0.0,
    };

    /// Closed-form estimate from counts-of-counts `[n1, n2, n3, n4]`.
    pub fn estimate(count_of_counts: [u64; 4]) -> Discounts {
        let [n1, n2, n3, n4] = count_of_counts.map(|n| n as f64);
        if n1 == 0.0 || n2 == 0.0 || n3 == 0.0 {
            return Discounts::FALLBACK;
        }
        let y = n1 / (n1 + 2.0 * n2);
        let d = Discounts {
            d1: 1.0 - 2.0 * y * n2 / n1,
            d2: 2.0 - 3.0 * y * n3 / n2,
            d3plus: 3.0 - 4.0 * y * n4 / n3,
        };
        if d.is_valid() {
            d
        } else {
            Discounts::FALLBACK
        }
    }

    /// Each discount is non-negative and below the smallest count it applies to.
    pub fn is_valid(&self) -> bool {
        let ok = |d: f64, limit: f64| d.is_finite() && (0.0..limit).contains(&d);
        ok(self.d1, 1.0) && ok(self.d2, 2.0) && ok(self.d3plus, 3.0)
    }

    pub fn for_count(&self, count: u64) -> f64 {
        match count {
            0 => 0.0,
            1 => self.d1,
            2 => self.d2,
            _ => self.d3plus,
        }
    }
}

/// Aggregates over the counts sharing one context.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct ContextStats {
    total: u64,
    n1: u64,
    n2: u64,
    n3plus: u64,
}

impl ContextStats {
    fn add(&mut self, count: u64) {
        self.total += count;
        match count {
            0 => {}
            1 => self.n1 += 1,
            2 => self.n2 += 1,
            _ => self.n3plus += 1,
        }
    }

    /// Discount mass moved to the lower order, before dividing by `total`.
    fn backoff_mass(&self, d: &Discounts) -> f64 {
        d.d1 * self.n1 as f64 + d.d2 * self.n2 as f64 + d.d3plus * self.n3plus as f64
    }
}

fn count_of_counts<'a>(counts: impl Iterator<Item = &'a u64>) -> [u64; 4] {
    let mut n = [0u64; 4];
    for &c in counts {
        if (1..=4).contains(&c) {
            n[c as usize - 1] += 1;
        }
    }
    n
}

/// A trained trigram model. Immutable; safe to query from many threads.
#[derive(Debug, Clone)]
pub struct NgramModel {
    alphabet: Arc<Alphabet>,
    // Tokens are alphabet indices; the start token is `alphabet.len()`.
    trigrams: HashMap<[u32; 3], u64>,
    bigrams: HashMap<[u32; 2], u64>,
    unigrams: Vec<u64>,
    trigram_contexts: HashMap<[u32; 2], ContextStats>,
    bigram_contexts: HashMap<u32, ContextStats>,
    unigram_context: ContextStats,
    /// Indexed by order minus one: unigram, bigram, trigram.
    discounts: [Discounts; 3],
}

impl NgramModel {
    /// Trains with discounts estimated from the data.
    pub fn train(sequences: &[Sequence], alphabet: &Arc<Alphabet>) -> Result<NgramModel> {
        let trigrams = count_trigrams(sequences, alphabet)?;
        Ok(NgramModel::from_trigrams(Arc::clone(alphabet), trigrams, None))
    }

    /// Trains with caller-supplied discounts (unigram, bigram, trigram).
    pub fn train_with_discounts(
        sequences: &[Sequence],
        alphabet: &Arc<Alphabet>,
        discounts: [Discounts; 3],
    ) -> Result<NgramModel> {
        let trigrams = count_trigrams(sequences, alphabet)?;
        Ok(NgramModel::from_trigrams(
            Arc::clone(alphabet),
            trigrams,
            Some(discounts),
        ))
    }

    /// The model with no evidence: every symbol has probability `1 / V`.
    pub fn uniform(alphabet: &Arc<Alphabet>) -> NgramModel {
        NgramModel::from_trigrams(
            Arc::clone(alphabet),
            HashMap::new(),
            Some([Discounts::FALLBACK; 3]),
        )
    }

    fn from_trigrams(
        alphabet: Arc<Alphabet>,
        trigrams: HashMap<[u32; 3], u64>,
        discounts: Option<[Discounts; 3]>,
    ) -> NgramModel {
        let start = alphabet.len() as u32;
        let mut bigrams: HashMap<[u32; 2], u64> = HashMap::new();
        for (&[_, v, w], &c) in &trigrams {
            *bigrams.entry([v, w]).or_default() += if v == start { c } else { 1 };
        }
        let mut unigrams = vec![0u64; alphabet.len()];
        for &[_, w] in bigrams.keys() {
            unigrams[w as usize] += 1;
        }

        let mut trigram_contexts: HashMap<[u32; 2], ContextStats> = HashMap::new();
        for (&[u, v, _], &c) in &trigrams {
            trigram_contexts.entry([u, v]).or_default().add(c);
        }
        let mut bigram_contexts: HashMap<u32, ContextStats> = HashMap::new();
        for (&[v, _], &c) in &bigrams {
            bigram_contexts.entry(v).or_default().add(c);
        }
        let mut unigram_context = ContextStats::default();
        for &c in &unigrams {
            unigram_context.add(c);
        }

        let discounts = discounts.unwrap_or_else(|| {
            [
                Discounts::estimate(count_of_counts(unigrams.iter())),
                Discounts::estimate(count_of_counts(bigrams.values())),
                Discounts::estimate(count_of_counts(trigrams.values())),
            ]
        });

        NgramModel {
            alphabet,
            trigrams,
            bigrams,
            unigrams,
            trigram_contexts,
            bigram_contexts,
            unigram_context,
            discounts,
        }
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    pub fn order(&self) -> usize {
        ORDER
    }

    pub fn discounts(&self) -> [Discounts; 3] {
        self.discounts
    }

    /// Index used for the start token in [`NgramModel::prob_raw`] contexts.
    pub fn start_index(&self) -> usize {
        self.alphabet.len()
    }

    /// `P(symbol | context)`, where `None` in the context is the start token.
    pub fn prob(&self, context: [Option<usize>; 2], symbol: usize) -> f64 {
        let start = self.start_index();
        self.prob_raw(context[0].unwrap_or(start), context[1].unwrap_or(start), symbol)
    }

    /// `P(w | u v)` with `u`, `v` in `0..=V` (`V` being the start token).
    pub fn prob_raw(&self, u: usize, v: usize, w: usize) -> f64 {
        let size = self.alphabet.len();
        debug_assert!(u <= size && v <= size && w < size);
        let (u, v, w) = (u as u32, v as u32, w as u32);

        let uniform = 1.0 / size as f64;
        let st = &self.unigram_context;
        let p1 = if st.total == 0 {
            uniform
        } else {
            let c = self.unigrams[w as usize];
            let d = &self.discounts[0];
            ((c as f64 - d.for_count(c)).max(0.0) + st.backoff_mass(d) * uniform) / st.total as f64
        };

        let p2 = match self.bigram_contexts.get(&v) {
            Some(st) => {
                let c = self.bigrams.get(&[v, w]).copied().unwrap_or(0);
                let d = &self.discounts[1];
                ((c as f64 - d.for_count(c)).max(0.0) + st.backoff_mass(d) * p1) / st.total as f64
            }
            None => p1,
        };

        match self.trigram_contexts.get(&[u, v]) {
            Some(st) => {
                let c = self.trigrams.get(&[u, v, w]).copied().unwrap_or(0);
                let d = &self.discounts[2];
                ((c as f64 - d.for_count(c)).max(0.0) + st.backoff_mass(d) * p2) / st.total as f64
            }
            None => p2,
        }
    }

    /// Natural-log probability of one prediction; the value summed by
    /// [`NgramModel::log_prob`].
    pub fn term_log_prob(&self, u: usize, v: usize, w: usize) -> f64 {
        self.prob_raw(u, v, w).ln()
    }

    /// Dense table of [`NgramModel::term_log_prob`] over all contexts,
    /// including start-padded ones.
    pub fn log_prob_table(&self) -> LogProbTable {
        let size = self.alphabet.len();
        let ctx = size + 1;
        let mut data = Vec::with_capacity(ctx * ctx * size);
        for u in 0..ctx {
            for v in 0..ctx {
                for w in 0..size {
                    data.push(self.term_log_prob(u, v, w));
                }
            }
        }
        LogProbTable { size, data }
    }

    /// `sum ln P(s_i | s_{i-2} s_{i-1})` with start padding.
    pub fn log_prob(&self, sequence: &Sequence) -> Result<f64> {
        self.alphabet.ensure_same(sequence.alphabet())?;
        if sequence.is_empty() {
            return Err(Error::Empty("cannot score an empty sequence".into()));
        }
        let start = self.start_index();
        let (mut u, mut v) = (start, start);
        let mut total = 0.0;
        for &w in sequence.tokens() {
            total += self.term_log_prob(u, v, w);
            u = v;
            v = w;
        }
        Ok(total)
    }

    /// `exp(-(sum of log_prob) / N)` over all tokens of all sequences.
    pub fn perplexity(&self, sequences: &[Sequence]) -> Result<f64> {
        let mut total = 0.0;
        let mut tokens = 0usize;
        for s in sequences {
            if s.is_empty() {
                self.alphabet.ensure_same(s.alphabet())?;
                continue;
            }
            total += self.log_prob(s)?;
            tokens += s.len();
        }
        if tokens == 0 {
            return Err(Error::Empty("perplexity needs at least one token".into()));
        }
        Ok((-total / tokens as f64).exp())
    }

    /// Serializes to the versioned text format. Counts are written as
    /// trigram lines sorted by index; lower orders are derived on load.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let a = &self.alphabet;
        writeln!(out, "{FORMAT_HEADER}").unwrap();
        writeln!(out, "order {ORDER}").unwrap();
        writeln!(out, "alphabet {} {}", a.name(), a.len()).unwrap();
        writeln!(out, "symbols {}", a.symbols().join(" ")).unwrap();
        for (i, d) in self.discounts.iter().enumerate() {
            writeln!(out, "discounts {} {} {} {}", i + 1, d.d1, d.d2, d.d3plus).unwrap();
        }
        let mut entries: Vec<(&[u32; 3], &u64)> = self.trigrams.iter().collect();
        entries.sort_unstable();
        writeln!(out, "trigrams {}", entries.len()).unwrap();
        let name = |t: u32| a.symbol(t as usize).unwrap_or(START_TOKEN);
        for (&[u, v, w], c) in entries {
            writeln!(out, "{} {} {} {c}", name(u), name(v), name(w)).unwrap();
        }
        out
    }

    /// Parses [`NgramModel::to_text`] output. Lines starting with `#` are ignored.
    pub fn from_text(text: &str) -> Result<NgramModel> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::Model(format!("unexpected end of file, expected {what}")))
        };
        let bad = |line: usize, msg: &str| Error::Model(format!("line {line}: {msg}"));

        let (n, header) = next("header")?;
        if header != FORMAT_HEADER {
            return Err(bad(n, &format!("expected `{FORMAT_HEADER}`")));
        }
        let (n, order) = next("order")?;
        if order != format!("order {ORDER}") {
            return Err(bad(n, "only order 3 is supported"));
        }
        let (n, alpha) = next("alphabet")?;
        let fields: Vec<&str> = alpha.split_whitespace().collect();
        let (name, size) = match fields.as_slice() {
            ["alphabet", name, size] => (*name, size.parse::<usize>().map_err(|_| bad(n, "bad size"))?),
            _ => return Err(bad(n, "expected `alphabet <name> <size>`")),
        };
        let (n, syms) = next("symbols")?;
        let symbols: Vec<&str> = syms
            .strip_prefix("symbols")
            .ok_or_else(|| bad(n, "expected `symbols ...`"))?
            .split_whitespace()
            .collect();
        if symbols.len() != size {
            return Err(bad(n, "symbol count does not match alphabet size"));
        }
        let alphabet = Arc::new(Alphabet::new(name, &symbols)?);

        let mut discounts = [Discounts::FALLBACK; 3];
        for (k, slot) in discounts.iter_mut().enumerate() {
            let (n, line) = next("discounts")?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 5 || f[0] != "discounts" || f[1] != (k + 1).to_string() {
                return Err(bad(n, &format!("expected `discounts {} d1 d2 d3+`", k + 1)));
            }
            let p = |s: &str| s.parse::<f64>().map_err(|_| bad(n, "bad discount"));
            *slot = Discounts {
                d1: p(f[2])?,
                d2: p(f[3])?,
                d3plus: p(f[4])?,
            };
        }

        let (n, tri) = next("trigrams")?;
        let count: usize = tri
            .strip_prefix("trigrams ")
            .and_then(|c| c.trim().parse().ok())
            .ok_or_else(|| bad(n, "expected `trigrams <count>`"))?;
        let start = size as u32;
        let lookup = |s: &str, n: usize| -> Result<u32> {
            if s == START_TOKEN {
                Ok(start)
            } else {
                alphabet
                    .index_of(s)
                    .map(|i| i as u32)
                    .ok_or_else(|| bad(n, &format!("unknown symbol `{s}`")))
            }
        };
        let mut trigrams = HashMap::with_capacity(count);
        for _ in 0..count {
            let (n, line) = next("trigram line")?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(bad(n, "expected `u v w count`"));
            }
            let key = [lookup(f[0], n)?, lookup(f[1], n)?, lookup(f[2], n)?];
            if key[2] == start || (key[0] != start && key[1] == start) {
                return Err(bad(n, "start token in an impossible position"));
            }
            let c: u64 = f[3].parse().map_err(|_| bad(n, "bad count"))?;
            if c == 0 || trigrams.insert(key, c).is_some() {
                return Err(bad(n, "zero or duplicate count"));
            }
        }
        if let Some((n, _)) = lines.next() {
            return Err(bad(n, "trailing content"));
        }
        Ok(NgramModel::from_trigrams(alphabet, trigrams, Some(discounts)))
    }
}

/// Dense `ln P(w | u v)` lookup, `u`, `v` in `0..=V` with `V` the start token.
#[derive(Debug, Clone)]
pub struct LogProbTable {
    size: usize,
    data: Vec<f64>,
}

impl LogProbTable {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn start(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize, w: usize) -> f64 {
        self.data[(u * (self.size + 1) + v) * self.size + w]
    }

    /// Same accumulation order as [`NgramModel::log_prob`].
    pub fn score(&self, tokens: &[usize]) -> f64 {
        let (mut u, mut v) = (self.start(), self.start());
        let mut total = 0.0;
        for &w in tokens {
            total += self.get(u, v, w);
            u = v;
            v = w;
        }
        total
    }
}

fn count_trigrams(sequences: &[Sequence], alphabet: &Arc<Alphabet>) -> Result<HashMap<[u32; 3], u64>> {
    let start = alphabet.len() as u32;
    let mut counts = HashMap::new();
    let mut tokens = 0usize;
    for s in sequences {
        alphabet.ensure_same(s.alphabet())?;
        let (mut u, mut v) = (start, start);
        for &w in s.tokens() {
            let w = w as u32;
            *counts.entry([u, v, w]).or_insert(0u64) += 1;
            u = v;
            v = w;
        }
        tokens += s.len();
    }
    if tokens < ORDER {
        return Err(Error::Model(format!(
            "training corpus has {tokens} tokens; at least {ORDER} required"
        )));
    }
    Ok(counts)
}
