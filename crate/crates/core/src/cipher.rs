// SPDX-License-Identifier: Apache-2.0

//! Monoalphabetic substitution keys.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seeded_rng;
use crate::symbols::{Alphabet, Sequence};

/// A bijection from a plaintext alphabet onto a ciphertext alphabet of the
/// same size. `mapping[i]` is the cipher index of plaintext symbol `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Key {
    plain: Arc<Alphabet>,
    cipher: Arc<Alphabet>,
    mapping: Vec<usize>,
}

impl Key {
    pub fn new(plain: Arc<Alphabet>, cipher: Arc<Alphabet>, mapping: Vec<usize>) -> Result<Key> {
        if plain.len() != cipher.len() {
            return Err(Error::Key(format!(
                "alphabet sizes differ: `{}` has {}, `{}` has {}",
                plain.name(),
                plain.len(),
                cipher.name(),
                cipher.len()
            )));
        }
        if mapping.len() != plain.len() {
            return Err(Error::Key(format!(
                "mapping has {} entries, alphabet has {}",
                mapping.len(),
                plain.len()
            )));
        }
        let mut seen = vec![false; mapping.len()];
        for &c in &mapping {
            if c >= seen.len() || std::mem::replace(&mut seen[c], true) {
                return Err(Error::Key(format!("mapping is not a permutation (entry {c})")));
            }
        }
        Ok(Key {
            plain,
            cipher,
            mapping,
        })
    }

    pub fn identity(plain: Arc<Alphabet>, cipher: Arc<Alphabet>) -> Result<Key> {
        let mapping = (0..plain.len()).collect();
        Key::new(plain, cipher, mapping)
    }

    /// Uniformly random key (Fisher-Yates shuffle), deterministic per seed.
    pub fn random(plain: Arc<Alphabet>, cipher: Arc<Alphabet>, seed: u64) -> Result<Key> {
        let mut mapping: Vec<usize> = (0..plain.len()).collect();
        mapping.shuffle(&mut seeded_rng(seed));
        Key::new(plain, cipher, mapping)
    }

    pub fn plain_alphabet(&self) -> &Arc<Alphabet> {
        &self.plain
    }

    pub fn cipher_alphabet(&self) -> &Arc<Alphabet> {
        &self.cipher
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    /// Exchanges the cipher images of plaintext symbols `i` and `j`.
    pub fn swap(&mut self, i: usize, j: usize) {
        self.mapping.swap(i, j);
    }

    pub fn encipher(&self, plaintext: &Sequence) -> Result<Sequence> {
        self.plain.ensure_same(plaintext.alphabet())?;
        let tokens = plaintext.tokens().iter().map(|&t| self.mapping[t]).collect();
        Sequence::new(Arc::clone(&self.cipher), tokens)
    }

    /// Applies the inverse key.
    pub fn decipher(&self, ciphertext: &Sequence) -> Result<Sequence> {
        self.invert().encipher(ciphertext)
    }

    pub fn invert(&self) -> Key {
        let mut inverse = vec![0; self.mapping.len()];
        for (p, &c) in self.mapping.iter().enumerate() {
            inverse[c] = p;
        }
        Key {
            plain: Arc::clone(&self.cipher),
            cipher: Arc::clone(&self.plain),
            mapping: inverse,
        }
    }

    /// The key that applies `self` and then `next`.
    pub fn then(&self, next: &Key) -> Result<Key> {
        self.cipher.ensure_same(&next.plain)?;
        let mapping = self.mapping.iter().map(|&c| next.mapping[c]).collect();
        Ok(Key {
            plain: Arc::clone(&self.plain),
            cipher: Arc::clone(&next.cipher),
            mapping,
        })
    }

    /// Two-row text form: a `key <plain> <cipher>` header, then the plain
    /// symbols and their cipher images in column-aligned rows.
    pub fn to_text(&self) -> String {
        let plain = self.plain.symbols();
        let cipher: Vec<&str> = self
            .mapping
            .iter()
            .map(|&c| self.cipher.symbols()[c].as_str())
            .collect();
        let widths: Vec<usize> = plain
            .iter()
            .zip(&cipher)
            .map(|(p, c)| p.chars().count().max(c.chars().count()))
            .collect();
        let row = |cells: &mut dyn Iterator<Item = &str>| {
            let mut line = String::new();
            for (k, (cell, w)) in cells.zip(&widths).enumerate() {
                if k > 0 {
                    line.push(' ');
                }
                write!(line, "{cell:<w$}").unwrap();
            }
            line.trim_end().to_string()
        };
        format!(
            "key {} {}\n{}\n{}\n",
            self.plain.name(),
            self.cipher.name(),
            row(&mut plain.iter().map(String::as_str)),
            row(&mut cipher.iter().copied())
        )
    }

    /// Parses [`Key::to_text`] output, resolving alphabet names with
    /// `resolve`. Columns may appear in any order. Lines starting with `#`
    /// are ignored.
    pub fn from_text(text: &str, resolve: impl Fn(&str) -> Option<Arc<Alphabet>>) -> Result<Key> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
        let (plain, cipher) = match header.as_slice() {
            ["key", p, c] => (
                resolve(p).ok_or_else(|| Error::Key(format!("unknown alphabet `{p}`")))?,
                resolve(c).ok_or_else(|| Error::Key(format!("unknown alphabet `{c}`")))?,
            ),
            _ => {
                return Err(Error::Key(
                    "expected `key <plain-alphabet> <cipher-alphabet>`".into(),
                ))
            }
        };
        let plain_row: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
        let cipher_row: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
        if plain_row.len() != plain.len() || cipher_row.len() != plain.len() {
            return Err(Error::Key(format!(
                "expected two rows of {} symbols, got {} and {}",
                plain.len(),
                plain_row.len(),
                cipher_row.len()
            )));
        }
        let mut mapping = vec![usize::MAX; plain.len()];
        for (p, c) in plain_row.iter().zip(&cipher_row) {
            let pi = plain
                .index_of(p)
                .ok_or_else(|| Error::UnknownSymbol(p.to_string()))?;
            let ci = cipher
                .index_of(c)
                .ok_or_else(|| Error::UnknownSymbol(c.to_string()))?;
            if mapping[pi] != usize::MAX {
                return Err(Error::Key(format!("plain symbol `{p}` listed twice")));
            }
            mapping[pi] = ci;
        }
        if lines.next().is_some() {
            return Err(Error::Key("trailing content after key rows".into()));
        }
        Key::new(plain, cipher, mapping)
    }
}

/// A random key from an alphabet onto itself.
pub fn random_key(alphabet: &Arc<Alphabet>, seed: u64) -> Key {
    Key::random(Arc::clone(alphabet), Arc::clone(alphabet), seed).unwrap()
}

pub fn encipher(key: &Key, plaintext: &Sequence) -> Result<Sequence> {
    key.encipher(plaintext)
}

pub fn invert(key: &Key) -> Key {
    key.invert()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::{builtin_alphabet, make_alphabet, melody_alphabet};
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn abc() -> Arc<Alphabet> {
        make_alphabet(&["a", "b", "c"], "abc").unwrap()
    }

    #[test]
    fn identity_and_swap() {
        let a = make_alphabet(&["a", "b"], "ab").unwrap();
        let x = Sequence::parse(Arc::clone(&a), "a a b").unwrap();
        let id = Key::identity(Arc::clone(&a), Arc::clone(&a)).unwrap();
        assert_eq!(id.encipher(&x).unwrap(), x);
        let swap = Key::new(Arc::clone(&a), Arc::clone(&a), vec![1, 0]).unwrap();
        assert_eq!(swap.encipher(&x).unwrap().render(), "b b a");
    }

    #[test]
    fn inverse_of_cycle() {
        let a = abc();
        let k = Key::new(Arc::clone(&a), Arc::clone(&a), vec![1, 2, 0]).unwrap();
        assert_eq!(k.invert().mapping(), &[2, 0, 1]);
        assert_eq!(k.invert().invert(), k);
        let id = Key::identity(Arc::clone(&a), Arc::clone(&a)).unwrap();
        assert_eq!(id.invert(), id);
    }

    #[test]
    fn rejects_invalid_keys() {
        let a = abc();
        assert!(Key::new(Arc::clone(&a), Arc::clone(&a), vec![0, 0, 1]).is_err());
        assert!(Key::new(Arc::clone(&a), Arc::clone(&a), vec![0, 1]).is_err());
        assert!(Key::new(Arc::clone(&a), Arc::clone(&a), vec![0, 1, 3]).is_err());
        let b = make_alphabet(&["x", "y"], "xy").unwrap();
        assert!(Key::identity(Arc::clone(&a), b).is_err());
        let k = random_key(&a, 1);
        let wrong = make_alphabet(&["a", "b", "c"], "other").unwrap();
        assert!(k.encipher(&Sequence::parse(wrong, "a b").unwrap()).is_err());
    }

    #[test]
    fn random_keys_are_deterministic_bijections() {
        let a = melody_alphabet();
        assert_eq!(random_key(&a, 42), random_key(&a, 42));
        assert_ne!(random_key(&a, 42), random_key(&a, 43));
        let mut m = random_key(&a, 9).mapping().to_vec();
        m.sort_unstable();
        assert_eq!(m, (0..24).collect::<Vec<_>>());
    }

    #[test]
    fn random_keys_are_uniform_over_permutations() {
        let a = abc();
        let mut freq: HashMap<Vec<usize>, usize> = HashMap::new();
        let draws = 10_000;
        for seed in 0..draws {
            *freq.entry(random_key(&a, seed).mapping().to_vec()).or_default() += 1;
        }
        assert_eq!(freq.len(), 6);
        let expected = draws as f64 / 6.0;
        let mut chi2 = 0.0;
        for &n in freq.values() {
            let p = n as f64 / draws as f64;
            assert!((p - 1.0 / 6.0).abs() < 0.02, "{p}");
            chi2 += (n as f64 - expected).powi(2) / expected;
        }
        // 5 degrees of freedom, p = 0.001 critical value.
        assert!(chi2 < 20.52, "chi2 {chi2}");
    }

    #[test]
    fn text_round_trip() {
        let plain = melody_alphabet();
        let cipher = builtin_alphabet("dorabella").unwrap();
        let k = Key::random(plain, cipher, 3).unwrap();
        let text = k.to_text();
        assert!(text.starts_with("key melody dorabella\n"));
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(Key::from_text(&text, builtin_alphabet).unwrap(), k);
        assert!(Key::from_text("key melody nowhere\n", builtin_alphabet).is_err());
    }

    #[test]
    fn composition() {
        let a = abc();
        let (k1, k2) = (random_key(&a, 1), random_key(&a, 2));
        let x = Sequence::parse(Arc::clone(&a), "a b c c b a a").unwrap();
        let twice = k2.encipher(&k1.encipher(&x).unwrap()).unwrap();
        assert_eq!(k1.then(&k2).unwrap().encipher(&x).unwrap(), twice);
    }

    proptest! {
        #[test]
        fn round_trip_and_length(seed in any::<u64>(), tokens in proptest::collection::vec(0usize..24, 0..200)) {
            let a = melody_alphabet();
            let cipher = builtin_alphabet("dorabella").unwrap();
            let k = Key::random(Arc::clone(&a), cipher, seed).unwrap();
            let x = Sequence::new(a, tokens).unwrap();
            let y = k.encipher(&x).unwrap();
            prop_assert_eq!(y.len(), x.len());
            prop_assert_eq!(k.invert().encipher(&y).unwrap(), x.clone());
            prop_assert_eq!(k.decipher(&y).unwrap(), x);
        }
    }
}
