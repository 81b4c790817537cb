// SPDX-License-Identifier: Apache-2.0

//! Synthetic trigram sources with a chosen conditional entropy.
//!
//! Every context `(u, v)` (start symbols included) gets the same rank
//! profile `p_i ∝ exp(-β i)` assigned to symbols in a context-specific
//! order, so the entropy rate of the chain is exactly the profile's entropy
//! whatever the orders are. Orders are a shared base order perturbed per
//! context: `spread = 0` gives a memoryless source, large `spread` gives
//! independent contexts with near-uniform symbol frequencies.

use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seeded_rng;
use crate::symbols::{Alphabet, Sequence};

fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.log2()).sum::<f64>()
}

fn profile(size: usize, beta: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..size).map(|i| (-beta * i as f64).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// The geometric rank profile over `size` outcomes whose entropy is `bits`.
pub fn rank_profile(size: usize, bits: f64) -> Result<Vec<f64>> {
    let max = (size as f64).log2();
    if size < 2 || !(0.0..=max).contains(&bits) || bits == 0.0 {
        return Err(Error::Config(format!(
            "entropy {bits} bits is outside (0, {max:.4}] for {size} symbols"
        )));
    }
    // Entropy falls monotonically in beta.
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while entropy_bits(&profile(size, hi)) > bits {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if entropy_bits(&profile(size, mid)) > bits {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(profile(size, 0.5 * (lo + hi)))
}

/// A second-order Markov source over an alphabet.
#[derive(Debug, Clone)]
pub struct TrigramChain {
    alphabet: Arc<Alphabet>,
    /// Row `u * (V + 1) + v`; index `V` is the start symbol.
    rows: Vec<Vec<f64>>,
    entropy: f64,
}

impl TrigramChain {
    pub fn with_entropy(alphabet: Arc<Alphabet>, bits: f64, spread: f64, seed: u64) -> Result<TrigramChain> {
        if !(spread >= 0.0 && spread.is_finite()) {
            return Err(Error::Config(format!(
                "spread must be finite and non-negative, got {spread}"
            )));
        }
        let v = alphabet.len();
        let base = rank_profile(v, bits)?;
        let mut rng = seeded_rng(seed);
        let mut base_order: Vec<usize> = (0..v).collect();
        base_order.shuffle(&mut rng);
        let rows = (0..(v + 1) * (v + 1))
            .map(|_| {
                let mut keyed: Vec<(f64, usize)> = base_order
                    .iter()
                    .enumerate()
                    .map(|(rank, &sym)| (rank as f64 + spread * v as f64 * rng.gen::<f64>(), sym))
                    .collect();
                keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut row = vec![0.0; v];
                for (rank, &(_, sym)) in keyed.iter().enumerate() {
                    row[sym] = base[rank];
                }
                row
            })
            .collect();
        Ok(TrigramChain {
            alphabet,
            rows,
            entropy: entropy_bits(&base),
        })
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    /// Conditional entropy in bits per token.
    pub fn entropy_bits(&self) -> f64 {
        self.entropy
    }

    /// `P(w | u v)`, with `None` for the start symbol.
    pub fn prob(&self, context: [Option<usize>; 2], w: usize) -> f64 {
        let v = self.alphabet.len();
        let [a, b] = context.map(|c| c.unwrap_or(v));
        self.rows[a * (v + 1) + b][w]
    }

    pub fn generate(&self, length: usize, seed: u64) -> Sequence {
        let v = self.alphabet.len();
        let dists: Vec<WeightedIndex<f64>> =
            self.rows.iter().map(|r| WeightedIndex::new(r).unwrap()).collect();
        let mut rng = seeded_rng(seed);
        let (mut a, mut b) = (v, v);
        let mut tokens = Vec::with_capacity(length);
        for _ in 0..length {
            let w = dists[a * (v + 1) + b].sample(&mut rng);
            tokens.push(w);
            (a, b) = (b, w);
        }
        Sequence::new(Arc::clone(&self.alphabet), tokens).unwrap()
    }

    /// `count` independent sequences; sequence `i` uses seed `seed + i`.
    pub fn corpus(&self, count: usize, length: usize, seed: u64) -> Vec<Sequence> {
        (0..count)
            .map(|i| self.generate(length, seed.wrapping_add(i as u64)))
            .collect()
    }
}
