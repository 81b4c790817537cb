// SPDX-License-Identifier: Apache-2.0

//! The trained model against a direct, unoptimized evaluation of the
//! interpolated modified Kneser-Ney recursion over plain count lists.

use std::collections::BTreeMap;
use std::sync::Arc;

use dorabella_core::symbols::cipher_alphabet;
use dorabella_core::{seeded_rng, Alphabet, NgramModel, Sequence};
use rand::Rng;

const S: i64 = -1;

struct Oracle {
    v: usize,
    tri: BTreeMap<(i64, i64, i64), u64>,
    bi: BTreeMap<(i64, i64), u64>,
    uni: BTreeMap<i64, u64>,
    d: [[f64; 3]; 3],
}

fn discounts(counts: impl Iterator<Item = u64>) -> [f64; 3] {
    let mut n = [0.0f64; 5];
    for c in counts {
        if (1..=4).contains(&c) {
            n[c as usize] += 1.0;
        }
    }
    if n[1] == 0.0 || n[2] == 0.0 || n[3] == 0.0 {
        return [0.5; 3];
    }
    let y = n[1] / (n[1] + 2.0 * n[2]);
    let d: [f64; 3] = std::array::from_fn(|i| {
        let k = (i + 1) as f64;
        k - (k + 1.0) * y * n[i + 2] / n[i + 1]
    });
    if (0..3).all(|i| d[i] >= 0.0 && d[i] < (i + 1) as f64) {
        d
    } else {
        [0.5; 3]
    }
}

impl Oracle {
    fn new(v: usize, sequences: &[Vec<usize>]) -> Oracle {
        let mut tri = BTreeMap::new();
        for s in sequences {
            let padded: Vec<i64> = [S, S].into_iter().chain(s.iter().map(|&x| x as i64)).collect();
            for w in padded.windows(3) {
                *tri.entry((w[0], w[1], w[2])).or_insert(0) += 1;
            }
        }
        let mut bi = BTreeMap::new();
        for (&(_, a, b), &c) in &tri {
            *bi.entry((a, b)).or_insert(0) += if a == S { c } else { 1 };
        }
        let mut uni = BTreeMap::new();
        for &(_, b) in bi.keys() {
            *uni.entry(b).or_insert(0) += 1;
        }
        let d = [
            discounts(uni.values().copied()),
            discounts(bi.values().copied()),
            discounts(tri.values().copied()),
        ];
        Oracle { v, tri, bi, uni, d }
    }

    /// One interpolation step given the counts of every continuation of a context.
    fn level(counts: &[(i64, u64)], w: i64, d: &[f64; 3], lower: f64) -> Option<f64> {
        let total: u64 = counts.iter().map(|&(_, c)| c).sum();
        if total == 0 {
            return None;
        }
        let disc = |c: u64| match c {
            0 => 0.0,
            1 => d[0],
            2 => d[1],
            _ => d[2],
        };
        let mass: f64 = counts.iter().map(|&(_, c)| disc(c)).sum();
        let c = counts.iter().find(|&&(x, _)| x == w).map_or(0, |&(_, c)| c);
        Some(((c as f64 - disc(c)) + mass * lower) / total as f64)
    }

    fn prob(&self, u: i64, v: i64, w: i64) -> f64 {
        let uni: Vec<(i64, u64)> = self.uni.iter().map(|(&k, &c)| (k, c)).collect();
        let p1 = Oracle::level(&uni, w, &self.d[0], 1.0 / self.v as f64).unwrap_or(1.0 / self.v as f64);
        let bi: Vec<(i64, u64)> = self
            .bi
            .iter()
            .filter(|(k, _)| k.0 == v)
            .map(|(k, &c)| (k.1, c))
            .collect();
        let p2 = Oracle::level(&bi, w, &self.d[1], p1).unwrap_or(p1);
        let tri: Vec<(i64, u64)> = self
            .tri
            .iter()
            .filter(|(k, _)| k.0 == u && k.1 == v)
            .map(|(k, &c)| (k.2, c))
            .collect();
        Oracle::level(&tri, w, &self.d[2], p2).unwrap_or(p2)
    }
}

fn random_corpus(v: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = seeded_rng(seed);
    // Skewed symbol choice so counts-of-counts are varied.
    (0..rng.gen_range(3..12))
        .map(|_| {
            (0..rng.gen_range(1..60))
                .map(|_| {
                    let r: f64 = rng.gen();
                    ((r * r) * v as f64) as usize
                })
                .collect()
        })
        .collect()
}

fn to_sequences(alphabet: &Arc<Alphabet>, raw: &[Vec<usize>]) -> Vec<Sequence> {
    raw.iter()
        .map(|t| Sequence::new(Arc::clone(alphabet), t.clone()).unwrap())
        .collect()
}

#[test]
fn model_matches_direct_recursion() {
    for seed in 0..40 {
        let v = 2 + (seed as usize % 6);
        let alphabet = cipher_alphabet(v).unwrap();
        let raw = random_corpus(v, seed);
        if raw.iter().map(Vec::len).sum::<usize>() < 3 {
            continue;
        }
        let model = NgramModel::train(&to_sequences(&alphabet, &raw), &alphabet).unwrap();
        let oracle = Oracle::new(v, &raw);
        for (level, d) in model.discounts().iter().enumerate() {
            assert!(
                (d.d1 - oracle.d[level][0]).abs() < 1e-12,
                "seed {seed} level {level}"
            );
            assert!((d.d2 - oracle.d[level][1]).abs() < 1e-12);
            assert!((d.d3plus - oracle.d[level][2]).abs() < 1e-12);
        }
        let start = model.start_index();
        let ix = |x: usize| if x == start { S } else { x as i64 };
        for u in 0..=v {
            for b in 0..=v {
                for w in 0..v {
                    let got = model.prob_raw(u, b, w);
                    let want = oracle.prob(ix(u), ix(b), w as i64);
                    assert!(
                        (got - want).abs() <= 1e-12 * want.max(1e-300),
                        "seed {seed}: P({w}|{u},{b}) = {got}, oracle {want}"
                    );
                }
            }
        }
    }
}

#[test]
fn hand_computed_two_symbol_case() {
    let alphabet = cipher_alphabet(2).unwrap();
    let seq = Sequence::new(Arc::clone(&alphabet), vec![0, 1]).unwrap();
    let err = NgramModel::train(std::slice::from_ref(&seq), &alphabet).unwrap_err();
    assert!(err.to_string().contains("at least 3"));
    // Two copies of `a b`: trigrams (S,S,a) and (S,a,b) twice each; bigram
    // (S,a) raw 2, (a,b) continuation 1; unigram continuations 1 and 1.
    // No level has n3 > 0, so every discount is 0.5.
    //   P1(a) = (0.5 + 2*0.5*0.5)/2 = 0.5
    //   P2(a|S) = (2 - 0.5 + 0.5*0.5)/2 = 0.875
    //   P3(a|S,S) = (2 - 0.5 + 0.5*0.875)/2 = 0.96875
    //   P3(b|S,S) = 0.5*P2(b|S)/2, P2(b|S) = 0.5*0.5/2 = 0.125, so 0.03125
    let model = NgramModel::train(&[seq.clone(), seq], &alphabet).unwrap();
    assert!((model.prob([None, None], 0) - 0.96875).abs() < 1e-15);
    assert!((model.prob([None, None], 1) - 0.03125).abs() < 1e-15);
}
