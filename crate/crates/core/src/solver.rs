// SPDX-License-Identifier: Apache-2.0

//! Steepest-ascent hill climbing over substitution keys with random
//! restarts, plus the accuracy metrics and the synthetic experiment harness.
//!
//! The neighbourhood of a key is every transposition of two entries of its
//! mapping: swapping the cipher images of plaintext symbols `i` and `j`
//! exchanges `i` and `j` everywhere in the candidate decipherment. Each
//! iteration scores all `V(V-1)/2` neighbours and moves to the one with the
//! largest log-probability gain, lowest `(i, j)` first on ties. A restart
//! ends at a strict local optimum or after `iterations` moves.
//!
//! Neighbours are ranked by incremental deltas over the trigram terms a
//! swap touches; an accepted move is rescored in full, in the same
//! accumulation order as [`NgramModel::log_prob`], so reported scores are
//! exactly the model's.

use std::sync::Arc;

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::cipher::Key;
use crate::corpus::{sample_excerpts, CorpusSplit};
use crate::error::{Error, Result};
use crate::lm::{LogProbTable, NgramModel, ORDER};
use crate::seeded_rng;
use crate::symbols::{cipher_alphabet, Sequence};

/// Largest alphabet the dense scoring table is built for.
pub const MAX_SOLVER_ALPHABET: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SolverConfig {
    pub iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Run restarts (and experiment ciphers) on the rayon pool. Results do
    /// not depend on this flag.
    pub parallel: bool,
}

impl SolverConfig {
    pub const DEFAULT_ITERATIONS: usize = 4000;
    pub const DEFAULT_RESTARTS: usize = 90;

    pub fn new(seed: u64) -> SolverConfig {
        SolverConfig {
            iterations: Self::DEFAULT_ITERATIONS,
            restarts: Self::DEFAULT_RESTARTS,
            seed,
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.restarts == 0 {
            return Err(Error::Config("iterations and restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// What happened during one restart.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartTrace {
    pub restart: usize,
    pub seed: u64,
    pub initial_log_prob: f64,
    /// Score after each accepted move, in order.
    pub accepted: Vec<f64>,
    /// Neighbourhood evaluations performed.
    pub iterations: usize,
    pub final_log_prob: f64,
    /// False when the iteration cap was hit first.
    pub local_optimum: bool,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub best_plaintext: Sequence,
    pub best_key: Key,
    pub best_log_prob: f64,
    pub best_restart: usize,
    pub restart_traces: Vec<RestartTrace>,
}

/// Per-symbol occurrence lists of a ciphertext plus the scoring table.
struct Climber<'a> {
    table: &'a LogProbTable,
    cipher: &'a [usize],
    positions: Vec<Vec<usize>>,
}

impl Climber<'_> {
    fn term(&self, plain: &[usize], t: usize) -> f64 {
        let s = self.table.start();
        let u = if t >= 2 { plain[t - 2] } else { s };
        let v = if t >= 1 { plain[t - 1] } else { s };
        self.table.get(u, v, plain[t])
    }

    fn swapped_term(&self, plain: &[usize], t: usize, i: usize, j: usize) -> f64 {
        let sw = |x: usize| {
            if x == i {
                j
            } else if x == j {
                i
            } else {
                x
            }
        };
        let s = self.table.start();
        let u = if t >= 2 { sw(plain[t - 2]) } else { s };
        let v = if t >= 1 { sw(plain[t - 1]) } else { s };
        self.table.get(u, v, sw(plain[t]))
    }

    /// Trigram end positions whose term depends on a position in `pos`.
    fn affected(&self, pos: &[usize], out: &mut Vec<usize>, mark: &mut [u32], stamp: u32) {
        let n = self.cipher.len();
        for &p in pos {
            let end = (p + ORDER).min(n);
            for (t, m) in (p..end).zip(&mut mark[p..end]) {
                if *m != stamp {
                    *m = stamp;
                    out.push(t);
                }
            }
        }
    }

    fn climb(&self, mut key: Key, restart: usize, seed: u64, iterations: usize) -> (Key, RestartTrace) {
        let n = self.cipher.len();
        let size = key.len();
        let decipher = |key: &Key| {
            let inv = key.invert();
            self.cipher.iter().map(|&c| inv.mapping()[c]).collect::<Vec<_>>()
        };
        let mut plain = decipher(&key);
        let mut terms: Vec<f64> = (0..n).map(|t| self.term(&plain, t)).collect();
        let mut score: f64 = terms.iter().sum();
        let initial = score;

        let mut accepted = Vec::new();
        let mut mark = vec![0u32; n];
        let mut stamp = 0u32;
        let mut touched = Vec::with_capacity(n);
        let mut iters = 0;
        let mut local_optimum = false;

        while iters < iterations {
            iters += 1;
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..size {
                let pi = &self.positions[key.mapping()[i]];
                for j in (i + 1)..size {
                    let pj = &self.positions[key.mapping()[j]];
                    if pi.is_empty() && pj.is_empty() {
                        continue;
                    }
                    stamp = stamp.wrapping_add(1);
                    if stamp == 0 {
                        mark.fill(0);
                        stamp = 1;
                    }
                    touched.clear();
                    self.affected(pi, &mut touched, &mut mark, stamp);
                    self.affected(pj, &mut touched, &mut mark, stamp);
                    let delta: f64 = touched
                        .iter()
                        .map(|&t| self.swapped_term(&plain, t, i, j) - terms[t])
                        .sum();
                    if best.is_none_or(|(d, _, _)| delta > d) {
                        best = Some((delta, i, j));
                    }
                }
            }
            let Some((delta, i, j)) = best.filter(|&(d, _, _)| d > 0.0) else {
                local_optimum = true;
                break;
            };
            let mut next = key.clone();
            next.swap(i, j);
            let next_plain = decipher(&next);
            let next_terms: Vec<f64> = (0..n).map(|t| self.term(&next_plain, t)).collect();
            let next_score: f64 = next_terms.iter().sum();
            debug_assert!((next_score - (score + delta)).abs() < 1e-9);
            if next_score <= score {
                // The delta was rounding noise; nothing strictly better exists.
                local_optimum = true;
                break;
            }
            key = next;
            plain = next_plain;
            terms = next_terms;
            score = next_score;
            accepted.push(score);
        }

        let trace = RestartTrace {
            restart,
            seed,
            initial_log_prob: initial,
            accepted,
            iterations: iters,
            final_log_prob: score,
            local_optimum,
        };
        (key, trace)
    }
}

/// Seed of restart `r`: `seed + r`, so restarts are independent of scheduling.
pub fn restart_seed(seed: u64, restart: usize) -> u64 {
    seed.wrapping_add(restart as u64)
}

/// Searches for the key maximizing the model's log-probability of the
/// decipherment.
pub fn solve(ciphertext: &Sequence, model: &NgramModel, config: &SolverConfig) -> Result<SolveResult> {
    config.validate()?;
    let plain_alphabet = model.alphabet();
    let cipher_alphabet = ciphertext.alphabet();
    if plain_alphabet.len() != cipher_alphabet.len() {
        return Err(Error::Config(format!(
            "ciphertext alphabet `{}` has {} symbols, model alphabet `{}` has {}",
            cipher_alphabet.name(),
            cipher_alphabet.len(),
            plain_alphabet.name(),
            plain_alphabet.len()
        )));
    }
    if plain_alphabet.len() > MAX_SOLVER_ALPHABET {
        return Err(Error::Config(format!(
            "alphabet of {} symbols exceeds the solver limit of {MAX_SOLVER_ALPHABET}",
            plain_alphabet.len()
        )));
    }
    if ciphertext.len() < ORDER {
        return Err(Error::Config(format!(
            "ciphertext has {} tokens; at least {ORDER} required",
            ciphertext.len()
        )));
    }

    let table = model.log_prob_table();
    let mut positions = vec![Vec::new(); cipher_alphabet.len()];
    for (p, &c) in ciphertext.tokens().iter().enumerate() {
        positions[c].push(p);
    }
    let climber = Climber {
        table: &table,
        cipher: ciphertext.tokens(),
        positions,
    };

    let run = |r: usize| -> Result<(Key, RestartTrace)> {
        let seed = restart_seed(config.seed, r);
        let start = Key::random(Arc::clone(plain_alphabet), Arc::clone(cipher_alphabet), seed)?;
        Ok(climber.climb(start, r, seed, config.iterations))
    };
    let runs: Vec<(Key, RestartTrace)> = if config.parallel {
        (0..config.restarts)
            .into_par_iter()
            .map(run)
            .collect::<Result<_>>()?
    } else {
        (0..config.restarts).map(run).collect::<Result<_>>()?
    };

    let mut best = 0;
    for (r, (_, trace)) in runs.iter().enumerate() {
        if trace.final_log_prob > runs[best].1.final_log_prob {
            best = r;
        }
    }
    let best_key = runs[best].0.clone();
    let best_log_prob = runs[best].1.final_log_prob;
    let best_plaintext = best_key.decipher(ciphertext)?;
    Ok(SolveResult {
        best_plaintext,
        best_key,
        best_log_prob,
        best_restart: best,
        restart_traces: runs.into_iter().map(|(_, t)| t).collect(),
    })
}

/// Fraction of alphabet entries on which two keys agree, over the whole
/// alphabet including symbols absent from any ciphertext.
pub fn key_accuracy(found: &Key, truth: &Key) -> Result<f64> {
    found.plain_alphabet().ensure_same(truth.plain_alphabet())?;
    found.cipher_alphabet().ensure_same(truth.cipher_alphabet())?;
    let agree = found
        .mapping()
        .iter()
        .zip(truth.mapping())
        .filter(|(a, b)| a == b)
        .count();
    Ok(agree as f64 / found.len() as f64)
}

/// Fraction of positions where the recovered symbol matches.
pub fn decipherment_accuracy(found: &Sequence, truth: &Sequence) -> Result<f64> {
    found.alphabet().ensure_same(truth.alphabet())?;
    if found.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: found.len(),
            right: truth.len(),
        });
    }
    if found.is_empty() {
        return Err(Error::Empty("cannot score empty sequences".into()));
    }
    let agree = found
        .tokens()
        .iter()
        .zip(truth.tokens())
        .filter(|(a, b)| a == b)
        .count();
    Ok(agree as f64 / found.len() as f64)
}

/// Where experiment plaintexts are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TestSource {
    #[default]
    Heldout,
    Train,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CipherOutcome {
    pub id: usize,
    pub key_accuracy: f64,
    pub decipherment_accuracy: f64,
    pub solved_exactly: bool,
    pub best_log_prob: f64,
    /// Score of the true plaintext; above `best_log_prob` means a search error.
    pub true_log_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub cipher_length: usize,
    pub outcomes: Vec<CipherOutcome>,
    pub mean_key_accuracy: f64,
    pub mean_decipherment_accuracy: f64,
    pub fraction_solved: f64,
}

impl ExperimentReport {
    /// One line per cipher, then a summary footer.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# id key_acc dec_acc solved_exactly best_log_prob\n");
        for o in &self.outcomes {
            out.push_str(&format!(
                "{} {:.6} {:.6} {} {:.9}\n",
                o.id, o.key_accuracy, o.decipherment_accuracy, o.solved_exactly, o.best_log_prob
            ));
        }
        out.push_str(&format!(
            "# summary ciphers={} length={} key_acc={:.1}% dec_acc={:.1}% solved={:.1}%\n",
            self.outcomes.len(),
            self.cipher_length,
            100.0 * self.mean_key_accuracy,
            100.0 * self.mean_decipherment_accuracy,
            100.0 * self.fraction_solved
        ));
        out
    }
}

/// Samples `cipher_count` plaintexts of `cipher_length` tokens from the
/// split, enciphers each under an independent random key, solves it and
/// scores the result. All randomness derives from `config.seed`.
pub fn run_experiment(
    split: &CorpusSplit,
    model: &NgramModel,
    cipher_count: usize,
    cipher_length: usize,
    config: &SolverConfig,
    source: TestSource,
) -> Result<ExperimentReport> {
    config.validate()?;
    let pool = match source {
        TestSource::Heldout => &split.test,
        TestSource::Train => &split.train,
    };
    let mut rng = seeded_rng(config.seed);
    let excerpt_seed = rng.next_u64();
    let plaintexts = sample_excerpts(pool, cipher_count, cipher_length, excerpt_seed)?;
    let seeds: Vec<(u64, u64)> = (0..cipher_count)
        .map(|_| (rng.next_u64(), rng.next_u64()))
        .collect();
    let cipher_alphabet = cipher_alphabet(model.alphabet().len())?;

    let one = |id: usize| -> Result<CipherOutcome> {
        let (key_seed, solve_seed) = seeds[id];
        let plaintext = &plaintexts[id];
        let truth = Key::random(
            Arc::clone(model.alphabet()),
            Arc::clone(&cipher_alphabet),
            key_seed,
        )?;
        let ciphertext = truth.encipher(plaintext)?;
        let cfg = SolverConfig {
            seed: solve_seed,
            ..*config
        };
        let result = solve(&ciphertext, model, &cfg)?;
        let dec = decipherment_accuracy(&result.best_plaintext, plaintext)?;
        Ok(CipherOutcome {
            id,
            key_accuracy: key_accuracy(&result.best_key, &truth)?,
            decipherment_accuracy: dec,
            solved_exactly: result.best_plaintext == *plaintext,
            best_log_prob: result.best_log_prob,
            true_log_prob: model.log_prob(plaintext)?,
        })
    };
    let outcomes: Vec<CipherOutcome> = if config.parallel {
        (0..cipher_count)
            .into_par_iter()
            .map(one)
            .collect::<Result<_>>()?
    } else {
        (0..cipher_count).map(one).collect::<Result<_>>()?
    };

    let n = outcomes.len() as f64;
    Ok(ExperimentReport {
        cipher_length,
        mean_key_accuracy: outcomes.iter().map(|o| o.key_accuracy).sum::<f64>() / n,
        mean_decipherment_accuracy: outcomes.iter().map(|o| o.decipherment_accuracy).sum::<f64>() / n,
        fraction_solved: outcomes.iter().filter(|o| o.solved_exactly).count() as f64 / n,
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cipher::random_key;
    use crate::symbols::{make_alphabet, Alphabet};

    fn alphabet(n: usize) -> Arc<Alphabet> {
        let syms: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
        make_alphabet(&syms, &format!("plain{n}")).unwrap()
    }

    fn seq(a: &Arc<Alphabet>, tokens: Vec<usize>) -> Sequence {
        Sequence::new(Arc::clone(a), tokens).unwrap()
    }

    #[test]
    fn two_symbol_cipher_is_recovered() {
        let a = alphabet(2);
        let text: Vec<usize> = (0..60).map(|i| usize::from(i % 3 == 0)).collect();
        let model = NgramModel::train(&[seq(&a, text.clone())], &a).unwrap();
        let c = cipher_alphabet(2).unwrap();
        let key = Key::new(Arc::clone(&a), Arc::clone(&c), vec![1, 0]).unwrap();
        let plain = seq(&a, text[..30].to_vec());
        let cipher = key.encipher(&plain).unwrap();
        let cfg = SolverConfig {
            iterations: 10,
            restarts: 3,
            seed: 1,
            parallel: false,
        };
        let r = solve(&cipher, &model, &cfg).unwrap();
        assert_eq!(r.best_plaintext, plain);
        assert_eq!(r.best_key, key);
    }

    #[test]
    fn result_score_is_the_model_score() {
        let a = alphabet(5);
        let text: Vec<usize> = (0..400).map(|i| [0, 1, 2, 1, 3, 4, 0, 2][i % 8]).collect();
        let model = NgramModel::train(&[seq(&a, text.clone())], &a).unwrap();
        let cipher = random_key(&a, 4).encipher(&seq(&a, text[..50].to_vec())).unwrap();
        let cfg = SolverConfig {
            iterations: 100,
            restarts: 5,
            seed: 9,
            parallel: false,
        };
        let r = solve(&cipher, &model, &cfg).unwrap();
        assert_eq!(r.best_log_prob, model.log_prob(&r.best_plaintext).unwrap());
        let max = r
            .restart_traces
            .iter()
            .map(|t| t.final_log_prob)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(r.best_log_prob, max);
        for t in &r.restart_traces {
            assert!(t.final_log_prob >= t.initial_log_prob);
            let mut prev = t.initial_log_prob;
            for &s in &t.accepted {
                assert!(s > prev);
                prev = s;
            }
        }
    }

    #[test]
    fn incremental_delta_matches_full_rescoring() {
        let a = alphabet(6);
        let text: Vec<usize> = (0..300).map(|i| (i * i + i / 3) % 6).collect();
        let model = NgramModel::train(&[seq(&a, text.clone())], &a).unwrap();
        let table = model.log_prob_table();
        let cipher = random_key(&a, 2)
            .encipher(&seq(&a, text[7..90].to_vec()))
            .unwrap();
        let mut positions = vec![Vec::new(); 6];
        for (p, &c) in cipher.tokens().iter().enumerate() {
            positions[c].push(p);
        }
        let climber = Climber {
            table: &table,
            cipher: cipher.tokens(),
            positions,
        };
        let key = Key::random(Arc::clone(&a), Arc::clone(cipher.alphabet()), 5).unwrap();
        let plain = key.decipher(&cipher).unwrap();
        let terms: Vec<f64> = (0..plain.len())
            .map(|t| climber.term(plain.tokens(), t))
            .collect();
        let base = model.log_prob(&plain).unwrap();
        let mut mark = vec![0u32; plain.len()];
        for i in 0..6 {
            for j in (i + 1)..6 {
                let mut touched = Vec::new();
                let stamp = (i * 6 + j + 1) as u32;
                climber.affected(
                    &climber.positions[key.mapping()[i]],
                    &mut touched,
                    &mut mark,
                    stamp,
                );
                climber.affected(
                    &climber.positions[key.mapping()[j]],
                    &mut touched,
                    &mut mark,
                    stamp,
                );
                let delta: f64 = touched
                    .iter()
                    .map(|&t| climber.swapped_term(plain.tokens(), t, i, j) - terms[t])
                    .sum();
                let mut k2 = key.clone();
                k2.swap(i, j);
                let full = model.log_prob(&k2.decipher(&cipher).unwrap()).unwrap();
                assert!((base + delta - full).abs() < 1e-9, "swap {i},{j}");
            }
        }
    }

    #[test]
    fn parallel_and_serial_agree() {
        let a = alphabet(8);
        let text: Vec<usize> = (0..800).map(|i| (i * 7 + i / 5) % 8).collect();
        let model = NgramModel::train(&[seq(&a, text.clone())], &a).unwrap();
        let cipher = random_key(&a, 11)
            .encipher(&seq(&a, text[100..187].to_vec()))
            .unwrap();
        let serial = SolverConfig {
            iterations: 200,
            restarts: 12,
            seed: 3,
            parallel: false,
        };
        let parallel = SolverConfig {
            parallel: true,
            ..serial
        };
        let (x, y) = (
            solve(&cipher, &model, &serial).unwrap(),
            solve(&cipher, &model, &parallel).unwrap(),
        );
        assert_eq!(x.restart_traces, y.restart_traces);
        assert_eq!(x.best_key, y.best_key);
    }

    #[test]
    fn iteration_cap_is_respected() {
        let a = alphabet(10);
        let text: Vec<usize> = (0..500).map(|i| (i * 3 + i / 4) % 10).collect();
        let model = NgramModel::train(&[seq(&a, text.clone())], &a).unwrap();
        let cipher = random_key(&a, 1).encipher(&seq(&a, text[..87].to_vec())).unwrap();
        let cfg = SolverConfig {
            iterations: 1,
            restarts: 4,
            seed: 0,
            parallel: false,
        };
        let r = solve(&cipher, &model, &cfg).unwrap();
        assert!(r
            .restart_traces
            .iter()
            .all(|t| t.iterations == 1 && t.accepted.len() <= 1));
    }

    #[test]
    fn solve_rejects_bad_inputs() {
        let a = alphabet(4);
        let model = NgramModel::train(&[seq(&a, vec![0, 1, 2, 3, 0, 1])], &a).unwrap();
        let cfg = SolverConfig {
            iterations: 5,
            restarts: 1,
            seed: 0,
            parallel: false,
        };
        let short = seq(&cipher_alphabet(4).unwrap(), vec![0, 1]);
        assert!(solve(&short, &model, &cfg).is_err());
        let wrong = seq(&cipher_alphabet(5).unwrap(), vec![0, 1, 2, 3]);
        assert!(solve(&wrong, &model, &cfg).is_err());
        let ok = seq(&cipher_alphabet(4).unwrap(), vec![0, 1, 2, 3]);
        assert!(solve(&ok, &model, &SolverConfig { restarts: 0, ..cfg }).is_err());
        assert!(solve(&ok, &model, &SolverConfig { iterations: 0, ..cfg }).is_err());
    }

    #[test]
    fn key_accuracy_examples() {
        let a = alphabet(4);
        let k = random_key(&a, 3);
        assert_eq!(key_accuracy(&k, &k).unwrap(), 1.0);
        let mut swapped = k.clone();
        swapped.swap(0, 2);
        assert_eq!(key_accuracy(&swapped, &k).unwrap(), 0.5);
        let other = random_key(&alphabet(5), 1);
        assert!(key_accuracy(&other, &k).is_err());
    }

    #[test]
    fn key_accuracy_against_inverse_counts_square_fixed_points() {
        let a = alphabet(24);
        for seed in 0..50 {
            let k = random_key(&a, seed);
            let m = k.mapping();
            let fixed = (0..24).filter(|&i| m[m[i]] == i).count();
            assert_eq!(key_accuracy(&k, &k.invert()).unwrap(), fixed as f64 / 24.0);
        }
    }

    #[test]
    fn decipherment_accuracy_examples() {
        let a = alphabet(3);
        let x = seq(&a, vec![0, 1, 2, 0]);
        assert_eq!(decipherment_accuracy(&x, &x).unwrap(), 1.0);
        assert_eq!(
            decipherment_accuracy(&seq(&a, vec![1, 2, 0, 1]), &x).unwrap(),
            0.0
        );
        assert_eq!(
            decipherment_accuracy(&seq(&a, vec![0, 2, 2, 1]), &x).unwrap(),
            0.5
        );
        assert!(matches!(
            decipherment_accuracy(&seq(&a, vec![0]), &x),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn degenerate_experiment_is_solved() {
        let a = alphabet(3);
        let periodic: Vec<usize> = (0..300).map(|i| [0, 0, 1, 0, 2, 2, 2, 1][i % 8]).collect();
        let sources: Vec<Sequence> = (0..4).map(|_| seq(&a, periodic.clone())).collect();
        let split = crate::corpus::split_corpus(&sources, 2, 0).unwrap();
        let model = NgramModel::train(&split.train, &a).unwrap();
        let cfg = SolverConfig {
            iterations: 50,
            restarts: 5,
            seed: 1,
            parallel: false,
        };
        let report = run_experiment(&split, &model, 1, 87, &cfg, TestSource::Heldout).unwrap();
        assert_eq!(report.outcomes[0].decipherment_accuracy, 1.0);
        assert!(report.outcomes[0].solved_exactly);
        assert_eq!(report.fraction_solved, 1.0);
        assert!(report.to_text().contains("# summary ciphers=1 length=87"));
    }
}
