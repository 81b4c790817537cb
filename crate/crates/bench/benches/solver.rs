// SPDX-License-Identifier: Apache-2.0

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use dorabella_core::solver::solve;
use dorabella_core::symbols::{cipher_alphabet, melody_alphabet};
use dorabella_core::synthetic::TrigramChain;
use dorabella_core::{Key, NgramModel, SolverConfig};

fn setup() -> (TrigramChain, NgramModel) {
    let alphabet = melody_alphabet();
    let chain = TrigramChain::with_entropy(Arc::clone(&alphabet), 2.5, 1.0, 1).unwrap();
    let model = NgramModel::train(&chain.corpus(200, 400, 2), &alphabet).unwrap();
    (chain, model)
}

fn bench_model(c: &mut Criterion) {
    let (chain, model) = setup();
    let corpus = chain.corpus(200, 400, 2);
    let alphabet = Arc::clone(model.alphabet());
    c.bench_function("train 80k tokens", |b| {
        b.iter(|| NgramModel::train(black_box(&corpus), &alphabet).unwrap())
    });
    c.bench_function("log-prob table V=24", |b| {
        b.iter(|| black_box(&model).log_prob_table())
    });
}

fn bench_solve(c: &mut Criterion) {
    let (chain, model) = setup();
    let cipher = cipher_alphabet(24).unwrap();
    let key = Key::random(Arc::clone(model.alphabet()), cipher, 3).unwrap();
    let ct = key.encipher(&chain.generate(87, 4)).unwrap();
    let mut group = c.benchmark_group("solve 87 tokens");
    group.sample_size(10);
    for restarts in [1usize, 90] {
        let config = SolverConfig {
            restarts,
            ..SolverConfig::new(5)
        };
        group.bench_function(format!("{restarts} restarts"), |b| {
            b.iter(|| solve(black_box(&ct), &model, &config).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_model, bench_solve);
criterion_main!(benches);
