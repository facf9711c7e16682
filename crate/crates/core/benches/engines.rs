//! Sequential against rayon-parallel execution for the data-parallel engines.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fivebrane::char_calc::{ch_from_chern, splitting_oracle};
use fivebrane::cs_forms::{curvature, verify_transgression};
use fivebrane::obstruction::{structure_ladder, LadderMode, LadderOptions};
use fivebrane::par::{self, Execution};
use fivebrane::sample::{
    formal_root_ring, random_connection, random_ladder_input, random_roots, ConnectionSpec,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const STRATEGIES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn transgression(c: &mut Criterion) {
    let mut rng = StdRng::seed_from_u64(1);
    let a = random_connection(&mut rng, ConnectionSpec::new(6, 2));
    let mut group = c.benchmark_group("transgression_j3");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| verify_transgression(black_box(&a), 3, exec).unwrap())
        });
    }
    group.finish();
}

fn wedge(c: &mut Criterion) {
    let mut rng = StdRng::seed_from_u64(2);
    let a = random_connection(&mut rng, ConnectionSpec::new(8, 3));
    let f = curvature(&a).unwrap();
    let mut group = c.benchmark_group("wedge_f_f");
    for (name, exec) in STRATEGIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(&f).wedge_with(&f, exec).unwrap())
        });
    }
    group.finish();
}

fn ladder_batch(c: &mut Criterion) {
    let mut rng = StdRng::seed_from_u64(3);
    let inputs: Vec<_> = (0..500).map(|_| random_ladder_input(&mut rng)).collect();
    let mut group = c.benchmark_group("ladder_batch_500");
    for (name, exec) in STRATEGIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                par::map(exec, &inputs, |(_, tx, e)| {
                    structure_ladder(tx, e.as_ref(), LadderOptions::new(LadderMode::Manifold))
                        .is_ok()
                })
            })
        });
    }
    group.finish();
}

fn oracle_sweep(c: &mut Criterion) {
    let mut rng = StdRng::seed_from_u64(4);
    let ring = formal_root_ring(4, 8);
    let lists: Vec<_> = (0..100)
        .map(|_| {
            let len = rng.random_range(1..=6);
            random_roots(&mut rng, &ring, len)
        })
        .collect();
    let mut group = c.benchmark_group("oracle_sweep_100");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                par::map(exec, &lists, |roots| {
                    (1..=8).all(|k| {
                        let (chern, ch) = splitting_oracle(roots, k).unwrap();
                        ch_from_chern(&chern, k).unwrap() == ch
                    })
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, transgression, wedge, ladder_batch, oracle_sweep);
criterion_main!(benches);
