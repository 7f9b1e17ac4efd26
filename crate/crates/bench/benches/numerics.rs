use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use iadof_bench::channel_for;
use iadof_core::algebra::{jacobian, numeric_rank, random_instance};
use iadof_core::benchmark::{wmmse_maximize, WmmseOptions};
use iadof_core::{min_leakage, RankTolerance, SolveOptions, SystemConfig};

fn jacobian_rank(c: &mut Criterion) {
    let cfg = SystemConfig::symmetric(4, 4, 4, 2).unwrap();
    let (rs, rv) = random_instance(&cfg, 1).unwrap();
    c.bench_function("jacobian/K4_M4_d2", |b| {
        b.iter(|| jacobian(black_box(&rs), &rv).unwrap())
    });
    let jac = jacobian(&rs, &rv).unwrap();
    c.bench_function("numeric_rank/K4_M4_d2", |b| {
        b.iter(|| numeric_rank(black_box(&jac), RankTolerance::default()))
    });
}

fn leakage_solver(c: &mut Criterion) {
    let cfg = SystemConfig::symmetric(3, 2, 2, 1).unwrap();
    let ch = channel_for(&cfg, 2);
    let opts = SolveOptions::default();
    c.bench_function("min_leakage/K3_M2_d1", |b| {
        b.iter(|| min_leakage(black_box(&ch), &cfg, &opts).unwrap())
    });
}

fn wmmse(c: &mut Criterion) {
    let cfg = SystemConfig::symmetric(3, 3, 3, 1).unwrap();
    let ch = channel_for(&cfg, 3);
    let opts = WmmseOptions {
        max_iters: 200,
        ..WmmseOptions::default()
    };
    c.bench_function("wmmse/K3_M3_200iters_30dB", |b| {
        b.iter(|| wmmse_maximize(black_box(&ch), 1e3, &opts).unwrap())
    });
}

criterion_group!(benches, jacobian_rank, leakage_solver, wmmse);
criterion_main!(benches);
