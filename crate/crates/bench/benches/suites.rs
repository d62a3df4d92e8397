//! Criterion benchmarks for the numerical hot paths: the Cesàro averaging
//! recursion, Hermitian eigendecomposition, Følner set enumeration, and the
//! full representation-unitarization pipeline on a small input.

use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use isometrize_core::folner::{FolnerFamily, GroupDescriptor};
use isometrize_core::reps::{RepOpts, Representation};
use isometrize_core::{cesaro, folner, linalg, reps, synth};

/// Averaging horizon for the Cesàro benchmarks, long enough that the
/// per-step Gram recursion dominates setup cost.
const CESARO_HORIZON: u64 = 256;

fn bench_cesaro_average(c: &mut Criterion) {
    let mut group = c.benchmark_group("cesaro_average_n256");
    for dim in [2usize, 4, 8] {
        let (t, _, _) = synth::conjugated_unitary(dim, 4.0, &mut synth::rng(dim as u64));
        group.bench_with_input(BenchmarkId::from_parameter(dim), &t, |b, t| {
            b.iter(|| cesaro::cesaro_average(black_box(t), CESARO_HORIZON).unwrap());
        });
    }
    group.finish();
}

fn bench_herm_eigen(c: &mut Criterion) {
    let mut group = c.benchmark_group("herm_eigen");
    for dim in [4usize, 16, 64] {
        let h = synth::random_psd(dim, &mut synth::rng(dim as u64));
        group.bench_with_input(BenchmarkId::from_parameter(dim), &h, |b, h| {
            b.iter(|| linalg::herm_eigen(black_box(h)).unwrap());
        });
    }
    group.finish();
}

fn bench_folner_sets(c: &mut Criterion) {
    let mut group = c.benchmark_group("folner_set");
    let z2 = FolnerFamily::new(GroupDescriptor::int_lattice(2).unwrap());
    group.bench_function("z2_n64", |b| {
        b.iter(|| folner::folner_set(&z2, black_box(64)).unwrap());
    });
    let heis = FolnerFamily::new(GroupDescriptor::Heisenberg3);
    group.bench_function("heisenberg3_n8", |b| {
        b.iter(|| folner::folner_set(&heis, black_box(8)).unwrap());
    });
    group.finish();
}

fn bench_unitarize_rep(c: &mut Criterion) {
    let descriptor = GroupDescriptor::int_lattice(1).unwrap();
    let (t, _, _) = synth::conjugated_unitary(2, 4.0, &mut synth::rng(9));
    let mut images = BTreeMap::new();
    images.insert("e1".to_string(), t);
    let rep = Representation::new(descriptor.clone(), images).expect("valid one-generator rep");
    let family = FolnerFamily::new(descriptor);
    let opts = RepOpts {
        n_max: Some(64),
        decay_tol: Some(5.0),
        ..RepOpts::default()
    };
    c.bench_function("unitarize_rep_z1_dim2_n64", |b| {
        b.iter(|| reps::unitarize_rep(black_box(&rep), &family, &opts).unwrap());
    });
}

criterion_group!(
    suites,
    bench_cesaro_average,
    bench_herm_eigen,
    bench_folner_sets,
    bench_unitarize_rep
);
criterion_main!(suites);
