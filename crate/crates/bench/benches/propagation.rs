use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use adiascope::{
    decompose, delta_u_err, DecompositionSettings, DriveKind, IntegratorSettings, QuadratureSpec, DEFAULT_SEED,
};
use adiascope_bench::{cp, drive};

fn propagation(c: &mut Criterion) {
    let mut group = c.benchmark_group("propagate");
    let settings = IntegratorSettings::default();
    for n in [4, 64] {
        let s = cp(n).unwrap();
        group.bench_with_input(BenchmarkId::new("cp", n), &s, |b, s| b.iter(|| s.propagate(&settings).unwrap()));
    }
    for nprime in [1.0, 10.0] {
        let s = drive(DriveKind::BPi, nprime).unwrap();
        group.bench_with_input(BenchmarkId::new("b_pi", nprime), &s, |b, s| {
            b.iter(|| s.propagate(&settings).unwrap())
        });
    }
    group.finish();
}

fn decomposition(c: &mut Criterion) {
    let mut group = c.benchmark_group("decompose");
    group.sample_size(20);
    let settings = DecompositionSettings::default();
    for (name, s) in [("cp_16", cp(16).unwrap()), ("b_const_4", drive(DriveKind::BConst, 4.0).unwrap())] {
        let evolution = s.propagate(&IntegratorSettings::default()).unwrap();
        group.bench_function(name, |b| b.iter(|| decompose(&s, &evolution, &settings).unwrap()));
    }
    group.finish();
}

fn averaging(c: &mut Criterion) {
    let s = cp(8).unwrap();
    let evolution = s.propagate(&IntegratorSettings::default()).unwrap();
    let u = decompose(&s, &evolution, &DecompositionSettings::default()).unwrap().u_err;
    let mut group = c.benchmark_group("delta_u_err");
    group.bench_function("sphere_grid", |b| {
        b.iter(|| delta_u_err(black_box(&u), &QuadratureSpec::default()).unwrap())
    });
    let mc = QuadratureSpec::HaarMc {
        samples: 100_000,
        seed: DEFAULT_SEED,
    };
    group.bench_function("haar_mc_1e5", |b| b.iter(|| delta_u_err(black_box(&u), &mc).unwrap()));
    group.finish();
}

criterion_group!(benches, propagation, decomposition, averaging);
criterion_main!(benches);
