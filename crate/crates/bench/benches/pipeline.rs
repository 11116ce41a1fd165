use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use amalgam_bench::{alternating_word, pauli_extension, pauli_maps, tracial_state};
use amalgam_cli::gen::{gen_instance, Profile};
use amalgam_cli::scenario::{run_instance, RunFlags};
use amalgam_core::cpmap::StinespringDilation;
use amalgam_core::extend::boca_extend_canonical;
use amalgam_core::TolerancePolicy;

fn bench_stinespring(c: &mut Criterion) {
    let t = TolerancePolicy::default();
    let mut group = c.benchmark_group("stinespring_gns");
    for n in [2usize, 3, 4] {
        let map = tracial_state(n);
        group.bench_function(format!("tracial_m{n}"), |b| {
            b.iter(|| StinespringDilation::stinespring_gns(black_box(&map), &t).unwrap())
        });
    }
    group.finish();
}

fn bench_tower(c: &mut Criterion) {
    let mut group = c.benchmark_group("boca_extend");
    group.sample_size(20);
    for depth in [2usize, 3, 4] {
        group.bench_function(format!("pauli_depth_{depth}"), |b| {
            b.iter_batched(
                pauli_maps,
                |(maps, embs, t)| boca_extend_canonical(maps, embs, depth, &t).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn bench_evaluate(c: &mut Criterion) {
    let ext = pauli_extension(4);
    let mut group = c.benchmark_group("evaluate_phi");
    for len in [1usize, 2, 4] {
        let x = alternating_word(&ext, len);
        group.bench_function(format!("pauli_word_len_{len}"), |b| {
            b.iter(|| ext.evaluate(black_box(&x)).unwrap())
        });
    }
    group.finish();
}

fn bench_scenario(c: &mut Criterion) {
    let file = gen_instance(0, Profile::Default).unwrap();
    let flags = RunFlags::default();
    let mut group = c.benchmark_group("run_scenario");
    group.sample_size(20);
    group.bench_function("gen_default_seed0", |b| {
        b.iter(|| run_instance(black_box(&file), &flags).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_stinespring,
    bench_tower,
    bench_evaluate,
    bench_scenario
);
criterion_main!(benches);
