use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use sesans_bench::{packet, PI_PHASE};
use sesans_core::{GratingSpec, OracleCase};

fn oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracle");
    group.sample_size(10);
    for delta in [5_000.0, 80_000.0] {
        let case = OracleCase::new(GratingSpec::silicon_2um(), packet(delta));
        group.bench_function(format!("quantum delta {delta} nm"), |b| {
            b.iter(|| case.quantum(black_box(560.0), PI_PHASE).unwrap())
        });
        group.bench_function(format!("semiclassical delta {delta} nm"), |b| {
            b.iter(|| case.semiclassical(black_box(560.0), PI_PHASE).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, oracle);
criterion_main!(benches);
