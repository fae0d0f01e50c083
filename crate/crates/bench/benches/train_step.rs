use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use seqlab_bench::{train_step, training_fixture};
use seqlab_core::Arch;

fn step(c: &mut Criterion) {
    let mut group = c.benchmark_group("train_step");
    group.sample_size(20);
    for arch in [Arch::Softmax, Arch::Crf, Arch::Lan] {
        let (model, sent) = training_fixture(arch);
        group.bench_with_input(BenchmarkId::from_parameter(arch), &(model, sent), |b, (m, s)| {
            b.iter(|| train_step(m, s))
        });
    }
    group.finish();
}

criterion_group!(benches, step);
criterion_main!(benches);
