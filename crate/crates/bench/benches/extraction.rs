use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use histoml_core::data::Pixels;
use histoml_core::features::{Backbone, MockBackbone};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BATCH: usize = 32;
const SIDE: usize = 128;

fn synthetic_batch(rng: &mut ChaCha8Rng) -> Vec<Pixels> {
    (0..BATCH)
        .map(|_| Pixels {
            data: (0..SIDE * SIDE * 3).map(|_| rng.gen_range(0.0..1.0)).collect(),
            height: SIDE,
            width: SIDE,
        })
        .collect()
}

fn bench_extraction(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let batch = synthetic_batch(&mut rng);
    let backbone = MockBackbone::new();

    let mut group = c.benchmark_group("extract");
    group.throughput(Throughput::Elements(BATCH as u64));
    group.bench_function("mock_batch_32x128x128", |b| {
        b.iter(|| backbone.extract_batch(&batch).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_extraction);
criterion_main!(benches);
