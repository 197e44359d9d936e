use criterion::{criterion_group, criterion_main, Criterion};
use histoml_core::metrics::evaluate;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 1000;
const CLASSES: usize = 3;

fn bench_evaluate(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let actual: Vec<u32> = (0..N).map(|_| rng.gen_range(0..CLASSES as u32)).collect();
    let predicted: Vec<u32> = actual
        .iter()
        .map(|&label| {
            if rng.gen_bool(0.9) {
                label
            } else {
                rng.gen_range(0..CLASSES as u32)
            }
        })
        .collect();
    let mut probs = Array2::<f64>::zeros((N, CLASSES));
    for (i, mut row) in probs.rows_mut().into_iter().enumerate() {
        let mut total = 0.0;
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = if j as u32 == predicted[i] { 0.7 } else { 0.15 } + rng.gen_range(0.0..0.1);
            total += *cell;
        }
        row.mapv_inplace(|v| v / total);
    }

    c.bench_function("evaluate_labels_only_1000x3", |b| {
        b.iter(|| evaluate(&actual, &predicted, None, CLASSES, 0.0).unwrap())
    });

    c.bench_function("evaluate_with_roc_1000x3", |b| {
        b.iter(|| evaluate(&actual, &predicted, Some(probs.view()), CLASSES, 0.0).unwrap())
    });
}

criterion_group!(benches, bench_evaluate);
criterion_main!(benches);
