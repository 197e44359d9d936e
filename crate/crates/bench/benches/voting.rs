use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use histoml_core::ensemble::{hard_vote, soft_vote_probs};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 1000;
const MEMBERS: usize = 5;
const CLASSES: usize = 3;

fn member_labels(rng: &mut ChaCha8Rng) -> Vec<Vec<u32>> {
    (0..MEMBERS)
        .map(|_| (0..N).map(|_| rng.gen_range(0..CLASSES as u32)).collect())
        .collect()
}

fn member_probs(rng: &mut ChaCha8Rng) -> Vec<Array2<f64>> {
    (0..MEMBERS)
        .map(|_| {
            let mut probs = Array2::<f64>::zeros((N, CLASSES));
            for mut row in probs.rows_mut() {
                let mut total = 0.0;
                for cell in row.iter_mut() {
                    *cell = rng.gen_range(0.05..1.0);
                    total += *cell;
                }
                row.mapv_inplace(|v| v / total);
            }
            probs
        })
        .collect()
}

fn bench_voting(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let labels = member_labels(&mut rng);
    let probs = member_probs(&mut rng);
    let weights = vec![1.0; MEMBERS];

    c.bench_function("hard_vote_1000x5x3", |b| {
        b.iter_batched(
            || labels.clone(),
            |labels| hard_vote(&labels, &weights, CLASSES).unwrap(),
            BatchSize::SmallInput,
        )
    });

    c.bench_function("soft_vote_1000x5x3", |b| {
        b.iter(|| {
            let views: Vec<_> = probs.iter().map(|p| p.view()).collect();
            soft_vote_probs(&views, &weights).unwrap()
        })
    });
}

criterion_group!(benches, bench_voting);
criterion_main!(benches);
