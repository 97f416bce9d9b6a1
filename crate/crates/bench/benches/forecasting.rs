//! Throughput benchmarks at production dimensions (H=36, r=3, m=64, p=128):
//! inference forward pass, contribution decomposition, and one training
//! gradient evaluation.

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use retain_core::interpretation::contributions;
use retain_core::models::{retain_forward, RetainParameters, TapedRetain};
use retain_core::tape::Tape;
use retain_core::tensor::Tensor;
use retain_core::ModelDimensions;

fn fixture() -> (RetainParameters, Tensor) {
    let dims = ModelDimensions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let params = RetainParameters::init(dims, &mut rng).unwrap();
    let mut x = Tensor::zeros(vec![dims.history, dims.inputs]);
    for v in x.data_mut() {
        *v = rng.gen_range(-2.0..2.0);
    }
    (params, x)
}

fn bench_forward(c: &mut Criterion) {
    let (params, x) = fixture();
    c.bench_function("retain_forward", |b| {
        b.iter(|| retain_forward(std::hint::black_box(&params), std::hint::black_box(&x)).unwrap())
    });
}

fn bench_contributions(c: &mut Criterion) {
    let (params, x) = fixture();
    let trace = retain_forward(&params, &x).unwrap();
    c.bench_function("contributions", |b| {
        b.iter(|| {
            contributions(
                std::hint::black_box(&params),
                std::hint::black_box(&trace),
                std::hint::black_box(&x),
            )
            .unwrap()
        })
    });
}

fn bench_gradient(c: &mut Criterion) {
    let (params, x) = fixture();
    c.bench_function("loss_gradient", |b| {
        b.iter(|| {
            let mut tape = Tape::new();
            let taped = TapedRetain::register(&mut tape, &params);
            let pred = taped.forward(&mut tape, std::hint::black_box(&x)).unwrap();
            let target = tape.leaf(Tensor::vector(vec![120.0]));
            let diff = tape.sub(pred, target).unwrap();
            let loss = tape.dot(diff, diff).unwrap();
            tape.backward(loss).unwrap()
        })
    });
}

criterion_group!(benches, bench_forward, bench_contributions, bench_gradient);
criterion_main!(benches);
