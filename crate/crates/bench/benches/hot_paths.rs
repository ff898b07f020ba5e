use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use navtl::env::{render, Camera, Preset};
use navtl::nn::{build_desk_network, Network, Tensor};
use navtl::replay::{PrioritizedReplay, ReplayConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn batch(n: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::new(vec![n, 64, 64, 3], (0..n * 64 * 64 * 3).map(|_| rng.gen()).collect()).unwrap()
}

fn network(c: &mut Criterion) {
    let net = Network::new(build_desk_network(64, 64, 25).unwrap(), 0).unwrap();
    let x32 = batch(32, 1);
    let x1 = batch(1, 2);
    c.bench_function("forward_batch32", |b| b.iter(|| net.forward(black_box(&x32)).unwrap()));
    c.bench_function("q_values_single", |b| b.iter(|| net.q_values(black_box(x1.data())).unwrap()));

    let target: Vec<f32> = (0..32).map(|k| k as f32 / 32.0).collect();
    let actions: Vec<usize> = (0..32).map(|k| k % 25).collect();
    let weights = vec![1.0f32; 32];
    c.bench_function("train_step_batch32", |b| {
        b.iter_batched_ref(
            || net.clone(),
            |n| n.train_step(&x32, &target, &actions, &weights, 1e-4).unwrap(),
            BatchSize::LargeInput,
        )
    });
}

fn renderer(c: &mut Criterion) {
    let plan = Preset::TwistyLike.generate(0).unwrap();
    let pose = plan.spawn_points[0];
    let cam = Camera::default();
    c.bench_function("render_64x64", |b| b.iter(|| render(black_box(&plan), &pose, &cam).unwrap()));
}

fn replay(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut memory = PrioritizedReplay::<u32>::new(ReplayConfig::default()).unwrap();
    for k in 0..memory.config().capacity {
        let i = memory.push(k as u32);
        memory.set_priority(i, rng.gen_range(0.01..2.0)).unwrap();
    }
    c.bench_function("per_sample_32", |b| b.iter(|| memory.sample(32, 0.6, &mut rng).unwrap()));
    let idx: Vec<usize> = (0..32).map(|k| k * 997).collect();
    let td = vec![0.5f32; 32];
    c.bench_function("per_update_32", |b| b.iter(|| memory.update_priorities(&idx, &td).unwrap()));
}

criterion_group!(benches, network, renderer, replay);
criterion_main!(benches);
