//! Default worker pool against a single worker on the hot kernels.
//! Build with `--no-default-features` to measure the sequential fallback.

use std::hint::black_box;

use adaptrack::adaptation::AdapterBank;
use adaptrack::kcf::{KcfModel, KcfParams};
use adaptrack::network::{Network, NetworkSpec, WeightStore};
use adaptrack::ops::{conv2d, ConvKernel};
use adaptrack::Tensor;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tensor(h: usize, w: usize, c: usize, seed: u64) -> Tensor {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..h * w * c).map(|_| r.random_range(-1.0f32..1.0)).collect();
    Tensor::from_vec(h, w, c, data).unwrap()
}

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let n = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut v = vec![("1-thread".to_string(), rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap())];
    if n > 1 {
        v.push((format!("{n}-thread"), rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap()));
    }
    v
}

fn bench_conv(c: &mut Criterion) {
    let x = random_tensor(56, 56, 256, 1);
    let mut k = ConvKernel::zeros(64, 256, 3, 3);
    for (i, w) in k.weights.iter_mut().enumerate() {
        *w = ((i % 17) as f32 - 8.0) * 1e-3;
    }
    let mut g = c.benchmark_group("conv2d_56x56x256_to_64");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            pool.install(|| b.iter(|| black_box(conv2d(&x, &k, 1, 1).unwrap())))
        });
    }
    g.finish();
}

fn bench_kcf(c: &mut Criterion) {
    let params = KcfParams::default();
    let mut g = c.benchmark_group("kcf_train_detect_52x52");
    g.sample_size(10);
    for channels in [[32, 64, 64], [256, 512, 512]] {
        let feats: Vec<(Tensor, Tensor)> = channels
            .iter()
            .enumerate()
            .map(|(i, &ch)| (random_tensor(52, 52, ch, i as u64), random_tensor(52, 52, ch, 10 + i as u64)))
            .collect();
        let total: usize = channels.iter().sum();
        for (name, pool) in pools() {
            g.bench_function(BenchmarkId::new(format!("{total}ch"), &name), |b| {
                pool.install(|| {
                    b.iter(|| {
                        for (x, z) in &feats {
                            let m = KcfModel::train(x, &params).unwrap();
                            black_box(m.detect(z).unwrap());
                        }
                    })
                })
            });
        }
    }
    g.finish();
}

fn bench_forward(c: &mut Criterion) {
    let spec = NetworkSpec::vgg19_prefix();
    let weights = WeightStore::random(&spec, 7);
    let net = Network::new(spec, weights).unwrap();
    let banks: Vec<AdapterBank> = adaptrack::adaptation::random_learned_banks(net.spec(), 3).unwrap();
    let x = random_tensor(112, 112, 3, 5).scaled(60.0);
    let taps = ["relu3_4", "relu4_4", "relu5_4"];
    let mut g = c.benchmark_group("forward_adapt_112px");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            pool.install(|| {
                b.iter(|| {
                    let maps = net.forward_extract(&x, &taps).unwrap();
                    for (m, bank) in maps.iter().zip(&banks) {
                        black_box(bank.apply(m).unwrap());
                    }
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, bench_conv, bench_kcf, bench_forward);
criterion_main!(benches);
