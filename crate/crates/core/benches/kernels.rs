use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mdn_core::exec;
use mdn_core::lab::{variance_reduction_check, VarianceLabConfig};
use mdn_core::nn::{conv2d_backward, conv2d_forward, network_backward, network_forward, ConvLayer};
use mdn_core::{Arch, NetworkParams, Rng, Shape4, Tensor4};

const MODES: [(&str, bool); 2] = [("sequential", false), ("parallel", true)];

fn random_tensor(shape: Shape4, rng: &mut Rng) -> Tensor4 {
    let data = (0..shape.len()).map(|_| rng.uniform() as f32).collect();
    Tensor4::from_vec(shape, data).unwrap()
}

fn conv(c: &mut Criterion) {
    let mut rng = Rng::new(1);
    let mut layer = ConvLayer::zeros(16, 16, 3).unwrap();
    layer.weights.iter_mut().for_each(|w| *w = 0.1 * rng.normal() as f32);
    let input = random_tensor(Shape4::new(8, 16, 32, 32), &mut rng);
    let grad = random_tensor(Shape4::new(8, 16, 32, 32), &mut rng);
    let mut group = c.benchmark_group("conv3x3_16x16_b8_32px");
    for (name, par) in MODES {
        exec::set_parallel(par);
        group.bench_function(BenchmarkId::new("forward", name), |b| {
            b.iter(|| conv2d_forward(&input, &layer).unwrap())
        });
        group.bench_function(BenchmarkId::new("backward", name), |b| {
            b.iter(|| conv2d_backward(&input, &layer, &grad, true).unwrap())
        });
    }
    group.finish();
    exec::set_parallel(true);
}

fn network(c: &mut Criterion) {
    let mut rng = Rng::new(2);
    let arch: Arch = "dncnn-d5-c16-k3-ch1".parse().unwrap();
    let params = NetworkParams::init(arch, &mut rng).unwrap();
    let y = random_tensor(Shape4::new(8, 1, 32, 32), &mut rng);
    let mut group = c.benchmark_group("dncnn_d5_c16_train_step");
    for (name, par) in MODES {
        exec::set_parallel(par);
        group.bench_function(name, |b| {
            b.iter(|| {
                let (x, tape) = network_forward(&params, &y).unwrap();
                network_backward(&params, &tape, &x).unwrap()
            })
        });
    }
    group.finish();
    exec::set_parallel(true);
}

fn lab(c: &mut Criterion) {
    let cfg = VarianceLabConfig {
        trials: 2000,
        ..Default::default()
    };
    let rng = Rng::new(3);
    let mut group = c.benchmark_group("variance_lab_2000_trials");
    group.sample_size(10);
    for (name, par) in MODES {
        exec::set_parallel(par);
        group.bench_function(name, |b| b.iter(|| variance_reduction_check(&cfg, &rng).unwrap()));
    }
    group.finish();
    exec::set_parallel(true);
}

criterion_group!(benches, conv, network, lab);
criterion_main!(benches);
