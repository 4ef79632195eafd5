use criterion::{black_box, criterion_group, criterion_main, Criterion};

use denl_core::baseline::{calibrate, linearize};
use denl_core::dataset::{sample_at, DatasetConfig};
use denl_core::experiments::SystemDistortion;
use denl_core::net::{predict, NetConfig, Network};
use denl_core::spectral::fft_real;
use denl_core::{build_stack, gof, synthesize_signal, Grid, Order};

fn spectral(c: &mut Criterion) {
    let x: Vec<f64> = (0..1024).map(|i| (i as f64 * 0.37).sin()).collect();
    c.bench_function("fft_real_1024", |b| b.iter(|| fft_real(black_box(&x)).unwrap()));
}

fn stacks(c: &mut Criterion) {
    for (name, cfg) in [
        ("stack_toy_16x256", DatasetConfig::toy(Order::Second, 1, 0)),
        ("stack_full_32x1024", DatasetConfig::full(Order::Second, 1, 0)),
    ] {
        let sample = sample_at(&cfg, 0).unwrap();
        let signal = synthesize_signal(&sample.object, &cfg.grid).unwrap();
        c.bench_function(name, |b| b.iter(|| build_stack(black_box(&signal), &cfg.ladder).unwrap()));
    }
}

fn inference(c: &mut Criterion) {
    let cfg = DatasetConfig::toy(Order::Second, 1, 0);
    let samples = vec![sample_at(&cfg, 0).unwrap()];
    let mut net = Network::<f32>::new(NetConfig::toy(), None, 0).unwrap();
    net.order = Some(Order::Second);
    c.bench_function("infer_toy", |b| b.iter(|| predict(&net, black_box(&samples), 1).unwrap()));
}

fn classical(c: &mut Criterion) {
    let grid = Grid::default();
    let system = SystemDistortion::reaching(40.0, 15.0, 400.0);
    let m1 = system.mirror(&grid, 120.0).unwrap();
    let m2 = system.mirror(&grid, 360.0).unwrap();
    let map = calibrate(&m1, &m2).unwrap();
    let sig = system.mirror(&grid, 250.0).unwrap();
    c.bench_function("calibrate_1024", |b| b.iter(|| calibrate(black_box(&m1), &m2).unwrap()));
    c.bench_function("linearize_1024", |b| b.iter(|| linearize(black_box(&sig), &map).unwrap()));
}

fn metric(c: &mut Criterion) {
    let a: Vec<f64> = (0..1024).map(|i| i as f64 / 1023.0).collect();
    let p: Vec<f64> = a.iter().map(|v| (v * 0.999).min(1.0)).collect();
    c.bench_function("gof_1024", |b| b.iter(|| gof(black_box(&p), &a, 0.001).unwrap()));
}

criterion_group!(benches, spectral, stacks, inference, classical, metric);
criterion_main!(benches);
