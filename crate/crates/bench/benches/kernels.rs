use std::f64::consts::{FRAC_PI_4, PI};
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rydberg_core::eit::{EitParams, NoiseSpec};
use rydberg_core::mimo::{gs_detect, magnitude_observe, DetectOptions, MimoChannel};
use rydberg_core::quantum::steady_state;
use rydberg_core::transduction::{
    psk_point, quasi_static_receive, ReceiveMode, ReceiveOptions, Receiver, DEFAULT_OPERATING_RABI,
};

fn steady(c: &mut Criterion) {
    let sys = EitParams::default()
        .system(0.0, &[(2.0 * PI * 1e6, 0.0)])
        .unwrap();
    c.bench_function("steady_state_4_level", |b| {
        b.iter(|| steady_state(black_box(&sys)).unwrap())
    });
}

fn gs(c: &mut Criterion) {
    let ch = MimoChannel::random(16, 4, 3.0, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = DVector::from_fn(4, |_, _| psk_point(rng.random_range(0..4), 4, FRAC_PI_4));
    let y = magnitude_observe(&ch, &x, 0.0, 0).unwrap();
    let opts = DetectOptions::default();
    c.bench_function("gs_detect_16x4", |b| {
        b.iter(|| gs_detect(black_box(&y), &ch, &opts).unwrap())
    });
}

fn receive(c: &mut Criterion) {
    let rx = Receiver::default_operating(&EitParams::default()).unwrap();
    let rabi: Vec<f64> = (0..4096)
        .map(|k| DEFAULT_OPERATING_RABI * (1.0 + 0.05 * (k as f64 * 0.01).sin()))
        .collect();
    let noise = NoiseSpec::none();
    let mut group = c.benchmark_group("quasi_static_receive_4096");
    group.bench_function("exact", |b| {
        b.iter(|| {
            quasi_static_receive(&rx, black_box(&rabi), &noise, 0, &ReceiveOptions::default())
                .unwrap()
        })
    });
    let interpolated = ReceiveOptions {
        mode: ReceiveMode::Interpolated { nodes: 32 },
        bandwidth: None,
    };
    group.bench_function("interpolated_32", |b| {
        b.iter(|| quasi_static_receive(&rx, black_box(&rabi), &noise, 0, &interpolated).unwrap())
    });
    group.finish();
}

criterion_group!(benches, steady, gs, receive);
criterion_main!(benches);
