use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

use twoway_bench::default_case;
use twoway_core::capacity::effective_capacity;
use twoway_core::rates::DecodeOrder;
use twoway_core::three_phase::{allocate, allocate_exact, optimize_three_phase, ThreePhaseDuals};
use twoway_core::two_phase::{optimize_two_phase, solve_state, OrderRule};
use twoway_core::{sample_csi, FadingSpec};

fn per_state(c: &mut Criterion) {
    let (samples, cfg) = default_case(256);
    let duals = ThreePhaseDuals::new([0.05, 0.05, 0.08], [0.7, 0.75]).unwrap();
    let mut g = c.benchmark_group("per_state");
    g.bench_function("three_phase_exact_x256", |b| {
        b.iter(|| {
            for s in &samples {
                black_box(allocate_exact(s, &duals, &cfg.qos, &cfg.weights, &cfg.root).unwrap());
            }
        })
    });
    g.bench_function("three_phase_balanced_x256", |b| {
        b.iter(|| {
            for s in &samples {
                black_box(allocate(s, &duals, &cfg.qos, &cfg.weights, &cfg.root).unwrap());
            }
        })
    });
    for (name, rule) in [
        ("two_phase_channel_aware_x256", OrderRule::ChannelAware),
        ("two_phase_a_first_x256", OrderRule::Fixed(DecodeOrder::AFirst)),
    ] {
        g.bench_function(name, |b| {
            b.iter(|| {
                for s in &samples {
                    black_box(solve_state(s, [0.05, 0.05, 0.08], [0.7, 0.75], &cfg.qos, &cfg.weights, rule, &cfg.root).unwrap());
                }
            })
        });
    }
    g.finish();
}

fn sampling_and_capacity(c: &mut Criterion) {
    let spec = FadingSpec::new(1.0, 4.0).unwrap();
    c.bench_function("sample_csi_20k", |b| b.iter(|| black_box(sample_csi(&spec, 20_000, 1).unwrap())));
    let rates: Vec<f64> = (0..20_000).map(|k| (k % 97) as f64 * 0.03).collect();
    c.bench_function("effective_capacity_20k", |b| b.iter(|| black_box(effective_capacity(&rates, 1.0).unwrap())));
}

fn optimizers(c: &mut Criterion) {
    let (samples, cfg) = default_case(2_000);
    let mut g = c.benchmark_group("optimize_2k");
    g.sample_size(10);
    g.bench_function("three_phase", |b| {
        b.iter_batched(|| samples.clone(), |s| black_box(optimize_three_phase(&s, &cfg).unwrap()), BatchSize::LargeInput)
    });
    g.bench_function("two_phase", |b| {
        b.iter_batched(|| samples.clone(), |s| black_box(optimize_two_phase(&s, &cfg).unwrap()), BatchSize::LargeInput)
    });
    g.finish();
}

criterion_group!(benches, per_state, sampling_and_capacity, optimizers);
criterion_main!(benches);
