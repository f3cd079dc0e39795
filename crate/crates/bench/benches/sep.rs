use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pamq_bench::fixture;
use pamq_core::montecarlo::{simulate, SimSpec};
use pamq_core::optimizer::{optimize, DesignProblem, DesignVariables};
use pamq_core::sep::{h_function, sep_closed_form, sep_noiseless, sep_quadrature};
use pamq_core::ChannelModel;
use std::hint::black_box;

fn bench_h(c: &mut Criterion) {
    let mut g = c.benchmark_group("h_function");
    for m in [1u32, 2, 4] {
        g.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, &m| {
            b.iter(|| h_function(black_box(m), 1.0, 20.0, 1.5, 0.3, 2.0).unwrap())
        });
    }
    g.finish();
}

fn bench_sep(c: &mut Criterion) {
    let mut g = c.benchmark_group("sep");
    for (order, bits) in [(4, 2), (4, 3), (8, 3), (8, 4)] {
        let (con, q, ch) = fixture(order, bits, 2.0, 20.0);
        let id = format!("M{order}_b{bits}");
        g.bench_function(BenchmarkId::new("closed_form", &id), |b| {
            b.iter(|| sep_closed_form(black_box(&con), &q, &ch).unwrap())
        });
        g.bench_function(BenchmarkId::new("quadrature", &id), |b| {
            b.iter(|| sep_quadrature(black_box(&con), &q, &ch).unwrap())
        });
        let floor_ch = ChannelModel::noiseless(2.0, 1.0).unwrap();
        g.bench_function(BenchmarkId::new("noiseless", &id), |b| {
            b.iter(|| sep_noiseless(black_box(&con), &q, &floor_ch).unwrap())
        });
    }
    g.finish();
}

fn bench_optimize(c: &mut Criterion) {
    let mut g = c.benchmark_group("optimize");
    g.sample_size(10);
    let ch = ChannelModel::noiseless(1.0, 1.0).unwrap();
    for (name, vars, bits) in [
        ("quantizer_only_b2", DesignVariables::QuantizerOnly, 2),
        ("joint_nonuniform_b3", DesignVariables::JointNonuniform, 3),
    ] {
        let p = DesignProblem::new(ch, Some(20.0), 4, bits, vars).with_starts(4);
        g.bench_function(name, |b| b.iter(|| optimize(black_box(&p)).unwrap()));
    }
    g.finish();
}

fn bench_simulate(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate");
    g.sample_size(10);
    for antennas in [1usize, 2] {
        let (con, q, _) = fixture(4, 2, 1.0, 20.0);
        let spec = SimSpec::new(con, q, ChannelModel::noiseless(1.0, 1.0).unwrap(), vec![20.0], 100_000)
            .with_antennas(antennas);
        g.bench_with_input(BenchmarkId::new("100k_trials", antennas), &spec, |b, s| {
            b.iter(|| simulate(black_box(s)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_h, bench_sep, bench_optimize, bench_simulate);
criterion_main!(benches);
