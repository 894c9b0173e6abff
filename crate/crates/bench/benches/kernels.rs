use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use step2heat::kernel::{GreenConfig, KernelEvaluator, QuadratureConfig};
use step2heat::matrix_functions::a_of;
use step2heat::ou_mehler::{mehler_p, OscillatorParams};
use step2heat::{GroupPoint, GroupSpec};
use step2heat_bench::sample_points;

fn heat_paths(c: &mut Criterion) {
    let mut group = c.benchmark_group("heat");
    for spec in [
        GroupSpec::heisenberg(1),
        GroupSpec::heisenberg(2),
        GroupSpec::quaternionic(),
    ] {
        let ev = KernelEvaluator::new(&spec, QuadratureConfig::default()).unwrap();
        let pts = sample_points(&spec, 16);
        let e = GroupPoint::identity(&spec);
        group.bench_with_input(BenchmarkId::new("general", spec.name()), &pts, |b, pts| {
            b.iter(|| pts.iter().map(|g| ev.heat(g, &e, 1.0).unwrap().value).sum::<f64>())
        });
        group.bench_with_input(BenchmarkId::new("heisenberg_type", spec.name()), &pts, |b, pts| {
            b.iter(|| {
                pts.iter()
                    .map(|g| ev.heisenberg_type(g, &e, 1.0).unwrap().value)
                    .sum::<f64>()
            })
        });
    }
    let spec = GroupSpec::free_step_two(3);
    let ev = KernelEvaluator::new(&spec, QuadratureConfig::default()).unwrap();
    let pts = sample_points(&spec, 4);
    let e = GroupPoint::identity(&spec);
    group.sample_size(10);
    group.bench_with_input(BenchmarkId::new("general", spec.name()), &pts, |b, pts| {
        b.iter(|| pts.iter().map(|g| ev.heat(g, &e, 1.0).unwrap().value).sum::<f64>())
    });
    group.finish();
}

fn green(c: &mut Criterion) {
    let spec = GroupSpec::heisenberg(1);
    let ev = KernelEvaluator::new(&spec, QuadratureConfig::default()).unwrap();
    let g = GroupPoint::new(vec![1.0, 0.0], vec![0.3]);
    let e = GroupPoint::identity(&spec);
    let cfg = GreenConfig::default();
    let mut group = c.benchmark_group("green");
    group.sample_size(10);
    group.bench_function("heisenberg1", |b| {
        b.iter(|| ev.green(black_box(&g), &e, &cfg).unwrap().value)
    });
    group.finish();
}

fn mehler(c: &mut Criterion) {
    let spec = GroupSpec::heisenberg(2);
    let lambda = [0.7];
    let d = a_of(&spec, &lambda);
    let p = OscillatorParams::new(d, 1.0).unwrap();
    let z = [0.3, -0.1, 0.2, 0.5];
    let zeta = [0.0, 0.4, -0.2, 0.1];
    c.bench_function("mehler_p/dim4", |b| {
        b.iter(|| mehler_p(&p, black_box(&z), black_box(&zeta)).unwrap())
    });
}

criterion_group!(benches, heat_paths, green, mehler);
criterion_main!(benches);
