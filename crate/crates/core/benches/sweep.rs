use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use relhartree::ground_state::{ProblemKind, SolverOptions};
use relhartree::harness::{build_series, sweep_sequential, sweep_with_series, SweepConfig};
use relhartree::RadialGrid;

fn config(n: usize) -> SweepConfig {
    let mut cfg = SweepConfig::new(ProblemKind::Energy, 1);
    cfg.solver = SolverOptions::on_grid(RadialGrid::new(n, 40.0).unwrap());
    cfg.sobolev = vec![1.0];
    cfg
}

fn bench_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("energy_sweep");
    group.sample_size(10);
    for n in [1024, 4096] {
        let cfg = config(n);
        let series = build_series(&cfg).unwrap();
        // cold starts make each c-point heavy enough to be worth a thread
        let mut cold = cfg.clone();
        cold.warm_start = false;
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, _| {
            b.iter(|| sweep_with_series(&cold, &series).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, _| {
            b.iter(|| sweep_sequential(&cold, &series).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_sweep);
criterion_main!(benches);
