//! Sequential vs parallel execution of the data-parallel kernels.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use solver_budget::cost_scaling::fit_power_law_with;
use solver_budget::{
    Budget, CostDistribution, CostScalingModel, Exec, FitOptions, Simulator, SolverProfile,
    SyntheticAgentModel,
};

fn policies() -> Vec<(&'static str, Exec)> {
    vec![
        ("sequential", Exec::Sequential),
        #[cfg(feature = "parallel")]
        ("parallel", Exec::Parallel),
    ]
}

fn kshot(c: &mut Criterion) {
    let solver = SolverProfile::new("m", 0.3, 0.1).unwrap();
    let mut group = c.benchmark_group("kshot_100k");
    group.sample_size(20);
    for (name, exec) in policies() {
        let sim = Simulator::new(exec);
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                sim.kshot(
                    black_box(&solver),
                    CostDistribution::LogNormal { sigma: 0.5 },
                    Budget::Monetary(2.0),
                    100_000,
                    7,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn partitioned(c: &mut Criterion) {
    let cost = CostScalingModel::from_params(0.05, 0.002, 2.0).unwrap();
    let model = SyntheticAgentModel::new(1.0, 0.4, cost).unwrap();
    let mut group = c.benchmark_group("partitioned_100k");
    group.sample_size(20);
    for (name, exec) in policies() {
        let sim = Simulator::new(exec);
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                sim.partitioned(black_box(&model), 2.0, 3, 100_000, 7)
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn fit(c: &mut Criterion) {
    let points: Vec<(u64, f64)> = (1..=200u64)
        .map(|q| (q, 0.05 + 0.002 * (q as f64).powf(1.7)))
        .collect();
    let mut group = c.benchmark_group("fit_200_points");
    for (name, exec) in policies() {
        let opts = FitOptions {
            exec,
            ..FitOptions::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| fit_power_law_with(black_box(&points), &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, kshot, partitioned, fit);
criterion_main!(benches);
