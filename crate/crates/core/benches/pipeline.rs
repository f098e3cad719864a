use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ttr_arbiter::analysis::simulate_tuning;
use ttr_arbiter::domain::{ExtendedTime, MetricDirection, ScoreMatrix, WorkloadSpec};
use ttr_arbiter::scoring::{score_matrix, Integration};
use ttr_arbiter::searchspace::{DimensionKind, DimensionSpec, SearchSpace};
use ttr_arbiter::simulate::{log_bowl_family, run_mock_competition, MockSettings, MockSubmission};
use ttr_arbiter::{BenchmarkConfig, Execution, RulesetConfig};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn random_matrix(submissions: usize, workloads: usize) -> ScoreMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rows = (0..submissions).map(|s| {
        let row = (0..workloads)
            .map(|_| {
                if rng.random_range(0..5) == 0 {
                    ExtendedTime::Infinite
                } else {
                    ExtendedTime::Finite(rng.random_range(100.0..1000.0))
                }
            })
            .collect();
        (format!("s{s}"), row)
    });
    ScoreMatrix::from_rows((0..workloads).map(|w| format!("w{w}")).collect(), rows).unwrap()
}

fn bench_score_matrix(c: &mut Criterion) {
    let m = random_matrix(2000, 16);
    let mut group = c.benchmark_group("score_matrix");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, "2000x16 trapezoid"), |b| {
            b.iter(|| score_matrix(black_box(&m), 4.0, Integration::Trapezoid { points: 1000 }, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_simulate_tuning(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pool: Vec<f64> = (0..100).map(|_| rng.random()).collect();
    let mut group = c.benchmark_group("simulate_tuning");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, "100 pool x 10000 sims"), |b| {
            b.iter(|| simulate_tuning(black_box(&pool), 20, 10_000, 3, MetricDirection::Minimize, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_mock_competition(c: &mut Criterion) {
    let workloads = (0..4)
        .map(|i| WorkloadSpec::fixed(format!("w{i}"), MetricDirection::Minimize, 0.3, 0.3, 500.0).with_max_steps(500))
        .collect();
    let config = BenchmarkConfig::new(workloads, RulesetConfig::default());
    let space = SearchSpace::Box {
        dimensions: vec![DimensionSpec::new("lr", DimensionKind::LogUniform { lo: 1e-5, hi: 1e-1 }).unwrap()],
    };
    let subs: Vec<MockSubmission> = (0..3)
        .map(|i| MockSubmission {
            id: format!("m{i}"),
            space: space.clone(),
            family: log_bowl_family("lr", 1e-3, 0.05, 1.0 + i as f64 * 0.2, 0.002),
            time_scale: 1.0,
        })
        .collect();
    let mut group = c.benchmark_group("mock_competition");
    group.sample_size(10);
    for (name, exec) in MODES {
        let mut settings = MockSettings::for_config(&config);
        settings.exec = exec;
        group.bench_function(BenchmarkId::new(name, "3 subs x 4 workloads"), |b| {
            b.iter(|| run_mock_competition(black_box(&config), &subs, 7, &settings).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_score_matrix, bench_simulate_tuning, bench_mock_competition);
criterion_main!(benches);
