//! Sequential versus parallel cost of a small benchmark grid.
//!
//! `jobs = 1` pins the grid to one thread; `jobs = 0` lets rayon use every
//! core. On a single-core machine both lines should coincide.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use novelty_core::bench::{run_experiment, ExperimentConfig};
use novelty_core::par::current_num_threads;

fn grid() -> ExperimentConfig {
    ExperimentConfig::from_toml(
        r#"
scenarios = "all9"
seeds = [0]

[simulator]
vocab_size = 1000
doc_length = 40
horizon_days = 30
background_docs_per_topic_per_day = 4
"#,
    )
    .expect("bench config parses")
}

fn bench_grid(c: &mut Criterion) {
    let cfg = grid();
    let mut group = c.benchmark_group("grid");
    group.sample_size(10);
    for (label, jobs) in [("sequential", 1), ("parallel", 0)] {
        group.bench_with_input(
            BenchmarkId::new(label, current_num_threads()),
            &jobs,
            |b, &j| b.iter(|| run_experiment(&cfg, j).expect("grid runs")),
        );
    }
    group.finish();
}

criterion_group!(benches, bench_grid);
criterion_main!(benches);
