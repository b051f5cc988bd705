use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use srz_core::sim::run_replication;
use srz_core::{ControllerKind, SimConfig};

fn replication(c: &mut Criterion) {
    let mut group = c.benchmark_group("replication_300s");
    group.sample_size(10);
    for controller in ControllerKind::ALL {
        let cfg = SimConfig {
            controller,
            volume: 1800.0,
            duration: 300.0,
            ..SimConfig::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(controller), &cfg, |b, cfg| {
            b.iter(|| run_replication(cfg, 1, false).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, replication);
criterion_main!(benches);
