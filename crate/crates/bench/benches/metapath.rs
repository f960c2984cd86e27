use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dime_bench::pair;
use dime_core::metaprox::{count_path_instances, proximity_bundle};
use dime_core::MetaPath;

fn counts(c: &mut Criterion) {
    let mut g = c.benchmark_group("count_path_instances");
    for users in [200, 800] {
        let net = pair(users).mature;
        for path in [MetaPath::Phi1, MetaPath::Phi3, MetaPath::Phi5, MetaPath::Phi6] {
            g.bench_with_input(BenchmarkId::new(format!("{path:?}"), users), &net, |b, net| {
                b.iter(|| count_path_instances(net, path))
            });
        }
    }
    g.finish();
}

fn bundle(c: &mut Criterion) {
    let mut g = c.benchmark_group("proximity_bundle");
    g.sample_size(10);
    for users in [200, 800] {
        let net = pair(users).mature;
        g.bench_with_input(BenchmarkId::from_parameter(users), &net, |b, net| b.iter(|| proximity_bundle(net)));
    }
    g.finish();
}

criterion_group!(benches, counts, bundle);
criterion_main!(benches);
