use criterion::{criterion_group, criterion_main, Criterion};

use repolink_bench::{bench_config, write_corpus};
use repolink_core::collapse::WeightScheme;
use repolink_core::pipeline::{build_collapsed, cluster_collapsed, components_map, ingest, with_threads};
use repolink_core::{FilterConfig, LouvainConfig, UltimateParentMap};

fn ingest_and_components(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    let files = write_corpus(dir.path(), &bench_config(100, 100)).unwrap();
    let filter = FilterConfig::default();
    let mut group = c.benchmark_group("components");
    group.sample_size(10);
    for threads in [1, 4] {
        group.bench_function(format!("ingest_{threads}t"), |b| {
            b.iter(|| {
                let ingested = with_threads(threads, || ingest(&files, &filter, false))
                    .unwrap()
                    .unwrap();
                components_map(&ingested).unwrap()
            })
        });
    }
    group.finish();
}

fn louvain(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    let files = write_corpus(dir.path(), &bench_config(100, 100)).unwrap();
    let ingested = ingest(&files, &FilterConfig::default(), true).unwrap();
    let graph = build_collapsed(&ingested, &UltimateParentMap::default(), WeightScheme::Unit);
    let mut group = c.benchmark_group("louvain");
    group.sample_size(10);
    for threads in [1, 4] {
        group.bench_function(format!("collapsed_{threads}t"), |b| {
            b.iter(|| {
                with_threads(threads, || cluster_collapsed(&graph, LouvainConfig::default()))
                    .unwrap()
                    .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, ingest_and_components, louvain);
criterion_main!(benches);
