use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gproc_bench::{graph, spec};
use gproc_core::compiler::cluster;
use gproc_core::compiler::extract_topology;
use gproc_core::sim::reference_model;
use gproc_core::{compile, simulate, CompileOptions, KernelKind, MachineConfig, MappingMode};

fn bench_compile(c: &mut Criterion) {
    let mut group = c.benchmark_group("compile");
    for n in [64, 256] {
        let g = graph(n, 0.05, 1);
        let s = spec(KernelKind::Sssp, n);
        group.bench_with_input(BenchmarkId::new("cluster_k16", n), &g, |b, g| {
            b.iter(|| cluster(&extract_topology(&s, g), 16, 0.1).unwrap())
        });
        let opts = CompileOptions { mode: MappingMode::Cluster, k: 16, dims: (4, 4), epsilon: 0.1 };
        group.bench_with_input(BenchmarkId::new("full_4x4", n), &g, |b, g| b.iter(|| compile(&s, g, &opts).unwrap()));
    }
    group.finish();
}

fn bench_simulate(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    group.sample_size(10);
    let n = 128;
    let g = graph(n, 0.05, 2);
    let cfg = MachineConfig::default();
    for kind in KernelKind::ALL {
        let s = spec(kind, n);
        let app = compile(&s, &g, &CompileOptions { mode: MappingMode::Cluster, k: 16, dims: (4, 4), epsilon: 0.1 }).unwrap();
        group.bench_function(BenchmarkId::new("4x4_k16", kind), |b| b.iter(|| simulate(black_box(&app), &cfg).unwrap()));
    }
    group.finish();
}

fn bench_reference(c: &mut Criterion) {
    let g = graph(256, 0.05, 3);
    let cfg = MachineConfig::default();
    let s = spec(KernelKind::PageRank, 256);
    c.bench_function("reference_model/pr_256", |b| b.iter(|| reference_model(&s, black_box(&g), &cfg.latency, &cfg.memory)));
}

criterion_group!(benches, bench_compile, bench_simulate, bench_reference);
criterion_main!(benches);
