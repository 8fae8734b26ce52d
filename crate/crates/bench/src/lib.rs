//! Shared fixtures for the criterion benches.

use gproc_core::{kernel_spec, random_graph, Graph, KernelKind, KernelParams, KernelSpec};

/// Seeded undirected G(n, p) with weights 1..=10.
pub fn graph(n: usize, p: f64, seed: u64) -> Graph {
    random_graph(n, p, (1, 10), seed, false).expect("valid generator parameters")
}

pub fn spec(kind: KernelKind, vertices: usize) -> KernelSpec {
    kernel_spec(kind, KernelParams { source: Some(0), iterations: Some(10), ..Default::default() }, vertices)
        .expect("valid kernel parameters")
}
