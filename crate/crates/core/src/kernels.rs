//! The six graph kernels: validated specifications and sequential oracles.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, VertexId};

pub const DEFAULT_DAMPING: f64 = 0.85;
pub const DEFAULT_ITERATIONS: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Sssp,
    Bfs,
    Dfs,
    #[serde(rename = "pr")]
    PageRank,
    #[serde(rename = "minitri")]
    MiniTri,
    Cc,
}

impl KernelKind {
    pub const ALL: [KernelKind; 6] =
        [KernelKind::Sssp, KernelKind::Bfs, KernelKind::Dfs, KernelKind::PageRank, KernelKind::MiniTri, KernelKind::Cc];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Sssp => "sssp",
            KernelKind::Bfs => "bfs",
            KernelKind::Dfs => "dfs",
            KernelKind::PageRank => "pr",
            KernelKind::MiniTri => "minitri",
            KernelKind::Cc => "cc",
        }
    }

    pub fn needs_source(self) -> bool {
        matches!(self, KernelKind::Sssp | KernelKind::Bfs | KernelKind::Dfs)
    }

    /// Whether the kernel treats its input as undirected.
    pub fn symmetric(self) -> bool {
        matches!(self, KernelKind::Cc | KernelKind::MiniTri)
    }

    pub fn output_schema(self) -> OutputSchema {
        match self {
            KernelKind::MiniTri => OutputSchema::Scalar,
            _ => OutputSchema::PerVertex,
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        KernelKind::ALL
            .iter()
            .copied()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| KernelError::UnknownKernel(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputSchema {
    PerVertex,
    Scalar,
}

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("unknown kernel {0:?} (expected sssp, bfs, dfs, pr, minitri or cc)")]
    UnknownKernel(String),
    #[error("{kernel} needs a source vertex")]
    MissingSource { kernel: KernelKind },
    #[error("source {vertex} out of range for {vertices} vertices")]
    SourceOutOfRange { vertex: VertexId, vertices: usize },
    #[error("damping {0} not in (0, 1)")]
    BadDamping(f64),
    #[error("iteration count must be at least 1")]
    BadIterations,
}

/// Caller-supplied kernel parameters; irrelevant fields are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KernelParams {
    pub source: Option<VertexId>,
    pub damping: Option<f64>,
    pub iterations: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub source: Option<VertexId>,
    pub damping: f64,
    pub iterations: u32,
}

/// Validates parameters against the graph size.
pub fn kernel_spec(kind: KernelKind, params: KernelParams, vertex_count: usize) -> Result<KernelSpec, KernelError> {
    let source = if kind.needs_source() {
        let s = params.source.ok_or(KernelError::MissingSource { kernel: kind })?;
        if s as usize >= vertex_count {
            return Err(KernelError::SourceOutOfRange { vertex: s, vertices: vertex_count });
        }
        Some(s)
    } else {
        None
    };
    let damping = params.damping.unwrap_or(DEFAULT_DAMPING);
    let iterations = params.iterations.unwrap_or(DEFAULT_ITERATIONS);
    if kind == KernelKind::PageRank {
        if !(damping > 0.0 && damping < 1.0) {
            return Err(KernelError::BadDamping(damping));
        }
        if iterations == 0 {
            return Err(KernelError::BadIterations);
        }
    }
    Ok(KernelSpec { kind, source, damping, iterations })
}

impl KernelSpec {
    pub fn output_schema(&self) -> OutputSchema {
        self.kind.output_schema()
    }

    /// The graph the kernel actually runs on: normalized, and symmetrized for
    /// kernels that treat edges as undirected.
    pub fn view(&self, g: &Graph) -> Graph {
        if self.kind.symmetric() {
            g.symmetrized()
        } else {
            g.normalize()
        }
    }
}

/// Kernel result in the shape of its output schema.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelOutput {
    /// SSSP distances, BFS levels or DFS preorder indices; `None` when the
    /// vertex is unreachable from the source.
    Reach(Vec<Option<u64>>),
    /// Connected-component labels.
    Labels(Vec<u32>),
    Ranks(Vec<f64>),
    Count(u64),
}

impl KernelOutput {
    /// One `(vertex, value)` string pair per vertex, or a single row for scalars.
    pub fn rows(&self) -> Vec<(Option<usize>, String)> {
        match self {
            KernelOutput::Reach(v) => v
                .iter()
                .enumerate()
                .map(|(i, x)| (Some(i), x.map_or_else(|| "unreachable".to_string(), |d| d.to_string())))
                .collect(),
            KernelOutput::Labels(v) => v.iter().enumerate().map(|(i, x)| (Some(i), x.to_string())).collect(),
            KernelOutput::Ranks(v) => v.iter().enumerate().map(|(i, x)| (Some(i), format!("{x:.9}"))).collect(),
            KernelOutput::Count(c) => vec![(None, c.to_string())],
        }
    }
}

pub fn oracle_sssp(g: &Graph, source: VertexId) -> Vec<Option<u64>> {
    let n = g.vertex_count();
    let mut dist: Vec<Option<u64>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    dist[source as usize] = Some(0);
    heap.push(Reverse((0u64, source)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if dist[u as usize] != Some(d) {
            continue;
        }
        for (v, w) in g.adj(u) {
            let nd = d + w as u64;
            if dist[v as usize].is_none_or(|old| nd < old) {
                dist[v as usize] = Some(nd);
                heap.push(Reverse((nd, v)));
            }
        }
    }
    dist
}

pub fn oracle_bfs(g: &Graph, source: VertexId) -> Vec<Option<u64>> {
    let mut level: Vec<Option<u64>> = vec![None; g.vertex_count()];
    let mut queue = VecDeque::from([source]);
    level[source as usize] = Some(0);
    while let Some(u) = queue.pop_front() {
        let next = level[u as usize].unwrap() + 1;
        for (v, _) in g.adj(u) {
            if level[v as usize].is_none() {
                level[v as usize] = Some(next);
                queue.push_back(v);
            }
        }
    }
    level
}

/// Preorder discovery index of a recursive DFS that visits neighbours in
/// ascending id order.
pub fn oracle_dfs(g: &Graph, source: VertexId) -> Vec<Option<u64>> {
    let mut index: Vec<Option<u64>> = vec![None; g.vertex_count()];
    let mut next = 0u64;
    // Explicit stack of (vertex, position in its adjacency row).
    let mut stack = vec![(source, 0usize)];
    index[source as usize] = Some(next);
    next += 1;
    while let Some(top) = stack.last_mut() {
        let (u, pos) = *top;
        let row = &g.targets()[g.offsets()[u as usize]..g.offsets()[u as usize + 1]];
        if pos == row.len() {
            stack.pop();
            continue;
        }
        top.1 += 1;
        let v = row[pos];
        if index[v as usize].is_none() {
            index[v as usize] = Some(next);
            next += 1;
            stack.push((v, 0));
        }
    }
    index
}

/// Synchronous power iteration from the uniform vector, redistributing the
/// rank of dangling vertices uniformly, for exactly `iterations` rounds.
pub fn oracle_pagerank(g: &Graph, damping: f64, iterations: u32) -> Vec<f64> {
    let n = g.vertex_count();
    let nf = n as f64;
    let mut rank = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    for _ in 0..iterations {
        next.iter_mut().for_each(|x| *x = 0.0);
        let mut dangling = 0.0;
        for u in 0..n as VertexId {
            let deg = g.degree(u);
            if deg == 0 {
                dangling += rank[u as usize];
                continue;
            }
            let share = rank[u as usize] / deg as f64;
            for (v, _) in g.adj(u) {
                next[v as usize] += share;
            }
        }
        let base = (1.0 - damping) / nf + damping * dangling / nf;
        for (r, acc) in rank.iter_mut().zip(&next) {
            *r = base + damping * acc;
        }
    }
    rank
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n as u32).collect() }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    /// Links the larger root under the smaller, so roots are component minima.
    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Component label = minimum vertex id in the (weakly) connected component.
pub fn oracle_cc(g: &Graph) -> Vec<u32> {
    let n = g.vertex_count();
    let mut ds = DisjointSet::new(n);
    for (u, v, _) in g.edges() {
        ds.union(u, v);
    }
    (0..n as u32).map(|v| ds.find(v)).collect()
}

/// Number of triangles in the underlying simple undirected graph.
pub fn oracle_minitri(g: &Graph) -> u64 {
    let s = g.symmetrized();
    let mut count = 0;
    for u in 0..s.vertex_count() as VertexId {
        let higher: Vec<VertexId> = s.adj(u).map(|(v, _)| v).filter(|&v| v > u).collect();
        for (i, &v) in higher.iter().enumerate() {
            let mut row = s.adj(v).map(|(x, _)| x).filter(|&x| x > v).peekable();
            for &w in &higher[i + 1..] {
                while row.next_if(|&x| x < w).is_some() {}
                if row.peek() == Some(&w) {
                    count += 1;
                }
            }
        }
    }
    count
}

/// Runs the oracle matching `spec`.
pub fn oracle(spec: &KernelSpec, g: &Graph) -> KernelOutput {
    let view = spec.view(g);
    match spec.kind {
        KernelKind::Sssp => KernelOutput::Reach(oracle_sssp(&view, spec.source.unwrap())),
        KernelKind::Bfs => KernelOutput::Reach(oracle_bfs(&view, spec.source.unwrap())),
        KernelKind::Dfs => KernelOutput::Reach(oracle_dfs(&view, spec.source.unwrap())),
        KernelKind::PageRank => KernelOutput::Ranks(oracle_pagerank(&view, spec.damping, spec.iterations)),
        KernelKind::MiniTri => KernelOutput::Count(oracle_minitri(&view)),
        KernelKind::Cc => KernelOutput::Labels(oracle_cc(&view)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::random_graph;

    fn path(weights: &[u32]) -> Graph {
        let edges: Vec<_> = weights.iter().enumerate().map(|(i, &w)| (i as u32, i as u32 + 1, w)).collect();
        Graph::from_edges(weights.len() + 1, &edges, false).unwrap()
    }

    fn complete(n: u32) -> Graph {
        let mut e = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                e.push((u, v, 1));
            }
        }
        Graph::from_edges(n as usize, &e, false).unwrap()
    }

    #[test]
    fn sssp_examples() {
        assert_eq!(oracle_sssp(&path(&[4, 3]), 0), vec![Some(0), Some(4), Some(7)]);
        let g = Graph::from_edges(3, &[(0, 1, 2)], false).unwrap();
        let d = oracle_sssp(&g, 1);
        assert_eq!(d[1], Some(0));
        assert_eq!(d[2], None);
    }

    #[test]
    fn bfs_examples() {
        let star = Graph::from_edges(4, &[(0, 1, 5), (0, 2, 5), (0, 3, 5)], false).unwrap();
        assert_eq!(oracle_bfs(&star, 0), vec![Some(0), Some(1), Some(1), Some(1)]);
        assert_eq!(oracle_bfs(&path(&[1, 1, 1]), 0), vec![Some(0), Some(1), Some(2), Some(3)]);
    }

    #[test]
    fn bfs_is_unit_weight_sssp() {
        for seed in 0..20 {
            let g = random_graph(30, 0.1, (1, 1), seed, seed % 2 == 0).unwrap();
            assert_eq!(oracle_bfs(&g, 0), oracle_sssp(&g, 0));
        }
    }

    #[test]
    fn dfs_examples() {
        assert_eq!(oracle_dfs(&path(&[1, 1]), 0), vec![Some(0), Some(1), Some(2)]);
        assert_eq!(oracle_dfs(&complete(3), 0), vec![Some(0), Some(1), Some(2)]);
        let g = Graph::from_edges(3, &[(0, 1, 1)], false).unwrap();
        assert_eq!(oracle_dfs(&g, 0)[2], None);
        // 0-2, 0-1, 1-3, 3-2: recursion goes 0,1,3,2.
        let g = Graph::from_edges(4, &[(0, 2, 1), (0, 1, 1), (1, 3, 1), (3, 2, 1)], false).unwrap();
        assert_eq!(oracle_dfs(&g, 0), vec![Some(0), Some(1), Some(3), Some(2)]);
    }

    fn recursive_dfs(g: &Graph, u: u32, idx: &mut Vec<Option<u64>>, next: &mut u64) {
        idx[u as usize] = Some(*next);
        *next += 1;
        for (v, _) in g.adj(u) {
            if idx[v as usize].is_none() {
                recursive_dfs(g, v, idx, next);
            }
        }
    }

    #[test]
    fn dfs_matches_recursive_definition() {
        for seed in 0..30 {
            let g = random_graph(25, 0.15, (1, 1), seed, seed % 3 == 0).unwrap();
            let mut idx = vec![None; 25];
            recursive_dfs(&g, 0, &mut idx, &mut 0);
            assert_eq!(oracle_dfs(&g, 0), idx);
        }
    }

    #[test]
    fn pagerank_examples() {
        let single = Graph::from_edges(1, &[], true).unwrap();
        assert_eq!(oracle_pagerank(&single, 0.85, 10), vec![1.0]);
        let two = Graph::from_edges(2, &[(0, 1, 1), (1, 0, 1)], true).unwrap();
        for r in oracle_pagerank(&two, 0.6, 7) {
            assert!((r - 0.5).abs() < 1e-12);
        }
        let tri = Graph::from_edges(3, &[(0, 1, 1), (1, 2, 1), (2, 0, 1)], true).unwrap();
        for r in oracle_pagerank(&tri, 0.85, 50) {
            assert!((r - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pagerank_sums_to_one() {
        for seed in 0..20 {
            let g = random_graph(40, 0.08, (1, 1), seed, true).unwrap();
            let s: f64 = oracle_pagerank(&g, 0.85, 100).iter().sum();
            assert!((s - 1.0).abs() < 1e-9, "sum {s}");
        }
    }

    #[test]
    fn cc_examples() {
        let g = Graph::from_edges(4, &[(0, 1, 1), (2, 3, 1)], false).unwrap();
        assert_eq!(oracle_cc(&g), vec![0, 0, 2, 2]);
        assert_eq!(oracle_cc(&complete(5)), vec![0; 5]);
        assert_eq!(oracle_cc(&Graph::from_edges(3, &[], false).unwrap()), vec![0, 1, 2]);
        let directed = Graph::from_edges(3, &[(2, 1, 1)], true).unwrap();
        assert_eq!(oracle_cc(&directed), vec![0, 1, 1]);
    }

    fn brute_force_triangles(g: &Graph) -> u64 {
        let s = g.symmetrized();
        let n = s.vertex_count() as u32;
        let adj = |a: u32, b: u32| s.adj(a).any(|(x, _)| x == b);
        let mut c = 0;
        for a in 0..n {
            for b in a + 1..n {
                for d in b + 1..n {
                    if adj(a, b) && adj(b, d) && adj(a, d) {
                        c += 1;
                    }
                }
            }
        }
        c
    }

    #[test]
    fn minitri_examples() {
        assert_eq!(oracle_minitri(&complete(3)), 1);
        assert_eq!(oracle_minitri(&complete(4)), 4);
        let g = random_graph(8, 0.5, (1, 1), 11, false).unwrap();
        let expected = brute_force_triangles(&g);
        assert_eq!(oracle_minitri(&g), expected);
        for seed in 0..25 {
            let g = random_graph(20, 0.3, (1, 1), seed, seed % 2 == 1).unwrap();
            assert_eq!(oracle_minitri(&g), brute_force_triangles(&g));
        }
    }

    #[test]
    fn spec_validation() {
        let pr = kernel_spec(
            KernelKind::PageRank,
            KernelParams { damping: Some(0.85), iterations: Some(100), ..Default::default() },
            10,
        )
        .unwrap();
        assert_eq!(pr.iterations, 100);
        assert_eq!(
            kernel_spec(KernelKind::Sssp, KernelParams { source: Some(10), ..Default::default() }, 10),
            Err(KernelError::SourceOutOfRange { vertex: 10, vertices: 10 })
        );
        let tri = kernel_spec(KernelKind::MiniTri, KernelParams::default(), 10).unwrap();
        assert_eq!(tri.output_schema(), OutputSchema::Scalar);
        assert!(kernel_spec(KernelKind::PageRank, KernelParams { damping: Some(1.0), ..Default::default() }, 3)
            .is_err());
        assert_eq!("PR".parse::<KernelKind>().unwrap(), KernelKind::PageRank);
    }
}
