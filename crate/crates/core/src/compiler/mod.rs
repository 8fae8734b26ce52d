//! Preprocessing flow from a graph application to a loadable machine image:
//! topology extraction, clustering, cluster dependency analysis, placement
//! and code generation.

mod cluster;
mod codegen;
mod image;
mod place;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, VertexId};
use crate::isa::{NaleProgram, Port};
use crate::kernels::{KernelKind, KernelOutput, KernelSpec};

pub use cluster::cluster;
pub use codegen::{codegen, xy_step, FIXED_ONE, INF_WORD, TAG_IDLE, TAG_REDUCE};
pub use image::ImageError;
pub use place::{identity_placement, place, placement_cost};

pub type ClusterId = u32;

/// Row/column of a NALE in the array.
pub type Coord = (usize, usize);

#[derive(Debug, Error, PartialEq)]
pub enum CompileError {
    #[error("cluster count {k} must be in 1..={vertices}")]
    BadClusterCount { k: usize, vertices: usize },
    #[error("{clusters} clusters do not fit a {rows}x{cols} array")]
    Capacity { clusters: usize, rows: usize, cols: usize },
    #[error("node-level mapping needs one cluster per vertex ({vertices}), got {clusters}")]
    ModeMismatch { clusters: usize, vertices: usize },
    #[error("program for NALE ({row},{col}) has {len} instructions, above the 65536 limit")]
    ProgramTooLong { row: usize, col: usize, len: usize },
    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),
}

/// Task-to-element mapping granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MappingMode {
    /// One vertex per NALE.
    Node,
    /// Several vertices per NALE, cycled through the internal FIFO.
    Cluster,
}

impl fmt::Display for MappingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MappingMode::Node => "node",
            MappingMode::Cluster => "cluster",
        })
    }
}

impl FromStr for MappingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "node" => Ok(MappingMode::Node),
            "cluster" => Ok(MappingMode::Cluster),
            other => Err(format!("unknown mapping mode {other:?} (expected node or cluster)")),
        }
    }
}

/// Communication graph handed to the partitioner, with per-vertex work.
#[derive(Debug, Clone)]
pub struct ComputationGraph {
    pub graph: Graph,
    /// `degree(v) + 1` for every vertex.
    pub work: Vec<u64>,
}

/// Static topology extraction. Every supported kernel communicates along the
/// edges of its data graph, so the structure is the graph itself.
pub fn extract_topology(_kernel: &KernelSpec, g: &Graph) -> ComputationGraph {
    let work = (0..g.vertex_count() as VertexId).map(|v| g.degree(v) as u64 + 1).collect();
    ComputationGraph { graph: g.clone(), work }
}

/// Largest admissible cluster: `floor(ceil(V/k) * (1 + epsilon))`.
pub fn max_cluster_size(vertices: usize, k: usize, epsilon: f64) -> usize {
    let base = vertices.div_ceil(k);
    ((base as f64) * (1.0 + epsilon) + 1e-9).floor() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub cluster_of: Vec<ClusterId>,
    pub cluster_count: usize,
    pub balance_epsilon: f64,
}

impl Partition {
    /// Every vertex in its own cluster, cluster id = vertex id.
    pub fn singletons(vertices: usize) -> Self {
        Partition { cluster_of: (0..vertices as ClusterId).collect(), cluster_count: vertices, balance_epsilon: 0.0 }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.cluster_count];
        for &c in &self.cluster_of {
            s[c as usize] += 1;
        }
        s
    }

    /// Members of each cluster in ascending vertex order.
    pub fn members(&self) -> Vec<Vec<VertexId>> {
        let mut m = vec![Vec::new(); self.cluster_count];
        for (v, &c) in self.cluster_of.iter().enumerate() {
            m[c as usize].push(v as VertexId);
        }
        m
    }

    /// Logical edges whose endpoints lie in different clusters.
    pub fn cut(&self, g: &Graph) -> usize {
        let crossing = g.edges().filter(|&(u, v, _)| self.cluster_of[u as usize] != self.cluster_of[v as usize]).count();
        if g.is_directed() {
            crossing
        } else {
            crossing / 2
        }
    }

    /// Checks cover, non-empty clusters and the size bound.
    pub fn validate(&self, vertices: usize) -> Result<(), String> {
        if self.cluster_of.len() != vertices {
            return Err(format!("{} assignments for {} vertices", self.cluster_of.len(), vertices));
        }
        if self.cluster_count == 0 || self.cluster_count > vertices {
            return Err(format!("cluster count {} out of range", self.cluster_count));
        }
        if let Some(&c) = self.cluster_of.iter().find(|&&c| c as usize >= self.cluster_count) {
            return Err(format!("cluster id {c} >= {}", self.cluster_count));
        }
        let cap = max_cluster_size(vertices, self.cluster_count, self.balance_epsilon);
        for (c, &s) in self.sizes().iter().enumerate() {
            if s == 0 {
                return Err(format!("cluster {c} is empty"));
            }
            if s > cap {
                return Err(format!("cluster {c} has {s} vertices, bound is {cap}"));
            }
        }
        Ok(())
    }
}

/// Inter-cluster edge counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterGraph {
    pub cluster_count: usize,
    pub directed: bool,
    /// `(a, b) -> edges from a to b` for `a != b`. Undirected graphs store
    /// both orientations with the same count.
    pub weights: BTreeMap<(ClusterId, ClusterId), u64>,
    pub intra_edges: u64,
}

impl ClusterGraph {
    pub fn weight(&self, a: ClusterId, b: ClusterId) -> u64 {
        self.weights.get(&(a, b)).copied().unwrap_or(0)
    }

    /// Traffic between two clusters regardless of direction.
    pub fn pair_weight(&self, a: ClusterId, b: ClusterId) -> u64 {
        if a == b {
            return 0;
        }
        if self.directed {
            self.weight(a, b) + self.weight(b, a)
        } else {
            self.weight(a, b)
        }
    }

    /// Sum of pair weights over unordered pairs.
    pub fn inter_edges(&self) -> u64 {
        let total: u64 = self.weights.values().sum();
        if self.directed {
            total
        } else {
            total / 2
        }
    }

    pub fn total_weight(&self, a: ClusterId) -> u64 {
        (0..self.cluster_count as ClusterId).map(|b| self.pair_weight(a, b)).sum()
    }
}

/// Counts logical edges between each pair of distinct clusters.
pub fn cluster_dependency(g: &Graph, p: &Partition) -> ClusterGraph {
    let mut weights = BTreeMap::new();
    let mut intra = 0u64;
    for (u, v, _) in g.edges() {
        let (a, b) = (p.cluster_of[u as usize], p.cluster_of[v as usize]);
        if a == b {
            intra += 1;
        } else {
            *weights.entry((a, b)).or_insert(0) += 1;
        }
    }
    if !g.is_directed() {
        intra /= 2;
    }
    ClusterGraph { cluster_count: p.cluster_count, directed: g.is_directed(), weights, intra_edges: intra }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub coord_of: Vec<Coord>,
    pub dims: (usize, usize),
}

impl Placement {
    pub fn validate(&self) -> Result<(), String> {
        let (r, c) = self.dims;
        let mut seen = std::collections::BTreeSet::new();
        for (i, &(row, col)) in self.coord_of.iter().enumerate() {
            if row >= r || col >= c {
                return Err(format!("cluster {i} at ({row},{col}) outside {r}x{c}"));
            }
            if !seen.insert((row, col)) {
                return Err(format!("cell ({row},{col}) used twice"));
            }
        }
        Ok(())
    }
}

/// Initial state word for one vertex, scattered by the dispatch logic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DispatchEntry {
    pub vertex: VertexId,
    pub nale: usize,
    pub value: i32,
}

/// A result the output logic expects from a NALE, identified by its header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatherEntry {
    pub nale: usize,
    pub header: i32,
}

/// Loadable machine image.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledApp {
    pub kernel: KernelSpec,
    pub mode: MappingMode,
    pub dims: (usize, usize),
    pub vertex_count: usize,
    pub cluster_of: Vec<ClusterId>,
    pub coord_of: Vec<Coord>,
    /// Indexed by NALE id (`row * cols + col`); `None` for idle elements.
    pub programs: Vec<Option<NaleProgram>>,
    /// Per NALE: destination cluster -> next-hop port (XY order).
    pub routing: Vec<BTreeMap<ClusterId, Port>>,
    /// Dispatch manifest in scatter order (ascending vertex id).
    pub dispatch: Vec<DispatchEntry>,
    pub gather: Vec<GatherEntry>,
    /// Internal FIFO words needed by the largest cluster.
    pub fifo_words: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum OutputError {
    #[error("NALE {nale} returned unexpected header {header}")]
    Unexpected { nale: usize, header: i32 },
    #[error("missing result for header {header} from NALE {nale}")]
    Missing { nale: usize, header: i32 },
}

impl CompiledApp {
    pub fn cluster_count(&self) -> usize {
        self.coord_of.len()
    }

    pub fn nale_id(&self, (row, col): Coord) -> usize {
        row * self.dims.1 + col
    }

    pub fn coord(&self, nale: usize) -> Coord {
        (nale / self.dims.1, nale % self.dims.1)
    }

    /// NALEs that run a program and take part in host protocols.
    pub fn participants(&self) -> Vec<usize> {
        self.programs.iter().enumerate().filter(|(_, p)| p.is_some()).map(|(i, _)| i).collect()
    }

    /// Concatenated dispatch words in manifest order.
    pub fn dispatch_words(&self) -> Vec<(usize, i32)> {
        self.dispatch.iter().flat_map(|d| [(d.nale, d.vertex as i32), (d.nale, d.value)]).collect()
    }

    /// Turns gathered `(nale, header, value)` triples into the kernel result.
    pub fn decode_output(&self, gathered: &[(usize, i32, i32)]) -> Result<KernelOutput, OutputError> {
        let mut by_key: BTreeMap<(usize, i32), i32> = BTreeMap::new();
        for &(nale, header, value) in gathered {
            let expected = self.gather.iter().any(|g| g.nale == nale && g.header == header);
            if !expected || by_key.insert((nale, header), value).is_some() {
                return Err(OutputError::Unexpected { nale, header });
            }
        }
        let mut values = Vec::with_capacity(self.gather.len());
        for g in &self.gather {
            let v = by_key.get(&(g.nale, g.header)).ok_or(OutputError::Missing { nale: g.nale, header: g.header })?;
            values.push((g.header, *v));
        }
        let words = || {
            let mut out = vec![0i32; self.vertex_count];
            for &(h, v) in &values {
                out[h as usize] = v;
            }
            out
        };
        Ok(match self.kernel.kind {
            KernelKind::Sssp | KernelKind::Bfs => KernelOutput::Reach(
                words().into_iter().map(|v| if v == INF_WORD { None } else { Some(v as u64) }).collect(),
            ),
            KernelKind::Dfs => {
                KernelOutput::Reach(words().into_iter().map(|v| u64::try_from(v).ok()).collect())
            }
            KernelKind::Cc => KernelOutput::Labels(words().into_iter().map(|v| v as u32).collect()),
            KernelKind::PageRank => {
                KernelOutput::Ranks(words().into_iter().map(|v| v as f64 / FIXED_ONE as f64).collect())
            }
            KernelKind::MiniTri => KernelOutput::Count(values.iter().map(|&(_, v)| v as u32 as u64).sum()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompileOptions {
    pub mode: MappingMode,
    /// Cluster count; ignored (forced to V) in node mode.
    pub k: usize,
    pub dims: (usize, usize),
    pub epsilon: f64,
}

/// Runs the whole flow on the kernel's view of `g`.
pub fn compile(spec: &KernelSpec, g: &Graph, opts: &CompileOptions) -> Result<CompiledApp, CompileError> {
    let view = spec.view(g);
    let v = view.vertex_count();
    let k = match opts.mode {
        MappingMode::Node => v,
        MappingMode::Cluster => opts.k,
    };
    let (rows, cols) = opts.dims;
    if k > rows * cols {
        return Err(CompileError::Capacity { clusters: k, rows, cols });
    }
    let topo = extract_topology(spec, &view);
    let partition = match opts.mode {
        MappingMode::Node => Partition::singletons(v),
        MappingMode::Cluster => cluster(&topo, k, opts.epsilon)?,
    };
    let deps = cluster_dependency(&view, &partition);
    let placement = place(&deps, opts.dims)?;
    codegen(spec, &view, &partition, &placement, opts.mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path4() -> Graph {
        Graph::from_edges(4, &[(0, 1, 1), (1, 2, 1), (2, 3, 1)], false).unwrap()
    }

    #[test]
    fn topology_work_weights() {
        let star = Graph::from_edges(4, &[(0, 1, 1), (0, 2, 1), (0, 3, 1)], false).unwrap();
        let spec = crate::kernels::kernel_spec(KernelKind::Cc, Default::default(), 4).unwrap();
        let cg = extract_topology(&spec, &star);
        assert_eq!(cg.graph.vertex_count(), 4);
        assert_eq!(cg.work, vec![4, 2, 2, 2]);
        let iso = Graph::from_edges(2, &[], false).unwrap();
        assert_eq!(extract_topology(&spec, &iso).work, vec![1, 1]);
    }

    #[test]
    fn dependency_examples() {
        let g = path4();
        let one = Partition { cluster_of: vec![0; 4], cluster_count: 1, balance_epsilon: 0.0 };
        let d = cluster_dependency(&g, &one);
        assert!(d.weights.is_empty());
        assert_eq!(d.intra_edges, 3);
        let two = Partition { cluster_of: vec![0, 0, 1, 1], cluster_count: 2, balance_epsilon: 0.0 };
        let d = cluster_dependency(&g, &two);
        assert_eq!(d.pair_weight(0, 1), 1);
        assert_eq!(d.pair_weight(1, 0), 1);
        assert_eq!(d.inter_edges() + d.intra_edges, 3);
    }

    #[test]
    fn dependency_conservation_directed() {
        let g = crate::graph::random_graph(30, 0.2, (1, 1), 5, true).unwrap();
        let p = Partition { cluster_of: (0..30).map(|v| v % 4).collect(), cluster_count: 4, balance_epsilon: 0.0 };
        let d = cluster_dependency(&g, &p);
        let pairs: u64 = (0..4).flat_map(|a| (a + 1..4).map(move |b| (a, b))).map(|(a, b)| d.pair_weight(a, b)).sum();
        assert_eq!(pairs + d.intra_edges, g.logical_edge_count() as u64);
    }

    #[test]
    fn cluster_size_bound() {
        assert_eq!(max_cluster_size(4, 2, 0.0), 2);
        assert_eq!(max_cluster_size(10, 4, 0.0), 3);
        assert_eq!(max_cluster_size(10, 4, 0.5), 4);
        assert_eq!(max_cluster_size(64, 16, 0.1), 4);
    }

    #[test]
    fn partition_validation() {
        let bad = Partition { cluster_of: vec![0, 0, 0, 1], cluster_count: 2, balance_epsilon: 0.0 };
        assert!(bad.validate(4).is_err());
        let empty = Partition { cluster_of: vec![0, 0], cluster_count: 2, balance_epsilon: 1.0 };
        assert!(empty.validate(2).is_err());
        assert!(Partition::singletons(5).validate(5).is_ok());
    }

    #[test]
    fn capacity_error() {
        let spec = crate::kernels::kernel_spec(KernelKind::Cc, Default::default(), 4).unwrap();
        let opts = CompileOptions { mode: MappingMode::Cluster, k: 5, dims: (2, 2), epsilon: 0.0 };
        let g = Graph::from_edges(6, &[], false).unwrap();
        assert_eq!(compile(&spec, &g, &opts), Err(CompileError::Capacity { clusters: 5, rows: 2, cols: 2 }));
    }
}
