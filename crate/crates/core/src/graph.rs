//! Compressed adjacency graphs, SNAP-style edge-list ingestion and a seeded
//! Erdős–Rényi generator.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Dense vertex index in `[0, V)`.
pub type VertexId = u32;

/// Edge weight. Weights are non-negative integers.
pub type Weight = u32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: negative weight {weight}")]
    NegativeWeight { line: usize, weight: i64 },
    #[error("vertex {vertex} out of range (graph has {count} vertices)")]
    VertexOutOfRange { vertex: u64, count: usize },
    #[error("graph has no vertices")]
    Empty,
    #[error("invalid generator parameter: {0}")]
    InvalidParameter(String),
}

/// Weighted graph in CSR form.
///
/// Undirected graphs store every logical edge twice, once per direction.
/// Each adjacency row is sorted by target id; duplicates keep their input
/// order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<VertexId>,
    weights: Vec<Weight>,
    directed: bool,
    labels: Vec<u64>,
}

impl Graph {
    /// Builds a graph from stored edge records. For undirected graphs the
    /// caller passes each logical edge once; the reverse is added here.
    pub fn from_edges(
        vertex_count: usize,
        edges: &[(VertexId, VertexId, Weight)],
        directed: bool,
    ) -> Result<Self, GraphError> {
        let labels = (0..vertex_count as u64).collect();
        Self::build(vertex_count, edges, directed, labels)
    }

    fn build(
        vertex_count: usize,
        edges: &[(VertexId, VertexId, Weight)],
        directed: bool,
        labels: Vec<u64>,
    ) -> Result<Self, GraphError> {
        let mut records = Vec::with_capacity(if directed { edges.len() } else { 2 * edges.len() });
        for &(u, v, w) in edges {
            for x in [u, v] {
                if x as usize >= vertex_count {
                    return Err(GraphError::VertexOutOfRange { vertex: x as u64, count: vertex_count });
                }
            }
            records.push((u, v, w));
            if !directed {
                records.push((v, u, w));
            }
        }
        // Stable sort keeps duplicate order deterministic.
        records.sort_by_key(|&(u, v, _)| (u, v));

        let mut offsets = vec![0usize; vertex_count + 1];
        for &(u, _, _) in &records {
            offsets[u as usize + 1] += 1;
        }
        for i in 0..vertex_count {
            offsets[i + 1] += offsets[i];
        }
        let targets = records.iter().map(|r| r.1).collect();
        let weights = records.iter().map(|r| r.2).collect();
        Ok(Graph { offsets, targets, weights, directed, labels })
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of stored edge records (twice the logical count when undirected).
    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    /// Logical edge count: stored records for directed graphs, half of them
    /// for undirected graphs.
    pub fn logical_edge_count(&self) -> usize {
        if self.directed {
            self.edge_count()
        } else {
            self.edge_count() / 2
        }
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn targets(&self) -> &[VertexId] {
        &self.targets
    }

    pub fn weights(&self) -> &[Weight] {
        &self.weights
    }

    /// Original input label of each dense vertex id.
    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn label(&self, v: VertexId) -> u64 {
        self.labels[v as usize]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.offsets[v as usize + 1] - self.offsets[v as usize]
    }

    /// Checked neighbour lookup.
    pub fn neighbors(&self, v: VertexId) -> Result<Neighbors<'_>, GraphError> {
        if v as usize >= self.vertex_count() {
            return Err(GraphError::VertexOutOfRange { vertex: v as u64, count: self.vertex_count() });
        }
        Ok(self.adj(v))
    }

    /// Unchecked neighbour iteration; panics on out-of-range ids.
    pub fn adj(&self, v: VertexId) -> Neighbors<'_> {
        let range = self.offsets[v as usize]..self.offsets[v as usize + 1];
        Neighbors {
            targets: &self.targets[range.clone()],
            weights: &self.weights[range],
            pos: 0,
        }
    }

    /// Iterates over all stored edge records `(u, v, w)` in CSR order.
    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId, Weight)> + '_ {
        (0..self.vertex_count() as VertexId).flat_map(move |u| self.adj(u).map(move |(v, w)| (u, v, w)))
    }

    /// Removes self-loops and collapses parallel edges, keeping the minimum
    /// weight. Labels are kept.
    pub fn normalize(&self) -> Graph {
        let mut kept = Vec::with_capacity(self.edge_count());
        for u in 0..self.vertex_count() as VertexId {
            let mut last: Option<(VertexId, Weight)> = None;
            for (v, w) in self.adj(u) {
                if v == u {
                    continue;
                }
                match last {
                    Some((lv, lw)) if lv == v => last = Some((v, lw.min(w))),
                    Some(prev) => {
                        kept.push((u, prev.0, prev.1));
                        last = Some((v, w));
                    }
                    None => last = Some((v, w)),
                }
            }
            if let Some((v, w)) = last {
                kept.push((u, v, w));
            }
        }
        // Rows are already symmetric for undirected graphs, so rebuild as
        // directed records and restore the flag.
        let mut g = Graph::build(self.vertex_count(), &kept, true, self.labels.clone())
            .expect("normalized edges stay in range");
        g.directed = self.directed;
        g
    }

    /// Undirected view: for directed graphs every edge is mirrored, then
    /// normalized. Undirected graphs are only normalized.
    pub fn symmetrized(&self) -> Graph {
        if !self.directed {
            return self.normalize();
        }
        let edges: Vec<_> = self.edges().collect();
        let mut g = Graph::build(self.vertex_count(), &edges, false, self.labels.clone())
            .expect("edges stay in range");
        g = g.normalize();
        g
    }

    /// True when the graph has no self-loops and no parallel edges.
    pub fn is_simple(&self) -> bool {
        (0..self.vertex_count() as VertexId).all(|u| {
            let row = &self.targets[self.offsets[u as usize]..self.offsets[u as usize + 1]];
            row.iter().all(|&v| v != u) && row.windows(2).all(|p| p[0] != p[1])
        })
    }

    /// Serializes to the edge-list text format: LF line endings, "u v w" using
    /// the original labels, no comments. Undirected edges are written once.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let mut self_loop_seen: HashMap<(VertexId, Weight), usize> = HashMap::new();
        for (u, v, w) in self.edges() {
            let write = if self.directed {
                true
            } else if u == v {
                // Undirected self-loops are stored twice.
                let seen = self_loop_seen.entry((u, w)).or_insert(0);
                *seen += 1;
                *seen % 2 == 1
            } else {
                u < v
            };
            if write {
                let _ = writeln!(out, "{} {} {}", self.label(u), self.label(v), w);
            }
        }
        out
    }

    pub fn stats(&self) -> Result<GraphStats, GraphError> {
        graph_stats(self)
    }
}

/// Iterator over `(target, weight)` pairs of one adjacency row.
#[derive(Debug, Clone)]
pub struct Neighbors<'a> {
    targets: &'a [VertexId],
    weights: &'a [Weight],
    pos: usize,
}

impl Iterator for Neighbors<'_> {
    type Item = (VertexId, Weight);

    fn next(&mut self) -> Option<Self::Item> {
        let i = self.pos;
        if i >= self.targets.len() {
            return None;
        }
        self.pos += 1;
        Some((self.targets[i], self.weights[i]))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.targets.len() - self.pos;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Neighbors<'_> {}

/// Parses a SNAP-style edge list.
///
/// Lines starting with `#` are comments; data lines are `u v` or `u v w`.
/// Labels are remapped to dense ids in order of first appearance.
pub fn parse_edge_list(text: &str, directed: bool) -> Result<Graph, GraphError> {
    let mut ids: HashMap<u64, VertexId> = HashMap::new();
    let mut labels = Vec::new();
    let mut edges = Vec::new();
    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw).trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() < 2 || tokens.len() > 3 {
            return Err(GraphError::Parse {
                line: line_no,
                reason: format!("expected 2 or 3 tokens, found {}", tokens.len()),
            });
        }
        let mut endpoint = |tok: &str| -> Result<VertexId, GraphError> {
            let label: u64 = tok.parse().map_err(|_| GraphError::Parse {
                line: line_no,
                reason: format!("invalid vertex label {tok:?}"),
            })?;
            let next = labels.len() as VertexId;
            Ok(*ids.entry(label).or_insert_with(|| {
                labels.push(label);
                next
            }))
        };
        let u = endpoint(tokens[0])?;
        let v = endpoint(tokens[1])?;
        let w = match tokens.get(2) {
            None => 1,
            Some(tok) => {
                let w: i64 = tok.parse().map_err(|_| GraphError::Parse {
                    line: line_no,
                    reason: format!("invalid weight {tok:?}"),
                })?;
                if w < 0 {
                    return Err(GraphError::NegativeWeight { line: line_no, weight: w });
                }
                Weight::try_from(w).map_err(|_| GraphError::Parse {
                    line: line_no,
                    reason: format!("weight {w} exceeds 32 bits"),
                })?
            }
        };
        edges.push((u, v, w));
    }
    Graph::build(labels.len(), &edges, directed, labels)
}

/// Vertex/edge counts with the exact average degree `edges / vertices`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphStats {
    pub vertices: u64,
    pub edges: u64,
}

impl GraphStats {
    pub fn new(vertices: u64, edges: u64) -> Result<Self, GraphError> {
        if vertices == 0 {
            return Err(GraphError::Empty);
        }
        Ok(GraphStats { vertices, edges })
    }

    pub fn avg_degree(&self) -> f64 {
        self.edges as f64 / self.vertices as f64
    }

    /// Average degree rounded half-up to `decimals` places, computed exactly
    /// on the integer ratio.
    pub fn format_avg_degree(&self, decimals: u32) -> String {
        let scale = 10u128.pow(decimals);
        let num = self.edges as u128 * scale;
        let den = self.vertices as u128;
        let rounded = (2 * num + den) / (2 * den);
        if decimals == 0 {
            return rounded.to_string();
        }
        format!("{}.{:0width$}", rounded / scale, rounded % scale, width = decimals as usize)
    }
}

pub fn graph_stats(g: &Graph) -> Result<GraphStats, GraphError> {
    GraphStats::new(g.vertex_count() as u64, g.logical_edge_count() as u64)
}

/// Seeded G(n, p) with integer weights uniform in `[lo, hi]`.
///
/// Uses ChaCha8 seeded through `seed_from_u64`. Candidate pairs are visited
/// in lexicographic order (`u < v` when undirected, all `u != v` when
/// directed); each draws one `f64` for the coin and, on success, one weight.
pub fn random_graph(
    n: usize,
    p: f64,
    weight_range: (Weight, Weight),
    seed: u64,
    directed: bool,
) -> Result<Graph, GraphError> {
    if n == 0 {
        return Err(GraphError::InvalidParameter("n must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(GraphError::InvalidParameter(format!("p = {p} not in [0, 1]")));
    }
    let (lo, hi) = weight_range;
    if lo > hi {
        return Err(GraphError::InvalidParameter(format!("weight range [{lo}, {hi}] is empty")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n as VertexId {
        for v in 0..n as VertexId {
            if u == v || (!directed && v < u) {
                continue;
            }
            if rng.gen::<f64>() < p {
                edges.push((u, v, rng.gen_range(lo..=hi)));
            }
        }
    }
    Graph::from_edges(n, &edges, directed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_plain_directed_list() {
        let g = parse_edge_list("0 1\n1 2\n", true).unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.weights(), &[1, 1]);
    }

    #[test]
    fn remaps_labels_and_skips_comments() {
        let g = parse_edge_list("# c\n5 9 3\n", true).unwrap();
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(g.labels(), &[5, 9]);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1, 3)]);
    }

    #[test]
    fn keeps_duplicates() {
        let g = parse_edge_list("0 1\n1 0\n0 1\n", true).unwrap();
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(g.edge_count(), 3);
    }

    #[test]
    fn accepts_crlf() {
        let g = parse_edge_list("0 1 2\r\n1 2 3\r\n", false).unwrap();
        assert_eq!(g.edge_count(), 4);
        assert_eq!(g.logical_edge_count(), 2);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        assert_eq!(
            parse_edge_list("0 1\nx 2\n", true).unwrap_err(),
            GraphError::Parse { line: 2, reason: "invalid vertex label \"x\"".into() }
        );
        assert!(matches!(parse_edge_list("# a\n7\n", true), Err(GraphError::Parse { line: 2, .. })));
        assert_eq!(
            parse_edge_list("0 1 -3\n", true).unwrap_err(),
            GraphError::NegativeWeight { line: 1, weight: -3 }
        );
        assert!(matches!(parse_edge_list("-1 2\n", true), Err(GraphError::Parse { line: 1, .. })));
    }

    #[test]
    fn stats_match_dataset_figures() {
        let ca = GraphStats::new(1_965_206, 2_766_607).unwrap();
        assert!((ca.avg_degree() - 1.4078).abs() < 1e-4);
        assert_eq!(ca.format_avg_degree(2), "1.41");
        let fb = GraphStats::new(2_937_612, 41_919_708).unwrap();
        assert!((fb.avg_degree() - 14.269).abs() < 1e-3);
        assert_eq!(fb.format_avg_degree(1), "14.3");
        let empty = GraphStats::new(4, 0).unwrap();
        assert_eq!(empty.avg_degree(), 0.0);
        assert_eq!(empty.format_avg_degree(2), "0.00");
        assert_eq!(GraphStats::new(0, 0), Err(GraphError::Empty));
    }

    #[test]
    fn neighbors_of_small_graphs() {
        let path = Graph::from_edges(3, &[(0, 1, 1), (1, 2, 1)], false).unwrap();
        assert_eq!(path.neighbors(1).unwrap().collect::<Vec<_>>(), vec![(0, 1), (2, 1)]);
        let iso = Graph::from_edges(2, &[], false).unwrap();
        assert_eq!(iso.neighbors(1).unwrap().count(), 0);
        let star = Graph::from_edges(4, &[(0, 1, 1), (0, 2, 1), (0, 3, 1)], false).unwrap();
        assert_eq!(star.neighbors(0).unwrap().len(), 3);
        assert!(matches!(star.neighbors(4), Err(GraphError::VertexOutOfRange { vertex: 4, .. })));
    }

    #[test]
    fn random_graph_edge_cases() {
        assert_eq!(random_graph(5, 0.0, (1, 1), 3, false).unwrap().edge_count(), 0);
        let k4 = random_graph(4, 1.0, (1, 10), 3, false).unwrap();
        assert_eq!(k4.logical_edge_count(), 6);
        assert_eq!(k4.edge_count(), 12);
        let a = random_graph(16, 0.25, (1, 10), 7, false).unwrap();
        let b = random_graph(16, 0.25, (1, 10), 7, false).unwrap();
        assert_eq!(a, b);
        assert!(random_graph(0, 0.5, (1, 1), 0, false).is_err());
        assert!(random_graph(3, 1.5, (1, 1), 0, false).is_err());
    }

    #[test]
    fn normalize_drops_loops_and_keeps_min_weight() {
        let g = parse_edge_list("0 1 5\n0 1 2\n1 1 4\n1 2 3\n", false).unwrap();
        let n = g.normalize();
        assert!(n.is_simple());
        assert_eq!(n.edges().collect::<Vec<_>>(), vec![(0, 1, 2), (1, 0, 2), (1, 2, 3), (2, 1, 3)]);
        assert!(!n.is_directed());
    }

    #[test]
    fn symmetrized_directed_graph() {
        let g = Graph::from_edges(3, &[(0, 1, 4), (1, 0, 2), (2, 1, 1)], true).unwrap();
        let s = g.symmetrized();
        assert!(!s.is_directed());
        assert_eq!(s.adj(1).collect::<Vec<_>>(), vec![(0, 2), (2, 1)]);
    }

    fn sorted_labelled(g: &Graph) -> Vec<(u64, u64, Weight)> {
        let mut e: Vec<_> = g.edges().map(|(u, v, w)| (g.label(u), g.label(v), w)).collect();
        e.sort_unstable();
        e
    }

    proptest! {
        #[test]
        fn edge_list_round_trip(n in 1usize..24, p in 0.0f64..1.0, seed: u64, directed: bool) {
            let g = random_graph(n, p, (0, 9), seed, directed).unwrap();
            let text = g.to_edge_list();
            let back = parse_edge_list(&text, directed).unwrap();
            let isolated = (0..n as VertexId).filter(|&v| g.degree(v) == 0
                && g.edges().all(|(_, t, _)| t != v)).count();
            prop_assert_eq!(back.vertex_count(), n - isolated);
            prop_assert_eq!(sorted_labelled(&back), sorted_labelled(&g));
        }

        #[test]
        fn csr_consistent_and_symmetric(n in 1usize..32, p in 0.0f64..1.0, seed: u64) {
            let g = random_graph(n, p, (1, 10), seed, false).unwrap();
            let total: usize = (0..n as VertexId).map(|v| g.adj(v).len()).sum();
            prop_assert_eq!(total, g.edge_count());
            prop_assert_eq!(g.offsets()[0], 0);
            prop_assert!(g.offsets().windows(2).all(|w| w[0] <= w[1]));
            for (u, v, w) in g.edges() {
                prop_assert!(g.adj(v).any(|(x, xw)| x == u && xw == w));
            }
        }
    }
}
