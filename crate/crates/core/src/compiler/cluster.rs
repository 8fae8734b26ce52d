//! Multilevel balanced k-way clustering.
//!
//! 1. Coarsen by heavy-edge matching until at most `max(2k, 64)` nodes remain
//!    or matching stops shrinking the graph. Matches never exceed the cluster
//!    size bound.
//! 2. Grow `k` clusters on the coarsest level: each starts at the
//!    highest-degree unassigned node and absorbs nodes in BFS order up to its
//!    target size. If the coarse node sizes cannot be packed, the level is
//!    discarded and growth retries one level finer; the finest level always
//!    succeeds.
//! 3. Project to vertices and make one boundary-refinement pass, moving a
//!    vertex when that strictly lowers the cut without breaking the bound.
//!
//! Ties go to the lowest id everywhere.

use std::collections::VecDeque;

use super::{max_cluster_size, ClusterId, CompileError, ComputationGraph, Partition};
use crate::graph::VertexId;

struct Level {
    /// Sorted `(neighbour, edge weight)` lists, no self entries.
    adj: Vec<Vec<(usize, u64)>>,
    size: Vec<usize>,
    work: Vec<u64>,
}

impl Level {
    fn len(&self) -> usize {
        self.adj.len()
    }
}

fn finest_level(cg: &ComputationGraph) -> Level {
    let s = cg.graph.symmetrized();
    let adj = (0..s.vertex_count() as VertexId).map(|u| s.adj(u).map(|(v, _)| (v as usize, 1)).collect()).collect();
    Level { adj, size: vec![1; s.vertex_count()], work: cg.work.clone() }
}

/// Heavy-edge matching; returns the coarse level and the fine->coarse map.
fn coarsen(level: &Level, cap: usize) -> (Level, Vec<usize>) {
    let n = level.len();
    let mut map = vec![usize::MAX; n];
    let mut next = 0;
    for u in 0..n {
        if map[u] != usize::MAX {
            continue;
        }
        let mut best: Option<(usize, u64)> = None;
        for &(v, w) in &level.adj[u] {
            if map[v] != usize::MAX || level.size[u] + level.size[v] > cap {
                continue;
            }
            if best.is_none_or(|(_, bw)| w > bw) {
                best = Some((v, w));
            }
        }
        map[u] = next;
        if let Some((v, _)) = best {
            map[v] = next;
        }
        next += 1;
    }

    let mut size = vec![0; next];
    let mut work = vec![0; next];
    let mut adj: Vec<Vec<(usize, u64)>> = vec![Vec::new(); next];
    for u in 0..n {
        let cu = map[u];
        size[cu] += level.size[u];
        work[cu] += level.work[u];
        for &(v, w) in &level.adj[u] {
            let cv = map[v];
            if cv != cu {
                adj[cu].push((cv, w));
            }
        }
    }
    for row in &mut adj {
        row.sort_unstable();
        let mut merged: Vec<(usize, u64)> = Vec::with_capacity(row.len());
        for &(v, w) in row.iter() {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += w,
                _ => merged.push((v, w)),
            }
        }
        *row = merged;
    }
    (Level { adj, size, work }, map)
}

fn highest_degree_unassigned(level: &Level, assigned: &[Option<ClusterId>], tried: &[bool]) -> Option<usize> {
    (0..level.len())
        .filter(|&x| assigned[x].is_none() && !tried[x])
        .max_by(|&a, &b| level.adj[a].len().cmp(&level.adj[b].len()).then(b.cmp(&a)))
}

/// Grows `k` clusters on one level; `None` when the node sizes do not pack.
fn grow(level: &Level, k: usize, cap: usize) -> Option<Vec<ClusterId>> {
    let n = level.len();
    if n < k {
        return None;
    }
    let mut assigned: Vec<Option<ClusterId>> = vec![None; n];
    let mut unassigned_nodes = n;
    let mut remaining: usize = level.size.iter().sum();
    for c in 0..k {
        let clusters_left = k - c;
        if c == k - 1 {
            if remaining > cap || unassigned_nodes == 0 {
                return None;
            }
            for a in assigned.iter_mut().filter(|a| a.is_none()) {
                *a = Some(c as ClusterId);
            }
            break;
        }
        let target = remaining.div_ceil(clusters_left);
        let mut size = 0;
        let mut tried = vec![false; n];
        let mut queue = VecDeque::new();
        while size < target {
            let Some(x) = queue.pop_front().or_else(|| {
                let seed = highest_degree_unassigned(level, &assigned, &tried)?;
                tried[seed] = true;
                Some(seed)
            }) else {
                break;
            };
            if assigned[x].is_some() {
                continue;
            }
            // Leave at least one node for every cluster still to grow.
            if size + level.size[x] > cap || unassigned_nodes <= clusters_left - 1 {
                continue;
            }
            assigned[x] = Some(c as ClusterId);
            size += level.size[x];
            unassigned_nodes -= 1;
            for &(y, _) in &level.adj[x] {
                if assigned[y].is_none() && !tried[y] {
                    tried[y] = true;
                    queue.push_back(y);
                }
            }
        }
        if size == 0 {
            return None;
        }
        remaining -= size;
    }
    Some(assigned.into_iter().map(|a| a.expect("all nodes assigned")).collect())
}

/// One pass over vertices in ascending order.
fn refine(level: &Level, cluster_of: &mut [ClusterId], k: usize, cap: usize) {
    let mut sizes = vec![0usize; k];
    for &c in cluster_of.iter() {
        sizes[c as usize] += 1;
    }
    let mut conn = vec![0u64; k];
    for v in 0..level.len() {
        let own = cluster_of[v] as usize;
        if sizes[own] <= 1 {
            continue;
        }
        for &(u, w) in &level.adj[v] {
            conn[cluster_of[u] as usize] += w;
        }
        let mut best: Option<(usize, u64)> = None;
        for &(u, _) in &level.adj[v] {
            let t = cluster_of[u] as usize;
            if t == own || sizes[t] + 1 > cap || conn[t] <= conn[own] {
                continue;
            }
            if best.is_none_or(|(bt, bc)| conn[t] > bc || (conn[t] == bc && t < bt)) {
                best = Some((t, conn[t]));
            }
        }
        for &(u, _) in &level.adj[v] {
            conn[cluster_of[u] as usize] = 0;
        }
        if let Some((t, _)) = best {
            sizes[own] -= 1;
            sizes[t] += 1;
            cluster_of[v] = t as ClusterId;
        }
    }
}

/// Partitions the computation graph into `k` balanced clusters with a small
/// cut.
pub fn cluster(cg: &ComputationGraph, k: usize, epsilon: f64) -> Result<Partition, CompileError> {
    let v = cg.graph.vertex_count();
    if k == 0 || k > v {
        return Err(CompileError::BadClusterCount { k, vertices: v });
    }
    let epsilon = epsilon.max(0.0);
    let cap = max_cluster_size(v, k, epsilon);
    let stop = (2 * k).max(64);

    let mut levels = vec![finest_level(cg)];
    let mut maps: Vec<Vec<usize>> = Vec::new();
    while levels.last().unwrap().len() > stop {
        let (coarse, map) = coarsen(levels.last().unwrap(), cap);
        if coarse.len() == levels.last().unwrap().len() {
            break;
        }
        levels.push(coarse);
        maps.push(map);
    }

    // Try the coarsest level first, falling back towards the finest.
    let mut depth = levels.len() - 1;
    let mut coarse_assignment = loop {
        if let Some(a) = grow(&levels[depth], k, cap) {
            break a;
        }
        assert!(depth > 0, "growth on unit-size nodes always succeeds");
        depth -= 1;
    };
    while depth > 0 {
        let map = &maps[depth - 1];
        coarse_assignment = map.iter().map(|&c| coarse_assignment[c]).collect();
        depth -= 1;
    }

    let mut cluster_of = coarse_assignment;
    refine(&levels[0], &mut cluster_of, k, cap);
    Ok(Partition { cluster_of, cluster_count: k, balance_epsilon: epsilon })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::extract_topology;
    use crate::graph::{random_graph, Graph};
    use crate::kernels::{kernel_spec, KernelKind};
    use proptest::prelude::*;
    use rand::{seq::SliceRandom, SeedableRng};

    fn topo(g: &Graph) -> ComputationGraph {
        let spec = kernel_spec(KernelKind::Cc, Default::default(), g.vertex_count()).unwrap();
        extract_topology(&spec, g)
    }

    /// Minimum cut over every balanced 2-partition, by enumeration.
    fn brute_min_cut_2(g: &Graph, cap: usize) -> usize {
        let n = g.vertex_count();
        let mut best = usize::MAX;
        for mask in 0u32..(1 << n) {
            let ones = mask.count_ones() as usize;
            if ones == 0 || ones == n || ones > cap || n - ones > cap {
                continue;
            }
            let p = Partition {
                cluster_of: (0..n).map(|v| (mask >> v) & 1).collect(),
                cluster_count: 2,
                balance_epsilon: 0.0,
            };
            best = best.min(p.cut(g));
        }
        best
    }

    #[test]
    fn single_cluster() {
        let g = random_graph(10, 0.3, (1, 1), 1, false).unwrap();
        let p = cluster(&topo(&g), 1, 0.0).unwrap();
        assert!(p.cluster_of.iter().all(|&c| c == 0));
        assert_eq!(p.cut(&g), 0);
    }

    #[test]
    fn path_splits_in_the_middle() {
        let g = Graph::from_edges(4, &[(0, 1, 1), (1, 2, 1), (2, 3, 1)], false).unwrap();
        assert_eq!(brute_min_cut_2(&g, 2), 1);
        let p = cluster(&topo(&g), 2, 0.0).unwrap();
        assert_eq!(p.cut(&g), 1);
        assert_eq!(p.cluster_of[0], p.cluster_of[1]);
        assert_eq!(p.cluster_of[2], p.cluster_of[3]);
    }

    #[test]
    fn disjoint_triangles_are_separated() {
        let g = Graph::from_edges(6, &[(0, 1, 1), (1, 2, 1), (0, 2, 1), (3, 4, 1), (4, 5, 1), (3, 5, 1)], false)
            .unwrap();
        assert_eq!(brute_min_cut_2(&g, 3), 0);
        let p = cluster(&topo(&g), 2, 0.0).unwrap();
        assert_eq!(p.cut(&g), 0);
    }

    #[test]
    fn rejects_too_many_clusters() {
        let g = Graph::from_edges(3, &[], false).unwrap();
        assert_eq!(cluster(&topo(&g), 4, 0.0), Err(CompileError::BadClusterCount { k: 4, vertices: 3 }));
    }

    #[test]
    fn coarsening_path_on_large_graphs() {
        for seed in 0..6 {
            let g = random_graph(400, 0.02, (1, 1), seed, false).unwrap();
            for k in [2, 7, 16, 50] {
                let p = cluster(&topo(&g), k, 0.05).unwrap();
                p.validate(400).unwrap();
            }
        }
    }

    fn random_balanced_cut(g: &Graph, k: usize, seed: u64) -> usize {
        let mut order: Vec<usize> = (0..g.vertex_count()).collect();
        order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let mut cluster_of = vec![0; g.vertex_count()];
        for (i, v) in order.into_iter().enumerate() {
            cluster_of[v] = (i % k) as ClusterId;
        }
        Partition { cluster_of, cluster_count: k, balance_epsilon: 0.0 }.cut(g)
    }

    #[test]
    fn beats_random_partitions_on_average() {
        let (mut ours, mut random) = (0usize, 0usize);
        for seed in 0..40u64 {
            let n = 8 + (seed as usize * 7) % 120;
            let g = random_graph(n, 0.08, (1, 1), seed, false).unwrap();
            let k = 2 + (seed as usize % 6);
            ours += cluster(&topo(&g), k, 0.0).unwrap().cut(&g);
            random += random_balanced_cut(&g, k, seed);
        }
        assert!(ours <= random, "clustered cut {ours} vs random {random}");
    }

    proptest! {
        #[test]
        fn partitions_are_valid(n in 1usize..150, p in 0.0f64..0.5, seed: u64, kf in 0.0f64..1.0,
                                eps in prop::sample::select(vec![0.0, 0.03, 0.1, 0.5]), directed: bool) {
            let g = random_graph(n, p, (1, 1), seed, directed).unwrap();
            let k = 1 + ((n - 1) as f64 * kf) as usize;
            let part = cluster(&topo(&g), k, eps).unwrap();
            prop_assert!(part.validate(n).is_ok(), "{:?}", part.validate(n));
        }
    }
}
