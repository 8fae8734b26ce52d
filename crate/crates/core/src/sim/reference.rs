//! Sequential baseline: each kernel's oracle algorithm run on a modeled
//! single-issue core that pays the same per-opcode latencies as a NALE, plus
//! one memory batch per `B` non-sequential vertex-state accesses.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use super::config::{LatencyTable, MemoryParams};
use super::metrics::Metrics;
use crate::graph::{Graph, VertexId};
use crate::isa::Opcode;
use crate::kernels::{KernelKind, KernelOutput, KernelSpec};

struct Cost<'a> {
    lat: &'a LatencyTable,
    time: u64,
    counts: BTreeMap<Opcode, u64>,
    random: u64,
}

impl Cost<'_> {
    fn op(&mut self, op: Opcode) {
        self.time += self.lat.get(op);
        *self.counts.entry(op).or_insert(0) += 1;
    }

    fn ops(&mut self, ops: &[Opcode]) {
        for &op in ops {
            self.op(op);
        }
    }

    /// A data-dependent vertex-state access.
    fn touch(&mut self) {
        self.random += 1;
    }

    /// Binary-heap sift: one compare + branch per level.
    fn sift(&mut self, len: usize) {
        let levels = usize::BITS - len.max(1).leading_zeros();
        for _ in 0..levels {
            self.ops(&[Opcode::Cmp3, Opcode::Jz]);
        }
    }
}

use Opcode::*;

fn bfs(g: &Graph, s: VertexId, c: &mut Cost) -> Vec<Option<u64>> {
    let mut level: Vec<Option<u64>> = vec![None; g.vertex_count()];
    for _ in 0..g.vertex_count() {
        c.op(Mov);
    }
    c.op(Ldi);
    level[s as usize] = Some(0);
    let mut q = VecDeque::from([s]);
    c.op(PushI);
    while let Some(u) = q.pop_front() {
        c.op(PopI);
        let next = level[u as usize].unwrap() + 1;
        for (v, _) in g.adj(u) {
            c.ops(&[Mov, Cmp3, Jz]);
            c.touch();
            if level[v as usize].is_none() {
                c.ops(&[Add, Mov, PushI]);
                level[v as usize] = Some(next);
                q.push_back(v);
            }
        }
    }
    level
}

fn sssp(g: &Graph, s: VertexId, c: &mut Cost) -> Vec<Option<u64>> {
    let mut dist: Vec<Option<u64>> = vec![None; g.vertex_count()];
    for _ in 0..g.vertex_count() {
        c.op(Mov);
    }
    c.op(Ldi);
    dist[s as usize] = Some(0);
    let mut heap = BinaryHeap::from([Reverse((0u64, s))]);
    c.op(PushI);
    while let Some(Reverse((d, u))) = heap.pop() {
        c.op(PopI);
        c.sift(heap.len() + 1);
        c.ops(&[Cmp3, Jz]);
        if dist[u as usize] != Some(d) {
            continue;
        }
        for (v, w) in g.adj(u) {
            c.ops(&[Mov, Add, Cmp3, Jz]);
            c.touch();
            let nd = d + w as u64;
            if dist[v as usize].is_none_or(|old| nd < old) {
                c.ops(&[Min, Mov, PushI]);
                dist[v as usize] = Some(nd);
                heap.push(Reverse((nd, v)));
                c.sift(heap.len());
            }
        }
    }
    dist
}

fn dfs(g: &Graph, s: VertexId, c: &mut Cost) -> Vec<Option<u64>> {
    let mut index: Vec<Option<u64>> = vec![None; g.vertex_count()];
    for _ in 0..g.vertex_count() {
        c.op(Mov);
    }
    let mut next = 0;
    index[s as usize] = Some(next);
    next += 1;
    c.ops(&[Ldi, PushI]);
    let mut stack = vec![(s, 0usize)];
    while let Some(top) = stack.last_mut() {
        let (u, pos) = *top;
        c.ops(&[Cmp3, Jz]);
        if pos == g.degree(u) {
            c.op(PopI);
            stack.pop();
            continue;
        }
        top.1 += 1;
        let v = g.targets()[g.offsets()[u as usize] + pos];
        c.ops(&[Add, Mov, Cmp3, Jz]);
        c.touch();
        if index[v as usize].is_none() {
            c.ops(&[Mov, Add, PushI]);
            index[v as usize] = Some(next);
            next += 1;
            stack.push((v, 0));
        }
    }
    index
}

fn pagerank(g: &Graph, d: f64, iterations: u32, c: &mut Cost) -> Vec<f64> {
    let n = g.vertex_count();
    let mut rank = vec![1.0 / n as f64; n];
    for _ in 0..n {
        c.op(Mov);
    }
    let mut acc = vec![0.0; n];
    for _ in 0..iterations {
        let mut dangling = 0.0;
        for u in 0..n as VertexId {
            c.ops(&[Mov, Cmp3, Jz]);
            let deg = g.degree(u);
            if deg == 0 {
                c.op(Add);
                dangling += rank[u as usize];
                continue;
            }
            c.op(Mac);
            let share = rank[u as usize] / deg as f64;
            for (v, _) in g.adj(u) {
                c.ops(&[Mov, Add]);
                c.touch();
                acc[v as usize] += share;
            }
        }
        let base = (1.0 - d) / n as f64 + d * dangling / n as f64;
        c.op(Mac);
        for (r, a) in rank.iter_mut().zip(acc.iter_mut()) {
            c.ops(&[Mac, Mov, Mov]);
            *r = base + d * *a;
            *a = 0.0;
        }
    }
    rank
}

fn cc(g: &Graph, c: &mut Cost) -> Vec<u32> {
    let n = g.vertex_count();
    let mut parent: Vec<u32> = (0..n as u32).collect();
    for _ in 0..n {
        c.op(Mov);
    }
    fn find(parent: &mut [u32], mut x: u32, c: &mut Cost) -> u32 {
        loop {
            c.ops(&[Mov, Cmp3, Jz]);
            c.touch();
            let p = parent[x as usize];
            if p == x {
                return x;
            }
            c.op(Mov);
            parent[x as usize] = parent[p as usize];
            x = p;
        }
    }
    for (u, v, _) in g.edges() {
        if u > v {
            continue;
        }
        let (a, b) = (find(&mut parent, u, c), find(&mut parent, v, c));
        c.ops(&[Cmp3, Jz]);
        if a != b {
            c.ops(&[Min, Mov]);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            parent[hi as usize] = lo;
        }
    }
    (0..n as u32).map(|v| find(&mut parent, v, c)).collect()
}

fn minitri(g: &Graph, c: &mut Cost) -> u64 {
    let mut count = 0;
    let higher: Vec<Vec<VertexId>> = (0..g.vertex_count() as VertexId)
        .map(|u| {
            g.adj(u)
                .map(|(v, _)| {
                    c.ops(&[Mov, Cmp3, Jz]);
                    v
                })
                .filter(|&v| v > u)
                .collect()
        })
        .collect();
    for h in &higher {
        for (i, &v) in h.iter().enumerate() {
            let row = &higher[v as usize];
            c.touch();
            for &w in &h[i + 1..] {
                // Binary search in the sorted row.
                let hit = row.binary_search(&w).is_ok();
                let probes = usize::BITS - row.len().leading_zeros();
                for _ in 0..probes.max(1) {
                    c.ops(&[Cmp3, Jz]);
                }
                if hit {
                    c.op(Add);
                    count += 1;
                }
            }
        }
    }
    count
}

/// Cost of running `spec` sequentially on its view of `g`, together with the
/// result the run computed.
pub fn reference_run(
    spec: &KernelSpec,
    g: &Graph,
    latency: &LatencyTable,
    mem: &MemoryParams,
) -> (Metrics, KernelOutput) {
    let view = spec.view(g);
    let mut c = Cost { lat: latency, time: 0, counts: BTreeMap::new(), random: 0 };
    let out = match spec.kind {
        KernelKind::Bfs => KernelOutput::Reach(bfs(&view, spec.source.unwrap(), &mut c)),
        KernelKind::Sssp => KernelOutput::Reach(sssp(&view, spec.source.unwrap(), &mut c)),
        KernelKind::Dfs => KernelOutput::Reach(dfs(&view, spec.source.unwrap(), &mut c)),
        KernelKind::PageRank => KernelOutput::Ranks(pagerank(&view, spec.damping, spec.iterations, &mut c)),
        KernelKind::Cc => KernelOutput::Labels(cc(&view, &mut c)),
        KernelKind::MiniTri => KernelOutput::Count(minitri(&view, &mut c)),
    };
    let batches = c.random.div_ceil(mem.batch_words as u64);
    let makespan = c.time + batches * mem.latency;
    let busy = vec![c.time];
    let m = Metrics {
        makespan,
        events: c.counts.values().sum(),
        opcode_counts: c.counts,
        words_moved: 0,
        words_by_class: BTreeMap::new(),
        mem_batches: batches,
        busy,
        halted_at: vec![Some(makespan)],
        energy: 0.0,
    };
    (m, out)
}

/// Modeled sequential CPU baseline; see [`reference_run`].
pub fn reference_model(spec: &KernelSpec, g: &Graph, latency: &LatencyTable, mem: &MemoryParams) -> Metrics {
    reference_run(spec, g, latency, mem).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::random_graph;
    use crate::kernels::{kernel_spec, oracle, KernelParams};

    fn spec(kind: KernelKind, v: usize) -> KernelSpec {
        kernel_spec(kind, KernelParams { source: Some(0), iterations: Some(15), ..Default::default() }, v).unwrap()
    }

    #[test]
    fn runs_compute_the_oracle_results() {
        for seed in 0..10 {
            let g = random_graph(30, 0.15, (1, 9), seed, seed % 2 == 0).unwrap();
            for kind in KernelKind::ALL {
                let s = spec(kind, 30);
                let (_, out) = reference_run(&s, &g, &LatencyTable::default(), &MemoryParams::default());
                match (out, oracle(&s, &g)) {
                    (KernelOutput::Ranks(a), KernelOutput::Ranks(b)) => {
                        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12))
                    }
                    (a, b) => assert_eq!(a, b, "{kind} seed {seed}"),
                }
            }
        }
    }

    #[test]
    fn single_vertex_bfs_by_hand() {
        let g = Graph::from_edges(1, &[], false).unwrap();
        let m = reference_model(&spec(KernelKind::Bfs, 1), &g, &LatencyTable::default(), &MemoryParams::default());
        // MOV (init) + LDI (source) + PUSHI + POPI, no neighbour accesses.
        assert_eq!(m.makespan, 4);
        assert_eq!(m.mem_batches, 0);
    }

    #[test]
    fn bfs_cost_is_affine_in_path_length() {
        let cost = |n: u32| {
            let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1)).collect();
            let g = Graph::from_edges(n as usize, &edges, false).unwrap();
            reference_model(&spec(KernelKind::Bfs, n as usize), &g, &LatencyTable::default(), &MemoryParams::default())
                .makespan
        };
        let (a, b, c) = (cost(8), cost(16), cost(32));
        assert!(a > 0);
        assert_eq!(2 * (b - a), c - b);
    }

    #[test]
    fn deterministic() {
        let g = random_graph(50, 0.1, (1, 9), 3, false).unwrap();
        let s = spec(KernelKind::Sssp, 50);
        let a = reference_model(&s, &g, &LatencyTable::default(), &MemoryParams::default());
        let b = reference_model(&s, &g, &LatencyTable::default(), &MemoryParams::default());
        assert_eq!(a, b);
    }
}
