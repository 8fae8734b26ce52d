//! Greedy cluster placement on the R x C array.

use super::{ClusterGraph, ClusterId, CompileError, Coord, Placement};

fn manhattan(a: Coord, b: Coord) -> u64 {
    (a.0.abs_diff(b.0) + a.1.abs_diff(b.1)) as u64
}

/// `sum over cluster pairs of pair_weight * manhattan distance`.
pub fn placement_cost(deps: &ClusterGraph, pl: &Placement) -> u64 {
    let k = deps.cluster_count as ClusterId;
    let mut cost = 0;
    for a in 0..k {
        for b in a + 1..k {
            let w = deps.pair_weight(a, b);
            if w > 0 {
                cost += w * manhattan(pl.coord_of[a as usize], pl.coord_of[b as usize]);
            }
        }
    }
    cost
}

/// Cluster `c` at row-major cell `c`.
pub fn identity_placement(k: usize, dims: (usize, usize)) -> Result<Placement, CompileError> {
    let (rows, cols) = dims;
    if k > rows * cols {
        return Err(CompileError::Capacity { clusters: k, rows, cols });
    }
    Ok(Placement { coord_of: (0..k).map(|c| (c / cols, c % cols)).collect(), dims })
}

/// Places clusters by decreasing traffic, each at the free cell closest (by
/// weighted Manhattan distance) to the clusters already placed. Falls back to
/// the identity placement when that is cheaper.
pub fn place(deps: &ClusterGraph, dims: (usize, usize)) -> Result<Placement, CompileError> {
    let k = deps.cluster_count;
    let identity = identity_placement(k, dims)?;
    let (rows, cols) = dims;

    let mut order: Vec<ClusterId> = (0..k as ClusterId).collect();
    let totals: Vec<u64> = order.iter().map(|&c| deps.total_weight(c)).collect();
    order.sort_by(|&a, &b| totals[b as usize].cmp(&totals[a as usize]).then(a.cmp(&b)));

    let mut free = vec![true; rows * cols];
    let mut coord_of: Vec<Option<Coord>> = vec![None; k];
    let mut placed: Vec<ClusterId> = Vec::with_capacity(k);
    for &c in &order {
        let mut best: Option<(u64, usize)> = None;
        for cell in (0..rows * cols).filter(|&i| free[i]) {
            let here = (cell / cols, cell % cols);
            let cost: u64 = placed
                .iter()
                .map(|&p| deps.pair_weight(c, p) * manhattan(here, coord_of[p as usize].unwrap()))
                .sum();
            if best.is_none_or(|(bc, _)| cost < bc) {
                best = Some((cost, cell));
            }
        }
        let (_, cell) = best.expect("capacity checked above");
        free[cell] = false;
        coord_of[c as usize] = Some((cell / cols, cell % cols));
        placed.push(c);
    }
    let greedy = Placement { coord_of: coord_of.into_iter().map(Option::unwrap).collect(), dims };
    if placement_cost(deps, &identity) < placement_cost(deps, &greedy) {
        Ok(identity)
    } else {
        Ok(greedy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::{cluster_dependency, Partition};
    use crate::graph::random_graph;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn deps(k: usize, pairs: &[(ClusterId, ClusterId, u64)]) -> ClusterGraph {
        let mut weights = BTreeMap::new();
        for &(a, b, w) in pairs {
            weights.insert((a, b), w);
            weights.insert((b, a), w);
        }
        ClusterGraph { cluster_count: k, directed: false, weights, intra_edges: 0 }
    }

    #[test]
    fn single_cluster_at_origin() {
        let p = place(&deps(1, &[]), (3, 3)).unwrap();
        assert_eq!(p.coord_of, vec![(0, 0)]);
    }

    #[test]
    fn heavy_pair_is_adjacent() {
        let d = deps(2, &[(0, 1, 5)]);
        let p = place(&d, (2, 2)).unwrap();
        assert_eq!(placement_cost(&d, &p), 5);
        // Every placement of two clusters on 2x2 costs at least 5.
        let cells: Vec<Coord> = (0..4).map(|i| (i / 2, i % 2)).collect();
        let best = cells
            .iter()
            .flat_map(|&a| cells.iter().filter(move |&&b| b != a).map(move |&b| (a, b)))
            .map(|(a, b)| placement_cost(&d, &Placement { coord_of: vec![a, b], dims: (2, 2) }))
            .min()
            .unwrap();
        assert_eq!(best, 5);
    }

    #[test]
    fn no_traffic_gives_row_major() {
        let p = place(&deps(5, &[]), (2, 3)).unwrap();
        assert_eq!(p.coord_of, vec![(0, 0), (0, 1), (0, 2), (1, 0), (1, 1)]);
    }

    #[test]
    fn too_many_clusters() {
        assert_eq!(place(&deps(5, &[]), (2, 2)), Err(CompileError::Capacity { clusters: 5, rows: 2, cols: 2 }));
    }

    proptest! {
        #[test]
        fn valid_and_no_worse_than_identity(n in 2usize..60, p in 0.0f64..0.4, seed: u64, rows in 1usize..5, cols in 1usize..5) {
            let g = random_graph(n, p, (1, 1), seed, false).unwrap();
            let k = n.min(rows * cols);
            let part = Partition { cluster_of: (0..n as u32).map(|v| v % k as u32).collect(), cluster_count: k, balance_epsilon: 1.0 };
            let d = cluster_dependency(&g, &part);
            let pl = place(&d, (rows, cols)).unwrap();
            prop_assert!(pl.validate().is_ok());
            prop_assert_eq!(pl.coord_of.len(), k);
            let id = identity_placement(k, (rows, cols)).unwrap();
            prop_assert!(placement_cost(&d, &pl) <= placement_cost(&d, &id));
        }
    }
}
