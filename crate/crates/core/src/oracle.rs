//! Slow, direct reference implementations used to cross-check the fast paths.
//!
//! Nothing here shares code with the implementations it checks: each oracle
//! works from the defining formula or by brute force.

use std::collections::{BTreeSet, VecDeque};

use crate::env_graph::{NavGraph, NodeId};

/// Circle loss evaluated literally:
/// `ln(1 + sum_n exp(l_n) * sum_p exp(l_p))` with
/// `l_n = γ·max(s_n + m, 0)·(s_n - m)` and `l_p = -γ·max(1 + m - s_p, 0)·(s_p - 1 + m)`.
pub fn circle_loss_scalar(sp: &[f64], sn: &[f64], m: f64, gamma: f64) -> f64 {
    if sp.is_empty() || sn.is_empty() {
        return 0.0;
    }
    let mut neg_sum = 0.0;
    for &s in sn {
        let alpha = if s + m > 0.0 { s + m } else { 0.0 };
        neg_sum += (gamma * alpha * (s - m)).exp();
    }
    let mut pos_sum = 0.0;
    for &s in sp {
        let alpha = if 1.0 + m - s > 0.0 { 1.0 + m - s } else { 0.0 };
        pos_sum += (-gamma * alpha * (s - (1.0 - m))).exp();
    }
    (1.0 + neg_sum * pos_sum).ln()
}

/// Pair mining by literal set-builder filters. Returns `(kept positives, kept negatives)`.
pub fn mining_brute(sp: &[f64], sn: &[f64], m: f64) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let mut kept_n = BTreeSet::new();
    if let Some(min_p) = sp.iter().copied().reduce(f64::min) {
        for (j, &s) in sn.iter().enumerate() {
            if 1.0 - m > s && s > min_p - m {
                kept_n.insert(j);
            }
        }
    }
    let mut kept_p = BTreeSet::new();
    if let Some(max_n) = kept_n.iter().map(|&j| sn[j]).reduce(f64::max) {
        for (i, &s) in sp.iter().enumerate() {
            if s < max_n + m {
                kept_p.insert(i);
            }
        }
    }
    (kept_p, kept_n)
}

/// FIFO reference: append everything, keep the last `capacity` items.
#[derive(Clone, Debug, Default)]
pub struct FifoSim {
    capacity: usize,
    all: Vec<u64>,
}

impl FifoSim {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            all: Vec::new(),
        }
    }

    pub fn push(&mut self, id: u64) {
        self.all.push(id);
    }

    pub fn contents(&self) -> Vec<u64> {
        let skip = self.all.len().saturating_sub(self.capacity);
        self.all[skip..].to_vec()
    }
}

/// Hop counts from `start` by breadth-first search; `None` when unreachable.
pub fn bfs_hops(graph: &NavGraph, start: NodeId) -> Vec<Option<usize>> {
    let mut dist = vec![None; graph.len()];
    let mut queue = VecDeque::from([start]);
    dist[start] = Some(0);
    while let Some(v) = queue.pop_front() {
        let dv = dist[v].expect("queued nodes are labelled");
        for &(u, _) in graph.neighbors(v) {
            if dist[u].is_none() {
                dist[u] = Some(dv + 1);
                queue.push_back(u);
            }
        }
    }
    dist
}

/// Every simple path from `start` to `goal` with at most `hop_cap` hops, by
/// breadth-first expansion of partial paths with no pruning.
pub fn all_simple_paths(graph: &NavGraph, start: NodeId, goal: NodeId, hop_cap: usize) -> Vec<Vec<NodeId>> {
    let mut out = Vec::new();
    let mut frontier = vec![vec![start]];
    while let Some(path) = frontier.pop() {
        let last = *path.last().expect("non-empty");
        if last == goal {
            out.push(path);
            continue;
        }
        if path.len() > hop_cap {
            continue;
        }
        for &(u, _) in graph.neighbors(last) {
            if !path.contains(&u) {
                let mut next = path.clone();
                next.push(u);
                frontier.push(next);
            }
        }
    }
    out.sort();
    out
}

/// Sum of edge lengths along a node sequence.
pub fn path_length(graph: &NavGraph, path: &[NodeId]) -> f64 {
    path.windows(2)
        .map(|w| graph.edge_length(w[0], w[1]).expect("consecutive nodes are adjacent"))
        .sum()
}

/// Shortest path by exhaustive search over simple paths: fewest hops, then
/// shortest length (ties within 1e-9), then lexicographically smallest.
pub fn shortest_path_brute(graph: &NavGraph, start: NodeId, goal: NodeId) -> Option<Vec<NodeId>> {
    let hops = bfs_hops(graph, start)[goal]?;
    let mut paths = all_simple_paths(graph, start, goal, hops);
    paths.retain(|p| p.len() == hops + 1);
    let best_len = paths.iter().map(|p| path_length(graph, p)).fold(f64::INFINITY, f64::min);
    paths.retain(|p| path_length(graph, p) <= best_len + 1e-9);
    paths.into_iter().min()
}

/// DTW with the full `(|a|+1) x (|b|+1)` table.
pub fn dtw_full(graph: &NavGraph, a: &[NodeId], b: &[NodeId]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let mut t = vec![vec![f64::INFINITY; m + 1]; n + 1];
    t[0][0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            let cost = graph.geodesic(a[i - 1], b[j - 1]);
            t[i][j] = cost + t[i - 1][j].min(t[i][j - 1]).min(t[i - 1][j - 1]);
        }
    }
    t[n][m]
}

/// Central finite differences of `f` at `x` with step `h`.
pub fn central_diff<Fun: FnMut(&[f64]) -> f64>(mut f: Fun, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Largest [`relative_error`] over paired entries.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| relative_error(x, y, floor)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_circle_case() {
        let v = circle_loss_scalar(&[0.6], &[0.4], 0.25, 1.0);
        assert!((v - 0.7955).abs() < 1e-3, "{v}");
    }

    #[test]
    fn fifo_keeps_tail() {
        let mut f = FifoSim::new(2);
        for i in 0..5 {
            f.push(i);
        }
        assert_eq!(f.contents(), vec![3, 4]);
    }

    #[test]
    fn finite_difference_of_square() {
        let g = central_diff(|x| x[0] * x[0] + 3.0 * x[1], &[2.0, 1.0], 1e-5);
        assert!((g[0] - 4.0).abs() < 1e-8 && (g[1] - 3.0).abs() < 1e-8);
    }
}
