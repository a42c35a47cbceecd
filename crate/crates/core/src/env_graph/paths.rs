use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{NavGraph, NodeId, Trajectory};
use super::GraphError;

/// Absolute tolerance for metric-length ties and hop-threshold comparisons.
pub const TIE_EPS: f64 = 1e-9;

/// Minimum-hop path from `start` to `goal`.
///
/// Ties are broken by smaller metric length, then by the lexicographically
/// smallest node sequence.
pub fn shortest_path(graph: &NavGraph, start: NodeId, goal: NodeId) -> Result<Trajectory, GraphError> {
    for id in [start, goal] {
        if !graph.contains(id) {
            return Err(GraphError::UnknownNode(id));
        }
    }
    let n = graph.len();
    let hop = |v: NodeId| graph.hop_distance(v, goal);
    if hop(start) == usize::MAX {
        return Err(GraphError::Disconnected);
    }
    // Best metric length to the goal restricted to hop-optimal continuations,
    // filled in increasing hop order.
    let mut order: Vec<NodeId> = (0..n).filter(|&v| hop(v) <= hop(start)).collect();
    order.sort_by_key(|&v| hop(v));
    let mut best = vec![f64::INFINITY; n];
    for &v in &order {
        best[v] = if v == goal {
            0.0
        } else {
            graph
                .neighbors(v)
                .iter()
                .filter(|&&(u, _)| hop(u) + 1 == hop(v))
                .map(|&(u, w)| w + best[u])
                .fold(f64::INFINITY, f64::min)
        };
    }
    let mut seq = vec![start];
    let mut v = start;
    while v != goal {
        // Neighbours are sorted, so the first qualifying one is the smallest id.
        let &(u, _) = graph
            .neighbors(v)
            .iter()
            .find(|&&(u, w)| hop(u) + 1 == hop(v) && (w + best[u] - best[v]).abs() <= TIE_EPS)
            .ok_or(GraphError::Disconnected)?;
        seq.push(u);
        v = u;
    }
    Trajectory::new(graph, seq)
}

/// Simple paths from `start` to `goal` with at most `hop_cap` hops, excluding
/// the shortest path itself.
///
/// When more than `max_count` paths exist a uniform subsample (chosen by
/// `seed`) is returned, in depth-first discovery order.
pub fn enumerate_alternatives(
    graph: &NavGraph,
    start: NodeId,
    goal: NodeId,
    hop_cap: usize,
    max_count: usize,
    seed: u64,
) -> Result<Vec<Trajectory>, GraphError> {
    let optimal = shortest_path(graph, start, goal)?;
    let mut found: Vec<Vec<NodeId>> = Vec::new();
    let mut on_path = vec![false; graph.len()];
    let mut stack = vec![start];
    on_path[start] = true;
    dfs(graph, goal, hop_cap, &mut stack, &mut on_path, &mut found);
    found.retain(|p| p.as_slice() != optimal.nodes());

    let chosen: Vec<Vec<NodeId>> = if found.len() <= max_count {
        found
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = index::sample(&mut rng, found.len(), max_count).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| std::mem::take(&mut found[i])).collect()
    };
    chosen
        .into_iter()
        .map(|p| Trajectory::new(graph, p))
        .collect()
}

fn dfs(
    graph: &NavGraph,
    goal: NodeId,
    hop_cap: usize,
    stack: &mut Vec<NodeId>,
    on_path: &mut [bool],
    out: &mut Vec<Vec<NodeId>>,
) {
    let v = *stack.last().expect("non-empty stack");
    if v == goal {
        out.push(stack.clone());
        return;
    }
    let used = stack.len() - 1;
    for &(u, _) in graph.neighbors(v) {
        if on_path[u] || used + 1 + graph.hop_distance(u, goal) > hop_cap {
            continue;
        }
        on_path[u] = true;
        stack.push(u);
        dfs(graph, goal, hop_cap, stack, on_path, out);
        stack.pop();
        on_path[u] = false;
    }
}

/// Positive / intra-negative split of candidate trajectories by hop count.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryPartition {
    pub positives: Vec<Trajectory>,
    pub intra_negatives: Vec<Trajectory>,
    pub discarded: Vec<Trajectory>,
}

/// Hop thresholds `alpha_p < alpha_n` relative to the optimal hop count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HopThresholds {
    alpha_p: f64,
    alpha_n: f64,
}

impl HopThresholds {
    pub fn new(alpha_p: f64, alpha_n: f64) -> Result<Self, GraphError> {
        if !(2.0 > alpha_n && alpha_n > alpha_p && alpha_p > 1.0) {
            return Err(GraphError::Thresholds { alpha_p, alpha_n });
        }
        Ok(Self { alpha_p, alpha_n })
    }

    pub fn alpha_p(&self) -> f64 {
        self.alpha_p
    }

    pub fn alpha_n(&self) -> f64 {
        self.alpha_n
    }

    pub fn is_positive(&self, hop: usize, h_gt: usize) -> bool {
        hop as f64 <= self.alpha_p * h_gt as f64 + TIE_EPS
    }

    pub fn is_negative(&self, hop: usize, h_gt: usize) -> bool {
        hop as f64 >= self.alpha_n * h_gt as f64 - TIE_EPS
    }

    /// Enumeration depth that still reaches the negative band.
    pub fn default_hop_cap(&self, h_gt: usize) -> usize {
        (self.alpha_n * h_gt as f64 - TIE_EPS).ceil() as usize + 2
    }
}

pub fn partition_trajectories(
    candidates: &[Trajectory],
    h_gt: usize,
    alpha_p: f64,
    alpha_n: f64,
) -> Result<TrajectoryPartition, GraphError> {
    let th = HopThresholds::new(alpha_p, alpha_n)?;
    let mut out = TrajectoryPartition::default();
    for t in candidates {
        let bucket = if th.is_positive(t.hop(), h_gt) {
            &mut out.positives
        } else if th.is_negative(t.hop(), h_gt) {
            &mut out.intra_negatives
        } else {
            &mut out.discarded
        };
        bucket.push(t.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::graph::Viewpoint;
    use super::*;

    fn graph(pos: &[[f64; 3]], edges: &[[usize; 2]]) -> NavGraph {
        let nodes = pos
            .iter()
            .enumerate()
            .map(|(id, &pos)| Viewpoint { id, pos, landmark: 0 })
            .collect();
        NavGraph::new(nodes, edges).unwrap()
    }

    fn line() -> NavGraph {
        graph(&[[0., 0., 0.], [1., 0., 0.], [2., 0., 0.]], &[[0, 1], [1, 2]])
    }

    fn triangle() -> NavGraph {
        graph(&[[0., 0., 0.], [1., 1., 0.], [2., 0., 0.]], &[[0, 1], [1, 2], [0, 2]])
    }

    #[test]
    fn identity_and_line() {
        let g = line();
        let t = shortest_path(&g, 1, 1).unwrap();
        assert_eq!((t.nodes(), t.hop(), t.length_m()), (&[1][..], 0, 0.0));
        assert_eq!(shortest_path(&g, 0, 2).unwrap().nodes(), &[0, 1, 2]);
        assert!(shortest_path(&g, 0, 9).is_err());
    }

    #[test]
    fn ties_prefer_shorter_then_lexicographic() {
        // Square 0-1-3, 0-2-3; node 2 is nearer.
        let g = graph(
            &[[0., 0., 0.], [0., 2., 0.], [1., 0., 0.], [1., 1., 0.]],
            &[[0, 1], [1, 3], [0, 2], [2, 3]],
        );
        assert_eq!(shortest_path(&g, 0, 3).unwrap().nodes(), &[0, 2, 3]);
        let sq = graph(
            &[[0., 0., 0.], [0., 1., 0.], [1., 0., 0.], [1., 1., 0.]],
            &[[0, 1], [1, 3], [0, 2], [2, 3]],
        );
        assert_eq!(shortest_path(&sq, 0, 3).unwrap().nodes(), &[0, 1, 3]);
    }

    #[test]
    fn triangle_alternatives() {
        let alts = enumerate_alternatives(&triangle(), 0, 2, 2, 100, 7).unwrap();
        let seqs: Vec<_> = alts.iter().map(|t| t.nodes().to_vec()).collect();
        assert_eq!(seqs, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn line_has_no_alternatives() {
        assert!(enumerate_alternatives(&line(), 0, 2, 4, 100, 0).unwrap().is_empty());
    }

    #[test]
    fn subsample_is_seeded() {
        // 3x3 grid has many detours.
        let mut pos = Vec::new();
        let mut edges = Vec::new();
        for y in 0..3 {
            for x in 0..3 {
                pos.push([x as f64, y as f64, 0.0]);
                let id = y * 3 + x;
                if x < 2 {
                    edges.push([id, id + 1]);
                }
                if y < 2 {
                    edges.push([id, id + 3]);
                }
            }
        }
        let g = graph(&pos, &edges);
        let all = enumerate_alternatives(&g, 0, 8, 8, usize::MAX, 0).unwrap();
        assert!(all.len() > 5);
        let a = enumerate_alternatives(&g, 0, 8, 8, 5, 42).unwrap();
        let b = enumerate_alternatives(&g, 0, 8, 8, 5, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        assert!(a.iter().all(|t| all.contains(t)));
    }

    fn hops(h: usize) -> Trajectory {
        // A synthetic trajectory with `h` hops along a long line.
        let pos: Vec<[f64; 3]> = (0..=h).map(|i| [i as f64, 0.0, 0.0]).collect();
        let edges: Vec<[usize; 2]> = (0..h).map(|i| [i, i + 1]).collect();
        let g = graph(&pos, &edges);
        Trajectory::new(&g, (0..=h).collect()).unwrap()
    }

    #[test]
    fn partition_boundaries() {
        let p = partition_trajectories(&[hops(5), hops(6), hops(7)], 5, 1.2, 1.4).unwrap();
        assert_eq!(p.positives.iter().map(Trajectory::hop).collect::<Vec<_>>(), vec![5, 6]);
        assert_eq!(p.intra_negatives[0].hop(), 7);
        let p = partition_trajectories(&[hops(13)], 10, 1.2, 1.4).unwrap();
        assert_eq!(p.discarded.len(), 1);
    }

    #[test]
    fn partition_rejects_bad_alphas() {
        for (ap, an) in [(1.4, 1.2), (1.0, 1.4), (1.2, 2.0), (1.3, 1.3)] {
            assert!(partition_trajectories(&[], 3, ap, an).is_err());
        }
    }

    #[test]
    fn default_cap_reaches_negative_band() {
        let th = HopThresholds::new(1.2, 1.4).unwrap();
        assert_eq!(th.default_hop_cap(5), 9);
        assert_eq!(th.default_hop_cap(2), 5);
    }
}
