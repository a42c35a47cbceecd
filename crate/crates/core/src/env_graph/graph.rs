use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GraphError;

pub type NodeId = usize;

/// A navigable viewpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Viewpoint {
    pub id: NodeId,
    /// Position in meters.
    pub pos: [f64; 3],
    pub landmark: usize,
}

/// Immutable undirected navigation graph.
///
/// Edge lengths are the Euclidean distances between endpoints. All-pairs hop
/// counts and geodesic distances are computed once at construction, which is
/// fine for the room-sized maps this crate works with.
#[derive(Clone, Debug)]
pub struct NavGraph {
    nodes: Vec<Viewpoint>,
    /// Sorted by neighbour id.
    adj: Vec<Vec<(NodeId, f64)>>,
    hops: Vec<usize>,
    geo: Vec<f64>,
}

/// On-disk graph representation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub nodes: Vec<Viewpoint>,
    pub edges: Vec<[NodeId; 2]>,
}

impl NavGraph {
    pub fn new(nodes: Vec<Viewpoint>, edges: &[[NodeId; 2]]) -> Result<Self, GraphError> {
        let n = nodes.len();
        if n == 0 {
            return Err(GraphError::Empty);
        }
        for (i, v) in nodes.iter().enumerate() {
            if v.id != i {
                return Err(GraphError::NonDenseIds { position: i, id: v.id });
            }
            if v.pos.iter().any(|c| !c.is_finite()) {
                return Err(GraphError::BadPosition(i));
            }
        }
        let mut adj = vec![Vec::new(); n];
        for &[a, b] in edges {
            if a >= n || b >= n {
                return Err(GraphError::UnknownNode(a.max(b)));
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            if adj[a].iter().any(|&(x, _)| x == b) {
                return Err(GraphError::DuplicateEdge(a, b));
            }
            let len = euclid(&nodes[a].pos, &nodes[b].pos);
            if len <= 0.0 {
                return Err(GraphError::ZeroLength(a, b));
            }
            adj[a].push((b, len));
            adj[b].push((a, len));
        }
        for list in &mut adj {
            list.sort_by_key(|&(x, _)| x);
        }
        let mut g = NavGraph {
            nodes,
            adj,
            hops: Vec::new(),
            geo: Vec::new(),
        };
        g.hops = (0..n).flat_map(|s| g.bfs_hops(s)).collect();
        if g.hops.contains(&usize::MAX) {
            return Err(GraphError::Disconnected);
        }
        g.geo = (0..n).flat_map(|s| g.dijkstra(s)).collect();
        Ok(g)
    }

    pub fn from_file(file: GraphFile) -> Result<Self, GraphError> {
        Self::new(file.nodes, &file.edges)
    }

    pub fn to_file(&self) -> GraphFile {
        let edges = self
            .adj
            .iter()
            .enumerate()
            .flat_map(|(a, list)| list.iter().filter(move |&&(b, _)| a < b).map(move |&(b, _)| [a, b]))
            .collect();
        GraphFile {
            nodes: self.nodes.clone(),
            edges,
        }
    }

    pub fn load(path: &Path) -> Result<Self, GraphError> {
        let text = std::fs::read_to_string(path)?;
        let file: GraphFile = serde_json::from_str(&text)?;
        Self::from_file(file)
    }

    pub fn save(&self, path: &Path) -> Result<(), GraphError> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_file())?)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Viewpoint {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Viewpoint] {
        &self.nodes
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id < self.nodes.len()
    }

    /// Neighbours with edge lengths, in increasing id order.
    pub fn neighbors(&self, id: NodeId) -> &[(NodeId, f64)] {
        &self.adj[id]
    }

    pub fn edge_length(&self, a: NodeId, b: NodeId) -> Option<f64> {
        self.adj
            .get(a)?
            .iter()
            .find(|&&(x, _)| x == b)
            .map(|&(_, l)| l)
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Minimum number of hops between two nodes.
    pub fn hop_distance(&self, a: NodeId, b: NodeId) -> usize {
        self.hops[a * self.len() + b]
    }

    /// Shortest-path distance in meters.
    pub fn geodesic(&self, a: NodeId, b: NodeId) -> f64 {
        self.geo[a * self.len() + b]
    }

    pub fn landmark_count(&self) -> usize {
        self.nodes.iter().map(|v| v.landmark + 1).max().unwrap_or(0)
    }

    fn bfs_hops(&self, s: NodeId) -> Vec<usize> {
        let mut d = vec![usize::MAX; self.len()];
        d[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &(v, _) in &self.adj[u] {
                if d[v] == usize::MAX {
                    d[v] = d[u] + 1;
                    q.push_back(v);
                }
            }
        }
        d
    }

    fn dijkstra(&self, s: NodeId) -> Vec<f64> {
        // O(N^2) selection; graphs here are tiny.
        let n = self.len();
        let mut d = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        d[s] = 0.0;
        for _ in 0..n {
            let Some(u) = (0..n)
                .filter(|&i| !done[i] && d[i].is_finite())
                .min_by(|&a, &b| d[a].total_cmp(&d[b]))
            else {
                break;
            };
            done[u] = true;
            for &(v, w) in &self.adj[u] {
                if d[u] + w < d[v] {
                    d[v] = d[u] + w;
                }
            }
        }
        d
    }
}

pub fn euclid(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Ordered node sequence through a graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    nodes: Vec<NodeId>,
    length_m: f64,
}

impl Trajectory {
    /// Validates adjacency of consecutive nodes and accumulates metric length.
    pub fn new(graph: &NavGraph, nodes: Vec<NodeId>) -> Result<Self, GraphError> {
        if nodes.is_empty() {
            return Err(GraphError::EmptyTrajectory);
        }
        if let Some(&bad) = nodes.iter().find(|&&n| !graph.contains(n)) {
            return Err(GraphError::UnknownNode(bad));
        }
        let mut length_m = 0.0;
        for w in nodes.windows(2) {
            length_m += graph
                .edge_length(w[0], w[1])
                .ok_or(GraphError::NotAdjacent(w[0], w[1]))?;
        }
        Ok(Trajectory { nodes, length_m })
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn hop(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn length_m(&self) -> f64 {
        self.length_m
    }

    pub fn start(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn end(&self) -> NodeId {
        *self.nodes.last().expect("non-empty")
    }

    pub fn is_simple(&self) -> bool {
        let mut seen = self.nodes.clone();
        seen.sort_unstable();
        seen.windows(2).all(|w| w[0] != w[1])
    }

    pub fn reversed(&self) -> Trajectory {
        let mut nodes = self.nodes.clone();
        nodes.reverse();
        Trajectory {
            nodes,
            length_m: self.length_m,
        }
    }
}
