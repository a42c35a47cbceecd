use citl::env_graph::{
    dtw, enumerate_alternatives, evaluate_episode, ndtw, partition_trajectories, shortest_path, NavGraph, Trajectory,
};
use citl::harness::checks::random_graph;
use citl::oracle;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn graph(seed: u64, n: usize, p: f64) -> NavGraph {
    random_graph(&mut ChaCha8Rng::seed_from_u64(seed), n, p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn shortest_path_matches_brute_force(seed in any::<u64>(), n in 2usize..=10, p in 0.05f64..0.6, s in 0usize..10, t in 0usize..10) {
        let g = graph(seed, n, p);
        let (s, t) = (s % n, t % n);
        let fast = shortest_path(&g, s, t).unwrap();
        let slow = oracle::shortest_path_brute(&g, s, t).unwrap();
        prop_assert_eq!(fast.nodes(), slow.as_slice());
        prop_assert_eq!(fast.hop(), oracle::bfs_hops(&g, s)[t].unwrap());
        prop_assert!(fast.is_simple());
    }

    #[test]
    fn hop_distance_matches_bfs(seed in any::<u64>(), n in 1usize..=12, p in 0.05f64..0.6) {
        let g = graph(seed, n, p);
        for s in 0..n {
            let hops = oracle::bfs_hops(&g, s);
            for (t, h) in hops.iter().enumerate() {
                prop_assert_eq!(g.hop_distance(s, t), h.unwrap());
            }
        }
    }

    #[test]
    fn partition_respects_thresholds(seed in any::<u64>(), n in 3usize..=10, p in 0.1f64..0.6, s in 0usize..10, t in 0usize..10) {
        let g = graph(seed, n, p);
        let (s, t) = (s % n, t % n);
        prop_assume!(s != t);
        let opt = shortest_path(&g, s, t).unwrap();
        let h = opt.hop();
        let alts = enumerate_alternatives(&g, s, t, 2 * h + 2, usize::MAX, 0).unwrap();
        for a in &alts {
            prop_assert!(a.is_simple());
            prop_assert_eq!(a.start(), s);
            prop_assert_eq!(a.end(), t);
            prop_assert!(a.hop() <= 2 * h + 2);
            prop_assert!(a.nodes() != opt.nodes());
        }
        let part = partition_trajectories(&alts, h, 1.2, 1.4).unwrap();
        prop_assert_eq!(part.positives.len() + part.intra_negatives.len() + part.discarded.len(), alts.len());
        for a in &part.positives {
            prop_assert!(5 * a.hop() <= 6 * h);
        }
        for a in &part.intra_negatives {
            prop_assert!(5 * a.hop() >= 7 * h);
        }
        for a in &part.discarded {
            prop_assert!(5 * a.hop() > 6 * h && 5 * a.hop() < 7 * h);
        }
    }

    #[test]
    fn alternatives_are_capped_and_reproducible(seed in any::<u64>(), n in 4usize..=10, k in 1usize..5) {
        let g = graph(seed, n, 0.5);
        let a = enumerate_alternatives(&g, 0, n - 1, n, k, 7).unwrap();
        let b = enumerate_alternatives(&g, 0, n - 1, n, k, 7).unwrap();
        prop_assert!(a.len() <= k);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn metric_identities(seed in any::<u64>(), n in 2usize..=10, p in 0.05f64..0.6, s in 0usize..10, t in 0usize..10, walk in prop::collection::vec(0usize..8, 0..8)) {
        let g = graph(seed, n, p);
        let (s, t) = (s % n, t % n);
        let reference = shortest_path(&g, s, t).unwrap();
        let same = evaluate_episode(&g, &reference, &reference, 3.0);
        prop_assert_eq!(same.sr, 1.0);
        prop_assert!((same.spl - 1.0).abs() < 1e-12);
        prop_assert!((same.ndtw - 1.0).abs() < 1e-12);
        prop_assert!((same.cls - 1.0).abs() < 1e-9);
        prop_assert_eq!(same.ne, 0.0);

        // A random walk from the start as the predicted path.
        let mut nodes = vec![s];
        for c in walk {
            let nb = g.neighbors(*nodes.last().unwrap());
            nodes.push(nb[c % nb.len()].0);
        }
        let predicted = Trajectory::new(&g, nodes.clone()).unwrap();
        let m = evaluate_episode(&g, &predicted, &reference, 3.0);
        prop_assert!(m.spl <= m.sr + 1e-12);
        prop_assert!((0.0..=1.0).contains(&m.ndtw));
        prop_assert!((0.0..=1.0 + 1e-12).contains(&m.cls));
        prop_assert!((m.sdtw - m.sr * m.ndtw).abs() < 1e-12);
        let fast = dtw(&g, &nodes, reference.nodes());
        let slow = oracle::dtw_full(&g, &nodes, reference.nodes());
        prop_assert!((fast - slow).abs() <= 1e-9 * slow.max(1.0));
        prop_assert!((ndtw(&g, &nodes, reference.nodes(), 3.0) - m.ndtw).abs() < 1e-12);
    }

    #[test]
    fn graph_json_round_trip(seed in any::<u64>(), n in 1usize..=12, p in 0.0f64..0.6) {
        let g = graph(seed, n, p);
        let back = NavGraph::from_file(serde_json::from_str(&serde_json::to_string(&g.to_file()).unwrap()).unwrap()).unwrap();
        prop_assert_eq!(back.nodes(), g.nodes());
        prop_assert_eq!(back.edge_count(), g.edge_count());
        for v in 0..n {
            prop_assert_eq!(back.neighbors(v), g.neighbors(v));
        }
    }
}

#[test]
fn graph_file_round_trip_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let g = graph(3, 9, 0.3);
    let path = dir.path().join("g.json");
    g.save(&path).unwrap();
    let back = NavGraph::load(&path).unwrap();
    assert_eq!(back.nodes(), g.nodes());
    assert_eq!(back.edge_count(), g.edge_count());
}

#[test]
fn malformed_graphs_are_rejected() {
    use citl::env_graph::{GraphError, Viewpoint};
    let nodes = || -> Vec<Viewpoint> {
        (0..3)
            .map(|id| Viewpoint {
                id,
                pos: [id as f64, 0.0, 0.0],
                landmark: 0,
            })
            .collect()
    };
    assert!(matches!(NavGraph::new(nodes(), &[[0, 1]]), Err(GraphError::Disconnected)));
    assert!(matches!(NavGraph::new(nodes(), &[[0, 0], [1, 2]]), Err(GraphError::SelfLoop(0))));
    assert!(matches!(
        NavGraph::new(nodes(), &[[0, 1], [1, 0], [1, 2]]),
        Err(GraphError::DuplicateEdge(1, 0))
    ));
    assert!(matches!(NavGraph::new(nodes(), &[[0, 1], [1, 5]]), Err(GraphError::UnknownNode(5))));
    assert!(matches!(NavGraph::new(Vec::new(), &[]), Err(GraphError::Empty)));
}
