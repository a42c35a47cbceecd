use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{DataConfig, LANDMARK_NAMES};
use super::HarnessError;
use crate::agent::{mix_seed, Episode};
use crate::encoder::Vocab;
use crate::env_graph::{shortest_path, NavGraph, NodeId, Trajectory, Viewpoint};
use crate::lang::{InstructionDoc, Lexicon, Provenance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Seen,
    Unseen,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Seen => "seen",
            Split::Unseen => "unseen",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "seen" => Ok(Split::Seen),
            "unseen" => Ok(Split::Unseen),
            other => Err(HarnessError::Config(format!("unknown split {other:?}"))),
        }
    }
}

/// One line of `episodes_<split>.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeRecord {
    pub instr_tokens: Vec<String>,
    pub sub_spans: Vec<(usize, usize)>,
    pub graph_id: String,
    pub start: NodeId,
    pub goal: NodeId,
    pub path: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub seed: u64,
    pub landmarks: Vec<String>,
    pub seen_graphs: Vec<String>,
    pub unseen_graphs: Vec<String>,
}

impl Manifest {
    pub fn graphs(&self, split: Split) -> &[String] {
        match split {
            Split::Seen => &self.seen_graphs,
            Split::Unseen => &self.unseen_graphs,
        }
    }
}

pub const STUB_WORDS: [&str; 1] = ["carefully"];

/// Synonym table for the instruction templates and landmark names.
///
/// No entry maps one landmark onto another, so positives never change the
/// route they describe.
pub fn default_lexicon() -> Lexicon {
    let pairs: [(&str, &[&str]); 20] = [
        ("walk", &["go", "move", "head"]),
        ("go", &["walk", "move"]),
        ("head", &["go", "walk"]),
        ("turn", &["veer", "swing"]),
        ("toward", &["towards", "to"]),
        ("to", &["toward", "towards"]),
        ("then", &["next", "afterwards"]),
        ("sofa", &["couch"]),
        ("lamp", &["light"]),
        ("door", &["doorway", "entrance"]),
        ("stairs", &["staircase", "steps"]),
        ("sink", &["basin"]),
        ("fridge", &["refrigerator"]),
        ("plant", &["houseplant", "potted plant"]),
        ("window", &["windowpane"]),
        ("mirror", &["looking glass"]),
        ("fireplace", &["hearth"]),
        ("bathtub", &["tub"]),
        ("bookshelf", &["bookcase"]),
        ("table", &["counter"]),
    ];
    let entries: BTreeMap<String, Vec<String>> = pairs
        .iter()
        .map(|(w, alts)| (w.to_string(), alts.iter().map(|a| a.to_string()).collect()))
        .collect();
    Lexicon::new(entries).expect("well-formed built-in lexicon")
}

/// Every word the templates, lexicon and augmentation stubs can produce.
pub fn build_vocab(lexicon: &Lexicon) -> Vocab {
    let mut words: Vec<String> = ["walk", "go", "head", "turn", "then", "to", "toward", "the", ",", ".", ";"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    words.extend(LANDMARK_NAMES.iter().map(|s| s.to_string()));
    words.extend(STUB_WORDS.iter().map(|s| s.to_string()));
    for w in lexicon.words() {
        words.extend(w.split_whitespace().map(str::to_string));
    }
    Vocab::build(words.iter().map(String::as_str))
}

/// Grid with random diagonals and random edge drops that keep it connected.
pub fn generate_graph(side: usize, landmarks: usize, cfg: &DataConfig, rng: &mut ChaCha8Rng) -> NavGraph {
    let id = |r: usize, c: usize| r * side + c;
    let nodes: Vec<Viewpoint> = (0..side * side)
        .map(|i| Viewpoint {
            id: i,
            pos: [(i % side) as f64 * cfg.spacing_m, (i / side) as f64 * cfg.spacing_m, 0.0],
            landmark: rng.gen_range(0..landmarks),
        })
        .collect();
    let mut edges: Vec<[NodeId; 2]> = Vec::new();
    for r in 0..side {
        for c in 0..side {
            if c + 1 < side {
                edges.push([id(r, c), id(r, c + 1)]);
            }
            if r + 1 < side {
                edges.push([id(r, c), id(r + 1, c)]);
            }
            if r + 1 < side && c + 1 < side && rng.gen_bool(cfg.diagonal_prob) {
                edges.push([id(r, c), id(r + 1, c + 1)]);
            }
        }
    }
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.shuffle(rng);
    let mut keep = vec![true; edges.len()];
    for i in order {
        if !rng.gen_bool(cfg.edge_drop_prob) {
            continue;
        }
        keep[i] = false;
        let kept: Vec<[NodeId; 2]> = edges.iter().zip(&keep).filter(|(_, &k)| k).map(|(e, _)| *e).collect();
        if !connected(nodes.len(), &kept) {
            keep[i] = true;
        }
    }
    let kept: Vec<[NodeId; 2]> = edges.iter().zip(&keep).filter(|(_, &k)| k).map(|(e, _)| *e).collect();
    let mut nodes = nodes;
    assign_landmarks(&mut nodes, &kept, landmarks, rng);
    NavGraph::new(nodes, &kept).expect("generated grid is valid")
}

/// Landmarks in random node order, each avoiding labels already used within
/// two hops where possible, so that a node's neighbours carry distinct labels
/// and a clause naming the next waypoint picks out one neighbour.
fn assign_landmarks(nodes: &mut [Viewpoint], edges: &[[NodeId; 2]], landmarks: usize, rng: &mut ChaCha8Rng) {
    let mut adj = vec![Vec::new(); nodes.len()];
    for &[a, b] in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut label: Vec<Option<usize>> = vec![None; nodes.len()];
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.shuffle(rng);
    for v in order {
        let mut used = vec![false; landmarks];
        for &u in &adj[v] {
            for w in std::iter::once(u).chain(adj[u].iter().copied()) {
                if let Some(l) = label[w] {
                    used[l] = true;
                }
            }
        }
        let free: Vec<usize> = (0..landmarks).filter(|&l| !used[l]).collect();
        label[v] = Some(match free.choose(rng) {
            Some(&l) => l,
            None => rng.gen_range(0..landmarks),
        });
    }
    for (n, l) in nodes.iter_mut().zip(label) {
        n.landmark = l.expect("every node labelled");
    }
}

fn connected(n: usize, edges: &[[NodeId; 2]]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &[a, b] in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

const VERBS: [&[&str]; 3] = [&["then", "go", "to", "the"], &["then", "head", "to", "the"], &["then", "turn", "toward", "the"]];

/// One clause per waypoint after the start, naming that waypoint's landmark.
pub fn instruction_for(path: &[NodeId], graph: &NavGraph, rng: &mut ChaCha8Rng) -> InstructionDoc {
    let spans: Vec<Vec<String>> = path[1..]
        .iter()
        .enumerate()
        .map(|(k, &node)| {
            let lead: &[&str] = if k == 0 {
                &["walk", "to", "the"]
            } else {
                VERBS[rng.gen_range(0..VERBS.len())]
            };
            let mut clause: Vec<String> = lead.iter().map(|s| s.to_string()).collect();
            clause.push(LANDMARK_NAMES[graph.node(node).landmark].to_string());
            clause.push(if k + 2 == path.len() { "." } else { "," }.to_string());
            clause
        })
        .collect();
    InstructionDoc::from_spans(spans, Provenance::Original).expect("non-empty clauses")
}

fn sample_episode(graph: &NavGraph, cfg: &DataConfig, rng: &mut ChaCha8Rng) -> Option<(NodeId, NodeId)> {
    for _ in 0..1000 {
        let s = rng.gen_range(0..graph.len());
        let g = rng.gen_range(0..graph.len());
        let h = graph.hop_distance(s, g);
        if (cfg.min_hop..=cfg.max_hop).contains(&h) {
            return Some((s, g));
        }
    }
    None
}

pub struct GeneratedSplit {
    pub graph_ids: Vec<String>,
    pub graphs: Vec<NavGraph>,
    pub records: Vec<EpisodeRecord>,
}

pub fn generate_split(cfg: &DataConfig, split: Split, seed: u64) -> Result<GeneratedSplit, HarnessError> {
    let (n_maps, side, landmarks, salt) = match split {
        Split::Seen => (cfg.n_maps_seen, cfg.grid_seen, cfg.n_landmarks_seen, 11),
        Split::Unseen => (cfg.n_maps_unseen, cfg.grid_unseen, cfg.n_landmarks, 13),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, salt));
    let mut out = GeneratedSplit {
        graph_ids: Vec::new(),
        graphs: Vec::new(),
        records: Vec::new(),
    };
    for m in 0..n_maps {
        let graph_id = format!("{}_{m:03}", split.name());
        let graph = generate_graph(side, landmarks, cfg, &mut rng);
        for _ in 0..cfg.episodes_per_map {
            let (start, goal) = sample_episode(&graph, cfg, &mut rng).ok_or_else(|| {
                HarnessError::Config(format!("no start/goal pair within {}..={} hops", cfg.min_hop, cfg.max_hop))
            })?;
            let path = shortest_path(&graph, start, goal)?;
            let doc = instruction_for(path.nodes(), &graph, &mut rng);
            out.records.push(EpisodeRecord {
                instr_tokens: doc.tokens().to_vec(),
                sub_spans: doc.sub_spans().to_vec(),
                graph_id: graph_id.clone(),
                start,
                goal,
                path: path.nodes().to_vec(),
            });
        }
        out.graph_ids.push(graph_id);
        out.graphs.push(graph);
    }
    Ok(out)
}

pub fn episodes_path(dir: &Path, split: Split) -> PathBuf {
    dir.join(format!("episodes_{}.jsonl", split.name()))
}

pub fn graph_path(dir: &Path, graph_id: &str) -> PathBuf {
    dir.join("graphs").join(format!("{graph_id}.json"))
}

/// Writes graphs, episodes, lexicon, vocabulary and manifest into `dir`.
pub fn write_dataset(dir: &Path, cfg: &DataConfig, seed: u64) -> Result<Manifest, HarnessError> {
    std::fs::create_dir_all(dir.join("graphs"))?;
    let mut manifest = Manifest {
        seed,
        landmarks: LANDMARK_NAMES[..cfg.n_landmarks].iter().map(|s| s.to_string()).collect(),
        seen_graphs: Vec::new(),
        unseen_graphs: Vec::new(),
    };
    for split in [Split::Seen, Split::Unseen] {
        let gen = generate_split(cfg, split, seed)?;
        for (id, g) in gen.graph_ids.iter().zip(&gen.graphs) {
            g.save(&graph_path(dir, id))?;
        }
        let mut w = std::io::BufWriter::new(std::fs::File::create(episodes_path(dir, split))?);
        for r in &gen.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        match split {
            Split::Seen => manifest.seen_graphs = gen.graph_ids,
            Split::Unseen => manifest.unseen_graphs = gen.graph_ids,
        }
    }
    let lexicon = default_lexicon();
    std::fs::write(dir.join("lexicon.json"), lexicon.to_json())?;
    std::fs::write(dir.join("vocab.json"), serde_json::to_string_pretty(build_vocab(&lexicon).tokens())?)?;
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// A dataset directory loaded into memory.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub manifest: Manifest,
    pub lexicon: Lexicon,
    pub vocab: Vocab,
}

#[derive(Clone, Debug)]
pub struct LoadedSplit {
    pub graphs: Vec<NavGraph>,
    pub episodes: Vec<Episode>,
}

impl Dataset {
    pub fn open(dir: &Path) -> Result<Self, HarnessError> {
        let read = |name: &str| {
            std::fs::read_to_string(dir.join(name))
                .map_err(|e| HarnessError::Data(format!("{}: {e}", dir.join(name).display())))
        };
        let manifest: Manifest = serde_json::from_str(&read("manifest.json")?)?;
        let lexicon = Lexicon::load(&dir.join("lexicon.json"))?;
        let tokens: Vec<String> = serde_json::from_str(&read("vocab.json")?)?;
        let vocab = Vocab::from_tokens(tokens)?;
        Ok(Self {
            manifest,
            lexicon,
            vocab,
        })
    }

    pub fn n_landmarks(&self) -> usize {
        self.manifest.landmarks.len()
    }

    pub fn load_split(&self, dir: &Path, split: Split) -> Result<LoadedSplit, HarnessError> {
        let ids = self.manifest.graphs(split);
        let graphs = ids
            .iter()
            .map(|id| NavGraph::load(&graph_path(dir, id)))
            .collect::<Result<Vec<_>, _>>()?;
        let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let file = std::fs::File::open(episodes_path(dir, split))?;
        let mut episodes = Vec::new();
        for (line_no, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: EpisodeRecord = serde_json::from_str(&line)?;
            let graph = *index
                .get(rec.graph_id.as_str())
                .ok_or_else(|| HarnessError::Data(format!("line {}: unknown graph {}", line_no + 1, rec.graph_id)))?;
            let reference = Trajectory::new(&graphs[graph], rec.path.clone())?;
            if reference.start() != rec.start || reference.end() != rec.goal {
                return Err(HarnessError::Data(format!("line {}: path does not join start and goal", line_no + 1)));
            }
            let instruction = InstructionDoc::new(rec.instr_tokens, rec.sub_spans, Provenance::Original)?;
            episodes.push(Episode {
                id: line_no as u64,
                graph,
                reference,
                instruction,
            });
        }
        Ok(LoadedSplit { graphs, episodes })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_split_one_clause_per_hop() {
        let cfg = DataConfig::default();
        let gen = generate_split(&cfg, Split::Seen, 5).unwrap();
        for r in &gen.records {
            let doc = crate::lang::split_sub_instructions(&r.instr_tokens).unwrap();
            assert_eq!(doc.sub_spans(), r.sub_spans.as_slice());
            assert_eq!(r.sub_spans.len(), r.path.len() - 1);
        }
    }

    #[test]
    fn graphs_are_connected_grids() {
        let cfg = DataConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let g = generate_graph(4, 12, &cfg, &mut rng);
            assert_eq!(g.len(), 16);
            assert!((0..16).all(|v| g.hop_distance(0, v) != usize::MAX));
            assert!(g.nodes().iter().all(|n| n.landmark < 12));
        }
    }

    #[test]
    fn vocab_covers_lexicon_output() {
        let lex = default_lexicon();
        let v = build_vocab(&lex);
        for w in lex.words() {
            for t in w.split_whitespace() {
                assert_ne!(v.id(t), 0, "{t}");
            }
        }
    }
}
