//! Oracle cross-checks shared by `citl check` and the acceptance tests.
//!
//! Each check draws random instances from its own seed, compares the fast path
//! against [`crate::oracle`], and reports the worst discrepancy it saw. The
//! pass threshold is supplied by the caller.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dataset::{default_lexicon, instruction_for};
use crate::agent::{
    a2c_surrogate, advantages, composite_loss, discounted_returns, il_loss, prepare_split, rollout, Banks, Episode,
    PreparedSplit, RolloutMode, RolloutTask, TrainConfig, TrainRngs,
};
use crate::autodiff::{Tape, Var};
use crate::contrast::{assemble_loss, circle_loss, mine_pairs, ContrastConfig, ContrastKind, MarginConfig, MemoryBank};
use crate::encoder::{Dims, EmbeddingRecord, EncoderParams, ParamVars, Role, TracedEmbedding, Vocab};
use crate::env_graph::{
    dtw, enumerate_alternatives, evaluate_episode, partition_trajectories, shortest_path, HopThresholds, NavGraph,
    Trajectory, Viewpoint,
};
use crate::lang::{AugmenterConfig, InstructionDoc};
use crate::oracle;

/// Result of one check: the worst observed discrepancy against the threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub instances: usize,
    /// Worst discrepancy (or count of mismatches for exact checks).
    pub worst: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.worst <= self.threshold
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {} instances, worst {:.3e} (limit {:.1e}){}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.instances,
            self.worst,
            self.threshold,
            if self.detail.is_empty() { String::new() } else { format!("; {}", self.detail) }
        )
    }
}

fn unit_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Circle loss on the tape against the literal scalar formula.
pub fn circle_vs_scalar(instances: usize, seed: u64, threshold: f64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let d = rng.gen_range(2..=8);
        let m = rng.gen_range(0.05..0.45);
        let gamma = rng.gen_range(1.0..64.0);
        let q = unit_vec(&mut rng, d);
        let ps: Vec<Vec<f64>> = (0..rng.gen_range(1..=5)).map(|_| unit_vec(&mut rng, d)).collect();
        let ns: Vec<Vec<f64>> = (0..rng.gen_range(1..=8)).map(|_| unit_vec(&mut rng, d)).collect();
        let tape = Tape::new();
        let qv = tape.constants(&q);
        let pv: Vec<Vec<Var>> = ps.iter().map(|p| tape.constants(p)).collect();
        let nv: Vec<Vec<Var>> = ns.iter().map(|n| tape.constants(n)).collect();
        let pr: Vec<&[Var]> = pv.iter().map(Vec::as_slice).collect();
        let nr: Vec<&[Var]> = nv.iter().map(Vec::as_slice).collect();
        let cfg = MarginConfig::new(m, gamma).expect("valid margins");
        let fast = tape.value(circle_loss(&tape, &qv, &pr, &nr, &cfg).expect("finite"));
        let sp: Vec<f64> = ps.iter().map(|p| dot(&q, p)).collect();
        let sn: Vec<f64> = ns.iter().map(|n| dot(&q, n)).collect();
        let slow = oracle::circle_loss_scalar(&sp, &sn, m, gamma);
        worst = worst.max((fast - slow).abs());
    }
    CheckOutcome {
        name: "circle loss vs scalar oracle",
        instances,
        worst,
        threshold,
        detail: String::new(),
    }
}

/// Pair mining against the set-builder oracle; `worst` counts mismatches.
pub fn mining_vs_bruteforce(instances: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0usize;
    let mut boundary_hits = 0usize;
    for _ in 0..instances {
        let m: f64 = [0.25, 0.1, 0.4][rng.gen_range(0..3)];
        let mut sp: Vec<f64> = (0..rng.gen_range(0..=5)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut sn: Vec<f64> = (0..rng.gen_range(0..=8)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // Plant values exactly on the decision boundaries.
        if let Some(min_p) = sp.iter().copied().reduce(f64::min) {
            for s in sn.iter_mut() {
                match rng.gen_range(0..5) {
                    0 => *s = 1.0 - m,
                    1 => *s = min_p - m,
                    _ => {}
                }
            }
        }
        let kept_n: Vec<f64> = sn.iter().copied().filter(|&s| 1.0 - m > s).collect();
        if let Some(max_n) = kept_n.into_iter().reduce(f64::max) {
            for s in sp.iter_mut() {
                if rng.gen_range(0..6) == 0 {
                    *s = max_n + m;
                    boundary_hits += 1;
                }
            }
        }
        let fast = mine_pairs(&sp, &sn, m);
        let (bp, bn) = oracle::mining_brute(&sp, &sn, m);
        let fp: BTreeSet<usize> = fast.kept_positives.iter().copied().collect();
        let fnn: BTreeSet<usize> = fast.kept_negatives.iter().copied().collect();
        if fp != bp || fnn != bn {
            mismatches += 1;
        }
    }
    CheckOutcome {
        name: "pair mining vs brute-force filter",
        instances,
        worst: mismatches as f64,
        threshold: 0.0,
        detail: format!("{boundary_hits} planted positive boundary values"),
    }
}

/// Random connected graph with `n` nodes on distinct lattice points.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, extra_edge_prob: f64) -> NavGraph {
    let mut cells: Vec<(usize, usize)> = (0..4).flat_map(|x| (0..4).map(move |y| (x, y))).collect();
    for i in (1..cells.len()).rev() {
        cells.swap(i, rng.gen_range(0..=i));
    }
    let scale = rng.gen_range(1.0..3.0);
    let nodes: Vec<Viewpoint> = (0..n)
        .map(|i| Viewpoint {
            id: i,
            pos: [cells[i].0 as f64 * scale, cells[i].1 as f64 * scale, 0.0],
            landmark: rng.gen_range(0..3),
        })
        .collect();
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for i in 1..n {
        edges.insert((rng.gen_range(0..i), i));
    }
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(extra_edge_prob) {
                edges.insert((a, b));
            }
        }
    }
    let edges: Vec<[usize; 2]> = edges.into_iter().map(|(a, b)| [a, b]).collect();
    NavGraph::new(nodes, &edges).expect("valid random graph")
}

/// Enumeration, partition, shortest path and hop distances against brute force.
pub fn trajectory_machinery(graphs: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let th = HopThresholds::new(1.2, 1.4).expect("valid thresholds");
    let mut mismatches = 0usize;
    let mut pairs = 0usize;
    let mut nonempty = 0usize;
    for _ in 0..graphs {
        let n = rng.gen_range(2..=12);
        let p = rng.gen_range(0.1..0.5);
        let g = random_graph(&mut rng, n, p);
        for s in 0..n {
            let hops = oracle::bfs_hops(&g, s);
            for (t, h) in hops.iter().enumerate() {
                if g.hop_distance(s, t) != h.expect("connected") {
                    mismatches += 1;
                }
            }
        }
        for _ in 0..3 {
            let s = rng.gen_range(0..n);
            let t = rng.gen_range(0..n);
            pairs += 1;
            let fast = shortest_path(&g, s, t).expect("connected");
            let slow = oracle::shortest_path_brute(&g, s, t).expect("connected");
            if fast.nodes() != slow.as_slice() {
                mismatches += 1;
                continue;
            }
            let h_gt = slow.len() - 1;
            if h_gt == 0 {
                continue;
            }
            let cap = th.default_hop_cap(h_gt);
            let alts = enumerate_alternatives(&g, s, t, cap, usize::MAX, 0).expect("connected");
            let part = partition_trajectories(&alts, h_gt, 1.2, 1.4).expect("valid thresholds");
            // Integer form of hop <= 1.2 h and hop >= 1.4 h.
            let mut want_pos = Vec::new();
            let mut want_neg = Vec::new();
            for p in oracle::all_simple_paths(&g, s, t, cap) {
                if p == slow {
                    continue;
                }
                let hop = p.len() - 1;
                if 5 * hop <= 6 * h_gt {
                    want_pos.push(p);
                } else if 5 * hop >= 7 * h_gt {
                    want_neg.push(p);
                }
            }
            let sorted = |v: &[Trajectory]| {
                let mut out: Vec<Vec<usize>> = v.iter().map(|t| t.nodes().to_vec()).collect();
                out.sort();
                out
            };
            if sorted(&part.positives) != want_pos || sorted(&part.intra_negatives) != want_neg {
                mismatches += 1;
            }
            if !want_pos.is_empty() || !want_neg.is_empty() {
                nonempty += 1;
            }
        }
    }
    CheckOutcome {
        name: "paths / partition vs exhaustive enumeration",
        instances: graphs,
        worst: mismatches as f64,
        threshold: 0.0,
        detail: format!("{pairs} start/goal pairs, {nonempty} with non-empty partitions"),
    }
}

/// Memory bank contents against the FIFO simulation; `worst` counts mismatches.
pub fn bank_fifo(sequences: usize, capacity: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0usize;
    for _ in 0..sequences {
        let mut bank = MemoryBank::<f64>::new(capacity);
        let mut sim = oracle::FifoSim::new(capacity);
        let mut next = 0u64;
        for _ in 0..rng.gen_range(1..=8) {
            let k = rng.gen_range(0..=capacity + capacity / 2);
            let batch: Vec<EmbeddingRecord<f64>> = (0..k)
                .map(|_| {
                    next += 1;
                    sim.push(next);
                    EmbeddingRecord {
                        vec: vec![next as f64],
                        role: Role::Positive,
                        source_id: next,
                        detached: false,
                    }
                })
                .collect();
            bank.push(&batch);
        }
        let got: Vec<u64> = bank.entries().map(|r| r.source_id).collect();
        if got != sim.contents() || bank.entries().any(|r| !r.detached || r.vec[0] != r.source_id as f64) {
            mismatches += 1;
        }
    }
    CheckOutcome {
        name: "memory bank vs FIFO simulation",
        instances: sequences,
        worst: mismatches as f64,
        threshold: 0.0,
        detail: format!("capacity {capacity}"),
    }
}

/// Gradient reaching the inputs that produced bank entries, analytically and
/// by finite differences with the bank held as stored.
pub fn bank_gradient_probe(instances: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = ContrastConfig {
        use_mining: false,
        ..ContrastConfig::<f64>::default()
    };
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let d = rng.gen_range(2..=6);
        let src = unit_vec(&mut rng, d);
        let q = unit_vec(&mut rng, d);
        let p = unit_vec(&mut rng, d);
        let loss_with = |src: &[f64], bank: &mut MemoryBank<f64>, push: bool| -> (f64, Vec<f64>) {
            let tape = Tape::new();
            let sv = tape.leaves(src);
            let sn = tape.normalize(&sv);
            if push {
                let rec = TracedEmbedding {
                    vec: sn.clone(),
                    role: Role::Positive,
                    source_id: 1,
                };
                bank.push(&[rec.record(&tape)]);
            }
            let qe = TracedEmbedding {
                vec: tape.leaves(&q),
                role: Role::Anchor,
                source_id: 2,
            };
            let pe = TracedEmbedding {
                vec: tape.leaves(&p),
                role: Role::Positive,
                source_id: 2,
            };
            let mut scratch = bank.clone();
            let out = assemble_loss(&tape, ContrastKind::Trajectory, &qe, &[pe], &[], &mut scratch, &cfg)
                .expect("finite loss");
            let g = tape.gradient(out.loss).wrt_all(&sv);
            (tape.value(out.loss), g)
        };
        let mut bank = MemoryBank::new(240);
        let (_, analytic) = loss_with(&src, &mut bank, true);
        let base = loss_with(&src, &mut bank, false).0;
        let h = 1e-5;
        for i in 0..d {
            let mut moved = src.clone();
            moved[i] += h;
            let fd = (loss_with(&moved, &mut bank, false).0 - base) / h;
            worst = worst.max(fd.abs());
        }
        worst = worst.max(analytic.iter().fold(0.0f64, |a, g| a.max(g.abs())));
    }
    CheckOutcome {
        name: "no gradient into bank entries",
        instances,
        worst,
        threshold: 1e-10,
        detail: String::new(),
    }
}

/// DTW against the full table, and the metric identities on random paths.
pub fn metric_identities(instances: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut violations = 0usize;
    for _ in 0..instances {
        let n = rng.gen_range(3..=12);
        let g = random_graph(&mut rng, n, 0.3);
        let walk = |rng: &mut ChaCha8Rng| {
            let mut v = rng.gen_range(0..n);
            let mut path = vec![v];
            for _ in 0..rng.gen_range(0..6) {
                let nb = g.neighbors(v);
                v = nb[rng.gen_range(0..nb.len())].0;
                path.push(v);
            }
            Trajectory::new(&g, path).expect("walks follow edges")
        };
        let a = walk(&mut rng);
        let b = walk(&mut rng);
        let fast = dtw(&g, a.nodes(), b.nodes());
        let slow = oracle::dtw_full(&g, a.nodes(), b.nodes());
        worst = worst.max((fast - slow).abs());

        let same = evaluate_episode(&g, &a, &a, 3.0);
        if same.sr != 1.0 || (same.spl - same.sr).abs() > 1e-12 || (same.ndtw - 1.0).abs() > 1e-12 {
            violations += 1;
        }
        let other = evaluate_episode(&g, &b, &a, 3.0);
        if other.spl > other.sr + 1e-12 {
            violations += 1;
        }
    }
    CheckOutcome {
        name: "metric identities / DTW vs full table",
        instances,
        worst: worst + violations as f64,
        threshold: 1e-9,
        detail: format!("{violations} identity violations"),
    }
}

// ---- gradient checks -------------------------------------------------------

/// Finite-difference step and the floor on the relative-error denominator.
pub const FD_STEP: f64 = 1e-5;
pub const FD_FLOOR: f64 = 1e-6;

/// Denominator floor for a loss of value `f`. Central differences carry
/// roundoff of order `eps·|f|/h`, so the floor grows with the loss.
pub fn fd_floor(f: f64) -> f64 {
    FD_FLOOR * f.abs().max(1.0)
}

fn grad_outcome(name: &'static str, instances: usize, worst: f64, threshold: f64, coords: usize) -> CheckOutcome {
    CheckOutcome {
        name,
        instances,
        worst,
        threshold,
        detail: format!("{coords} coordinates compared"),
    }
}

/// Circle loss gradient with respect to the raw (pre-normalisation) vectors.
pub fn grad_circle(instances: usize, seed: u64, threshold: f64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut coords = 0;
    for _ in 0..instances {
        let d = rng.gen_range(2..=5);
        let np = rng.gen_range(1..=3);
        let nn = rng.gen_range(1..=4);
        let m = rng.gen_range(0.1..0.4);
        let gamma = rng.gen_range(1.0..32.0);
        let x: Vec<f64> = (0..d * (1 + np + nn)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cfg = MarginConfig::new(m, gamma).expect("valid margins");
        let eval = |x: &[f64]| -> (f64, Vec<f64>) {
            let tape = Tape::new();
            let xv = tape.leaves(x);
            let vs: Vec<Vec<Var>> = xv.chunks(d).map(|c| tape.normalize(c)).collect();
            let pr: Vec<&[Var]> = vs[1..=np].iter().map(Vec::as_slice).collect();
            let nr: Vec<&[Var]> = vs[np + 1..].iter().map(Vec::as_slice).collect();
            let l = circle_loss(&tape, &vs[0], &pr, &nr, &cfg).expect("finite");
            (tape.value(l), tape.gradient(l).wrt_all(&xv))
        };
        let (f, analytic) = eval(&x);
        let fd = oracle::central_diff(|p| eval(p).0, &x, FD_STEP);
        worst = worst.max(oracle::max_relative_error(&analytic, &fd, fd_floor(f)));
        coords += x.len();
    }
    grad_outcome("circle loss gradient vs finite differences", instances, worst, threshold, coords)
}

/// A tiny dataset for gradient checks: 3x3 grid, short episodes, width 4.
pub struct GradFixture {
    pub split: PreparedSplit,
    pub cfg: TrainConfig,
    pub dims: Dims,
}

pub fn grad_fixture(seed: u64) -> GradFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = super::config::DataConfig {
        diagonal_prob: 0.3,
        edge_drop_prob: 0.1,
        ..super::config::DataConfig::default()
    };
    let graph = super::dataset::generate_graph(3, 3, &data, &mut rng);
    let mut episodes = Vec::new();
    let mut words: Vec<String> = Vec::new();
    for id in 0..8u64 {
        let (s, t) = loop {
            let s = rng.gen_range(0..graph.len());
            let t = rng.gen_range(0..graph.len());
            if (2..=3).contains(&graph.hop_distance(s, t)) {
                break (s, t);
            }
        };
        let path = shortest_path(&graph, s, t).expect("connected");
        let doc: InstructionDoc = instruction_for(path.nodes(), &graph, &mut rng);
        words.extend(doc.tokens().iter().cloned());
        episodes.push(Episode {
            id,
            graph: 0,
            reference: path,
            instruction: doc,
        });
    }
    let lexicon = default_lexicon();
    words.extend(lexicon.words().flat_map(|w| w.split_whitespace()).map(str::to_string));
    let vocab = Vocab::build(words.iter().map(String::as_str));
    let cfg = TrainConfig {
        d: 4,
        batch_size: 2,
        max_steps: 5,
        traj_positives: 2,
        traj_negatives: 2,
        instr_negatives: 1,
        ..TrainConfig::default()
    };
    let aug = AugmenterConfig::new(lexicon);
    let (mut split, _) = prepare_split(vec![graph], &episodes, &vocab, &aug, &cfg, seed).expect("fixture prepares");
    // Episodes with trajectory positives first, so a leading batch exercises every term.
    split.episodes.sort_by_key(|e| e.traj_positives.is_empty());
    let dims = Dims {
        vocab: vocab.len(),
        n_landmarks: 3,
        d: cfg.d,
    };
    GradFixture { split, cfg, dims }
}

/// Rescaled and jittered initial parameters, so biases are nonzero and
/// nonlinearities are exercised away from their linear regime.
fn random_params(dims: Dims, rng: &mut ChaCha8Rng) -> EncoderParams<f64> {
    let mut p = EncoderParams::<f64>::init(dims, rng.gen());
    let scale = rng.gen_range(0.5..2.0);
    p.as_mut_slice().iter_mut().for_each(|x| *x = *x * scale + rng.gen_range(-0.2..0.2));
    p
}

fn param_gradient_check<L>(params: &EncoderParams<f64>, loss: L) -> (f64, usize)
where
    L: Fn(&Tape<f64>, &ParamVars) -> Var,
{
    let (w, n, _) = param_gradient_detail(params, loss);
    (w, n)
}

/// Worst relative error, coordinate count and `(index, analytic, numeric)` at the worst.
pub fn param_gradient_detail<L>(params: &EncoderParams<f64>, loss: L) -> (f64, usize, (usize, f64, f64))
where
    L: Fn(&Tape<f64>, &ParamVars) -> Var,
{
    let eval = |flat: &[f64]| -> f64 {
        let p = EncoderParams::from_flat(params.dims(), flat.to_vec()).expect("same shape");
        let tape = Tape::new();
        let pv = p.load(&tape);
        tape.value(loss(&tape, &pv))
    };
    let tape = Tape::new();
    let pv = params.load(&tape);
    let out = loss(&tape, &pv);
    let floor = fd_floor(tape.value(out));
    let analytic = tape.gradient(out).wrt_all(pv.all());
    let fd = oracle::central_diff(eval, params.as_slice(), FD_STEP);
    let mut worst = (0.0, (0, 0.0, 0.0));
    for (i, (&a, &f)) in analytic.iter().zip(&fd).enumerate() {
        let e = oracle::relative_error(a, f, floor);
        if e > worst.0 {
            worst = (e, (i, a, f));
        }
    }
    (worst.0, analytic.len(), worst.1)
}

fn fixture_task<'a>(fx: &'a GradFixture, i: usize) -> RolloutTask<'a> {
    let ep = &fx.split.episodes[i];
    RolloutTask {
        graph: fx.split.graph_of(ep),
        tokens: &ep.tokens,
        start: ep.start(),
        goal: ep.goal(),
        max_steps: fx.cfg.max_steps,
        success_radius_m: fx.cfg.success_radius_m,
    }
}

/// Imitation loss on teacher-forced rollouts.
pub fn grad_il(instances: usize, seed: u64, threshold: f64) -> CheckOutcome {
    let fx = grad_fixture(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11);
    let mut worst = 0.0f64;
    let mut coords = 0;
    for _ in 0..instances {
        let params = random_params(fx.dims, &mut rng);
        let ep = rng.gen_range(0..fx.split.episodes.len());
        let (w, n) = param_gradient_check(&params, |tape, pv| {
            let mut r = ChaCha8Rng::seed_from_u64(0);
            let tr = rollout(tape, pv, &fixture_task(&fx, ep), RolloutMode::TeacherForced, &mut r).expect("rollout");
            il_loss(tape, &tr)
        });
        worst = worst.max(w);
        coords += n;
    }
    grad_outcome("imitation loss gradient vs finite differences", instances, worst, threshold, coords)
}

/// Actor-critic loss on sampled rollouts, advantages pinned at the base point.
pub fn grad_a2c(instances: usize, seed: u64, threshold: f64) -> CheckOutcome {
    let fx = grad_fixture(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x22);
    let mut worst = 0.0f64;
    let mut coords = 0;
    for _ in 0..instances {
        let params = random_params(fx.dims, &mut rng);
        let ep = rng.gen_range(0..fx.split.episodes.len());
        let sample_seed: u64 = rng.gen();
        let task = fixture_task(&fx, ep);
        let frozen = {
            let tape = Tape::new();
            let pv = params.load_frozen(&tape);
            let tr = rollout(&tape, &pv, &task, RolloutMode::Sampled, &mut ChaCha8Rng::seed_from_u64(sample_seed))
                .expect("rollout");
            let returns = discounted_returns(&tr.rewards(), fx.cfg.rl_discount);
            (advantages(&tape, &tr, &returns), returns)
        };
        let (w, n) = param_gradient_check(&params, |tape, pv| {
            let mut r = ChaCha8Rng::seed_from_u64(sample_seed);
            let tr = rollout(tape, pv, &task, RolloutMode::Sampled, &mut r).expect("rollout");
            a2c_surrogate(tape, &tr, &frozen.1, &frozen.0, fx.cfg.value_coef).total
        });
        worst = worst.max(w);
        coords += n;
    }
    grad_outcome("actor-critic loss gradient vs finite differences", instances, worst, threshold, coords)
}

/// Full composite objective on a two-episode batch with pre-filled banks.
pub fn grad_composite(instances: usize, seed: u64, threshold: f64) -> CheckOutcome {
    let fx = grad_fixture(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x33);
    let ccfg = fx.cfg.contrast::<f64>().expect("valid config");
    let mut worst = 0.0f64;
    let mut coords = 0;
    for _ in 0..instances {
        let params = random_params(fx.dims, &mut rng);
        let mut banks = Banks::new(fx.cfg.bank_capacity);
        for bank in [&mut banks.trajectory, &mut banks.instruction, &mut banks.sub_instruction] {
            let recs: Vec<EmbeddingRecord<f64>> = (0..6)
                .map(|k| EmbeddingRecord {
                    vec: unit_vec(&mut rng, fx.dims.d),
                    role: Role::Positive,
                    source_id: 100 + k,
                    detached: true,
                })
                .collect();
            bank.push(&recs);
        }
        let n = fx.split.episodes.len();
        let with_pos = fx.split.episodes.iter().filter(|e| !e.traj_positives.is_empty()).count();
        let a = rng.gen_range(0..with_pos.max(1));
        let batch = vec![a, (a + 1 + rng.gen_range(0..n - 1)) % n];
        let rngs = TrainRngs::new(rng.gen());
        let frozen = {
            let tape = Tape::new();
            let pv = params.load_frozen(&tape);
            let out = composite_loss(&tape, &pv, &fx.split, &batch, &mut banks.clone(), &fx.cfg, &ccfg, &mut rngs.clone(), None)
                .expect("composite");
            out.advantages
        };
        let (w, k) = param_gradient_check(&params, |tape, pv| {
            composite_loss(tape, pv, &fx.split, &batch, &mut banks.clone(), &fx.cfg, &ccfg, &mut rngs.clone(), Some(&frozen))
                .expect("composite")
                .total
        });
        worst = worst.max(w);
        coords += k;
    }
    grad_outcome("composite objective gradient vs finite differences", instances, worst, threshold, coords)
}

/// Every check at the sizes `citl check` uses.
pub fn full_suite(seed: u64) -> Vec<CheckOutcome> {
    vec![
        circle_vs_scalar(1000, seed, 1e-9),
        mining_vs_bruteforce(1000, seed),
        grad_circle(100, seed, 1e-4),
        grad_il(100, seed, 1e-4),
        grad_a2c(100, seed, 1e-4),
        grad_composite(100, seed, 1e-4),
        trajectory_machinery(200, seed),
        bank_fifo(10_000, 240, seed),
        bank_gradient_probe(100, seed),
        metric_identities(100, seed),
    ]
}
