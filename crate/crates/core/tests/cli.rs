use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use citl::env_graph::{shortest_path, NavGraph};
use citl::harness::{EpisodeRecord, RunConfig};

const SMALL: &str = r#"
seed = 5

[data]
n_maps_seen = 2
n_maps_unseen = 1
episodes_per_map = 3

[train]
d = 8
batch_size = 2
steps = 4
traj_positives = 2
traj_negatives = 2
"#;

fn citl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_citl")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn gen(dir: &Path, seed: &str) -> PathBuf {
    let cfg = write_config(dir, SMALL);
    let out = dir.join(format!("data_{seed}"));
    let o = citl(&["gen", "--config", cfg.to_str().unwrap(), "--seed", seed, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn records(data: &Path, split: &str) -> Vec<EpisodeRecord> {
    std::fs::read_to_string(data.join(format!("episodes_{split}.jsonl")))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn gen_writes_expected_counts() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "1");
    let graphs: Vec<_> = std::fs::read_dir(data.join("graphs")).unwrap().collect();
    assert_eq!(graphs.len(), 3);
    assert!(data.join("graphs/seen_000.json").exists());
    assert!(data.join("graphs/seen_001.json").exists());
    assert_eq!(records(&data, "seen").len(), 6);
    assert_eq!(records(&data, "unseen").len(), 3);
    assert!(data.join("resolved_config.toml").exists());
}

#[test]
fn gen_is_byte_identical_per_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ta = read_tree(&gen(a.path(), "7"));
    let tb = read_tree(&gen(b.path(), "7"));
    assert_eq!(ta, tb);
    let tc = read_tree(&gen(a.path(), "8"));
    assert_ne!(ta, tc);
}

#[test]
fn generated_paths_are_shortest_paths() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "2");
    for split in ["seen", "unseen"] {
        for r in records(&data, split) {
            let g = NavGraph::load(&data.join("graphs").join(format!("{}.json", r.graph_id))).unwrap();
            assert_eq!(shortest_path(&g, r.start, r.goal).unwrap().nodes(), r.path.as_slice());
            assert_eq!(r.sub_spans.len(), r.path.len() - 1);
        }
    }
}

#[test]
fn unseen_maps_use_held_out_landmarks() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "3");
    let cfg = RunConfig::from_toml(SMALL).unwrap();
    let landmarks = |prefix: &str| -> Vec<usize> {
        std::fs::read_dir(data.join("graphs"))
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.file_name().unwrap().to_str().unwrap().starts_with(prefix))
            .flat_map(|p| NavGraph::load(&p).unwrap().nodes().iter().map(|v| v.landmark).collect::<Vec<_>>())
            .collect()
    };
    assert!(landmarks("seen").iter().all(|&l| l < cfg.data.n_landmarks_seen));
    assert!(landmarks("unseen").iter().any(|&l| l >= cfg.data.n_landmarks_seen));
}

#[test]
fn train_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "4");
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("train");
    let o = citl(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["checkpoint.json", "train_log.csv", "eval_log.csv", "train_report.json", "resolved_config.toml"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    // Header plus one row per step.
    assert_eq!(std::fs::read_to_string(out.join("train_log.csv")).unwrap().lines().count(), 5);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("train_report.json")).unwrap()).unwrap();
    let hash = RunConfig::from_toml(&std::fs::read_to_string(out.join("resolved_config.toml")).unwrap())
        .unwrap()
        .hash();
    assert_eq!(report["config_hash"], hash);

    let eval_out = dir.path().join("eval");
    let o = citl(&[
        "eval",
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--checkpoint",
        out.join("checkpoint.json").to_str().unwrap(),
        "--split",
        "seen",
        "--out",
        eval_out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = std::fs::read_to_string(eval_out.join("metrics_seen.csv")).unwrap();
    assert_eq!(rows.lines().count(), 7);
}

#[test]
fn train_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "6");
    let cfg = dir.path().join("run.toml");
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = citl(&[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        read_tree(&out)
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad_key = write_config(dir.path(), "seed = 1\nbogus = 3\n");
    let o = citl(&["gen", "--config", bad_key.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));

    let bad_nested = write_config(dir.path(), "[train]\nlambda_instr = 0.5\nlearning_rat = 0.1\n");
    let o = citl(&["gen", "--config", bad_nested.to_str().unwrap(), "--out", dir.path().join("y").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let bad_value = write_config(dir.path(), "[train]\nalpha_p = 1.6\n");
    let o = citl(&["gen", "--config", bad_value.to_str().unwrap(), "--out", dir.path().join("z").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let missing = dir.path().join("nope.toml");
    let o = citl(&["gen", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "1");
    let o = citl(&[
        "eval",
        "--data",
        data.to_str().unwrap(),
        "--checkpoint",
        dir.path().join("missing.json").to_str().unwrap(),
        "--out",
        dir.path().join("e").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = citl(&[
        "train",
        "--data",
        dir.path().join("no_such_dataset").to_str().unwrap(),
        "--out",
        dir.path().join("t").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_keys_are_rejected_by_the_library() {
    assert!(RunConfig::from_toml("[data]\nn_maps = 3\n").is_err());
    assert!(RunConfig::from_toml("[ablation]\nseeds = [1]\nextra = 1\n").is_err());
    let cfg = RunConfig::from_toml("").unwrap();
    assert_eq!(cfg, RunConfig::default());
    // The resolved form materialises every default and parses back to the same config.
    assert_eq!(RunConfig::from_toml(&cfg.resolved_toml()).unwrap(), cfg);
}
