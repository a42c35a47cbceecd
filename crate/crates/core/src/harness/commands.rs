use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::ablation::{ablation_matrix, format_ablation_table, run_ablation, write_ablation_csv, RowSummary};
use super::checks::{full_suite, CheckOutcome};
use super::config::RunConfig;
use super::dataset::{write_dataset, Dataset, Manifest, Split};
use super::HarnessError;
use crate::agent::{
    evaluate, prepare_split, EvalPolicy, LossBreakdown, PrepareStats, PreparedSplit, TrainObjective, Trainer,
};
use crate::contrast::MiningStats;
use crate::encoder::{Checkpoint, Dims, EncoderParams};
use crate::env_graph::{write_metrics_csv, MetricReport, METRIC_HEADER};
use crate::lang::AugmenterConfig;

/// Generates the synthetic dataset into `out`.
pub fn cmd_gen(cfg: &RunConfig, out: &Path) -> Result<Manifest, HarnessError> {
    let manifest = write_dataset(out, &cfg.data, cfg.seed)?;
    cfg.persist(out)?;
    Ok(manifest)
}

/// Both splits of a dataset directory, prepared for training.
pub struct PreparedDataset {
    pub dataset: Dataset,
    pub seen: PreparedSplit,
    pub unseen: PreparedSplit,
    pub stats: [PrepareStats; 2],
}

impl PreparedDataset {
    pub fn dims(&self, d: usize) -> Dims {
        Dims {
            vocab: self.dataset.vocab.len(),
            n_landmarks: self.dataset.n_landmarks(),
            d,
        }
    }

    pub fn split(&self, split: Split) -> &PreparedSplit {
        match split {
            Split::Seen => &self.seen,
            Split::Unseen => &self.unseen,
        }
    }
}

/// Loads and prepares both splits. Augmentation and trajectory sampling are
/// seeded by the config seed, so every training seed sees the same data.
pub fn prepare_dataset(cfg: &RunConfig, data_dir: &Path) -> Result<PreparedDataset, HarnessError> {
    let dataset = Dataset::open(data_dir)?;
    let aug = AugmenterConfig::new(dataset.lexicon.clone());
    let mut prepared = Vec::new();
    for split in [Split::Seen, Split::Unseen] {
        let loaded = dataset.load_split(data_dir, split)?;
        prepared.push(prepare_split(loaded.graphs, &loaded.episodes, &dataset.vocab, &aug, &cfg.train, cfg.seed)?);
    }
    let (unseen, u_stats) = prepared.pop().expect("two splits");
    let (seen, s_stats) = prepared.pop().expect("two splits");
    Ok(PreparedDataset {
        dataset,
        seen,
        unseen,
        stats: [s_stats, u_stats],
    })
}

fn mining_cols(prefix: &str) -> Vec<String> {
    ["anchors", "skipped", "kept_pos", "kept_neg", "false_neg", "easy_neg", "bank_neg"]
        .iter()
        .map(|c| format!("{prefix}_{c}"))
        .collect()
}

fn mining_vals(m: &MiningStats) -> Vec<String> {
    [
        m.anchors,
        m.skipped_anchors,
        m.kept_positives,
        m.kept_negatives,
        m.false_negatives,
        m.easy_negatives,
        m.bank_negatives,
    ]
    .iter()
    .map(usize::to_string)
    .collect()
}

fn log_header() -> Vec<String> {
    let mut h: Vec<String> = ["step", "L_IL", "L_RL", "L_CT", "L_CI", "L_FI", "total", "grad_norm"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for p in ["ct", "ci", "fi"] {
        h.extend(mining_cols(p));
    }
    h
}

fn log_row(step: usize, b: &LossBreakdown) -> Vec<String> {
    let mut r = vec![step.to_string()];
    r.extend([b.il, b.rl, b.ct, b.ci, b.fi, b.total, b.grad_norm].iter().map(|v| format!("{v}")));
    for m in [&b.mining_ct, &b.mining_ci, &b.mining_fi] {
        r.extend(mining_vals(m));
    }
    r
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainSummary {
    pub config_hash: String,
    pub seed: u64,
    pub steps: usize,
    pub objective: TrainObjective,
    pub final_loss: LossBreakdown,
    pub seen: MetricReport,
    pub unseen: MetricReport,
    pub prepare_seen: PrepareStats,
    pub prepare_unseen: PrepareStats,
}

/// Trains on the seen split, logging every step and evaluating both splits
/// every `eval_every` steps and at the end.
pub fn cmd_train(
    cfg: &RunConfig,
    data_dir: &Path,
    out: &Path,
    seed: u64,
    objective: TrainObjective,
) -> Result<TrainSummary, HarnessError> {
    let hash = cfg.persist(out)?;
    let data = prepare_dataset(cfg, data_dir)?;
    let tc = &cfg.train;
    let mut trainer = Trainer::<f64>::new(data.dims(tc.d), tc.clone(), seed, objective)?;

    let mut train_log = csv::Writer::from_writer(BufWriter::new(File::create(out.join("train_log.csv"))?));
    train_log.write_record(log_header())?;
    let mut eval_log = csv::Writer::from_writer(BufWriter::new(File::create(out.join("eval_log.csv"))?));
    let mut eh = vec!["step".to_string(), "split".to_string()];
    eh.extend(METRIC_HEADER.iter().map(|s| s.to_string()));
    eval_log.write_record(&eh)?;

    let eval_both = |params: &EncoderParams<f64>| -> Result<[MetricReport; 2], HarnessError> {
        let ev = |s: &PreparedSplit| evaluate(params, s, tc.max_steps, tc.success_radius_m, EvalPolicy::Greedy);
        Ok([ev(&data.seen)?.mean, ev(&data.unseen)?.mean])
    };
    let write_eval = |log: &mut csv::Writer<_>, step: usize, m: &[MetricReport; 2]| -> Result<(), HarnessError> {
        for (split, r) in ["seen", "unseen"].iter().zip(m) {
            let mut row = vec![step.to_string(), split.to_string()];
            row.extend(r.as_row().iter().map(|v| format!("{v}")));
            log.write_record(&row)?;
        }
        Ok(())
    };

    let mut last = LossBreakdown::default();
    for _ in 0..tc.steps {
        let b = trainer.step(&data.seen)?;
        let step = trainer.steps_done();
        train_log.write_record(log_row(step, &b))?;
        if tc.eval_every > 0 && step % tc.eval_every == 0 && step < tc.steps {
            let m = eval_both(&trainer.params)?;
            write_eval(&mut eval_log, step, &m)?;
        }
        last = b;
    }
    let final_metrics = eval_both(&trainer.params)?;
    write_eval(&mut eval_log, trainer.steps_done(), &final_metrics)?;
    train_log.flush()?;
    eval_log.flush()?;

    Checkpoint::new(&data.dataset.vocab, &trainer.params).save(&out.join("checkpoint.json"))?;
    let summary = TrainSummary {
        config_hash: hash,
        seed,
        steps: trainer.steps_done(),
        objective,
        final_loss: last,
        seen: final_metrics[0],
        unseen: final_metrics[1],
        prepare_seen: data.stats[0],
        prepare_unseen: data.stats[1],
    };
    std::fs::write(out.join("train_report.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

/// Greedy evaluation of a checkpoint; writes per-episode metrics.
pub fn cmd_eval(
    cfg: &RunConfig,
    data_dir: &Path,
    checkpoint: &Path,
    split: Split,
    out: &Path,
) -> Result<MetricReport, HarnessError> {
    let hash = cfg.persist(out)?;
    let data = prepare_dataset(cfg, data_dir)?;
    let (vocab, params) = Checkpoint::load(checkpoint)?.restore::<f64>()?;
    if vocab != data.dataset.vocab {
        return Err(HarnessError::Data("checkpoint vocabulary does not match the dataset".into()));
    }
    let report = evaluate(
        &params,
        data.split(split),
        cfg.train.max_steps,
        cfg.train.success_radius_m,
        EvalPolicy::Greedy,
    )?;
    let path = out.join(format!("metrics_{}.csv", split.name()));
    write_metrics_csv(BufWriter::new(File::create(path)?), &report.episodes)?;
    let mut f = File::create(out.join(format!("metrics_{}_summary.json", split.name())))?;
    serde_json::to_writer_pretty(
        &mut f,
        &serde_json::json!({ "config_hash": hash, "split": split.name(), "mean": report.mean }),
    )?;
    Ok(report.mean)
}

/// Trains every ablation row over the configured seeds and writes
/// `ablation.csv` and `ablation.txt`.
pub fn cmd_ablate(cfg: &RunConfig, data_dir: &Path, out: &Path) -> Result<Vec<RowSummary>, HarnessError> {
    let hash = cfg.persist(out)?;
    let data = prepare_dataset(cfg, data_dir)?;
    let mut base = cfg.train.clone();
    if let Some(steps) = cfg.ablation.steps {
        base.steps = steps;
    }
    let rows = ablation_matrix(&base);
    let summary = run_ablation(&rows, &cfg.ablation.seeds, data.dims(base.d), &data.seen, &data.unseen)?;
    write_ablation_csv(BufWriter::new(File::create(out.join("ablation.csv"))?), &summary)?;
    let mut text = format!("config {hash}\nseeds {:?}, {} steps\n", cfg.ablation.seeds, base.steps);
    text.push_str(&format_ablation_table(&summary));
    std::fs::write(out.join("ablation.txt"), &text)?;
    Ok(summary)
}

/// Runs the oracle suite; fails if any check fails.
pub fn cmd_check(seed: u64, out: Option<&Path>) -> Result<Vec<CheckOutcome>, HarnessError> {
    let outcomes = full_suite(seed);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let mut f = BufWriter::new(File::create(dir.join("check_report.txt"))?);
        for o in &outcomes {
            writeln!(f, "{}", o.line())?;
        }
        f.flush()?;
    }
    let failed = outcomes.iter().filter(|o| !o.passed()).count();
    if failed > 0 {
        for o in &outcomes {
            eprintln!("{}", o.line());
        }
        return Err(HarnessError::ChecksFailed(failed));
    }
    Ok(outcomes)
}
