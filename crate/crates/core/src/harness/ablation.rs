use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::HarnessError;
use crate::agent::{evaluate, EvalPolicy, PreparedSplit, TrainConfig, TrainObjective, Trainer};
use crate::contrast::Objective;
use crate::encoder::Dims;

/// One named training configuration of the ablation matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub table: &'static str,
    pub name: &'static str,
    pub cfg: TrainConfig,
    pub objective: TrainObjective,
}

/// The loss/mining rows (trajectory loss alone) followed by the coarse/fine rows.
pub fn ablation_matrix(base: &TrainConfig) -> Vec<AblationRow> {
    let traj_only = TrainConfig {
        lambda_instr: 0.0,
        lambda_sub: 0.0,
        ..base.clone()
    };
    let info_nce = Objective::InfoNce { temperature: 0.1 };
    let variant = |objective: Objective, use_bank: bool, use_mining: bool| TrainConfig {
        objective,
        use_bank,
        use_mining,
        ..traj_only.clone()
    };
    let row = |table, name, cfg| AblationRow {
        table,
        name,
        cfg,
        objective: TrainObjective::Composite,
    };
    let full = TrainConfig {
        objective: Objective::Circle,
        use_bank: true,
        use_mining: true,
        ..base.clone()
    };
    vec![
        row("loss", "1_infonce_bank", variant(info_nce, true, false)),
        row(
            "loss",
            "2_infonce_bank_pm",
            TrainConfig {
                traj_positives: 16,
                ..variant(info_nce, true, true)
            },
        ),
        row("loss", "3_circle", variant(Objective::Circle, false, false)),
        row("loss", "4_circle_bank", variant(Objective::Circle, true, false)),
        row("loss", "5_circle_pm", variant(Objective::Circle, false, true)),
        row("loss", "full", variant(Objective::Circle, true, true)),
        AblationRow {
            table: "terms",
            name: "baseline",
            cfg: TrainConfig {
                lambda_traj_cp: 0.0,
                lambda_instr: 0.0,
                lambda_sub: 0.0,
                ..full.clone()
            },
            objective: TrainObjective::IlRlOnly,
        },
        row(
            "terms",
            "1_traj",
            TrainConfig {
                lambda_instr: 0.0,
                lambda_sub: 0.0,
                ..full.clone()
            },
        ),
        row(
            "terms",
            "2_instr",
            TrainConfig {
                lambda_traj_cp: 0.0,
                lambda_sub: 0.0,
                ..full.clone()
            },
        ),
        row(
            "terms",
            "3_sub",
            TrainConfig {
                lambda_traj_cp: 0.0,
                lambda_instr: 0.0,
                ..full.clone()
            },
        ),
        row("terms", "full", full),
    ]
}

/// Unseen/seen outcome of one (row, seed) run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RunResult {
    pub seed: u64,
    pub unseen_sr: f64,
    pub unseen_spl: f64,
    pub seen_sr: f64,
    pub seen_spl: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RowSummary {
    pub table: &'static str,
    pub name: &'static str,
    pub runs: Vec<RunResult>,
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl RowSummary {
    fn column(&self, f: impl Fn(&RunResult) -> f64) -> (f64, f64) {
        mean_std(&self.runs.iter().map(f).collect::<Vec<_>>())
    }

    pub fn unseen_sr(&self) -> (f64, f64) {
        self.column(|r| r.unseen_sr)
    }

    pub fn unseen_spl(&self) -> (f64, f64) {
        self.column(|r| r.unseen_spl)
    }

    pub fn seen_sr(&self) -> (f64, f64) {
        self.column(|r| r.seen_sr)
    }

    pub fn seen_spl(&self) -> (f64, f64) {
        self.column(|r| r.seen_spl)
    }
}

/// Trains and evaluates one configuration for one seed.
pub fn run_one(
    cfg: &TrainConfig,
    objective: TrainObjective,
    dims: Dims,
    seed: u64,
    seen: &PreparedSplit,
    unseen: &PreparedSplit,
) -> Result<RunResult, HarnessError> {
    let mut trainer = Trainer::<f64>::new(dims, cfg.clone(), seed, objective)?;
    trainer.fit(seen, |_, _, _| Ok(()))?;
    let ev = |split| evaluate(&trainer.params, split, cfg.max_steps, cfg.success_radius_m, EvalPolicy::Greedy);
    let u = ev(unseen)?.mean;
    let s = ev(seen)?.mean;
    Ok(RunResult {
        seed,
        unseen_sr: u.sr,
        unseen_spl: u.spl,
        seen_sr: s.sr,
        seen_spl: s.spl,
    })
}

/// Runs every row over every seed. Rows with identical settings are trained
/// once and shared. Runs execute in parallel; each run is single-threaded
/// apart from evaluation.
pub fn run_ablation(
    rows: &[AblationRow],
    seeds: &[u64],
    dims: Dims,
    seen: &PreparedSplit,
    unseen: &PreparedSplit,
) -> Result<Vec<RowSummary>, HarnessError> {
    let mut unique: Vec<(&TrainConfig, TrainObjective)> = Vec::new();
    let row_key: Vec<usize> = rows
        .iter()
        .map(|r| match unique.iter().position(|(c, o)| **c == r.cfg && *o == r.objective) {
            Some(i) => i,
            None => {
                unique.push((&r.cfg, r.objective));
                unique.len() - 1
            }
        })
        .collect();
    let jobs: Vec<(usize, u64)> = (0..unique.len()).flat_map(|u| seeds.iter().map(move |&s| (u, s))).collect();
    let results = jobs
        .par_iter()
        .map(|&(u, seed)| run_one(unique[u].0, unique[u].1, dims, seed, seen, unseen))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(rows
        .iter()
        .zip(&row_key)
        .map(|(r, &u)| RowSummary {
            table: r.table,
            name: r.name,
            runs: jobs
                .iter()
                .zip(&results)
                .filter(|((ju, _), _)| *ju == u)
                .map(|(_, res)| *res)
                .collect(),
        })
        .collect())
}

/// One row per (configuration, seed) plus mean and stdev rows.
pub fn write_ablation_csv<W: Write>(out: W, rows: &[RowSummary]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["table", "config", "seed", "unseen_SR", "unseen_SPL", "seen_SR", "seen_SPL"])?;
    for r in rows {
        for run in &r.runs {
            w.write_record([
                r.table.to_string(),
                r.name.to_string(),
                run.seed.to_string(),
                format!("{}", run.unseen_sr),
                format!("{}", run.unseen_spl),
                format!("{}", run.seen_sr),
                format!("{}", run.seen_spl),
            ])?;
        }
        let stats = [r.unseen_sr(), r.unseen_spl(), r.seen_sr(), r.seen_spl()];
        for (label, pick) in [("mean", 0usize), ("std", 1)] {
            let mut rec = vec![r.table.to_string(), r.name.to_string(), label.to_string()];
            rec.extend(stats.iter().map(|s| format!("{}", if pick == 0 { s.0 } else { s.1 })));
            w.write_record(rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Fixed-width text table of mean ± stdev, in percent.
pub fn format_ablation_table(rows: &[RowSummary]) -> String {
    let mut s = String::new();
    let mut table = "";
    for r in rows {
        if r.table != table {
            table = r.table;
            let title = match table {
                "loss" => "Trajectory loss: objective / memory bank / pair mining",
                _ => "Coarse and fine-grained contrastive terms",
            };
            let _ = writeln!(s, "\n{title}");
            let _ = writeln!(
                s,
                "{:<20} {:>16} {:>16} {:>16} {:>16}",
                "config", "unseen SR", "unseen SPL", "seen SR", "seen SPL"
            );
        }
        let cell = |(m, sd): (f64, f64)| format!("{:.1} ± {:.1}", 100.0 * m, 100.0 * sd);
        let _ = writeln!(
            s,
            "{:<20} {:>16} {:>16} {:>16} {:>16}",
            r.name,
            cell(r.unseen_sr()),
            cell(r.unseen_spl()),
            cell(r.seen_sr()),
            cell(r.seen_spl())
        );
    }
    s
}
