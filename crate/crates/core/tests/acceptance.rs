//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 7 and 9 train the full ablation matrix on the default synthetic
//! suite and take several minutes.

use std::path::Path;
use std::time::{Duration, Instant};

use citl::agent::{evaluate, EvalPolicy, TrainConfig, TrainObjective, Trainer};
use citl::contrast::{circle_loss_sims, MarginConfig};
use citl::harness::checks::{self, CheckOutcome};
use citl::harness::{cmd_ablate, cmd_gen, prepare_dataset, RowSummary, RunConfig};
use citl::{oracle, Tape};

const SEED: u64 = 0;

struct Line {
    id: u8,
    title: &'static str,
    ok: bool,
    detail: String,
    elapsed: Duration,
}

impl Line {
    fn print(&self) {
        println!(
            "{} criterion {}: {} ({:.1} s) {}",
            if self.ok { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.elapsed.as_secs_f64(),
            self.detail
        );
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn from_checks(id: u8, title: &'static str, limit: Option<Duration>, run: impl FnOnce() -> Vec<CheckOutcome>) -> Line {
    let (outcomes, elapsed) = timed(run);
    let ok = outcomes.iter().all(CheckOutcome::passed) && limit.is_none_or(|l| elapsed < l);
    let mut detail = match limit {
        Some(l) => format!("[limit {:.0} s]", l.as_secs_f64()),
        None => "[no time limit]".to_string(),
    };
    for o in &outcomes {
        detail.push_str("\n    ");
        detail.push_str(&o.line());
    }
    Line {
        id,
        title,
        ok,
        detail,
        elapsed,
    }
}

fn hand_case() -> CheckOutcome {
    let tape = Tape::<f64>::new();
    let cfg = MarginConfig::new(0.25, 1.0).unwrap();
    let sp = [tape.constant(0.6)];
    let sn = [tape.constant(0.4)];
    let v = tape.value(circle_loss_sims(&tape, &sp, &sn, &cfg).unwrap());
    let scalar = oracle::circle_loss_scalar(&[0.6], &[0.4], 0.25, 1.0);
    CheckOutcome {
        name: "hand case sp=0.6 sn=0.4 m=0.25 gamma=1 (expected about 0.7955)",
        instances: 1,
        worst: (v - 0.7955).abs().max((v - scalar).abs()),
        threshold: 1e-3,
        detail: format!("value {v:.6}"),
    }
}

fn baseline_reduction() -> Line {
    let (res, elapsed) = timed(|| -> Result<(bool, String), Box<dyn std::error::Error>> {
        let fx = checks::grad_fixture(3);
        let cfg = TrainConfig {
            lambda_traj_cp: 0.0,
            lambda_instr: 0.0,
            lambda_sub: 0.0,
            steps: 25,
            ..fx.cfg.clone()
        };
        let mut composite = Trainer::<f64>::new(fx.dims, cfg.clone(), 11, TrainObjective::Composite)?;
        let mut il_rl = Trainer::<f64>::new(fx.dims, cfg.clone(), 11, TrainObjective::IlRlOnly)?;
        let mut same_losses = true;
        for _ in 0..cfg.steps {
            let a = composite.step(&fx.split)?;
            let b = il_rl.step(&fx.split)?;
            same_losses &= a.total.to_bits() == b.total.to_bits() && a.grad_norm.to_bits() == b.grad_norm.to_bits();
        }
        let bits = |t: &Trainer<f64>| t.params.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        let same_params = bits(&composite) == bits(&il_rl);
        let moved = composite.params != Trainer::<f64>::new(fx.dims, cfg.clone(), 11, TrainObjective::Composite)?.params;
        Ok((
            same_losses && same_params && moved,
            format!(
                "{} steps; losses bit-identical {same_losses}; parameters bit-identical {same_params}; parameters moved {moved}",
                cfg.steps
            ),
        ))
    });
    let (ok, detail) = res.unwrap_or_else(|e| (false, format!("error: {e}")));
    Line {
        id: 6,
        title: "zero-weight composite is bit-identical to imitation + actor-critic",
        ok,
        detail,
        elapsed,
    }
}

fn row<'a>(rows: &'a [RowSummary], table: &str, name: &str) -> Option<&'a RowSummary> {
    rows.iter().find(|r| r.table == table && r.name == name)
}

fn directional(rows: &[RowSummary], elapsed: Duration, limit: Duration) -> Line {
    let mut detail = String::new();
    let mut ok = elapsed < limit;
    let full = row(rows, "terms", "full");
    let base = row(rows, "terms", "baseline");
    match (full, base) {
        (Some(full), Some(base)) => {
            let (f, f_sd) = full.unseen_sr();
            let (b, b_sd) = base.unseen_sr();
            let beats = f >= b;
            ok &= beats;
            detail.push_str(&format!(
                "[limit {:.0} s]\n    full unseen SR {:.4} ± {:.4} vs baseline {:.4} ± {:.4}: {}",
                limit.as_secs_f64(),
                f,
                f_sd,
                b,
                b_sd,
                if beats { "ok" } else { "below baseline" }
            ));
            for name in ["1_traj", "2_instr", "3_sub"] {
                let Some(single) = row(rows, "terms", name) else {
                    ok = false;
                    detail.push_str(&format!("\n    missing row {name}"));
                    continue;
                };
                let (s, s_sd) = single.unseen_sr();
                let se = s_sd / (single.runs.len() as f64).sqrt();
                let within = f >= s - se;
                ok &= within;
                detail.push_str(&format!(
                    "\n    full {:.4} vs {name} {:.4} - 1 SE {:.4} = {:.4}: {}",
                    f,
                    s,
                    se,
                    s - se,
                    if within { "ok" } else { "below" }
                ));
            }
        }
        _ => {
            ok = false;
            detail.push_str("missing full or baseline row");
        }
    }
    Line {
        id: 7,
        title: "full objective vs baseline and single-term rows on unseen maps",
        ok,
        detail,
        elapsed,
    }
}

fn report_structure(rows: &[RowSummary], out: &Path, seeds: usize, elapsed: Duration) -> Line {
    let expected = [
        ("loss", "1_infonce_bank"),
        ("loss", "2_infonce_bank_pm"),
        ("loss", "3_circle"),
        ("loss", "4_circle_bank"),
        ("loss", "5_circle_pm"),
        ("loss", "full"),
        ("terms", "baseline"),
        ("terms", "1_traj"),
        ("terms", "2_instr"),
        ("terms", "3_sub"),
        ("terms", "full"),
    ];
    let mut problems = Vec::new();
    for (t, n) in expected {
        match row(rows, t, n) {
            Some(r) if r.runs.len() == seeds => {}
            Some(r) => problems.push(format!("{t}/{n} has {} runs", r.runs.len())),
            None => problems.push(format!("{t}/{n} missing")),
        }
    }
    let csv_text = std::fs::read_to_string(out.join("ablation.csv")).unwrap_or_default();
    for (t, n) in expected {
        for stat in ["mean", "std"] {
            let prefix = format!("{t},{n},{stat},");
            if !csv_text.lines().any(|l| l.starts_with(&prefix)) {
                problems.push(format!("ablation.csv lacks {prefix}"));
            }
        }
    }
    let table = std::fs::read_to_string(out.join("ablation.txt")).unwrap_or_default();
    let table_rows = table.lines().filter(|l| l.contains('±')).count();
    if table_rows != expected.len() {
        problems.push(format!("ablation.txt has {table_rows} mean ± std rows"));
    }
    Line {
        id: 9,
        title: "ablation report rows with mean ± std over seeds",
        ok: problems.is_empty(),
        detail: if problems.is_empty() {
            format!("{} rows x {seeds} seeds; ablation.csv and ablation.txt complete", expected.len())
        } else {
            problems.join("; ")
        },
        elapsed,
    }
}

fn metric_line() -> Line {
    let (outcomes, elapsed) = timed(|| {
        let mut v = vec![checks::metric_identities(100, SEED)];
        // SPL <= SR on episodes evaluated with an untrained agent.
        let fx = checks::grad_fixture(5);
        let params = citl::encoder::EncoderParams::<f64>::init(fx.dims, 1);
        let report = evaluate(&params, &fx.split, 10, 3.0, EvalPolicy::Greedy).unwrap();
        let teacher = evaluate(&params, &fx.split, 10, 3.0, EvalPolicy::Teacher).unwrap();
        let eps: Vec<_> = report.episodes.iter().chain(&teacher.episodes).collect();
        let bad = eps.iter().filter(|m| m.spl > m.sr + 1e-12).count();
        let teacher_bad = teacher
            .episodes
            .iter()
            .filter(|m| m.sr != 1.0 || (m.spl - 1.0).abs() > 1e-12 || (m.ndtw - 1.0).abs() > 1e-12)
            .count();
        v.push(CheckOutcome {
            name: "SPL <= SR on evaluated episodes; teacher rollouts score SR = SPL = nDTW = 1",
            instances: eps.len(),
            worst: (bad + teacher_bad) as f64,
            threshold: 0.0,
            detail: String::new(),
        });
        v
    });
    let ok = outcomes.iter().all(CheckOutcome::passed);
    Line {
        id: 8,
        title: "metric identities",
        ok,
        detail: outcomes.iter().map(|o| format!("\n    {}", o.line())).collect(),
        elapsed,
    }
}

#[test]
fn acceptance() {
    let mut lines = Vec::new();

    lines.push(from_checks(1, "circle loss formula oracles", Some(Duration::from_secs(5)), || {
        vec![checks::circle_vs_scalar(1000, SEED, 1e-9), hand_case()]
    }));
    lines.last().unwrap().print();

    lines.push(from_checks(2, "pair mining vs brute-force filter", Some(Duration::from_secs(5)), || {
        vec![checks::mining_vs_bruteforce(1000, SEED)]
    }));
    lines.last().unwrap().print();

    lines.push(from_checks(3, "analytic gradients vs central differences", Some(Duration::from_secs(60)), || {
        vec![
            checks::grad_circle(100, SEED, 1e-4),
            checks::grad_il(100, SEED, 1e-4),
            checks::grad_a2c(100, SEED, 1e-4),
            checks::grad_composite(100, SEED, 1e-4),
        ]
    }));
    lines.last().unwrap().print();

    lines.push(from_checks(4, "trajectory partition and shortest paths", Some(Duration::from_secs(30)), || {
        vec![checks::trajectory_machinery(200, SEED)]
    }));
    lines.last().unwrap().print();

    lines.push(from_checks(5, "memory bank FIFO and detachment", None, || {
        vec![checks::bank_fifo(10_000, 240, SEED), checks::bank_gradient_probe(100, SEED)]
    }));
    lines.last().unwrap().print();

    lines.push(baseline_reduction());
    lines.last().unwrap().print();

    // 7 and 9 share one ablation run on the default suite.
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = dir.path().join("ablation");
    let cfg = RunConfig::default();
    let ((summary, seeds), elapsed) = timed(|| {
        cmd_gen(&cfg, &data).unwrap();
        let summary = cmd_ablate(&cfg, &data, &out);
        (summary, cfg.ablation.seeds.len())
    });
    match summary {
        Ok(rows) => {
            let prepared = prepare_dataset(&cfg, &data).unwrap();
            println!(
                "    suite: {} seen maps / {} unseen maps, {} seen and {} unseen episodes, {} seeds",
                prepared.dataset.manifest.seen_graphs.len(),
                prepared.dataset.manifest.unseen_graphs.len(),
                prepared.seen.episodes.len(),
                prepared.unseen.episodes.len(),
                seeds
            );
            lines.push(directional(&rows, elapsed, Duration::from_secs(30 * 60)));
            lines.last().unwrap().print();
            print!("{}", std::fs::read_to_string(out.join("ablation.txt")).unwrap_or_default());
            lines.push(metric_line());
            lines.last().unwrap().print();
            lines.push(report_structure(&rows, &out, seeds, elapsed));
        }
        Err(e) => {
            for (id, title) in [(7, "ablation"), (9, "ablation report")] {
                lines.push(Line {
                    id,
                    title,
                    ok: false,
                    detail: format!("ablation failed: {e}"),
                    elapsed,
                });
            }
            lines.push(metric_line());
        }
    }
    lines.sort_by_key(|l| l.id);
    println!("\nsummary");
    for l in &lines {
        println!("{} criterion {}: {}", if l.ok { "PASS" } else { "FAIL" }, l.id, l.title);
    }
    let failed: Vec<u8> = lines.iter().filter(|l| !l.ok).map(|l| l.id).collect();
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
}
