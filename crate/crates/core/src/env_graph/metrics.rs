//! Episode-level navigation metrics.
//!
//! Distances between nodes are geodesic (shortest path in meters). The
//! path-fidelity scores follow their usual definitions:
//!
//! * nDTW = exp(-DTW(R, P) / (|R| * d_th))
//! * SDTW = SR * nDTW
//! * CLS  = PC * LS, with PC = mean_r exp(-d(r, P) / d_th),
//!   EPL = PC * len(R), LS = EPL / (EPL + |EPL - len(P)|)

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::graph::{NavGraph, NodeId, Trajectory};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Trajectory length, meters.
    pub tl: f64,
    /// Navigation error, meters.
    pub ne: f64,
    pub sr: f64,
    pub spl: f64,
    pub ndtw: f64,
    pub cls: f64,
    pub sdtw: f64,
}

pub const METRIC_HEADER: [&str; 7] = ["TL", "NE", "SR", "SPL", "nDTW", "CLS", "SDTW"];

impl MetricReport {
    pub fn as_row(&self) -> [f64; 7] {
        [self.tl, self.ne, self.sr, self.spl, self.ndtw, self.cls, self.sdtw]
    }

    /// Element-wise mean; the default report for an empty slice.
    pub fn mean(reports: &[MetricReport]) -> MetricReport {
        if reports.is_empty() {
            return MetricReport::default();
        }
        let n = reports.len() as f64;
        let mut acc = [0.0; 7];
        for r in reports {
            for (a, v) in acc.iter_mut().zip(r.as_row()) {
                *a += v;
            }
        }
        let [tl, ne, sr, spl, ndtw, cls, sdtw] = acc.map(|a| a / n);
        MetricReport { tl, ne, sr, spl, ndtw, cls, sdtw }
    }
}

/// Writes one CSV row per report under the standard header.
pub fn write_metrics_csv<W: Write>(out: W, reports: &[MetricReport]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRIC_HEADER)?;
    for r in reports {
        w.write_record(r.as_row().iter().map(|v| format!("{v}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn evaluate_episode(
    graph: &NavGraph,
    predicted: &Trajectory,
    reference: &Trajectory,
    success_radius_m: f64,
) -> MetricReport {
    let goal = reference.end();
    let tl = predicted.length_m();
    let ne = graph.geodesic(predicted.end(), goal);
    let sr = if ne <= success_radius_m { 1.0 } else { 0.0 };
    let ref_len = reference.length_m();
    let denom = tl.max(ref_len);
    let spl = if denom > 0.0 { sr * ref_len / denom } else { sr };
    let ndtw = ndtw(graph, predicted.nodes(), reference.nodes(), success_radius_m);
    let cls = cls(graph, predicted, reference, success_radius_m);
    MetricReport {
        tl,
        ne,
        sr,
        spl,
        ndtw,
        cls,
        sdtw: sr * ndtw,
    }
}

/// Dynamic time warping cost with geodesic point distance, two-row table.
pub fn dtw(graph: &NavGraph, a: &[NodeId], b: &[NodeId]) -> f64 {
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for &ai in a {
        cur[0] = f64::INFINITY;
        for (j, &bj) in b.iter().enumerate() {
            let best = prev[j].min(prev[j + 1]).min(cur[j]);
            cur[j + 1] = graph.geodesic(ai, bj) + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

pub fn ndtw(graph: &NavGraph, predicted: &[NodeId], reference: &[NodeId], d_th: f64) -> f64 {
    let cost = dtw(graph, reference, predicted);
    (-cost / (reference.len() as f64 * d_th)).exp()
}

pub fn cls(graph: &NavGraph, predicted: &Trajectory, reference: &Trajectory, d_th: f64) -> f64 {
    let pc = reference
        .nodes()
        .iter()
        .map(|&r| {
            let d = predicted
                .nodes()
                .iter()
                .map(|&p| graph.geodesic(r, p))
                .fold(f64::INFINITY, f64::min);
            (-d / d_th).exp()
        })
        .sum::<f64>()
        / reference.nodes().len() as f64;
    let epl = pc * reference.length_m();
    let pl = predicted.length_m();
    let denom = epl + (epl - pl).abs();
    let ls = if denom > 0.0 { epl / denom } else { 1.0 };
    pc * ls
}
