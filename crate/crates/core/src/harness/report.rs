//! Weight histograms, result records and the human-readable report.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::Mode;
use super::train::RunReport;
use crate::error::{Error, Result};

pub const HISTOGRAM_BIN_WIDTH: f64 = 0.1;
const BINS_PER_UNIT: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightHistogram {
    /// `counts.len() + 1` edges starting at 0.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Largest per-batch standard deviation of the weights.
    pub max_batch_std: f64,
}

impl WeightHistogram {
    pub fn occupied_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Whether some batch received non-uniform weights.
    pub fn nontrivial(&self) -> bool {
        self.max_batch_std > 0.0
    }
}

fn std_dev(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Bins of width [`HISTOGRAM_BIN_WIDTH`] from 0; `batches` gives the batch
/// lengths that partition `weights`.
pub fn histogram(weights: &[f64], batches: &[usize]) -> Result<WeightHistogram> {
    if batches.iter().sum::<usize>() != weights.len() {
        return Err(Error::Shape(format!(
            "batch lengths sum to {} for {} weights",
            batches.iter().sum::<usize>(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(Error::Domain(format!("weight {w} cannot be binned")));
    }
    // the nudge keeps values such as 2.3 out of the bin below their decimal edge
    let bin = |w: f64| (w * BINS_PER_UNIT + 1e-9).floor() as usize;
    let bins = weights.iter().map(|&w| bin(w)).max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; bins];
    for &w in weights {
        counts[bin(w)] += 1;
    }
    let mut max_batch_std: f64 = 0.0;
    let mut start = 0;
    for &len in batches {
        max_batch_std = max_batch_std.max(std_dev(&weights[start..start + len]));
        start += len;
    }
    Ok(WeightHistogram {
        edges: (0..=bins).map(|i| i as f64 / BINS_PER_UNIT).collect(),
        counts,
        max_batch_std,
    })
}

/// Histogram of the last epoch's learned weights of a reweighting run.
pub fn weight_histogram(report: &RunReport) -> Result<WeightHistogram> {
    if !report.mode().reweights() {
        return Err(Error::NotApplicable(format!("mode {} does not learn weights", report.mode())));
    }
    histogram(&report.final_weights, &report.final_weight_batches)
}

/// Result lines for one run: its epochs, a run summary and, for reweighting
/// modes, the weight histogram. Wall-clock time is deliberately left out.
pub fn run_records(report: &RunReport, extra: &[(&str, Value)]) -> Result<Vec<Value>> {
    let tag = |mut v: Value| {
        let obj = v.as_object_mut().expect("record is an object");
        obj.insert("mode".into(), json!(report.mode().as_str()));
        obj.insert("seed".into(), json!(report.config.seed));
        v
    };
    let mut out = Vec::new();
    for e in &report.epochs {
        let mut v = serde_json::to_value(e).map_err(|e| Error::Io(e.to_string()))?;
        v.as_object_mut().unwrap().insert("kind".into(), json!("epoch"));
        out.push(tag(v));
    }
    let mut run = json!({
        "kind": "run",
        "config": report.config.to_json(),
        "final_train_accuracy": report.final_train_accuracy,
        "final_test_accuracy": report.final_test_accuracy,
    });
    for (k, v) in extra {
        run.as_object_mut().unwrap().insert((*k).into(), v.clone());
    }
    out.push(tag(run));
    if report.mode().reweights() {
        let h = weight_histogram(report)?;
        let mut v = serde_json::to_value(&h).map_err(|e| Error::Io(e.to_string()))?;
        let obj = v.as_object_mut().unwrap();
        obj.insert("kind".into(), json!("histogram"));
        obj.insert("occupied_bins".into(), json!(h.occupied_bins()));
        out.push(tag(v));
    }
    Ok(out)
}

pub fn to_jsonl(records: &[Value]) -> String {
    records.iter().map(|r| r.to_string() + "\n").collect()
}

/// Mean and standard deviation of one mode's accuracies across seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeStats {
    pub mode: String,
    pub runs: usize,
    pub train_mean: f64,
    pub train_std: f64,
    pub test_mean: f64,
    pub test_std: f64,
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    (mean, (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

pub fn mode_stats(mode: Mode, train: &[f64], test: &[f64]) -> ModeStats {
    let (train_mean, train_std) = mean_std(train);
    let (test_mean, test_std) = mean_std(test);
    ModeStats { mode: mode.as_str().into(), runs: test.len(), train_mean, train_std, test_mean, test_std }
}

pub fn format_table(title: &str, rows: &[ModeStats]) -> String {
    let mut s = format!("{title}\n");
    let _ = writeln!(s, "{:<18} {:>5} {:>18} {:>18}", "mode", "runs", "train acc (%)", "test acc (%)");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<18} {:>5} {:>11.1} ± {:<4.1} {:>11.1} ± {:<4.1}",
            r.mode,
            r.runs,
            100.0 * r.train_mean,
            100.0 * r.train_std,
            100.0 * r.test_mean,
            100.0 * r.test_std
        );
    }
    s
}

/// Reads `results.jsonl` in `dir` and renders its summaries, or a per-run
/// table when the file holds no summary.
pub fn render_report(dir: &Path) -> Result<String> {
    let path = dir.join("results.jsonl");
    let text = fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut out = String::new();
    let mut runs = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let v: Value = serde_json::from_str(line).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        match v["kind"].as_str() {
            Some("summary") => {
                let rows: Vec<ModeStats> = serde_json::from_value(v["rows"].clone())
                    .map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
                let title = v["experiment"].as_str().unwrap_or("experiment");
                out.push_str(&format_table(title, &rows));
            }
            Some("run") => runs.push(v),
            _ => {}
        }
    }
    if out.is_empty() {
        if runs.is_empty() {
            return Err(Error::Parse { line: 0, message: "no run or summary records".into() });
        }
        let _ = writeln!(out, "{:<18} {:>6} {:>14} {:>14}", "mode", "seed", "train acc (%)", "test acc (%)");
        for r in runs {
            let _ = writeln!(
                out,
                "{:<18} {:>6} {:>14.1} {:>14.1}",
                r["mode"].as_str().unwrap_or("?"),
                r["seed"].as_u64().unwrap_or(0),
                100.0 * r["final_train_accuracy"].as_f64().unwrap_or(f64::NAN),
                100.0 * r["final_test_accuracy"].as_f64().unwrap_or(f64::NAN)
            );
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_weights_fill_one_bin() {
        let h = histogram(&[1.0; 8], &[4, 4]).unwrap();
        assert_eq!(h.occupied_bins(), 1);
        assert_eq!(h.counts.last(), Some(&8));
        assert!((h.edges[h.counts.len() - 1] - 1.0).abs() < 1e-12);
        assert!(!h.nontrivial());
    }

    #[test]
    fn counts_are_conserved() {
        let w = [0.05, 0.15, 0.95, 1.0, 1.05, 2.3, 0.0001];
        let h = histogram(&w, &[3, 4]).unwrap();
        assert_eq!(h.total(), w.len());
        assert_eq!(h.edges.len(), h.counts.len() + 1);
        assert_eq!(h.counts[0], 2);
        assert_eq!(h.counts[23], 1);
        assert!(h.nontrivial());
        assert!(histogram(&w, &[3]).is_err());
        assert!(histogram(&[-1.0], &[1]).is_err());
    }

    #[test]
    fn mean_std_examples() {
        assert_eq!(mean_std(&[0.5]), (0.5, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert!((m - 2.0).abs() < 1e-15 && (s - 1.0).abs() < 1e-15);
    }
}
