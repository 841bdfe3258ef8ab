//! Named distribution-shift experiments comparing the training modes on
//! identical data.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde_json::{json, Value};

use super::config::{Mode, TrainConfig};
use super::report::{format_table, mode_stats, run_records, to_jsonl, ModeStats};
use super::train::{evaluate, train, RunReport};
use super::write_atomic;
use crate::error::{Error, Result};
use crate::graphdata::{
    gen_digits_dataset, gen_triangles_dataset, Dataset, Graph, SplitKind, SplitSpec,
};
use crate::seed::{self, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentName {
    /// Triangle counting, trained on small graphs and tested on larger ones.
    TrianglesSizeShift,
    /// Digit graphs, trained clean and tested with Gaussian feature noise.
    FeatureNoiseShift,
}

impl ExperimentName {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::TrianglesSizeShift => "triangles_size_shift",
            ExperimentName::FeatureNoiseShift => "feature_noise_shift",
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [ExperimentName::TrianglesSizeShift, ExperimentName::FeatureNoiseShift]
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSpec {
    Triangles {
        train_count: usize,
        train_nodes: (usize, usize),
        test_count: usize,
        test_nodes: (usize, usize),
        train_max_nodes: usize,
    },
    Digits {
        count: usize,
        nodes: (usize, usize),
        noise_sigma: f64,
        test_fraction: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub name: ExperimentName,
    pub data: DataSpec,
    /// Template for every run; `mode`, `seed` and `lr` are set per run.
    pub train: TrainConfig,
    pub modes: Vec<Mode>,
    /// Chosen per run by accuracy on the validation split.
    pub lr_candidates: Vec<f64>,
    /// Share of the training side held out for learning-rate selection.
    pub validation_fraction: f64,
}

impl ExperimentSpec {
    pub fn new(name: ExperimentName) -> Self {
        let data = match name {
            ExperimentName::TrianglesSizeShift => DataSpec::Triangles {
                train_count: 2000,
                train_nodes: (4, 25),
                test_count: 500,
                test_nodes: (26, 60),
                train_max_nodes: 25,
            },
            ExperimentName::FeatureNoiseShift => DataSpec::Digits {
                count: 2000,
                nodes: (12, 24),
                noise_sigma: 0.4,
                test_fraction: 0.25,
            },
        };
        Self {
            name,
            data,
            train: TrainConfig { eval_every: 10, ..TrainConfig::default() },
            modes: Mode::ALL.to_vec(),
            lr_candidates: vec![1e-4, 1e-3],
            validation_fraction: 0.1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Splits {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

/// Data for one seed; every mode trained under this seed sees the same graphs.
pub fn build_splits(spec: &ExperimentSpec, seed_value: u64) -> Result<Splits> {
    let split_seed = seed::derive(seed_value, stream::SPLIT, 0);
    let (train_side, test) = match spec.data {
        DataSpec::Triangles { train_count, train_nodes, test_count, test_nodes, train_max_nodes } => {
            let small = gen_triangles_dataset(
                train_count,
                train_nodes.0,
                train_nodes.1,
                seed::derive(seed_value, stream::GRAPH, 0),
            )?;
            let large = gen_triangles_dataset(
                test_count,
                test_nodes.0,
                test_nodes.1,
                seed::derive(seed_value, stream::GRAPH, 1),
            )?;
            let split = SplitSpec { kind: SplitKind::BySize { train_max_nodes }, seed: split_seed };
            split.apply(&small.concat(&large)?)?
        }
        DataSpec::Digits { count, nodes, noise_sigma, test_fraction } => {
            let all = gen_digits_dataset(count, nodes.0, nodes.1, seed::derive(seed_value, stream::GRAPH, 0))?;
            let split = SplitSpec { kind: SplitKind::ByFeatureNoise { noise_sigma, test_fraction }, seed: split_seed };
            split.apply(&all)?
        }
    };
    let f = spec.validation_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::Config(format!("validation fraction {f} outside (0, 1)")));
    }
    let mut graphs: Vec<Graph> = train_side.graphs().to_vec();
    graphs.shuffle(&mut seed::rng(seed::derive(split_seed, stream::SHUFFLE, 0)));
    let shuffled = Dataset::new(graphs, train_side.num_classes())?;
    let held = ((shuffled.len() as f64) * f).round() as usize;
    let (train, validation) = shuffled.split_at(shuffled.len() - held)?;
    Ok(Splits { train, validation, test })
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub seed: u64,
    pub mode: Mode,
    pub lr: f64,
    pub validation_accuracy: f64,
    pub report: RunReport,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub name: ExperimentName,
    pub runs: Vec<RunSummary>,
    pub table: Vec<ModeStats>,
}

impl ExperimentResult {
    pub fn stats(&self, mode: Mode) -> Option<&ModeStats> {
        self.table.iter().find(|s| s.mode == mode.as_str())
    }

    pub fn format(&self) -> String {
        format_table(self.name.as_str(), &self.table)
    }

    /// Result lines: every run, then one summary. Contains no timing.
    pub fn records(&self) -> Result<Vec<Value>> {
        let mut out = Vec::new();
        for r in &self.runs {
            out.extend(run_records(
                &r.report,
                &[
                    ("experiment", json!(self.name.as_str())),
                    ("validation_accuracy", json!(r.validation_accuracy)),
                ],
            )?);
        }
        out.push(json!({ "kind": "summary", "experiment": self.name.as_str(), "rows": self.table }));
        Ok(out)
    }

    /// Writes `results.jsonl` and, separately, `timing.jsonl` with wall-clock times.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join("results.jsonl"), to_jsonl(&self.records()?).as_bytes())?;
        let timing: Vec<Value> = self
            .runs
            .iter()
            .map(|r| {
                json!({
                    "kind": "timing",
                    "mode": r.mode.as_str(),
                    "seed": r.seed,
                    "wall_clock_seconds": r.report.wall_clock_seconds,
                })
            })
            .collect();
        write_atomic(&dir.join("timing.jsonl"), to_jsonl(&timing).as_bytes())
    }
}

/// Trains every mode for every seed on that seed's data and summarizes test
/// accuracy of the final-epoch parameters. Runs are sequential.
pub fn run_experiment(spec: &ExperimentSpec, seeds: &[u64]) -> Result<ExperimentResult> {
    if seeds.is_empty() || spec.modes.is_empty() || spec.lr_candidates.is_empty() {
        return Err(Error::Config("need at least one seed, mode and learning rate".into()));
    }
    let mut runs = Vec::new();
    for &s in seeds {
        let splits = build_splits(spec, s)?;
        for &mode in &spec.modes {
            let mut best: Option<RunSummary> = None;
            for &lr in &spec.lr_candidates {
                let cfg = TrainConfig { mode, seed: s, lr, ..spec.train.clone() };
                let out = train(&cfg, &splits.train, &splits.test)?;
                let validation_accuracy = evaluate(&out.checkpoint.model, &splits.validation)?;
                if best.as_ref().is_none_or(|b| validation_accuracy > b.validation_accuracy) {
                    best = Some(RunSummary { seed: s, mode, lr, validation_accuracy, report: out.report });
                }
            }
            runs.push(best.expect("at least one learning rate"));
        }
    }
    let table = spec
        .modes
        .iter()
        .map(|&m| {
            let (train_acc, test_acc): (Vec<f64>, Vec<f64>) = runs
                .iter()
                .filter(|r| r.mode == m)
                .map(|r| (r.report.final_train_accuracy, r.report.final_test_accuracy))
                .unzip();
            mode_stats(m, &train_acc, &test_acc)
        })
        .collect();
    Ok(ExperimentResult { name: spec.name, runs, table })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_parse() {
        for n in [ExperimentName::TrianglesSizeShift, ExperimentName::FeatureNoiseShift] {
            assert_eq!(n.as_str().parse::<ExperimentName>().unwrap(), n);
        }
        assert!("mnist".parse::<ExperimentName>().is_err());
    }

    #[test]
    fn triangle_splits_respect_the_size_cap() {
        let mut spec = ExperimentSpec::new(ExperimentName::TrianglesSizeShift);
        spec.data = DataSpec::Triangles {
            train_count: 60,
            train_nodes: (4, 25),
            test_count: 20,
            test_nodes: (26, 60),
            train_max_nodes: 25,
        };
        let s = build_splits(&spec, 3).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (54, 6, 20));
        assert!(s.train.graphs().iter().chain(s.validation.graphs()).all(|g| g.num_nodes() <= 25));
        assert!(s.test.graphs().iter().all(|g| g.num_nodes() > 25));
    }
}
