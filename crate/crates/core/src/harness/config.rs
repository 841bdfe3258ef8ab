//! Training configuration and its flat `key = value` file format.

use std::fmt;
use std::str::FromStr;

use serde_json::{json, Value};

use crate::decorrelation::{FeatureMapKind, ReweightConfig};
use crate::encoder::{MAX_LAYERS, MIN_LAYERS};
use crate::error::{Error, Result};

/// Which lines of the training loop run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// Reweighting with random Fourier features and global memory.
    OodGnn,
    /// Plain training with all weights fixed at one.
    BaselineUniform,
    /// Reweighting that only penalizes linear correlation.
    LinearDecorr,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::OodGnn, Mode::BaselineUniform, Mode::LinearDecorr];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::OodGnn => "ood_gnn",
            Mode::BaselineUniform => "baseline_uniform",
            Mode::LinearDecorr => "linear_decorr",
        }
    }

    pub fn reweights(self) -> bool {
        self != Mode::BaselineUniform
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemoryConfig {
    pub k: usize,
    /// One momentum coefficient per group.
    pub gammas: Vec<f64>,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self { k: 1, gammas: vec![0.9] }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub d: usize,
    pub num_layers: usize,
    /// Inner weight optimization. Its `seed` and `feature_map` are set per
    /// batch from `seed` and `mode`.
    pub reweight: ReweightConfig,
    pub memory: MemoryConfig,
    pub seed: u64,
    pub mode: Mode,
    /// Test accuracy is computed every this many epochs and after the last.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            lr: 1e-3,
            d: 32,
            num_layers: 3,
            reweight: ReweightConfig::default(),
            memory: MemoryConfig::default(),
            seed: 0,
            mode: Mode::OodGnn,
            eval_every: 1,
        }
    }
}

const KEYS: [&str; 15] = [
    "epochs",
    "batch_size",
    "lr",
    "d",
    "num_layers",
    "seed",
    "mode",
    "eval_every",
    "epochs_reweight",
    "lr_w",
    "l2_lambda",
    "q",
    "pair_fraction",
    "memory_k",
    "gammas",
];

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("bad value {v:?} for {key}")))
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.d < 2 {
            return Err(Error::Config(format!("d must be at least 2, got {}", self.d)));
        }
        if !(MIN_LAYERS..=MAX_LAYERS).contains(&self.num_layers) {
            return Err(Error::Config(format!(
                "num_layers {} outside [{MIN_LAYERS}, {MAX_LAYERS}]",
                self.num_layers
            )));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be positive".into()));
        }
        if self.memory.gammas.len() != self.memory.k {
            return Err(Error::Config(format!(
                "memory_k = {} but {} gammas given",
                self.memory.k,
                self.memory.gammas.len()
            )));
        }
        if let Some(g) = self.memory.gammas.iter().find(|g| !(**g >= 0.0 && **g < 1.0)) {
            return Err(Error::Config(format!("gamma {g} outside [0, 1)")));
        }
        self.reweight.validate()
    }

    /// Inner optimizer settings for one batch: feature maps follow the mode
    /// and every call draws fresh banks from `call_seed`.
    pub fn reweight_for(&self, call_seed: u64) -> ReweightConfig {
        ReweightConfig {
            seed: call_seed,
            feature_map: match self.mode {
                Mode::LinearDecorr => FeatureMapKind::Linear,
                _ => FeatureMapKind::RandomFourier,
            },
            ..self.reweight.clone()
        }
    }

    /// Parses `key = value` lines. `#` starts a comment; unknown keys,
    /// repeated keys and malformed values are errors. Missing keys keep
    /// their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        let mut gammas_given = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", idx + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!("line {}: unknown key {key:?}", idx + 1)));
            }
            if seen.contains(&key) {
                return Err(Error::Config(format!("line {}: {key} given twice", idx + 1)));
            }
            seen.push(key);
            match key {
                "epochs" => cfg.epochs = parse(key, value)?,
                "batch_size" => cfg.batch_size = parse(key, value)?,
                "lr" => cfg.lr = parse(key, value)?,
                "d" => cfg.d = parse(key, value)?,
                "num_layers" => cfg.num_layers = parse(key, value)?,
                "seed" => cfg.seed = parse(key, value)?,
                "mode" => cfg.mode = value.parse()?,
                "eval_every" => cfg.eval_every = parse(key, value)?,
                "epochs_reweight" => cfg.reweight.epochs_reweight = parse(key, value)?,
                "lr_w" => cfg.reweight.lr_w = parse(key, value)?,
                "l2_lambda" => cfg.reweight.l2_lambda = parse(key, value)?,
                "q" => cfg.reweight.q = parse(key, value)?,
                "pair_fraction" => cfg.reweight.pair_fraction = parse(key, value)?,
                "memory_k" => cfg.memory.k = parse(key, value)?,
                "gammas" => {
                    gammas_given = true;
                    cfg.memory.gammas = if value.is_empty() {
                        Vec::new()
                    } else {
                        value.split(',').map(|g| parse("gammas", g.trim())).collect::<Result<_>>()?
                    };
                }
                _ => unreachable!(),
            }
        }
        if !gammas_given {
            cfg.memory.gammas = vec![0.9; cfg.memory.k];
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let gammas: Vec<String> = self.memory.gammas.iter().map(|g| format!("{g:?}")).collect();
        let r = &self.reweight;
        let lines = [
            format!("epochs = {}", self.epochs),
            format!("batch_size = {}", self.batch_size),
            format!("lr = {:?}", self.lr),
            format!("d = {}", self.d),
            format!("num_layers = {}", self.num_layers),
            format!("seed = {}", self.seed),
            format!("mode = {}", self.mode),
            format!("eval_every = {}", self.eval_every),
            format!("epochs_reweight = {}", r.epochs_reweight),
            format!("lr_w = {:?}", r.lr_w),
            format!("l2_lambda = {:?}", r.l2_lambda),
            format!("q = {}", r.q),
            format!("pair_fraction = {:?}", r.pair_fraction),
            format!("memory_k = {}", self.memory.k),
            format!("gammas = {}", gammas.join(", ")),
        ];
        lines.join("\n") + "\n"
    }

    pub fn to_json(&self) -> Value {
        let r = &self.reweight;
        json!({
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "d": self.d,
            "num_layers": self.num_layers,
            "seed": self.seed,
            "mode": self.mode.as_str(),
            "eval_every": self.eval_every,
            "epochs_reweight": r.epochs_reweight,
            "lr_w": r.lr_w,
            "l2_lambda": r.l2_lambda,
            "q": r.q,
            "pair_fraction": r.pair_fraction,
            "memory_k": self.memory.k,
            "gammas": self.memory.gammas,
        })
    }
}
