use std::cell::Cell;
use std::ops::Range;

use super::objective::DecorrelationObjective;
use super::pairs::sample_pairs;
use super::rff::FeatureMaps;
use super::weights::{project, WeightVector};
use crate::error::{Error, Result};
use crate::numcore::Dense2D;
use crate::seed::{self, stream};

thread_local! {
    static INVOCATIONS: Cell<u64> = const { Cell::new(0) };
}

/// Number of weight optimizations run on the current thread.
pub fn invocation_count() -> u64 {
    INVOCATIONS.with(|c| c.get())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureMapKind {
    RandomFourier,
    /// No lifting; only linear correlation is penalized.
    Linear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReweightConfig {
    pub epochs_reweight: usize,
    pub lr_w: f64,
    pub l2_lambda: f64,
    pub q: usize,
    pub pair_fraction: f64,
    pub seed: u64,
    pub feature_map: FeatureMapKind,
}

impl Default for ReweightConfig {
    fn default() -> Self {
        Self {
            epochs_reweight: 20,
            lr_w: 0.01,
            l2_lambda: 1.0,
            q: 1,
            pair_fraction: 1.0,
            seed: 0,
            feature_map: FeatureMapKind::RandomFourier,
        }
    }
}

impl ReweightConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_w > 0.0) || !self.lr_w.is_finite() {
            return Err(Error::Config(format!("lr_w must be positive, got {}", self.lr_w)));
        }
        if !(self.l2_lambda >= 0.0) || !self.l2_lambda.is_finite() {
            return Err(Error::Config(format!("l2_lambda must be >= 0, got {}", self.l2_lambda)));
        }
        if self.q == 0 {
            return Err(Error::Config("q must be at least 1".into()));
        }
        if !(self.pair_fraction > 0.0 && self.pair_fraction <= 1.0) {
            return Err(Error::Config(format!("pair_fraction {} outside (0, 1]", self.pair_fraction)));
        }
        Ok(())
    }

    pub fn feature_maps(&self, dims: usize) -> Result<FeatureMaps> {
        match self.feature_map {
            FeatureMapKind::Linear => Ok(FeatureMaps::Identity { dims }),
            FeatureMapKind::RandomFourier => {
                FeatureMaps::sample_rff(dims, self.q, &mut seed::rng(seed::derive(self.seed, stream::BANKS, 0)))
            }
        }
    }

    pub fn pairs(&self, dims: usize) -> Result<Vec<(usize, usize)>> {
        sample_pairs(dims, self.pair_fraction, seed::derive(self.seed, stream::PAIRS, 0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReweightOutcome {
    /// All weights, including the ones held fixed.
    pub weights: Vec<f64>,
    /// Decorrelation objective before each step and after the last one.
    pub trace: Vec<f64>,
    pub initial_objective: f64,
    pub final_objective: f64,
    /// Objective plus the l2 penalty on the free weights.
    pub initial_total: f64,
    pub final_total: f64,
    /// Set when the penalized objective ended above where it started.
    pub warning: bool,
}

/// Projected gradient descent on the decorrelation objective plus
/// `l2_lambda * |w|^2`, over all weights.
pub fn optimize_weights(z: &Dense2D, w0: &WeightVector, cfg: &ReweightConfig) -> Result<(WeightVector, ReweightOutcome)> {
    let outcome = optimize_weights_partial(z, w0.values(), 0..w0.len(), cfg)?;
    Ok((WeightVector::new(outcome.weights.clone())?, outcome))
}

/// As [`optimize_weights`] but only `free` entries move; the rest enter the
/// objective as constants. After every step the free block is clamped to the
/// weight floor and rescaled to sum to its own length.
pub fn optimize_weights_partial(
    z: &Dense2D,
    w0: &[f64],
    free: Range<usize>,
    cfg: &ReweightConfig,
) -> Result<ReweightOutcome> {
    cfg.validate()?;
    if z.rows() != w0.len() {
        return Err(Error::Shape(format!("{} rows in Z but {} weights", z.rows(), w0.len())));
    }
    if free.start >= free.end || free.end > w0.len() {
        return Err(Error::Shape(format!("free range {free:?} invalid for {} weights", w0.len())));
    }
    INVOCATIONS.with(|c| c.set(c.get() + 1));

    let maps = cfg.feature_maps(z.cols())?;
    let pairs = cfg.pairs(z.cols())?;
    let objective = DecorrelationObjective::new(z, &maps, &pairs)?;
    let penalty = |w: &[f64]| cfg.l2_lambda * w[free.clone()].iter().map(|v| v * v).sum::<f64>();

    let mut w = w0.to_vec();
    let mut trace = Vec::with_capacity(cfg.epochs_reweight + 1);
    let mut initial_total = None;
    for iteration in 0..=cfg.epochs_reweight {
        let (value, grad) = objective.value_and_grad(&w)?;
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Optimization { iteration });
        }
        trace.push(value);
        initial_total.get_or_insert(value + penalty(&w));
        if iteration == cfg.epochs_reweight {
            break;
        }
        let block = &mut w[free.clone()];
        for (wi, gi) in block.iter_mut().zip(&grad[free.clone()]) {
            *wi -= cfg.lr_w * (gi + 2.0 * cfg.l2_lambda * *wi);
        }
        project(block);
    }
    let initial_objective = trace[0];
    let final_objective = *trace.last().unwrap();
    let initial_total = initial_total.unwrap();
    let final_total = final_objective + penalty(&w);
    Ok(ReweightOutcome {
        weights: w,
        trace,
        initial_objective,
        final_objective,
        initial_total,
        final_total,
        warning: final_total > initial_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decorrelation::weights::{check_constraints, W_MIN};
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn zero_epochs_is_identity() {
        let mut rng = seed::rng(0);
        let z = Dense2D::new(8, 3, (0..24).map(|_| rng.sample(StandardNormal)).collect()).unwrap();
        let w0 = WeightVector::new(vec![0.5, 1.5, 1.0, 1.0, 0.25, 1.75, 1.0, 1.0]).unwrap();
        let cfg = ReweightConfig { epochs_reweight: 0, ..Default::default() };
        let (w, out) = optimize_weights(&z, &w0, &cfg).unwrap();
        assert_eq!(w, w0);
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn constraints_hold_with_aggressive_steps() {
        let mut rng = seed::rng(1);
        let x: Vec<f64> = (0..32).map(|_| rng.sample(StandardNormal)).collect();
        let z = Dense2D::new(32, 3, x.iter().flat_map(|&v| [v, v * v, v.sin()]).collect()).unwrap();
        let cfg = ReweightConfig { lr_w: 50.0, l2_lambda: 0.0, ..Default::default() };
        let (w, _) = optimize_weights(&z, &WeightVector::uniform(32), &cfg).unwrap();
        check_constraints(w.values()).unwrap();
        assert!(w.values().iter().all(|&v| v >= W_MIN));
    }

    #[test]
    fn fixed_entries_do_not_move() {
        let mut rng = seed::rng(2);
        let z = Dense2D::new(12, 4, (0..48).map(|_| rng.sample(StandardNormal)).collect()).unwrap();
        let w0: Vec<f64> = (0..12).map(|i| if i < 6 { 0.5 + i as f64 * 0.1 } else { 1.0 }).collect();
        let cfg = ReweightConfig { lr_w: 1.0, ..Default::default() };
        let out = optimize_weights_partial(&z, &w0, 6..12, &cfg).unwrap();
        assert_eq!(&out.weights[..6], &w0[..6]);
        check_constraints(&out.weights[6..]).unwrap();
        assert_ne!(&out.weights[6..], &w0[6..]);
    }

    #[test]
    fn invalid_inputs() {
        let z = Dense2D::zeros(4, 2);
        let cfg = ReweightConfig::default();
        assert!(optimize_weights_partial(&z, &[1.0; 3], 0..3, &cfg).is_err());
        assert!(optimize_weights_partial(&z, &[1.0; 4], 2..2, &cfg).is_err());
        let bad = ReweightConfig { lr_w: 0.0, ..Default::default() };
        assert!(optimize_weights_partial(&z, &[1.0; 4], 0..4, &bad).is_err());
    }

    #[test]
    fn counter_increments() {
        let before = invocation_count();
        let z = Dense2D::new(4, 2, vec![0.1, 0.5, -0.3, 0.2, 0.9, -1.0, 0.0, 0.4]).unwrap();
        optimize_weights(&z, &WeightVector::uniform(4), &ReweightConfig::default()).unwrap();
        assert_eq!(invocation_count(), before + 1);
    }
}
