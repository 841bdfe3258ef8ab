use std::time::Instant;

use rand::seq::SliceRandom;
use serde::Serialize;

use super::checkpoint::Checkpoint;
use super::config::{Mode, TrainConfig};
use crate::decorrelation::{optimize_weights_partial, ReweightOutcome};
use crate::encoder::{predict, Adam, GraphBatch, Model};
use crate::error::{Error, Result};
use crate::graphdata::{Dataset, Graph};
use crate::seed::{self, stream};

/// Graphs per forward pass during evaluation.
const EVAL_CHUNK: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean over batches of the weighted prediction loss.
    pub weighted_loss: f64,
    /// Mean over batches of the decorrelation objective after reweighting;
    /// absent when the mode does not reweight.
    pub decorrelation: Option<f64>,
    /// Accuracy of the pre-step predictions over the epoch's batches.
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub config: TrainConfig,
    pub epochs: Vec<EpochRecord>,
    /// Accuracy of the final parameters on the whole training set.
    pub final_train_accuracy: f64,
    pub final_test_accuracy: f64,
    /// Local weights of every batch of the last epoch, in batch order.
    pub final_weights: Vec<f64>,
    /// Batch size used for `final_weights`; the last batch may be shorter.
    pub final_weight_batches: Vec<usize>,
    pub wall_clock_seconds: f64,
}

/// What the loop did with one batch, for callers that want to inspect it.
pub struct BatchEvent<'a> {
    pub epoch: usize,
    pub batch: usize,
    /// Local weights used in the prediction step.
    pub weights: &'a [f64],
    pub reweight: Option<&'a ReweightOutcome>,
    pub loss: f64,
}

pub struct TrainOutput {
    pub report: RunReport,
    pub checkpoint: Checkpoint,
}

/// Argmax accuracy of `model` on `data`. No sample weights are involved.
pub fn evaluate(model: &Model, data: &Dataset) -> Result<f64> {
    if data.feature_dim() != model.encoder.input_dim() {
        return Err(Error::dims(
            "evaluate",
            (data.len(), data.feature_dim()),
            model.encoder.layers[0].mlp.w1.shape(),
        ));
    }
    let mut correct = 0usize;
    for chunk in data.graphs().chunks(EVAL_CHUNK) {
        let refs: Vec<&Graph> = chunk.iter().collect();
        let logits = predict(model, &refs)?;
        correct += chunk.iter().enumerate().filter(|(n, g)| logits.argmax_row(*n) == g.label()).count();
    }
    Ok(correct as f64 / data.len() as f64)
}

pub fn train(cfg: &TrainConfig, train_set: &Dataset, test_set: &Dataset) -> Result<TrainOutput> {
    train_observed(cfg, train_set, test_set, &mut |_| {})
}

/// The alternating loop: per mini-batch, encode, reweight against the
/// concatenated memory with the stored entries held fixed, take one weighted
/// prediction step, then refresh the memory.
pub fn train_observed(
    cfg: &TrainConfig,
    train_set: &Dataset,
    test_set: &Dataset,
    observer: &mut dyn FnMut(&BatchEvent),
) -> Result<TrainOutput> {
    let start = Instant::now();
    cfg.validate()?;
    if train_set.feature_dim() != test_set.feature_dim() || train_set.num_classes() != test_set.num_classes() {
        return Err(Error::Shape(format!(
            "train set has width {} and {} classes, test set {} and {}",
            train_set.feature_dim(),
            train_set.num_classes(),
            test_set.feature_dim(),
            test_set.num_classes()
        )));
    }
    let Checkpoint { mut model, mut memory } =
        Checkpoint::init(cfg, train_set.feature_dim(), train_set.num_classes())?;
    let mut opt = Adam::new(&model, cfg.lr)?;
    let b = cfg.batch_size;
    let k = cfg.memory.k;
    let drop_ragged = k > 0;
    if drop_ragged && train_set.len() < b {
        return Err(Error::Shape(format!(
            "{} training graphs cannot fill one batch of {b}",
            train_set.len()
        )));
    }

    let mut records = Vec::with_capacity(cfg.epochs);
    let mut final_weights = Vec::new();
    let mut final_weight_batches = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut seed::rng(seed::derive(cfg.seed, stream::SHUFFLE, epoch as u64)));
        let mut loss_sum = 0.0;
        let mut decor_sum = 0.0;
        let mut batches = 0usize;
        let mut correct = 0usize;
        let mut seen = 0usize;
        let last_epoch = epoch + 1 == cfg.epochs;
        for (bi, idx) in order.chunks(b).enumerate() {
            if drop_ragged && idx.len() < b {
                continue;
            }
            let graphs: Vec<&Graph> = idx.iter().map(|&i| &train_set.graphs()[i]).collect();
            let batch = GraphBatch::new(&graphs)?;
            let pass = model.forward(&batch)?;
            let z = pass.representations().clone();

            let mut outcome = None;
            let weights = if cfg.mode.reweights() {
                let ones = vec![1.0; idx.len()];
                let (z_hat, w_hat) = if k > 0 { memory.concat(&z, &ones)? } else { (z.clone(), ones) };
                let free = k * b..k * b + idx.len();
                let call = seed::derive(cfg.seed, stream::BANKS, (epoch * order.len() + bi) as u64);
                let out = optimize_weights_partial(&z_hat, &w_hat, free.clone(), &cfg.reweight_for(call))?;
                let w = out.weights[free].to_vec();
                decor_sum += out.final_objective;
                outcome = Some(out);
                w
            } else {
                vec![1.0; idx.len()]
            };

            let step = pass.weighted_loss_grads(batch.labels(), &weights).map_err(|e| match e {
                Error::NonFiniteLoss(detail) => Error::Divergence { epoch, batch: bi, detail },
                other => other,
            })?;
            opt.step(&mut model, &step.grads)?;
            if cfg.mode.reweights() && k > 0 {
                memory.momentum_update(&z, &weights)?;
            }

            loss_sum += step.loss;
            batches += 1;
            seen += idx.len();
            correct += (0..idx.len()).filter(|&n| step.logits.argmax_row(n) == batch.labels()[n]).count();
            observer(&BatchEvent { epoch, batch: bi, weights: &weights, reweight: outcome.as_ref(), loss: step.loss });
            if last_epoch {
                final_weight_batches.push(weights.len());
                final_weights.extend_from_slice(&weights);
            }
        }
        let test_accuracy = if (epoch + 1) % cfg.eval_every == 0 || last_epoch {
            Some(evaluate(&model, test_set)?)
        } else {
            None
        };
        records.push(EpochRecord {
            epoch,
            weighted_loss: loss_sum / batches as f64,
            decorrelation: cfg.mode.reweights().then(|| decor_sum / batches as f64),
            train_accuracy: correct as f64 / seen as f64,
            test_accuracy,
        });
    }

    let final_train_accuracy = evaluate(&model, train_set)?;
    let final_test_accuracy = match records.last() {
        Some(EpochRecord { test_accuracy: Some(a), .. }) => *a,
        _ => evaluate(&model, test_set)?,
    };
    let report = RunReport {
        config: cfg.clone(),
        epochs: records,
        final_train_accuracy,
        final_test_accuracy,
        final_weights,
        final_weight_batches,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(TrainOutput { report, checkpoint: Checkpoint { model, memory } })
}

impl RunReport {
    pub fn mode(&self) -> Mode {
        self.config.mode
    }
}
