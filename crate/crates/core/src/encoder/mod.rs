//! GIN graph encoder with sum pooling, a two-layer MLP classifier and the
//! sample-weighted prediction step.

mod adam;
mod forward;
mod params;

pub use adam::Adam;
pub use forward::{
    classify, classify_on_tape, encode, encode_batch, encode_on_tape, gin_layer_forward, predict,
    weighted_loss_grads, weighted_prediction_step, ForwardPass, GraphBatch, LossGrads, ModelVars,
};
pub use params::{Activation, ClassifierParams, EncoderParams, GinLayer, Mlp, Model, MAX_LAYERS, MIN_LAYERS};
