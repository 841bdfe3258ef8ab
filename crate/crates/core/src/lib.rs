//! Graph classification with a GIN encoder whose training samples are
//! reweighted to remove nonlinear dependence between representation
//! dimensions, for better generalization under distribution shift.
//!
//! Module map:
//! - [`numcore`]: dense matrices and reverse-mode gradients
//! - [`graphdata`]: graphs, synthetic datasets, shift splits, file format
//! - [`encoder`]: GIN encoder, MLP classifier, weighted prediction step
//! - [`decorrelation`]: random Fourier features, weighted partial
//!   cross-covariance, the weight optimizer and an HSIC oracle
//! - [`globalmem`]: momentum memory of past representations and weights
//! - [`harness`]: training loop, evaluation, experiments and reports

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod decorrelation;
pub mod encoder;
pub mod error;
pub mod globalmem;
pub mod graphdata;
pub mod harness;
pub mod numcore;
pub mod seed;

pub use error::{Error, Result};
