//! Sample reweighting that removes dependence between representation
//! dimensions.
//!
//! Each dimension is lifted by random Fourier features, dependence between
//! two dimensions is the squared Frobenius norm of their weighted partial
//! cross-covariance, and per-sample weights are optimized by projected
//! gradient descent to drive the sum over dimension pairs down. The HSIC
//! estimator here is a validation oracle, not part of training.

mod cov;
mod hsic;
mod objective;
mod optimize;
mod pairs;
mod rff;
mod weights;

pub use cov::{partial_cov, weighted_partial_cov};
pub use hsic::{hsic_gaussian, hsic_permutation_test, median_bandwidth, HsicEstimate, PermutationTest};
pub use objective::{decorrelation_objective, objective_grad_weights, DecorrelationObjective};
pub use optimize::{
    invocation_count, optimize_weights, optimize_weights_partial, FeatureMapKind, ReweightConfig, ReweightOutcome,
};
pub use pairs::sample_pairs;
pub use rff::{rff_apply, FeatureMaps, RffBank};
pub use weights::{check_constraints, project, WeightVector, SUM_TOLERANCE, W_MIN};
