//! Learning from label proportions (LLP) by reduction to mutual
//! contamination models (MCMs).
//!
//! Training data arrive as *bags*: groups of unlabeled instances, each
//! annotated only with the proportion of positive instances it contains.
//! Pairing two bags with different label proportions yields a mutual
//! contamination model, and a linear recombination of the base loss (the
//! *corrected loss*) makes the empirical risk on the contaminated pair an
//! unbiased estimate of the clean balanced error rate. This crate
//! implements that reduction end to end:
//!
//! - [`loss`]: base binary losses and the corrected loss, with Lipschitz
//!   metadata, a convexity certificate, and the symmetric-loss shift
//!   identity.
//! - [`bags`]: the bag data model plus seeded samplers for the
//!   instance-level and bag-level generation models and label-proportion
//!   distributions (constant, iid uniform, correlated walk).
//! - [`pairing`]: optimal bag pairing (max-weight perfect matching on the
//!   squared LP gap), closed-form optimal pair weights, and the
//!   blockwise-pairwise / blockwise-max K-merging schemes.
//! - [`model`]: Gaussian-kernel decision functions in representer form
//!   and the `1/(d * Var(X))` bandwidth heuristic.
//! - [`train`]: the weighted plug-in objective with ridge regularization,
//!   its analytic gradient, an L-BFGS minimizer, bag-level cross
//!   validation over the lambda grid, and the consistency sweep.
//! - [`eval`]: BER, rank-based ROC/AUC, the empirical proportion risk,
//!   and the analytic demonstration that EPR minimization is not
//!   BER-optimal.
//! - [`bounds`]: closed-form generalization-bound calculators for single
//!   draws of paired bags and for merged big bags.
//! - [`data`]: CSV ingestion, standardization/one-hot preprocessing, bag
//!   assembly from labeled data, and the bag-manifest directory format.

pub mod bags;
pub mod bounds;
pub mod data;
pub mod eval;
pub mod loss;
pub mod model;
pub mod pairing;
pub mod seed;
pub mod train;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("contamination too large: kappa+ + kappa- = {0} must be < 1")]
    ContaminationTooLarge(f64),

    #[error("kappa must be nonnegative, got ({0}, {1})")]
    NegativeKappa(f64, f64),

    #[error("loss `{0}` has no symmetric-shift constant")]
    NotSymmetric(&'static str),

    #[error("loss `{0}` is not differentiable")]
    NotDifferentiable(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("bag count must be even, got {0}")]
    OddBagCount(usize),

    #[error("bag count {count} is not divisible by 2K = {block}")]
    BlockMismatch { count: usize, block: usize },

    #[error("merged outputs have mismatched shapes: {0} vs {1} pairs")]
    ShapeMismatch(usize, usize),

    #[error("all pairs degenerate: no label-proportion gap above {floor}")]
    DegeneratePairs { floor: f64 },

    #[error("all cross-validation folds are degenerate")]
    DegenerateFolds,

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("class pool exhausted: needed {needed} more `{class}` instances")]
    PoolExhausted { class: &'static str, needed: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
