//! Sparse multi-task regression with a jointly estimated output precision
//! matrix, fused through the precision graph, plus the comparison models,
//! a synthetic data generator and evaluation tools.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bstep;
pub mod error;
pub mod evaluate;
pub mod linalg;
pub mod model;
pub mod models;
pub mod prox;
pub mod simulate;
pub mod solver;
pub mod theta_step;

pub use bstep::PaGrouping;
pub use error::{Error, Result};
pub use evaluate::{HyperGrid, SupportMetrics, SweepOptions, SweepReport};
pub use linalg::{DenseMatrix, SpdMatrix};
pub use model::{Dataset, Hyperparams, ModelEstimate};
pub use models::{fit_model, FittedModel, ModelKind};
pub use simulate::{SimulationConfig, SimulationTruth};
pub use solver::{fit, fit_path};
