//! Uniform entry point over the joint model and the comparison models.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{fit_gflasso_from, fit_lasso_from, fit_mrce_from, FusionGraph};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SpdMatrix};
use crate::model::{Dataset, Hyperparams, ModelEstimate};
use crate::solver::fit;

/// Default `|corr|` cut-off for the GFLasso output graph.
pub const DEFAULT_GRAPH_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lasso,
    Mrce,
    Gflasso,
    Iclasso,
    L12glasso,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Lasso,
        ModelKind::Mrce,
        ModelKind::Gflasso,
        ModelKind::Iclasso,
        ModelKind::L12glasso,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lasso => "lasso",
            ModelKind::Mrce => "mrce",
            ModelKind::Gflasso => "gflasso",
            ModelKind::Iclasso => "iclasso",
            ModelKind::L12glasso => "l12glasso",
        }
    }

    /// Whether the model estimates an output precision matrix.
    pub fn estimates_precision(self) -> bool {
        matches!(self, ModelKind::Mrce | ModelKind::Iclasso | ModelKind::L12glasso)
    }

    /// Whether `tau` takes part in the fit.
    pub fn uses_tau(self) -> bool {
        self == ModelKind::L12glasso
    }

    /// Whether `lambda2` takes part in the fit.
    pub fn uses_lambda2(self) -> bool {
        self.estimates_precision()
    }

    /// Whether `gamma` takes part in the fit.
    pub fn uses_gamma(self) -> bool {
        matches!(self, ModelKind::Gflasso | ModelKind::Iclasso | ModelKind::L12glasso)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::InvalidHyperparams(format!(
                "unknown model '{s}' (expected lasso, mrce, gflasso, iclasso or l12glasso)"
            ))
        })
    }
}

/// Output of any model. `theta` is `None` for models without a precision estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub kind: ModelKind,
    pub b: DenseMatrix,
    pub theta: Option<SpdMatrix>,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

impl FittedModel {
    fn from_estimate(kind: ModelKind, est: ModelEstimate) -> Self {
        Self {
            kind,
            b: est.b,
            theta: Some(est.theta),
            objective_trace: est.objective_trace,
            converged: est.converged,
        }
    }

    fn to_estimate(&self) -> Option<ModelEstimate> {
        self.theta.as_ref().map(|theta| ModelEstimate {
            b: self.b.clone(),
            theta: theta.clone(),
            objective_trace: Vec::new(),
            converged: self.converged,
        })
    }
}

/// Fits `kind` with the relevant fields of `hp`.
///
/// `init` warm-starts from a previous fit of the same shape. `graph` is used
/// by GFLasso only and defaults to the thresholded correlation graph of Y.
pub fn fit_model(
    kind: ModelKind,
    data: &Dataset,
    hp: &Hyperparams,
    init: Option<&FittedModel>,
    graph: Option<&FusionGraph>,
) -> Result<FittedModel> {
    match kind {
        ModelKind::L12glasso | ModelKind::Iclasso => {
            let hp = if kind == ModelKind::Iclasso {
                hp.without_tau()
            } else {
                hp.clone()
            };
            let warm = init.and_then(FittedModel::to_estimate);
            Ok(FittedModel::from_estimate(kind, fit(data, &hp, warm.as_ref())?))
        }
        ModelKind::Mrce => {
            let warm = init.and_then(FittedModel::to_estimate);
            Ok(FittedModel::from_estimate(
                kind,
                fit_mrce_from(data, hp.lambda1, hp.lambda2, hp, warm.as_ref())?,
            ))
        }
        ModelKind::Lasso => {
            let (b, trace) = fit_lasso_from(data, hp.lambda1, hp, init.map(|f| &f.b))?;
            Ok(FittedModel {
                kind,
                b,
                theta: None,
                converged: true,
                objective_trace: trace,
            })
        }
        ModelKind::Gflasso => {
            let default_graph;
            let graph = match graph {
                Some(g) => g,
                None => {
                    default_graph = FusionGraph::from_correlation(data.y(), DEFAULT_GRAPH_THRESHOLD);
                    &default_graph
                }
            };
            let (b, trace) = fit_gflasso_from(data, graph, hp.lambda1, hp.gamma, hp, init.map(|f| &f.b))?;
            Ok(FittedModel {
                kind,
                b,
                theta: None,
                converged: true,
                objective_trace: trace,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{fit_gflasso, fit_mrce, fit_multitask_lasso_with};

    fn instance() -> Dataset {
        let mut seed = 17u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let x = DenseMatrix::from_fn(30, 5, |_, _| next());
        let b = DenseMatrix::from_fn(5, 4, |j, k| if j == k { 1.0 } else { 0.0 });
        let mut y = x.matmul(&b).unwrap();
        y.axpy(0.3, &DenseMatrix::from_fn(30, 4, |_, _| next()));
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
        assert!("glasso".parse::<ModelKind>().is_err());
    }

    #[test]
    fn dispatch_matches_direct_calls() {
        let data = instance();
        let hp = Hyperparams::new(0.1, 0.1, 0.05, 0.01).unwrap();

        let l12 = fit_model(ModelKind::L12glasso, &data, &hp, None, None).unwrap();
        assert_eq!(l12.b, fit(&data, &hp, None).unwrap().b);

        let ic = fit_model(ModelKind::Iclasso, &data, &hp, None, None).unwrap();
        assert_eq!(ic.b, fit(&data, &hp.without_tau(), None).unwrap().b);

        let lasso = fit_model(ModelKind::Lasso, &data, &hp, None, None).unwrap();
        assert_eq!(lasso.b, fit_multitask_lasso_with(&data, 0.1, &hp).unwrap());
        assert!(lasso.theta.is_none());

        let mrce = fit_model(ModelKind::Mrce, &data, &hp, None, None).unwrap();
        assert_eq!(mrce.b, fit_mrce(&data, 0.1, 0.1, &hp).unwrap().b);

        let graph = FusionGraph::from_correlation(data.y(), DEFAULT_GRAPH_THRESHOLD);
        let gf = fit_model(ModelKind::Gflasso, &data, &hp, None, None).unwrap();
        assert_eq!(gf.b, fit_gflasso(&data, &graph, 0.1, 0.05, &hp).unwrap());
    }

    #[test]
    fn warm_start_from_own_solution_is_quick() {
        let data = instance();
        let hp = Hyperparams::new(0.1, 0.1, 0.05, 0.01).unwrap();
        for kind in ModelKind::ALL {
            let first = fit_model(kind, &data, &hp, None, None).unwrap();
            let again = fit_model(kind, &data, &hp, Some(&first), None).unwrap();
            assert!(again.b.sub(&first.b).unwrap().max_abs() < 1e-3, "{kind}");
        }
    }
}
