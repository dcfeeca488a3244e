//! Comparison models: multi-task lasso, MRCE and graph-guided fused lasso.

use crate::bstep::{
    proximal_descent, snap_tiny_rows, solve_b_with, symmetric_spectral_radius, CompositeProblem, LeastSquares,
};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SpdMatrix};
use crate::model::{Dataset, Hyperparams, ModelEstimate};
use crate::prox::soft_threshold;
use crate::theta_step::{glasso_bcd, initial_theta, AsymPenalty};

fn lasso_params(lambda: f64, hp: &Hyperparams) -> Hyperparams {
    Hyperparams {
        lambda1: lambda,
        lambda2: 0.0,
        gamma: 0.0,
        tau: 0.0,
        ..hp.clone()
    }
}

/// `min_B (1/n)||Y - XB||²_F + λ||B||₁` with default solver controls.
pub fn fit_multitask_lasso(data: &Dataset, lambda: f64) -> Result<DenseMatrix> {
    fit_multitask_lasso_with(data, lambda, &Hyperparams::default())
}

/// As [`fit_multitask_lasso`], taking tolerances and the initial step from `hp`.
pub fn fit_multitask_lasso_with(data: &Dataset, lambda: f64, hp: &Hyperparams) -> Result<DenseMatrix> {
    Ok(lasso_descent(data, lambda, hp, None)?.0)
}

fn lasso_descent(
    data: &Dataset,
    lambda: f64,
    hp: &Hyperparams,
    init: Option<&DenseMatrix>,
) -> Result<(DenseMatrix, Vec<f64>)> {
    let hp = lasso_params(lambda, hp);
    let ls = LeastSquares::new(data);
    let zero = DenseMatrix::zeros(data.p(), data.q());
    let out = solve_b_with(&ls, data, &SpdMatrix::identity(data.q()), init.unwrap_or(&zero), &hp)?;
    Ok((out.b, out.trace))
}

/// `(1/n) tr((Y - XB)ᵀ(Y - XB) Ω) + λ₁||B||₁` for fixed Ω.
struct WeightedLasso<'a> {
    ls: &'a LeastSquares,
    omega: &'a DenseMatrix,
    xty_omega: DenseMatrix,
    yty_omega: f64,
    lambda: f64,
}

impl<'a> WeightedLasso<'a> {
    fn new(ls: &'a LeastSquares, omega: &'a DenseMatrix, lambda: f64) -> Self {
        Self {
            ls,
            omega,
            xty_omega: ls.xty.matmul(omega).expect("q x q weighting"),
            yty_omega: ls.yty.frobenius_dot(omega),
            lambda,
        }
    }

    fn default_step(&self) -> f64 {
        let sx = symmetric_spectral_radius(&self.ls.xtx, 100);
        let so = symmetric_spectral_radius(self.omega, 100);
        if sx > 0.0 && so > 0.0 {
            0.5 * self.ls.n / (sx * so)
        } else {
            1.0
        }
    }
}

impl CompositeProblem for WeightedLasso<'_> {
    /// `XᵀX B Ω`
    type Cache = DenseMatrix;

    fn evaluate(&self, b: &DenseMatrix) -> (f64, DenseMatrix) {
        let g = self
            .ls
            .xtx
            .matmul(b)
            .expect("B has p rows")
            .matmul(self.omega)
            .expect("q x q");
        let loss = (self.yty_omega - 2.0 * self.xty_omega.frobenius_dot(b) + g.frobenius_dot(b)) / self.ls.n;
        (loss.max(0.0) + self.lambda * b.l1_norm(), g)
    }

    fn gradient(&self, _b: &DenseMatrix, g: &DenseMatrix) -> DenseMatrix {
        g.sub(&self.xty_omega).expect("shapes agree").scale(2.0 / self.ls.n)
    }

    fn prox(&self, z: &DenseMatrix, nu: f64) -> DenseMatrix {
        let t = nu * self.lambda;
        z.map(|v| soft_threshold(v, t))
    }
}

/// Ω-weighted lasso B-step of MRCE.
pub fn mrce_b_step(
    data: &Dataset,
    omega: &SpdMatrix,
    b_init: &DenseMatrix,
    lambda1: f64,
    hp: &Hyperparams,
) -> Result<DenseMatrix> {
    data.check_precision(omega)?;
    data.check_coefficients(b_init)?;
    let ls = LeastSquares::new(data);
    let problem = WeightedLasso::new(&ls, omega, lambda1);
    let nu0 = problem.default_step();
    let mut b = proximal_descent(&problem, b_init, nu0, hp.inner_tol, hp.inner_max_iter)?.b;
    snap_tiny_rows(&mut b);
    Ok(b)
}

/// `(1/n) (Y - XB)ᵀ(Y - XB)`
pub fn residual_covariance(data: &Dataset, b: &DenseMatrix) -> Result<DenseMatrix> {
    let r = data.y().sub(&data.x().matmul(b)?)?;
    let mut s = r.tr_matmul(&r)?.scale(1.0 / data.n() as f64);
    s.symmetrize();
    Ok(s)
}

/// MRCE objective with the diagonal of Ω unpenalized.
pub fn mrce_objective(data: &Dataset, b: &DenseMatrix, omega: &SpdMatrix, lambda1: f64, lambda2: f64) -> Result<f64> {
    let s = residual_covariance(data, b)?;
    let pen = AsymPenalty::uniform(data.q(), lambda2);
    Ok(s.frobenius_dot(omega) - omega.log_det()? + lambda1 * b.l1_norm() + pen.value(omega))
}

/// Multivariate regression with covariance estimation: alternates an
/// Ω-weighted lasso for B with a graphical lasso on the residual covariance.
pub fn fit_mrce(data: &Dataset, lambda1: f64, lambda2: f64, hp: &Hyperparams) -> Result<ModelEstimate> {
    fit_mrce_from(data, lambda1, lambda2, hp, None)
}

pub fn fit_mrce_from(
    data: &Dataset,
    lambda1: f64,
    lambda2: f64,
    hp: &Hyperparams,
    init: Option<&ModelEstimate>,
) -> Result<ModelEstimate> {
    lasso_params(lambda1, hp).validate()?;
    if !(lambda2 >= 0.0 && lambda2.is_finite()) {
        return Err(Error::InvalidHyperparams(format!(
            "lambda2 must be >= 0, got {lambda2}"
        )));
    }
    let (mut b, mut omega) = match init {
        Some(est) => (est.b.clone(), est.theta.clone()),
        None => {
            let b = DenseMatrix::zeros(data.p(), data.q());
            let omega = initial_theta(&residual_covariance(data, &b)?, lambda2)?;
            (b, omega)
        }
    };
    let pen = AsymPenalty::uniform(data.q(), lambda2);
    let mut prev = mrce_objective(data, &b, &omega, lambda1, lambda2)?;
    let mut trace = Vec::new();
    let mut converged = false;
    for iteration in 1..=hp.outer_max_iter {
        b = mrce_b_step(data, &omega, &b, lambda1, hp)?;
        let s = residual_covariance(data, &b)?;
        omega = glasso_bcd(&s, &pen, &omega, hp.theta_tol, hp.theta_max_sweeps)?.theta;
        let obj = mrce_objective(data, &b, &omega, lambda1, lambda2)?;
        if !obj.is_finite() {
            return Err(Error::NonFiniteObjective { iteration });
        }
        trace.push(obj);
        let rel = (prev - obj).abs() / prev.abs().max(f64::MIN_POSITIVE);
        prev = obj;
        if rel < hp.outer_tol {
            converged = true;
            break;
        }
    }
    Ok(ModelEstimate {
        b,
        theta: omega,
        objective_trace: trace,
        converged,
    })
}

/// Fixed output graph for the graph-guided fused lasso.
///
/// Stored as a similarity matrix: a positive entry pulls `β_·k` and `β_·m`
/// together, a negative one pulls `β_·k` toward `-β_·m`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionGraph {
    similarity: DenseMatrix,
}

impl FusionGraph {
    pub fn new(similarity: DenseMatrix) -> Result<Self> {
        if !similarity.is_square() || !similarity.is_symmetric(1e-10) {
            return Err(Error::ShapeMismatch(
                "fusion graph must be a symmetric square matrix".into(),
            ));
        }
        let mut s = similarity;
        for i in 0..s.rows() {
            s[(i, i)] = 0.0;
        }
        Ok(Self { similarity: s })
    }

    pub fn empty(q: usize) -> Self {
        Self {
            similarity: DenseMatrix::zeros(q, q),
        }
    }

    /// Edges where `|corr(y_k, y_m)| > threshold`, weighted by the correlation.
    pub fn from_correlation(y: &DenseMatrix, threshold: f64) -> Self {
        let corr = sample_correlation(y);
        let q = y.cols();
        let sim = DenseMatrix::from_fn(q, q, |k, m| {
            let c = corr[(k, m)];
            if k != m && c.abs() > threshold {
                c
            } else {
                0.0
            }
        });
        Self { similarity: sim }
    }

    /// Graph implied by a precision matrix: `similarity = -Θ` off the diagonal.
    pub fn from_precision(theta: &DenseMatrix) -> Result<Self> {
        Self::new(theta.map(|v| -v))
    }

    pub fn similarity(&self) -> &DenseMatrix {
        &self.similarity
    }

    pub fn dim(&self) -> usize {
        self.similarity.rows()
    }

    /// The equivalent coupling in the precision-matrix sign convention.
    pub fn coupling(&self) -> DenseMatrix {
        self.similarity.map(|v| -v)
    }
}

/// Pearson correlation between the columns of `y`. Constant columns get zero
/// correlation with everything else.
pub fn sample_correlation(y: &DenseMatrix) -> DenseMatrix {
    let (n, q) = y.shape();
    let mut centred = y.clone();
    let mut sd = vec![0.0; q];
    for j in 0..q {
        let col = y.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        for i in 0..n {
            centred[(i, j)] -= mean;
        }
        sd[j] = centred.column(j).iter().map(|v| v * v).sum::<f64>().sqrt();
    }
    let cov = centred.tr_matmul(&centred).expect("same rows");
    DenseMatrix::from_fn(q, q, |k, m| {
        if k == m {
            1.0
        } else if sd[k] > 0.0 && sd[m] > 0.0 {
            cov[(k, m)] / (sd[k] * sd[m])
        } else {
            0.0
        }
    })
}

/// Graph-guided fused lasso against a fixed graph: the coefficient
/// subproblem with `τ = 0` and Θ replaced by the graph, never updated.
pub fn fit_gflasso(
    data: &Dataset,
    graph: &FusionGraph,
    lambda1: f64,
    gamma: f64,
    hp: &Hyperparams,
) -> Result<DenseMatrix> {
    Ok(fit_gflasso_from(data, graph, lambda1, gamma, hp, None)?.0)
}

pub(crate) fn fit_gflasso_from(
    data: &Dataset,
    graph: &FusionGraph,
    lambda1: f64,
    gamma: f64,
    hp: &Hyperparams,
    init: Option<&DenseMatrix>,
) -> Result<(DenseMatrix, Vec<f64>)> {
    if graph.dim() != data.q() {
        return Err(Error::ShapeMismatch(format!(
            "graph is {}x{}, data has {} outputs",
            graph.dim(),
            graph.dim(),
            data.q()
        )));
    }
    let hp = Hyperparams {
        lambda1,
        gamma,
        tau: 0.0,
        lambda2: 0.0,
        ..hp.clone()
    };
    let ls = LeastSquares::new(data);
    let zero = DenseMatrix::zeros(data.p(), data.q());
    let out = solve_b_with(&ls, data, &graph.coupling(), init.unwrap_or(&zero), &hp)?;
    Ok((out.b, out.trace))
}

pub(crate) fn fit_lasso_from(
    data: &Dataset,
    lambda: f64,
    hp: &Hyperparams,
    init: Option<&DenseMatrix>,
) -> Result<(DenseMatrix, Vec<f64>)> {
    lasso_descent(data, lambda, hp, init)
}
