//! Problem data, hyperparameters and exact evaluation of every objective term.

use serde::{Deserialize, Serialize};

use crate::bstep::PaGrouping;
use crate::error::{Error, Result};
use crate::linalg::{log_det_pd, DenseMatrix, SpdMatrix};

/// Paired inputs `X` (n x p) and outputs `Y` (n x q).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DenseMatrix,
    y: DenseMatrix,
}

impl Dataset {
    pub fn new(x: DenseMatrix, y: DenseMatrix) -> Result<Self> {
        if x.rows() != y.rows() {
            return Err(Error::DimensionMismatch(format!(
                "X has {} rows but Y has {}",
                x.rows(),
                y.rows()
            )));
        }
        if x.rows() == 0 {
            return Err(Error::DimensionMismatch("dataset needs at least one row".into()));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn y(&self) -> &DenseMatrix {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn q(&self) -> usize {
        self.y.cols()
    }

    /// Empirical output second-moment matrix `(1/n) YᵀY`.
    pub fn output_gram(&self) -> DenseMatrix {
        let mut s = self.y.tr_matmul(&self.y).expect("Y shares its own row count");
        s = s.scale(1.0 / self.n() as f64);
        s.symmetrize();
        s
    }

    /// Column z-scoring of both `X` and `Y`. Constant columns are centred only.
    pub fn standardized(&self) -> Self {
        Self {
            x: standardize_columns(&self.x),
            y: standardize_columns(&self.y),
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(idx),
            y: self.y.select_rows(idx),
        }
    }

    pub(crate) fn check_coefficients(&self, b: &DenseMatrix) -> Result<()> {
        if b.shape() != (self.p(), self.q()) {
            return Err(Error::DimensionMismatch(format!(
                "B is {}x{}, expected {}x{}",
                b.rows(),
                b.cols(),
                self.p(),
                self.q()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_precision(&self, theta: &DenseMatrix) -> Result<()> {
        if theta.shape() != (self.q(), self.q()) {
            return Err(Error::DimensionMismatch(format!(
                "Theta is {}x{}, expected {q}x{q}",
                theta.rows(),
                theta.cols(),
                q = self.q()
            )));
        }
        Ok(())
    }
}

fn standardize_columns(m: &DenseMatrix) -> DenseMatrix {
    let n = m.rows() as f64;
    let mut out = m.clone();
    for j in 0..m.cols() {
        let col = m.column(j);
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for i in 0..m.rows() {
            out[(i, j)] = (m[(i, j)] - mean) / sd;
        }
    }
    out
}

/// Penalty weights and solver controls.
///
/// `tau` is the weight of the subtracted row-wise ℓ₂ norm; `tau = 0` is the
/// plain ℓ₁ (ICLasso) objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub gamma: f64,
    pub tau: f64,
    /// Initial B-step size; `None` uses `step_scale · n / σ_max(XᵀX)`.
    pub step_nu: Option<f64>,
    /// Multiplier of `n / σ_max(XᵀX)` for the default step. Smaller steps
    /// tighten the proximal-average approximation of the fusion prox at the
    /// cost of more iterations.
    pub step_scale: f64,
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub theta_tol: f64,
    pub theta_max_sweeps: usize,
    pub pa_grouping: PaGrouping,
    pub b_step_first: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            lambda1: 0.0,
            lambda2: 0.0,
            gamma: 0.0,
            tau: 0.0,
            step_nu: None,
            step_scale: 0.5,
            outer_tol: 1e-6,
            outer_max_iter: 100,
            inner_tol: 1e-6,
            inner_max_iter: 500,
            theta_tol: 1e-7,
            theta_max_sweeps: 200,
            pa_grouping: PaGrouping::default(),
            b_step_first: true,
        }
    }
}

impl Hyperparams {
    pub fn new(lambda1: f64, lambda2: f64, gamma: f64, tau: f64) -> Result<Self> {
        let hp = Self {
            lambda1,
            lambda2,
            gamma,
            tau,
            ..Self::default()
        };
        hp.validate()?;
        Ok(hp)
    }

    /// `tau = lambda1 / ratio`.
    pub fn with_ratio(lambda1: f64, lambda2: f64, gamma: f64, ratio: f64) -> Result<Self> {
        if !(ratio > 0.0) {
            return Err(Error::InvalidHyperparams(format!(
                "ratio must be positive, got {ratio}"
            )));
        }
        Self::new(lambda1, lambda2, gamma, lambda1 / ratio)
    }

    pub fn validate(&self) -> Result<()> {
        let weights = [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("gamma", self.gamma),
            ("tau", self.tau),
        ];
        for (name, v) in weights {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidHyperparams(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if self.lambda1 > 0.0 && self.tau > self.lambda1 {
            return Err(Error::InvalidHyperparams(format!(
                "tau ({}) must not exceed lambda1 ({})",
                self.tau, self.lambda1
            )));
        }
        if let Some(nu) = self.step_nu {
            if !(nu > 0.0 && nu.is_finite()) {
                return Err(Error::InvalidHyperparams(format!("step_nu must be positive, got {nu}")));
            }
        }
        for (name, v) in [
            ("step_scale", self.step_scale),
            ("outer_tol", self.outer_tol),
            ("inner_tol", self.inner_tol),
            ("theta_tol", self.theta_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidHyperparams(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Same controls, with `tau = 0`.
    pub fn without_tau(&self) -> Self {
        Self {
            tau: 0.0,
            ..self.clone()
        }
    }
}

/// Jointly estimated coefficients and output precision matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelEstimate {
    pub b: DenseMatrix,
    pub theta: SpdMatrix,
    /// Objective after each outer iteration (diagonal of Θ unpenalized, see
    /// [`eval_solver_objective`]).
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

impl ModelEstimate {
    pub fn outer_iterations(&self) -> usize {
        self.objective_trace.len()
    }
}

/// Σ_i ||row i of B||₂
pub fn row_l2_sum(b: &DenseMatrix) -> f64 {
    (0..b.rows())
        .map(|i| b.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum()
}

pub(crate) fn residual_sq(data: &Dataset, b: &DenseMatrix) -> f64 {
    let fitted = data.x().matmul(b).expect("shapes checked by caller");
    fitted.sub(data.y()).expect("shapes checked by caller").frobenius_sq() / data.n() as f64
}

/// `(1/n)||Y - XB||²_F + λ₁||B||₁ - τ||B||₂,₁`
pub fn eval_g12(data: &Dataset, b: &DenseMatrix, hp: &Hyperparams) -> Result<f64> {
    data.check_coefficients(b)?;
    Ok(residual_sq(data, b) + hp.lambda1 * b.l1_norm() - hp.tau * row_l2_sum(b))
}

/// `(1/n) tr(YᵀYΘ) - log det Θ + λ₂||Θ||₁`, ℓ₁ over every entry.
pub fn eval_h(data: &Dataset, theta: &SpdMatrix, hp: &Hyperparams) -> Result<f64> {
    data.check_precision(theta)?;
    eval_h_with_gram(&data.output_gram(), theta, hp.lambda2)
}

pub(crate) fn eval_h_with_gram(s: &DenseMatrix, theta: &SpdMatrix, lambda2: f64) -> Result<f64> {
    Ok(s.frobenius_dot(theta) - log_det_pd(theta)? + lambda2 * theta.l1_norm())
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `Σ_{k≠m} |θ_km| · ||β_·k + sgn(θ_km) β_·m||₁` over ordered pairs.
///
/// `coupling` is any symmetric q x q matrix in the precision-matrix sign
/// convention (Θ itself, or a fixed graph).
pub fn eval_gfl(b: &DenseMatrix, coupling: &DenseMatrix) -> Result<f64> {
    let q = b.cols();
    if coupling.shape() != (q, q) {
        return Err(Error::DimensionMismatch(format!(
            "coupling is {}x{}, B has {q} columns",
            coupling.rows(),
            coupling.cols()
        )));
    }
    let mut total = 0.0;
    for k in 0..q {
        for m in 0..q {
            let theta = coupling[(k, m)];
            if k == m || theta == 0.0 {
                continue;
            }
            let s = sgn(theta);
            let fused: f64 = (0..b.rows()).map(|j| (b[(j, k)] + s * b[(j, m)]).abs()).sum();
            total += theta.abs() * fused;
        }
    }
    Ok(total)
}

/// `g₁₂(B) + h(Θ) + γ GFL(B, -Θ)`
pub fn eval_total(data: &Dataset, est: &ModelEstimate, hp: &Hyperparams) -> Result<f64> {
    eval_total_parts(data, &est.b, &est.theta, hp)
}

pub fn eval_total_parts(data: &Dataset, b: &DenseMatrix, theta: &SpdMatrix, hp: &Hyperparams) -> Result<f64> {
    data.check_precision(theta)?;
    let g = eval_g12(data, b, hp)?;
    let h = eval_h(data, theta, hp)?;
    let gfl = if hp.gamma == 0.0 { 0.0 } else { eval_gfl(b, theta)? };
    Ok(g + h + hp.gamma * gfl)
}

/// The objective the alternating solver actually descends: [`eval_total`]
/// without the `λ₂ Σ_k |θ_kk|` diagonal term, which the Θ-step leaves
/// unpenalized.
pub fn eval_solver_objective(data: &Dataset, b: &DenseMatrix, theta: &SpdMatrix, hp: &Hyperparams) -> Result<f64> {
    let diag: f64 = theta.diagonal().iter().map(|v| v.abs()).sum();
    Ok(eval_total_parts(data, b, theta, hp)? - hp.lambda2 * diag)
}
