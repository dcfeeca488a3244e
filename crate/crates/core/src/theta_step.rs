//! Precision subproblem: `h(Θ) + γ GFL(B, -Θ)` for fixed B.
//!
//! Column-wise block coordinate descent on the primal. Updating column `j`
//! with the rest of Θ fixed splits into a closed-form Schur complement
//! `θ_jj - θ_12ᵀ Θ_11⁻¹ θ_12 = 1/S_jj` and the piecewise-quadratic problem
//!
//! ```text
//! min_α  ½ αᵀ (S_jj Θ_11⁻¹) α + S_12ᵀ α + Σ_i up_i·max(α_i, 0) + low_i·max(-α_i, 0)
//! ```
//!
//! solved by coordinate descent with [`asym_soft_threshold`]. `W = Θ⁻¹` is
//! carried along with rank-one block updates and refreshed from a Cholesky
//! factorization once per sweep. The diagonal of Θ is left unpenalized.

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, DenseMatrix, SpdMatrix};
use crate::model::{Dataset, Hyperparams};
use crate::prox::asym_soft_threshold;

/// Elementwise slopes for `θ_km > 0` (`up`) and `θ_km < 0` (`low`).
#[derive(Debug, Clone, PartialEq)]
pub struct AsymPenalty {
    pub up: DenseMatrix,
    pub low: DenseMatrix,
}

impl AsymPenalty {
    /// `λ` on every off-diagonal entry in both directions.
    pub fn uniform(q: usize, lambda: f64) -> Self {
        let m = DenseMatrix::from_fn(q, q, |i, j| if i == j { 0.0 } else { lambda });
        Self { up: m.clone(), low: m }
    }

    pub fn dim(&self) -> usize {
        self.up.rows()
    }

    /// `Σ_{k≠m} up_km·max(θ_km, 0) + low_km·max(-θ_km, 0)`
    pub fn value(&self, theta: &DenseMatrix) -> f64 {
        let q = self.dim();
        let mut total = 0.0;
        for k in 0..q {
            for m in 0..q {
                if k == m {
                    continue;
                }
                let t = theta[(k, m)];
                total += if t > 0.0 {
                    self.up[(k, m)] * t
                } else {
                    -self.low[(k, m)] * t
                };
            }
        }
        total
    }
}

/// `up_km = λ₂ + γ||β_·k + β_·m||₁`, `low_km = λ₂ + γ||β_·k - β_·m||₁`.
pub fn fusion_weights(b: &DenseMatrix, hp: &Hyperparams) -> AsymPenalty {
    let q = b.cols();
    let mut up = DenseMatrix::zeros(q, q);
    let mut low = DenseMatrix::zeros(q, q);
    for k in 0..q {
        for m in (k + 1)..q {
            let (mut plus, mut minus) = (0.0, 0.0);
            if hp.gamma != 0.0 {
                for j in 0..b.rows() {
                    plus += (b[(j, k)] + b[(j, m)]).abs();
                    minus += (b[(j, k)] - b[(j, m)]).abs();
                }
            }
            let u = hp.lambda2 + hp.gamma * plus;
            let l = hp.lambda2 + hp.gamma * minus;
            up[(k, m)] = u;
            up[(m, k)] = u;
            low[(k, m)] = l;
            low[(m, k)] = l;
        }
    }
    AsymPenalty { up, low }
}

/// Coordinate descent for `½αᵀHα + linᵀα + Σ up_i α₊ + low_i α₋` from
/// `alpha`, updated in place.
fn column_descent(
    h: &DenseMatrix,
    lin: &[f64],
    up: &[f64],
    low: &[f64],
    alpha: &mut [f64],
    max_sweeps: usize,
    tol: f64,
) -> Result<()> {
    let d = alpha.len();
    for i in 0..d {
        if !(h[(i, i)] > 0.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "quadratic term has non-positive diagonal {} at {i}",
                h[(i, i)]
            )));
        }
    }
    // grad = H α + lin
    let mut grad: Vec<f64> = h.matvec(alpha).iter().zip(lin).map(|(a, b)| a + b).collect();
    for _ in 0..max_sweeps {
        let mut max_delta: f64 = 0.0;
        let mut max_alpha: f64 = 0.0;
        for i in 0..d {
            let hii = h[(i, i)];
            let partial = -(grad[i] - hii * alpha[i]);
            let new = asym_soft_threshold(partial, up[i], low[i]) / hii;
            let delta = new - alpha[i];
            if delta != 0.0 {
                alpha[i] = new;
                for (g, &hv) in grad.iter_mut().zip(h.row(i)) {
                    *g += hv * delta;
                }
            }
            max_delta = max_delta.max(delta.abs());
            max_alpha = max_alpha.max(new.abs());
        }
        if max_delta <= tol * max_alpha.max(f64::MIN_POSITIVE) || max_delta == 0.0 {
            break;
        }
    }
    Ok(())
}

/// Minimizes `½αᵀHα + linᵀα + Σ_j up_j·max(α_j, 0) + low_j·max(-α_j, 0)` by
/// cyclic coordinate descent (at most `iters` sweeps).
pub fn solve_penalized_column(
    h: &SpdMatrix,
    lin: &[f64],
    up: &[f64],
    low: &[f64],
    alpha_init: &[f64],
    iters: usize,
) -> Result<Vec<f64>> {
    let d = h.dim();
    for (name, len) in [
        ("lin", lin.len()),
        ("up", up.len()),
        ("low", low.len()),
        ("alpha_init", alpha_init.len()),
    ] {
        if len != d {
            return Err(Error::DimensionMismatch(format!(
                "{name} has length {len}, expected {d}"
            )));
        }
    }
    let mut alpha = alpha_init.to_vec();
    column_descent(h.as_matrix(), lin, up, low, &mut alpha, iters, COLUMN_TOL)?;
    Ok(alpha)
}

const COLUMN_TOL: f64 = 1e-8;
const COLUMN_MAX_SWEEPS: usize = 1000;

/// `diag(1 / (S_kk + λ₂))`
pub fn initial_theta(s: &DenseMatrix, lambda2: f64) -> Result<SpdMatrix> {
    let diag: Vec<f64> = s.diagonal().iter().map(|v| 1.0 / (v + lambda2)).collect();
    if diag.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::NotPositiveDefinite(
            "empirical matrix has a non-positive diagonal entry".into(),
        ));
    }
    Ok(SpdMatrix::new_unchecked(DenseMatrix::from_diagonal(&diag)))
}

/// Result of a block coordinate descent run.
#[derive(Debug, Clone)]
pub struct ThetaSolution {
    pub theta: SpdMatrix,
    /// `tr(SΘ) - log det Θ + penalty` after each sweep, initial value first.
    pub trace: Vec<f64>,
    pub sweeps: usize,
}

fn penalized_likelihood(s: &DenseMatrix, theta: &DenseMatrix, chol: &Cholesky, pen: &AsymPenalty) -> f64 {
    s.frobenius_dot(theta) - chol.log_det() + pen.value(theta)
}

/// Block coordinate descent on `tr(SΘ) - log det Θ + AsymPenalty(Θ)`.
pub fn glasso_bcd(
    s: &DenseMatrix,
    penalty: &AsymPenalty,
    theta_init: &SpdMatrix,
    tol: f64,
    max_sweeps: usize,
) -> Result<ThetaSolution> {
    let q = s.rows();
    if !s.is_square() || penalty.dim() != q || theta_init.dim() != q {
        return Err(Error::DimensionMismatch(format!(
            "S is {}x{}, penalty {}, initial Theta {}",
            s.rows(),
            s.cols(),
            penalty.dim(),
            theta_init.dim()
        )));
    }
    if let Some(k) = (0..q).find(|&k| !(s[(k, k)] > 0.0)) {
        return Err(Error::NotPositiveDefinite(format!(
            "S_{k}{k} = {} is not positive",
            s[(k, k)]
        )));
    }
    let mut theta = theta_init.as_matrix().clone();
    let chol = Cholesky::factor(&theta)?;
    let mut w = chol.inverse();
    let mut trace = vec![penalized_likelihood(s, &theta, &chol, penalty)];
    if q == 1 {
        let theta = DenseMatrix::from_diagonal(&[1.0 / s[(0, 0)]]);
        let chol = Cholesky::factor(&theta)?;
        trace.push(penalized_likelihood(s, &theta, &chol, penalty));
        return Ok(ThetaSolution {
            theta: SpdMatrix::new_unchecked(theta),
            trace,
            sweeps: 1,
        });
    }

    let d = q - 1;
    let mut idx = Vec::with_capacity(d);
    let mut a = DenseMatrix::zeros(d, d);
    let mut h = DenseMatrix::zeros(d, d);
    let mut sweeps = 0;
    for _ in 0..max_sweeps {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..q {
            idx.clear();
            idx.extend((0..q).filter(|&i| i != j));
            let wjj = w[(j, j)];
            // A = Θ_11⁻¹ = W_11 - w_12 w_12ᵀ / w_22
            for (r, &i) in idx.iter().enumerate() {
                for (c, &k) in idx.iter().enumerate() {
                    a[(r, c)] = w[(i, k)] - w[(i, j)] * w[(k, j)] / wjj;
                }
            }
            let sjj = s[(j, j)];
            for (hv, &av) in h.as_mut_slice().iter_mut().zip(a.as_slice()) {
                *hv = sjj * av;
            }
            let lin: Vec<f64> = idx.iter().map(|&i| s[(i, j)]).collect();
            let up: Vec<f64> = idx.iter().map(|&i| penalty.up[(i, j)]).collect();
            let low: Vec<f64> = idx.iter().map(|&i| penalty.low[(i, j)]).collect();
            let mut alpha: Vec<f64> = idx.iter().map(|&i| theta[(i, j)]).collect();
            let before = alpha.clone();
            column_descent(&h, &lin, &up, &low, &mut alpha, COLUMN_MAX_SWEEPS, COLUMN_TOL)?;

            let a_alpha = a.matvec(&alpha);
            let quad: f64 = alpha.iter().zip(&a_alpha).map(|(x, y)| x * y).sum();
            let new_diag = 1.0 / sjj + quad;
            max_change = max_change.max((new_diag - theta[(j, j)]).abs());
            for (r, &i) in idx.iter().enumerate() {
                max_change = max_change.max((alpha[r] - before[r]).abs());
                theta[(i, j)] = alpha[r];
                theta[(j, i)] = alpha[r];
            }
            theta[(j, j)] = new_diag;

            // Block inverse with Schur complement c = 1/S_jj:
            //   W_jj = S_jj, w_12 = -S_jj A α, W_11 = A + S_jj (Aα)(Aα)ᵀ
            w[(j, j)] = sjj;
            for (r, &i) in idx.iter().enumerate() {
                let v = -sjj * a_alpha[r];
                w[(i, j)] = v;
                w[(j, i)] = v;
                for (c, &k) in idx.iter().enumerate() {
                    w[(i, k)] = a[(r, c)] + sjj * a_alpha[r] * a_alpha[c];
                }
            }
        }
        let chol = Cholesky::factor(&theta)
            .map_err(|e| Error::NotPositiveDefinite(format!("Theta left the positive-definite cone ({e})")))?;
        w = chol.inverse();
        let obj = penalized_likelihood(s, &theta, &chol, penalty);
        if !obj.is_finite() {
            return Err(Error::NotPositiveDefinite(
                "objective diverged; penalty too small for S".into(),
            ));
        }
        trace.push(obj);
        if max_change <= tol * theta.max_abs().max(1.0) {
            break;
        }
    }
    Ok(ThetaSolution {
        theta: SpdMatrix::new_unchecked(theta),
        trace,
        sweeps,
    })
}

/// Minimizes `h(Θ) + γ GFL(B, -Θ)` over Θ for fixed `B`.
pub fn solve_theta_subproblem(
    data: &Dataset,
    b: &DenseMatrix,
    theta_init: &SpdMatrix,
    hp: &Hyperparams,
) -> Result<SpdMatrix> {
    data.check_coefficients(b)?;
    data.check_precision(theta_init)?;
    let s = data.output_gram();
    let penalty = fusion_weights(b, hp);
    Ok(glasso_bcd(&s, &penalty, theta_init, hp.theta_tol, hp.theta_max_sweeps)?.theta)
}
