//! Coefficient subproblem: `g₁₂(B) + γ GFL(B, -Θ)` for fixed Θ, solved by
//! proximal-average proximal gradient with backtracking on the true objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix, SpdMatrix};
use crate::model::{Dataset, Hyperparams};
use crate::prox::{fused_l1_pair_prox, soft_threshold};

/// Step sizes below this are treated as numerically zero.
pub const STEP_FLOOR: f64 = 1e-12;

/// Rows whose ℓ₂ norm falls below this are snapped to exactly zero.
pub const ZERO_ROW_NORM: f64 = 1e-12;

/// How the fusion terms are split into proximal-average blocks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaGrouping {
    /// Column-disjoint pairs share a block, and every block carries the full
    /// ℓ₁ term, so each block prox is exact and keeps exact zeros.
    #[default]
    Matching,
    /// One block for ℓ₁ plus one block per fusion pair.
    PerComponent,
}

/// One `weight · ||β_·k + sign · β_·m||₁` term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionComponent {
    pub k: usize,
    pub m: usize,
    pub sign: f64,
    pub weight: f64,
}

/// `l1_weight · ||B||₁ + Σ components`. Components within a block never share
/// a column.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxBlock {
    pub l1_weight: f64,
    pub components: Vec<FusionComponent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxDecomposition {
    pub l1_weight: f64,
    pub blocks: Vec<ProxBlock>,
    pub alphas: Vec<f64>,
}

impl ProxDecomposition {
    pub fn components(&self) -> impl Iterator<Item = &FusionComponent> {
        self.blocks.iter().flat_map(|b| b.components.iter())
    }

    pub fn num_components(&self) -> usize {
        self.blocks.iter().map(|b| b.components.len()).sum()
    }

    /// `λ₁||B||₁ + Σ_c w_c ||β_·k + s β_·m||₁`
    pub fn penalty(&self, b: &DenseMatrix) -> f64 {
        self.l1_weight * b.l1_norm() + fusion_penalty(b, self.components())
    }
}

fn fusion_penalty<'a>(b: &DenseMatrix, comps: impl Iterator<Item = &'a FusionComponent>) -> f64 {
    comps
        .map(|c| {
            let fused: f64 = (0..b.rows()).map(|j| (b[(j, c.k)] + c.sign * b[(j, c.m)]).abs()).sum();
            c.weight * fused
        })
        .sum()
}

/// Fusion terms of `γ GFL(B, -Θ)`, one per unordered pair with `θ_km ≠ 0`.
/// Both orderings of a pair appear in the ordered-pair sum, so the weight is
/// `γ (|θ_km| + |θ_mk|)`.
pub fn fusion_components(coupling: &DenseMatrix, gamma: f64) -> Vec<FusionComponent> {
    let q = coupling.rows();
    let mut out = Vec::new();
    if gamma == 0.0 {
        return out;
    }
    for k in 0..q {
        for m in (k + 1)..q {
            let t = coupling[(k, m)] + coupling[(m, k)];
            let weight = gamma * (coupling[(k, m)].abs() + coupling[(m, k)].abs());
            if t == 0.0 || weight == 0.0 {
                continue;
            }
            out.push(FusionComponent {
                k,
                m,
                sign: t.signum(),
                weight,
            });
        }
    }
    out
}

/// Splits `λ₁||B||₁ + γ GFL(B, -Θ)` into proximal-average blocks with uniform
/// weights.
pub fn build_prox_decomposition(coupling: &DenseMatrix, hp: &Hyperparams) -> ProxDecomposition {
    let comps = fusion_components(coupling, hp.gamma);
    let blocks = match hp.pa_grouping {
        PaGrouping::PerComponent => {
            let mut blocks = vec![ProxBlock {
                l1_weight: hp.lambda1,
                components: vec![],
            }];
            blocks.extend(comps.into_iter().map(|c| ProxBlock {
                l1_weight: 0.0,
                components: vec![c],
            }));
            blocks
        }
        PaGrouping::Matching => {
            let mut groups: Vec<(Vec<bool>, Vec<FusionComponent>)> = Vec::new();
            let q = coupling.rows();
            for c in comps {
                match groups.iter_mut().find(|(used, _)| !used[c.k] && !used[c.m]) {
                    Some((used, members)) => {
                        used[c.k] = true;
                        used[c.m] = true;
                        members.push(c);
                    }
                    None => {
                        let mut used = vec![false; q];
                        used[c.k] = true;
                        used[c.m] = true;
                        groups.push((used, vec![c]));
                    }
                }
            }
            if groups.is_empty() {
                vec![ProxBlock {
                    l1_weight: hp.lambda1,
                    components: vec![],
                }]
            } else {
                let share = hp.lambda1 / groups.len() as f64;
                groups
                    .into_iter()
                    .map(|(_, components)| ProxBlock {
                        l1_weight: share,
                        components,
                    })
                    .collect()
            }
        }
    };
    let alphas = vec![1.0 / blocks.len() as f64; blocks.len()];
    ProxDecomposition {
        l1_weight: hp.lambda1,
        blocks,
        alphas,
    }
}

/// `Σ_i α_i prox_{(ν/α_i) g_i}(Z)`.
pub fn proximal_average_step(z: &DenseMatrix, decomp: &ProxDecomposition, nu: f64) -> DenseMatrix {
    // Every block soft-thresholds the columns it does not fuse, so start from
    // the weighted soft-threshold of all entries, grouped by threshold.
    let mut levels: Vec<(f64, f64)> = Vec::new();
    for (block, &alpha) in decomp.blocks.iter().zip(&decomp.alphas) {
        let t = nu * block.l1_weight / alpha;
        match levels.iter_mut().find(|(lt, _)| *lt == t) {
            Some((_, a)) => *a += alpha,
            None => levels.push((t, alpha)),
        }
    }
    let mut out = z.map(|v| levels.iter().map(|&(t, a)| a * soft_threshold(v, t)).sum());

    for (block, &alpha) in decomp.blocks.iter().zip(&decomp.alphas) {
        let t = nu * block.l1_weight / alpha;
        for c in &block.components {
            let w = nu * c.weight / alpha;
            for j in 0..z.rows() {
                let (za, zb) = (z[(j, c.k)], z[(j, c.m)]);
                let (a, b) = fused_l1_pair_prox(za, zb, c.sign, w, t);
                out[(j, c.k)] += alpha * (a - soft_threshold(za, t));
                out[(j, c.m)] += alpha * (b - soft_threshold(zb, t));
            }
        }
    }
    out
}

fn row_norms(b: &DenseMatrix) -> Vec<f64> {
    (0..b.rows()).map(|i| dot(b.row(i), b.row(i)).sqrt()).collect()
}

/// `-τ Σ B` with the zero-row subgradient convention, added into `grad`.
fn add_l21_gradient(grad: &mut DenseMatrix, b: &DenseMatrix, tau: f64) {
    if tau == 0.0 {
        return;
    }
    for (i, norm) in row_norms(b).into_iter().enumerate() {
        if norm == 0.0 {
            continue;
        }
        let scale = tau / norm;
        for (g, &v) in grad.row_mut(i).iter_mut().zip(b.row(i)) {
            *g -= scale * v;
        }
    }
}

/// `(2/n) Xᵀ(XB - Y) - τ Σ B`, with `Σ_ii · row_i := 0` for zero rows.
pub fn b_smooth_gradient(data: &Dataset, b: &DenseMatrix, hp: &Hyperparams) -> Result<DenseMatrix> {
    data.check_coefficients(b)?;
    let resid = data.x().matmul(b)?.sub(data.y())?;
    let mut grad = data.x().tr_matmul(&resid)?.scale(2.0 / data.n() as f64);
    add_l21_gradient(&mut grad, b, hp.tau);
    Ok(grad)
}

/// Cached normal-equation pieces of `(1/n)||Y - XB||²_F`.
#[derive(Debug, Clone)]
pub(crate) struct LeastSquares {
    pub xtx: DenseMatrix,
    pub xty: DenseMatrix,
    pub yty: DenseMatrix,
    pub n: f64,
}

impl LeastSquares {
    pub fn new(data: &Dataset) -> Self {
        let mut xtx = data.x().tr_matmul(data.x()).expect("X shares its row count");
        xtx.symmetrize();
        Self {
            xtx,
            xty: data.x().tr_matmul(data.y()).expect("dataset rows agree"),
            yty: data.y().tr_matmul(data.y()).expect("Y shares its row count"),
            n: data.n() as f64,
        }
    }

    /// `scale · n / σ_max(XᵀX)`; `scale = 0.5` is the reciprocal Lipschitz
    /// constant of the loss gradient.
    pub fn default_step(&self, scale: f64) -> f64 {
        let sigma = symmetric_spectral_radius(&self.xtx, 100);
        if sigma > 0.0 {
            scale * self.n / sigma
        } else {
            1.0
        }
    }

    /// Returns `(loss, XᵀX B)`.
    pub fn loss(&self, b: &DenseMatrix) -> (f64, DenseMatrix) {
        let g = self.xtx.matmul(b).expect("B has p rows");
        let v = (self.yty.trace() - 2.0 * self.xty.frobenius_dot(b) + g.frobenius_dot(b)) / self.n;
        (v.max(0.0), g)
    }

    /// `(2/n)(XᵀX B - XᵀY)` from the cached product.
    pub fn gradient(&self, xtxb: &DenseMatrix) -> DenseMatrix {
        let mut grad = xtxb.sub(&self.xty).expect("shapes agree");
        grad = grad.scale(2.0 / self.n);
        grad
    }
}

/// Largest eigenvalue magnitude of a symmetric matrix by power iteration,
/// inflated slightly so that step sizes derived from it stay safe.
pub(crate) fn symmetric_spectral_radius(a: &DenseMatrix, iters: usize) -> f64 {
    let n = a.rows();
    if n == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.618_034).fract()).collect();
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = a.matvec(&v);
        let norm = dot(&w, &w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm / dot(&v, &v).sqrt();
        v = w.into_iter().map(|x| x / norm).collect();
    }
    lambda * 1.01
}

/// A composite objective `smooth(B) + nonsmooth(B)` with an approximate or
/// exact prox for the nonsmooth part.
pub(crate) trait CompositeProblem {
    type Cache;
    /// Full objective value plus whatever the gradient can reuse.
    fn evaluate(&self, b: &DenseMatrix) -> (f64, Self::Cache);
    fn gradient(&self, b: &DenseMatrix, cache: &Self::Cache) -> DenseMatrix;
    fn prox(&self, z: &DenseMatrix, nu: f64) -> DenseMatrix;
}

#[derive(Debug, Clone)]
pub(crate) struct Descent {
    pub b: DenseMatrix,
    pub trace: Vec<f64>,
}

/// Monotone proximal gradient: a candidate is accepted only if it does not
/// increase the objective; otherwise the step halves. When no step down to
/// [`STEP_FLOOR`] improves a finite objective, the current point is returned.
pub(crate) fn proximal_descent<P: CompositeProblem>(
    problem: &P,
    b_init: &DenseMatrix,
    nu0: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Descent> {
    let mut b = b_init.clone();
    let (mut f, mut cache) = problem.evaluate(&b);
    if !f.is_finite() {
        return Err(Error::NonFiniteObjective { iteration: 0 });
    }
    let mut trace = vec![f];
    let mut nu = nu0;
    for _ in 0..max_iter {
        let grad = problem.gradient(&b, &cache);
        let mut saw_finite = false;
        let accepted = loop {
            let mut z = b.clone();
            z.axpy(-nu, &grad);
            let cand = problem.prox(&z, nu);
            let (fc, cc) = problem.evaluate(&cand);
            if fc.is_finite() {
                saw_finite = true;
                if fc <= f {
                    break Some((cand, fc, cc));
                }
            }
            nu *= 0.5;
            if nu < STEP_FLOOR {
                if !saw_finite {
                    return Err(Error::StepSizeUnderflow { floor: STEP_FLOOR });
                }
                break None;
            }
        };
        let Some((cand, fc, cc)) = accepted else { break };
        let rel = (f - fc) / f.abs().max(f64::MIN_POSITIVE);
        b = cand;
        f = fc;
        cache = cc;
        trace.push(f);
        if rel < tol {
            break;
        }
        nu = (2.0 * nu).min(nu0);
    }
    snap_tiny_rows(&mut b);
    Ok(Descent { b, trace })
}

pub(crate) fn snap_tiny_rows(b: &mut DenseMatrix) {
    for (i, norm) in row_norms(b).into_iter().enumerate() {
        if norm > 0.0 && norm < ZERO_ROW_NORM {
            b.row_mut(i).fill(0.0);
        }
    }
}

/// `f_Θ(B)` with Θ replaced by an arbitrary symmetric coupling matrix.
pub(crate) struct FusedRegression<'a> {
    ls: &'a LeastSquares,
    tau: f64,
    decomp: ProxDecomposition,
}

impl<'a> FusedRegression<'a> {
    pub fn new(ls: &'a LeastSquares, coupling: &DenseMatrix, hp: &Hyperparams) -> Self {
        Self {
            ls,
            tau: hp.tau,
            decomp: build_prox_decomposition(coupling, hp),
        }
    }
}

impl CompositeProblem for FusedRegression<'_> {
    type Cache = DenseMatrix;

    fn evaluate(&self, b: &DenseMatrix) -> (f64, DenseMatrix) {
        let (loss, xtxb) = self.ls.loss(b);
        let l21: f64 = if self.tau == 0.0 {
            0.0
        } else {
            row_norms(b).iter().sum()
        };
        (loss - self.tau * l21 + self.decomp.penalty(b), xtxb)
    }

    fn gradient(&self, b: &DenseMatrix, xtxb: &DenseMatrix) -> DenseMatrix {
        let mut g = self.ls.gradient(xtxb);
        add_l21_gradient(&mut g, b, self.tau);
        g
    }

    fn prox(&self, z: &DenseMatrix, nu: f64) -> DenseMatrix {
        proximal_average_step(z, &self.decomp, nu)
    }
}

/// Minimizes `g₁₂(B) + γ GFL(B, -Θ)` starting from `b_init`.
pub fn solve_b_subproblem(
    data: &Dataset,
    theta: &SpdMatrix,
    b_init: &DenseMatrix,
    hp: &Hyperparams,
) -> Result<DenseMatrix> {
    data.check_precision(theta)?;
    let ls = LeastSquares::new(data);
    Ok(solve_b_with(&ls, data, theta, b_init, hp)?.b)
}

pub(crate) fn solve_b_with(
    ls: &LeastSquares,
    data: &Dataset,
    coupling: &DenseMatrix,
    b_init: &DenseMatrix,
    hp: &Hyperparams,
) -> Result<Descent> {
    hp.validate()?;
    data.check_coefficients(b_init)?;
    let nu0 = hp.step_nu.unwrap_or_else(|| ls.default_step(hp.step_scale));
    let problem = FusedRegression::new(ls, coupling, hp);
    proximal_descent(&problem, b_init, nu0, hp.inner_tol, hp.inner_max_iter)
}
