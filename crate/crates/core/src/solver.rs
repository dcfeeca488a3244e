//! Alternating minimization over `B` and `Θ`.

use crate::bstep::{solve_b_with, LeastSquares};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SpdMatrix};
use crate::model::{eval_solver_objective, Dataset, Hyperparams, ModelEstimate};
use crate::theta_step::{fusion_weights, glasso_bcd, initial_theta};

/// Fits the joint model. `tau = 0` gives ICLasso.
///
/// Without `init`, starts from `B = 0` and `Θ = diag(1/(S_kk + λ₂))`.
pub fn fit(data: &Dataset, hp: &Hyperparams, init: Option<&ModelEstimate>) -> Result<ModelEstimate> {
    hp.validate()?;
    let s = data.output_gram();
    let (mut b, mut theta) = match init {
        Some(est) => {
            data.check_coefficients(&est.b)?;
            data.check_precision(&est.theta)?;
            (est.b.clone(), est.theta.clone())
        }
        None => (DenseMatrix::zeros(data.p(), data.q()), initial_theta(&s, hp.lambda2)?),
    };
    let ls = LeastSquares::new(data);
    let b_step =
        |b: &DenseMatrix, theta: &SpdMatrix| -> Result<DenseMatrix> { Ok(solve_b_with(&ls, data, theta, b, hp)?.b) };
    let theta_step = |b: &DenseMatrix, theta: &SpdMatrix| -> Result<SpdMatrix> {
        Ok(glasso_bcd(&s, &fusion_weights(b, hp), theta, hp.theta_tol, hp.theta_max_sweeps)?.theta)
    };

    let mut prev = eval_solver_objective(data, &b, &theta, hp)?;
    let mut trace = Vec::new();
    let mut converged = false;
    for iteration in 1..=hp.outer_max_iter {
        if hp.b_step_first {
            b = b_step(&b, &theta)?;
            theta = theta_step(&b, &theta)?;
        } else {
            theta = theta_step(&b, &theta)?;
            b = b_step(&b, &theta)?;
        }
        let obj = eval_solver_objective(data, &b, &theta, hp)?;
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
        theta,
        objective_trace: trace,
        converged,
    })
}

/// Warm-started fits along a grid sorted by decreasing `lambda1`.
///
/// Each point starts from the last successful estimate; failures are
/// reported in place and do not stop the path.
pub fn fit_path(data: &Dataset, grid: &[Hyperparams]) -> Result<Vec<Result<ModelEstimate>>> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("hyperparameter path is empty".into()));
    }
    if grid.windows(2).any(|w| w[1].lambda1 > w[0].lambda1) {
        return Err(Error::InvalidGrid("path must be sorted by decreasing lambda1".into()));
    }
    let mut out = Vec::with_capacity(grid.len());
    let mut warm: Option<ModelEstimate> = None;
    for hp in grid {
        let res = fit(data, hp, warm.as_ref());
        if let Ok(est) = &res {
            warm = Some(est.clone());
        }
        out.push(res);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Cholesky;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    fn random_matrix(rows: usize, cols: usize, seed: &mut u64) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| lcg(seed))
    }

    /// Y = X B + noise with a sparse B and correlated outputs.
    fn instance(n: usize, p: usize, q: usize, seed: &mut u64) -> Dataset {
        let x = random_matrix(n, p, seed);
        let b = DenseMatrix::from_fn(p, q, |j, k| if j % q == k || (j + 1) % q == k { 0.8 } else { 0.0 });
        let mut y = x.matmul(&b).unwrap();
        let noise = random_matrix(n, q, seed);
        y.axpy(0.5, &noise);
        Dataset::new(x, y).unwrap()
    }

    fn tight() -> Hyperparams {
        Hyperparams {
            inner_tol: 1e-14,
            inner_max_iter: 20_000,
            theta_tol: 1e-12,
            outer_tol: 1e-12,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn unpenalized_fit_decouples() {
        let mut seed = 1;
        let data = instance(80, 3, 3, &mut seed);
        let est = fit(&data, &tight(), None).unwrap();
        let xtx = data.x().tr_matmul(data.x()).unwrap();
        let ls = Cholesky::factor(&xtx)
            .unwrap()
            .solve_matrix(&data.x().tr_matmul(data.y()).unwrap())
            .unwrap();
        assert!(est.b.sub(&ls).unwrap().max_abs() < 1e-3);
        let sinv = SpdMatrix::new(data.output_gram()).unwrap().inverse().unwrap();
        assert!(est.theta.sub(&sinv).unwrap().max_abs() < 1e-3);
    }

    #[test]
    fn trace_is_monotone_with_all_penalties() {
        let mut seed = 2;
        let data = instance(40, 10, 10, &mut seed);
        let hp = Hyperparams::new(0.1, 0.1, 0.05, 0.01).unwrap();
        let est = fit(&data, &hp, None).unwrap();
        assert!(est.converged);
        let first = eval_solver_objective(
            &data,
            &DenseMatrix::zeros(10, 10),
            &initial_theta(&data.output_gram(), 0.1).unwrap(),
            &hp,
        )
        .unwrap();
        assert!(est.objective_trace[0] <= first + 1e-8);
        for w in est.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-8, "{:?}", est.objective_trace);
        }
    }

    #[test]
    fn iclasso_is_tau_zero() {
        let mut seed = 3;
        let data = instance(30, 6, 5, &mut seed);
        let hp = Hyperparams::new(0.1, 0.1, 0.05, 0.02).unwrap();
        let a = fit(&data, &hp.without_tau(), None).unwrap();
        let b = fit(&data, &Hyperparams { tau: 0.0, ..hp }, None).unwrap();
        assert_eq!(a.objective_trace, b.objective_trace);
        assert_eq!(a, b);
    }

    #[test]
    fn deterministic() {
        let mut seed = 4;
        let data = instance(30, 6, 5, &mut seed);
        let hp = Hyperparams::new(0.1, 0.1, 0.05, 0.01).unwrap();
        assert_eq!(fit(&data, &hp, None).unwrap(), fit(&data, &hp, None).unwrap());
    }

    #[test]
    fn permutation_equivariance() {
        let mut seed = 5;
        let data = instance(40, 6, 5, &mut seed);
        let hp = Hyperparams {
            pa_grouping: crate::bstep::PaGrouping::PerComponent,
            ..Hyperparams::new(0.1, 0.1, 0.05, 0.01).unwrap()
        };
        let perm = [3, 0, 4, 1, 2];
        let base = fit(&data, &hp, None).unwrap();
        let permuted_data = Dataset::new(data.x().clone(), data.y().permute_cols(&perm)).unwrap();
        let permuted = fit(&permuted_data, &hp, None).unwrap();
        assert!(permuted.b.sub(&base.b.permute_cols(&perm)).unwrap().max_abs() < 1e-6);
        assert!(
            permuted
                .theta
                .sub(&base.theta.permute_symmetric(&perm))
                .unwrap()
                .max_abs()
                < 1e-6
        );
    }

    #[test]
    fn path_warm_starts() {
        let mut seed = 6;
        let data = instance(40, 8, 6, &mut seed);
        let hp = Hyperparams::new(0.1, 0.1, 0.05, 0.01).unwrap();
        let single = fit_path(&data, std::slice::from_ref(&hp)).unwrap();
        assert_eq!(single[0].as_ref().unwrap(), &fit(&data, &hp, None).unwrap());

        let twice = fit_path(&data, &[hp.clone(), hp.clone()]).unwrap();
        assert!(twice[1].as_ref().unwrap().outer_iterations() <= 2);

        let lambdas = [0.4, 0.2, 0.1, 0.05, 0.025];
        let grid: Vec<Hyperparams> = lambdas
            .iter()
            .map(|&l| Hyperparams::with_ratio(l, 0.1, 0.05, 10.0).unwrap())
            .collect();
        let nnz: Vec<usize> = fit_path(&data, &grid)
            .unwrap()
            .into_iter()
            .map(|r| r.unwrap().b.count_nonzero())
            .collect();
        for w in nnz.windows(2) {
            assert!(w[1] + 1 >= w[0], "{nnz:?}");
        }
        assert!(fit_path(&data, &[grid[4].clone(), grid[0].clone()]).is_err());
        assert!(fit_path(&data, &[]).is_err());
    }
}
