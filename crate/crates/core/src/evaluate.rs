//! Support recovery scores, prediction error, validation splits and
//! hyperparameter sweeps.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::FusionGraph;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::model::{Dataset, Hyperparams};
use crate::models::{fit_model, FittedModel, ModelKind};

/// Default relative support threshold.
pub const DEFAULT_THRESHOLD: f64 = 1e-4;

/// Default λ₁/τ ratio.
pub const DEFAULT_RATIO: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub threshold: f64,
    pub nnz_estimated: usize,
    pub nnz_true: usize,
}

impl SupportMetrics {
    fn from_counts(tp: usize, fp: usize, fn_: usize, threshold: f64) -> Self {
        let nnz_estimated = tp + fp;
        let nnz_true = tp + fn_;
        let precision = if nnz_estimated == 0 {
            if nnz_true == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            tp as f64 / nnz_estimated as f64
        };
        let recall = if nnz_true == 0 {
            1.0
        } else {
            tp as f64 / nnz_true as f64
        };
        Self {
            precision,
            recall,
            f1: f1_score(precision, recall),
            threshold,
            nnz_estimated,
            nnz_true,
        }
    }
}

/// `2PR / (P + R)`, or 0 when both vanish.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn support_counts(
    est: &DenseMatrix,
    truth: &DenseMatrix,
    threshold: f64,
    skip_diagonal: bool,
) -> Result<SupportMetrics> {
    if est.shape() != truth.shape() {
        return Err(Error::ShapeMismatch(format!(
            "estimate is {}x{}, truth is {}x{}",
            est.rows(),
            est.cols(),
            truth.rows(),
            truth.cols()
        )));
    }
    let cut_est = threshold * est.max_abs();
    let cut_true = threshold * truth.max_abs();
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for i in 0..est.rows() {
        for j in 0..est.cols() {
            if skip_diagonal && i == j {
                continue;
            }
            match (est[(i, j)].abs() > cut_est, truth[(i, j)].abs() > cut_true) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
    }
    Ok(SupportMetrics::from_counts(tp, fp, fn_, threshold))
}

/// Support recovery of `est` against `truth`.
///
/// An entry counts as nonzero when its magnitude exceeds `threshold` times
/// the largest magnitude of its own matrix.
pub fn support_f1(est: &DenseMatrix, truth: &DenseMatrix, threshold: f64) -> Result<SupportMetrics> {
    support_counts(est, truth, threshold, false)
}

/// As [`support_f1`], scoring off-diagonal entries only. Used for precision
/// matrices, whose diagonal is always nonzero.
pub fn support_f1_offdiag(est: &DenseMatrix, truth: &DenseMatrix, threshold: f64) -> Result<SupportMetrics> {
    if !est.is_square() {
        return Err(Error::ShapeMismatch(
            "off-diagonal scoring needs square matrices".into(),
        ));
    }
    support_counts(est, truth, threshold, true)
}

/// `(1/n) ||Y - XB||²_F` on `test`.
pub fn regression_error(test: &Dataset, b: &DenseMatrix) -> Result<f64> {
    if b.shape() != (test.p(), test.q()) {
        return Err(Error::ShapeMismatch(format!(
            "B is {}x{}, data needs {}x{}",
            b.rows(),
            b.cols(),
            test.p(),
            test.q()
        )));
    }
    let r = test.y().sub(&test.x().matmul(b)?)?;
    Ok(r.frobenius_sq() / test.n() as f64)
}

/// Random row-disjoint split into `(train, validation)`. Rows keep their
/// original order within each part.
pub fn holdout_split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = data.n();
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::DegenerateSplit(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::DegenerateSplit(format!(
            "fraction {train_fraction} of {n} rows leaves an empty part"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, valid) = idx.split_at_mut(n_train);
    train.sort_unstable();
    valid.sort_unstable();
    Ok((data.select_rows(train), data.select_rows(valid)))
}

/// Cartesian grid over the three penalty weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperGrid {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl HyperGrid {
    pub fn new(lambda1: Vec<f64>, lambda2: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        let grid = Self {
            lambda1,
            lambda2,
            gamma,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, axis) in [
            ("lambda1", &self.lambda1),
            ("lambda2", &self.lambda2),
            ("gamma", &self.gamma),
        ] {
            if axis.is_empty() {
                return Err(Error::InvalidGrid(format!("{name} axis is empty")));
            }
            if let Some(v) = axis.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::InvalidGrid(format!("{name} contains invalid value {v}")));
            }
        }
        Ok(())
    }

    /// Collapses the axes `kind` ignores to their first value.
    pub fn for_model(&self, kind: ModelKind) -> Self {
        let keep = |axis: &Vec<f64>, used: bool| if used { axis.clone() } else { vec![axis[0]] };
        Self {
            lambda1: self.lambda1.clone(),
            lambda2: keep(&self.lambda2, kind.uses_lambda2()),
            gamma: keep(&self.gamma, kind.uses_gamma()),
        }
    }

    /// Points in declared order: `lambda2` outermost, then `gamma`, then `lambda1`.
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.len());
        for &l2 in &self.lambda2 {
            for &g in &self.gamma {
                for &l1 in &self.lambda1 {
                    out.push((l1, l2, g));
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.lambda1.len() * self.lambda2.len() * self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub model: ModelKind,
    /// λ₁/τ for models that use τ.
    pub ratio: f64,
    pub train_fraction: f64,
    pub seed: u64,
    /// Solver controls; penalty weights are overwritten per grid point.
    pub base: Hyperparams,
    pub threshold: f64,
    pub jobs: usize,
    /// Record wall time per point. Off keeps reports reproducible byte for byte.
    pub timing: bool,
    /// Chain warm starts along decreasing `lambda1`.
    pub warm_start: bool,
    pub graph: Option<FusionGraph>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            model: ModelKind::L12glasso,
            ratio: DEFAULT_RATIO,
            train_fraction: 0.8,
            seed: 0,
            base: Hyperparams::default(),
            threshold: DEFAULT_THRESHOLD,
            jobs: 1,
            timing: false,
            warm_start: true,
            graph: None,
        }
    }
}

/// Ground truth for support scoring.
#[derive(Debug, Clone, Copy)]
pub struct TruthRef<'a> {
    pub b: &'a DenseMatrix,
    pub theta: Option<&'a DenseMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda1: f64,
    pub lambda2: f64,
    pub gamma: f64,
    pub tau: f64,
    pub validation_error: Option<f64>,
    pub nnz_b: Option<usize>,
    pub f1_b: Option<f64>,
    pub f1_theta: Option<f64>,
    pub outer_iterations: Option<usize>,
    pub wall_time_secs: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub model: ModelKind,
    pub ratio: f64,
    pub rows: Vec<SweepRow>,
    /// Index into `rows` of the smallest validation error.
    pub best: Option<usize>,
}

impl SweepReport {
    pub fn best_row(&self) -> Option<&SweepRow> {
        self.best.map(|i| &self.rows[i])
    }
}

/// Splits `data` with [`holdout_split`] and runs [`sweep_on_split`].
pub fn grid_sweep(
    data: &Dataset,
    grid: &HyperGrid,
    opts: &SweepOptions,
    truth: Option<TruthRef<'_>>,
) -> Result<SweepReport> {
    let (train, valid) = holdout_split(data, opts.train_fraction, opts.seed)?;
    sweep_on_split(&train, &valid, grid, opts, truth)
}

/// Fits every grid point on `train` and scores it on `valid`.
///
/// Points sharing `(lambda2, gamma)` form a path over `lambda1`, solved in
/// decreasing order (independent of declared order) and warm-started when
/// `opts.warm_start` is set. Rows come back in declared order; failed points
/// are recorded and skipped by the argmin, whose ties go to the first row.
pub fn sweep_on_split(
    train: &Dataset,
    valid: &Dataset,
    grid: &HyperGrid,
    opts: &SweepOptions,
    truth: Option<TruthRef<'_>>,
) -> Result<SweepReport> {
    grid.validate()?;
    if !(opts.ratio > 0.0) {
        return Err(Error::InvalidHyperparams(format!(
            "ratio must be positive, got {}",
            opts.ratio
        )));
    }
    let points = grid.points();
    // (lambda2, gamma) -> declared indices of that path
    let mut paths: BTreeMap<(u64, u64), Vec<usize>> = BTreeMap::new();
    let mut order = Vec::new();
    for (i, &(_, l2, g)) in points.iter().enumerate() {
        let key = (l2.to_bits(), g.to_bits());
        if !paths.contains_key(&key) {
            order.push(key);
        }
        paths.entry(key).or_default().push(i);
    }
    let work: Vec<Vec<usize>> = order
        .iter()
        .map(|key| {
            let mut idx = paths[key].clone();
            idx.sort_by(|&a, &b| points[b].0.total_cmp(&points[a].0).then(a.cmp(&b)));
            idx
        })
        .collect();

    let rows: Mutex<Vec<Option<SweepRow>>> = Mutex::new(vec![None; points.len()]);
    let next = AtomicUsize::new(0);
    let run_worker = || loop {
        let w = next.fetch_add(1, Ordering::SeqCst);
        if w >= work.len() {
            break;
        }
        let mut warm: Option<FittedModel> = None;
        for &i in &work[w] {
            let row = run_point(train, valid, points[i], opts, truth, &mut warm);
            rows.lock().expect("sweep worker panicked")[i] = Some(row);
        }
    };
    let jobs = opts.jobs.max(1).min(work.len());
    if jobs <= 1 {
        run_worker();
    } else {
        std::thread::scope(|s| {
            for _ in 0..jobs {
                s.spawn(run_worker);
            }
        });
    }
    let rows: Vec<SweepRow> = rows
        .into_inner()
        .expect("sweep worker panicked")
        .into_iter()
        .map(|r| r.expect("every grid point visited"))
        .collect();
    let best = argmin_first(rows.iter().map(|r| r.validation_error));
    Ok(SweepReport {
        model: opts.model,
        ratio: opts.ratio,
        rows,
        best,
    })
}

/// Index of the smallest finite value; ties go to the earliest.
pub fn argmin_first(values: impl IntoIterator<Item = Option<f64>>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if let Some(v) = v.filter(|v| v.is_finite()) {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((i, v));
            }
        }
    }
    best.map(|(i, _)| i)
}

fn point_params(opts: &SweepOptions, (l1, l2, g): (f64, f64, f64)) -> Hyperparams {
    Hyperparams {
        lambda1: l1,
        lambda2: l2,
        gamma: g,
        tau: if opts.model.uses_tau() { l1 / opts.ratio } else { 0.0 },
        ..opts.base.clone()
    }
}

fn run_point(
    train: &Dataset,
    valid: &Dataset,
    point: (f64, f64, f64),
    opts: &SweepOptions,
    truth: Option<TruthRef<'_>>,
    warm: &mut Option<FittedModel>,
) -> SweepRow {
    let hp = point_params(opts, point);
    let mut row = SweepRow {
        lambda1: hp.lambda1,
        lambda2: hp.lambda2,
        gamma: hp.gamma,
        tau: hp.tau,
        validation_error: None,
        nnz_b: None,
        f1_b: None,
        f1_theta: None,
        outer_iterations: None,
        wall_time_secs: None,
        error: None,
    };
    let start = Instant::now();
    let init = if opts.warm_start { warm.as_ref() } else { None };
    let fitted = fit_model(opts.model, train, &hp, init, opts.graph.as_ref()).and_then(|fitted| {
        let err = regression_error(valid, &fitted.b)?;
        Ok((fitted, err))
    });
    if opts.timing {
        row.wall_time_secs = Some(start.elapsed().as_secs_f64());
    }
    match fitted {
        Ok((fitted, err)) => {
            row.validation_error = Some(err);
            row.nnz_b = Some(fitted.b.count_nonzero());
            row.outer_iterations = Some(fitted.objective_trace.len());
            if let Some(t) = truth {
                row.f1_b = support_f1(&fitted.b, t.b, opts.threshold).ok().map(|m| m.f1);
                if let (Some(est), Some(true_theta)) = (&fitted.theta, t.theta) {
                    row.f1_theta = support_f1_offdiag(est, true_theta, opts.threshold).ok().map(|m| m.f1);
                }
            }
            *warm = Some(fitted);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Best validation error of a sweep for each ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioStudy {
    pub ratios: Vec<f64>,
    pub best_errors: Vec<Option<f64>>,
    pub reports: Vec<SweepReport>,
}

/// Repeats [`sweep_on_split`] for each ratio with the same split and grid.
pub fn ratio_study(
    train: &Dataset,
    valid: &Dataset,
    grid: &HyperGrid,
    ratios: &[f64],
    opts: &SweepOptions,
    truth: Option<TruthRef<'_>>,
) -> Result<RatioStudy> {
    if ratios.is_empty() {
        return Err(Error::InvalidGrid("no ratios given".into()));
    }
    let mut reports = Vec::with_capacity(ratios.len());
    for &ratio in ratios {
        let o = SweepOptions { ratio, ..opts.clone() };
        reports.push(sweep_on_split(train, valid, grid, &o, truth)?);
    }
    let best_errors = reports
        .iter()
        .map(|r| r.best_row().and_then(|row| row.validation_error))
        .collect();
    Ok(RatioStudy {
        ratios: ratios.to_vec(),
        best_errors,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    fn sparse_random(rows: usize, cols: usize, seed: &mut u64) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| {
            let v = lcg(seed);
            if v.abs() < 0.5 {
                0.0
            } else {
                v
            }
        })
    }

    fn naive_counts(est: &DenseMatrix, truth: &DenseMatrix, thr: f64) -> (usize, usize, usize) {
        let me = est.as_slice().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mt = truth.as_slice().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut c = (0, 0, 0);
        for (e, t) in est.as_slice().iter().zip(truth.as_slice()) {
            let pe = e.abs() > thr * me;
            let pt = t.abs() > thr * mt;
            if pe && pt {
                c.0 += 1;
            } else if pe {
                c.1 += 1;
            } else if pt {
                c.2 += 1;
            }
        }
        c
    }

    fn instance(n: usize, seed: &mut u64) -> (Dataset, DenseMatrix) {
        let x = DenseMatrix::from_fn(n, 6, |_, _| lcg(seed));
        let b = DenseMatrix::from_fn(6, 4, |j, k| if j == k { 1.0 } else { 0.0 });
        let mut y = x.matmul(&b).unwrap();
        y.axpy(0.3, &DenseMatrix::from_fn(n, 4, |_, _| lcg(seed)));
        (Dataset::new(x, y).unwrap(), b)
    }

    #[test]
    fn perfect_recovery() {
        let mut seed = 1;
        let t = sparse_random(5, 5, &mut seed);
        let m = support_f1(&t, &t, 1e-4).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        assert_eq!(m.nnz_true, t.count_nonzero());
    }

    #[test]
    fn half_recall() {
        let truth = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let est = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let m = support_f1(&est, &truth, 1e-4).unwrap();
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 0.5);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_supports() {
        let z = DenseMatrix::zeros(3, 3);
        let m = support_f1(&z, &z, 1e-4).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        let one = DenseMatrix::identity(3);
        let m = support_f1(&z, &one, 1e-4).unwrap();
        assert_eq!(m.f1, 0.0);
        assert!(support_f1(&z, &DenseMatrix::zeros(3, 2), 1e-4).is_err());
    }

    #[test]
    fn offdiag_ignores_diagonal() {
        let est = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 3.0]]).unwrap();
        let truth = DenseMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let m = support_f1_offdiag(&est, &truth, 1e-4).unwrap();
        assert_eq!((m.nnz_estimated, m.nnz_true), (0, 2));
        assert_eq!(m.recall, 0.0);
    }

    proptest! {
        #[test]
        fn counts_match_naive_oracle(seed in any::<u64>()) {
            let mut s = seed;
            let est = sparse_random(5, 5, &mut s);
            let truth = sparse_random(5, 5, &mut s);
            let m = support_f1(&est, &truth, 1e-4).unwrap();
            let (tp, fp, fn_) = naive_counts(&est, &truth, 1e-4);
            prop_assert_eq!(m.nnz_estimated, tp + fp);
            prop_assert_eq!(m.nnz_true, tp + fn_);
            prop_assert_eq!(m, SupportMetrics::from_counts(tp, fp, fn_, 1e-4));
            prop_assert!((0.0..=1.0).contains(&m.f1));
        }

        #[test]
        fn f1_invariant_under_joint_permutation(seed in any::<u64>()) {
            let mut s = seed;
            let est = sparse_random(5, 5, &mut s);
            let truth = sparse_random(5, 5, &mut s);
            let perm = [2, 4, 0, 1, 3];
            let a = support_f1(&est, &truth, 1e-4).unwrap();
            let b = support_f1(&est.permute_symmetric(&perm), &truth.permute_symmetric(&perm), 1e-4).unwrap();
            prop_assert_eq!(a, b);
            let a = support_f1_offdiag(&est, &truth, 1e-4).unwrap();
            let b = support_f1_offdiag(&est.permute_symmetric(&perm), &truth.permute_symmetric(&perm), 1e-4).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn f1_stays_zero_once_true_positives_vanish(seed in any::<u64>()) {
            let mut s = seed;
            let est = sparse_random(5, 5, &mut s);
            let truth = sparse_random(5, 5, &mut s);
            let mut gone = false;
            for i in 0..200 {
                let thr = i as f64 * 0.005;
                let f = support_f1(&est, &truth, thr).unwrap().f1;
                if gone {
                    prop_assert_eq!(f, 0.0);
                }
                gone |= f == 0.0;
            }
        }
    }

    #[test]
    fn regression_error_cases() {
        let mut seed = 2;
        let (data, b) = instance(20, &mut seed);
        let noiseless = Dataset::new(data.x().clone(), data.x().matmul(&b).unwrap()).unwrap();
        assert_eq!(regression_error(&noiseless, &b).unwrap(), 0.0);
        let zero = regression_error(&data, &DenseMatrix::zeros(6, 4)).unwrap();
        assert!((zero - data.y().frobenius_sq() / 20.0).abs() < 1e-14);

        let guess = DenseMatrix::from_fn(6, 4, |_, _| lcg(&mut seed));
        let mut naive = 0.0;
        for i in 0..20 {
            for k in 0..4 {
                let mut pred = 0.0;
                for j in 0..6 {
                    pred += data.x()[(i, j)] * guess[(j, k)];
                }
                naive += (data.y()[(i, k)] - pred).powi(2);
            }
        }
        assert!((regression_error(&data, &guess).unwrap() - naive / 20.0).abs() < 1e-12);
        assert!(regression_error(&data, &DenseMatrix::zeros(4, 4)).is_err());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let mut seed = 3;
        let (data, _) = instance(632, &mut seed);
        let (tr, va) = holdout_split(&data, 480.0 / 632.0, 1).unwrap();
        assert_eq!((tr.n(), va.n()), (480, 152));
        let (small, _) = instance(10, &mut seed);
        let (a, b) = holdout_split(&small, 0.5, 4).unwrap();
        assert_eq!((a.n(), b.n()), (5, 5));
        assert_eq!(holdout_split(&small, 0.5, 4).unwrap(), (a.clone(), b.clone()));
        // Disjoint, and every original row lands in exactly one part.
        let mut rows: Vec<Vec<f64>> = (0..5)
            .map(|i| a.x().row(i).to_vec())
            .chain((0..5).map(|i| b.x().row(i).to_vec()))
            .collect();
        let mut original: Vec<Vec<f64>> = (0..10).map(|i| small.x().row(i).to_vec()).collect();
        rows.sort_by(|u, v| u.partial_cmp(v).unwrap());
        original.sort_by(|u, v| u.partial_cmp(v).unwrap());
        assert_eq!(rows, original);
        assert!(matches!(holdout_split(&small, 0.01, 0), Err(Error::DegenerateSplit(_))));
        assert!(holdout_split(&small, 1.0, 0).is_err());
    }

    #[test]
    fn split_preserves_order() {
        let x = DenseMatrix::from_fn(20, 1, |i, _| i as f64);
        let data = Dataset::new(x.clone(), x).unwrap();
        let (a, b) = holdout_split(&data, 0.6, 9).unwrap();
        for part in [a, b] {
            let col = part.x().column(0);
            assert!(col.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn single_point_sweep() {
        let mut seed = 4;
        let (data, b) = instance(60, &mut seed);
        let grid = HyperGrid::new(vec![0.05], vec![0.1], vec![0.01]).unwrap();
        let truth = TruthRef { b: &b, theta: None };
        let r = grid_sweep(&data, &grid, &SweepOptions::default(), Some(truth)).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.best, Some(0));
        assert!((r.rows[0].tau - 0.005).abs() < 1e-15);
        assert!(r.rows[0].f1_b.is_some());
        assert!(r.rows[0].wall_time_secs.is_none());
    }

    #[test]
    fn argmin_picks_smaller_error_and_first_tie() {
        let mut seed = 5;
        let (data, _) = instance(60, &mut seed);
        let grid = HyperGrid::new(vec![5.0, 0.02], vec![0.1], vec![0.0]).unwrap();
        let opts = SweepOptions {
            model: ModelKind::Lasso,
            ..SweepOptions::default()
        };
        let r = grid_sweep(&data, &grid, &opts, None).unwrap();
        assert!(r.rows[1].validation_error < r.rows[0].validation_error);
        assert_eq!(r.best, Some(1));
        assert_eq!(argmin_first([Some(1.0), None, Some(0.5), Some(0.5)]), Some(2));
        assert_eq!(argmin_first([None, Some(f64::NAN)]), None);
    }

    #[test]
    fn argmin_invariant_to_axis_order() {
        let mut seed = 6;
        let (data, _) = instance(60, &mut seed);
        let opts = SweepOptions {
            base: Hyperparams {
                inner_tol: 1e-9,
                ..Hyperparams::default()
            },
            ..SweepOptions::default()
        };
        let g1 = HyperGrid::new(vec![0.2, 0.05, 0.01], vec![0.05, 0.2], vec![0.0, 0.02]).unwrap();
        let g2 = HyperGrid::new(vec![0.01, 0.2, 0.05], vec![0.2, 0.05], vec![0.02, 0.0]).unwrap();
        let r1 = grid_sweep(&data, &g1, &opts, None).unwrap();
        let r2 = grid_sweep(&data, &g2, &opts, None).unwrap();
        let b1 = r1.best_row().unwrap();
        let b2 = r2.best_row().unwrap();
        assert_eq!(b1.validation_error, b2.validation_error);
        // Same point set, same fits; ties resolve to the earliest declared row.
        for r in [&r1, &r2] {
            let min = r.best_row().unwrap().validation_error;
            let first = r.rows.iter().position(|row| row.validation_error == min);
            assert_eq!(first, r.best);
        }
        let key = |row: &SweepRow| (row.lambda1.to_bits(), row.lambda2.to_bits(), row.gamma.to_bits());
        let mut a: Vec<_> = r1.rows.iter().map(|row| (key(row), row.validation_error)).collect();
        let mut b: Vec<_> = r2.rows.iter().map(|row| (key(row), row.validation_error)).collect();
        a.sort_by_key(|x| x.0);
        b.sort_by_key(|x| x.0);
        assert_eq!(a, b);
    }

    #[test]
    fn parallel_matches_serial() {
        let mut seed = 7;
        let (data, _) = instance(60, &mut seed);
        let grid = HyperGrid::new(vec![0.1, 0.02], vec![0.05, 0.2], vec![0.0, 0.02]).unwrap();
        let serial = grid_sweep(&data, &grid, &SweepOptions::default(), None).unwrap();
        let parallel = grid_sweep(
            &data,
            &grid,
            &SweepOptions {
                jobs: 3,
                ..SweepOptions::default()
            },
            None,
        )
        .unwrap();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn failures_are_recorded() {
        let mut seed = 8;
        let (data, _) = instance(40, &mut seed);
        // ratio < 1 makes tau exceed lambda1 for every point
        let grid = HyperGrid::new(vec![0.1, 0.05], vec![0.1], vec![0.0]).unwrap();
        let opts = SweepOptions {
            ratio: 0.5,
            ..SweepOptions::default()
        };
        let r = grid_sweep(&data, &grid, &opts, None).unwrap();
        assert!(r.rows.iter().all(|row| row.error.is_some()));
        assert_eq!(r.best, None);
        assert!(HyperGrid::new(vec![], vec![0.1], vec![0.0]).is_err());
    }

    #[test]
    fn model_axes_collapse() {
        let grid = HyperGrid::new(vec![0.1, 0.05], vec![0.1, 0.2], vec![0.0, 0.1]).unwrap();
        assert_eq!(grid.for_model(ModelKind::Lasso).len(), 2);
        assert_eq!(grid.for_model(ModelKind::Mrce).len(), 4);
        assert_eq!(grid.for_model(ModelKind::Gflasso).len(), 4);
        assert_eq!(grid.for_model(ModelKind::L12glasso).len(), 8);
    }

    #[test]
    fn ratio_study_shape() {
        let mut seed = 9;
        let (data, _) = instance(60, &mut seed);
        let (tr, va) = holdout_split(&data, 0.8, 0).unwrap();
        let grid = HyperGrid::new(vec![0.1, 0.03], vec![0.1], vec![0.01]).unwrap();
        let s = ratio_study(&tr, &va, &grid, &[1.0, 10.0], &SweepOptions::default(), None).unwrap();
        assert_eq!(s.best_errors.len(), 2);
        assert!(s.best_errors.iter().all(|e| e.is_some()));
        assert!((s.reports[1].rows[0].tau - 0.01).abs() < 1e-15);
    }
}
