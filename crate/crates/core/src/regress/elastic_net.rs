use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::Scaling;
use crate::error::{Error, Result};

/// `alpha` scales the whole penalty; `rho` is the L1 share. `rho = 1` is the
/// lasso and `rho = 0` is ridge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ENHyperParams {
    pub alpha: f64,
    pub rho: f64,
}

impl ENHyperParams {
    pub fn new(alpha: f64, rho: f64) -> Result<Self> {
        let h = Self { alpha, rho };
        h.validate()?;
        Ok(h)
    }

    pub fn lasso(alpha: f64) -> Self {
        Self { alpha, rho: 1.0 }
    }

    pub fn ridge(alpha: f64) -> Self {
        Self { alpha, rho: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::config(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::config(format!("rho must lie in [0, 1], got {}", self.rho)));
        }
        Ok(())
    }

    fn l1(&self) -> f64 {
        self.alpha * self.rho
    }

    fn l2(&self) -> f64 {
        self.alpha * (1.0 - self.rho)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Convergence threshold on the largest coefficient change in a full sweep.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Keep the objective after every sweep in [`ElasticNetModel::objective_trace`].
    pub record_objective: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-7, max_sweeps: 10_000, record_objective: false }
    }
}

/// A fitted linear model. Coefficients live on the scale of the matrix the
/// model was fitted on; when `scaling` is present, [`predict`](Self::predict)
/// applies it to raw inputs first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetModel {
    #[serde(flatten)]
    pub hyper: ENHyperParams,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Indices of the nonzero coefficients, ascending.
    pub selected: Vec<usize>,
    pub objective_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<Scaling>,
    #[serde(skip)]
    pub sweeps: usize,
    #[serde(skip)]
    pub converged: bool,
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

impl ElasticNetModel {
    pub fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    /// `intercept + X beta`, after applying the stored scaling to `x`.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch { expected: self.n_features(), got: x.ncols() });
        }
        let scaled;
        let x = match &self.scaling {
            Some(s) => {
                scaled = s.apply(x)?;
                scaled.view()
            }
            None => x,
        };
        let mut out = Array1::from_elem(x.nrows(), self.intercept);
        for &j in &self.selected {
            out.scaled_add(self.coefficients[j], &x.column(j));
        }
        Ok(out)
    }
}

/// `sign(z) * max(|z| - gamma, 0)`.
#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// `||y - X beta||^2 + alpha*rho*||beta||_1 + alpha*(1-rho)*||beta||^2`,
/// with `y` already centred (no intercept term).
pub fn objective(x: ArrayView2<f64>, y: ArrayView1<f64>, beta: &[f64], hyper: ENHyperParams) -> f64 {
    let fitted = x.dot(&ArrayView1::from(beta));
    let sse: f64 = y.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    sse + penalty(beta, hyper)
}

fn penalty(beta: &[f64], hyper: ENHyperParams) -> f64 {
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let l2: f64 = beta.iter().map(|b| b * b).sum();
    hyper.l1() * l1 + hyper.l2() * l2
}

pub(crate) struct CdOutcome {
    pub sweeps: usize,
    pub converged: bool,
    pub objective: f64,
    pub trace: Vec<f64>,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cyclic coordinate descent over column slices.
///
/// `y` must be centred and the columns centred; `beta` holds the warm start
/// and receives the solution. Each update is the exact minimiser along one
/// coordinate, so the objective never increases. After every full sweep that
/// has not converged, sweeps are restricted to the nonzero coordinates until
/// those settle, then a full sweep re-checks every coordinate.
///
/// Plain sweeps crawl on ill-conditioned problems and can stop on the
/// step-size rule well short of the minimum. So the first time they settle,
/// the active-set stationarity equations are solved directly (see [`polish`])
/// and a further full sweep confirms the result.
pub(crate) fn coordinate_descent(
    cols: &[&[f64]],
    y: &[f64],
    hyper: ENHyperParams,
    opts: &SolverOptions,
    beta: &mut [f64],
) -> Result<CdOutcome> {
    let col_sq: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();
    if hyper.alpha == 0.0 {
        if let Some(j) = col_sq.iter().position(|&s| s == 0.0) {
            return Err(Error::IllPosed(format!(
                "column {j} is identically zero and alpha = 0, so its coefficient is not unique"
            )));
        }
    }
    let threshold = hyper.l1() / 2.0;
    let ridge = hyper.l2();

    let mut resid = y.to_vec();
    for (col, &b) in cols.iter().zip(beta.iter()) {
        if b != 0.0 {
            for (r, x) in resid.iter_mut().zip(col.iter()) {
                *r -= x * b;
            }
        }
    }

    let update = |j: usize, beta: &mut [f64], resid: &mut [f64]| -> f64 {
        let old = beta[j];
        let new = if col_sq[j] == 0.0 {
            0.0
        } else {
            let z = dot(cols[j], resid) + col_sq[j] * old;
            // |z| at the threshold up to rounding still means exactly zero
            if z.abs() <= threshold * (1.0 + 1e-12) {
                0.0
            } else {
                soft_threshold(z, threshold) / (col_sq[j] + ridge)
            }
        };
        let delta = new - old;
        if delta != 0.0 {
            for (r, x) in resid.iter_mut().zip(cols[j].iter()) {
                *r -= x * delta;
            }
            beta[j] = new;
        }
        delta.abs()
    };

    let objective_of = |beta: &[f64], resid: &[f64]| dot(resid, resid) + penalty(beta, hyper);

    let mut trace = Vec::new();
    let mut sweeps = 0;
    let mut converged = false;
    let mut active = Vec::with_capacity(cols.len());
    let mut polished = false;
    'outer: while sweeps < opts.max_sweeps {
        let mut max_change = 0.0f64;
        for j in 0..cols.len() {
            max_change = max_change.max(update(j, beta, &mut resid));
        }
        sweeps += 1;
        if opts.record_objective {
            trace.push(objective_of(beta, &resid));
        }
        if max_change < opts.tol {
            if !polished {
                polished = true;
                if polish(cols, y, hyper, beta, &mut resid) {
                    continue;
                }
            }
            converged = true;
            break;
        }
        active.clear();
        active.extend((0..cols.len()).filter(|&j| beta[j] != 0.0));
        loop {
            if sweeps >= opts.max_sweeps {
                break 'outer;
            }
            let mut max_change = 0.0f64;
            for &j in &active {
                max_change = max_change.max(update(j, beta, &mut resid));
            }
            sweeps += 1;
            if opts.record_objective {
                trace.push(objective_of(beta, &resid));
            }
            if max_change < opts.tol {
                break;
            }
        }
    }

    if !converged {
        log::warn!("coordinate descent stopped after {sweeps} sweeps without converging");
    }
    Ok(CdOutcome { sweeps, converged, objective: objective_of(beta, &resid), trace })
}

/// Solves `(X_A'X_A + l2 I) b = X_A'y - (l1 / 2) sign(beta_A)` on the
/// current nonzero set `A`. The step is kept only if every sign survives and
/// the objective goes down; returns whether it was kept.
fn polish(cols: &[&[f64]], y: &[f64], hyper: ENHyperParams, beta: &mut [f64], resid: &mut [f64]) -> bool {
    let active: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
    if active.is_empty() {
        return false;
    }
    let m = active.len();
    let gram =
        DMatrix::from_fn(m, m, |r, c| dot(cols[active[r]], cols[active[c]]) + if r == c { hyper.l2() } else { 0.0 });
    let rhs = DVector::from_fn(m, |r, _| dot(cols[active[r]], y) - hyper.l1() / 2.0 * beta[active[r]].signum());
    let Some(chol) = gram.cholesky() else { return false };
    let sol = chol.solve(&rhs);
    if active.iter().zip(sol.iter()).any(|(&j, &b)| !b.is_finite() || b == 0.0 || b.signum() != beta[j].signum()) {
        return false;
    }

    let mut candidate = beta.to_vec();
    for (&j, &b) in active.iter().zip(sol.iter()) {
        candidate[j] = b;
    }
    let mut new_resid = y.to_vec();
    for &j in &active {
        for (r, x) in new_resid.iter_mut().zip(cols[j]) {
            *r -= x * candidate[j];
        }
    }
    let before = dot(resid, resid) + penalty(beta, hyper);
    let after = dot(&new_resid, &new_resid) + penalty(&candidate, hyper);
    if after < before {
        beta.copy_from_slice(&candidate);
        resid.copy_from_slice(&new_resid);
        true
    } else {
        false
    }
}

fn check_finite(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("predictor matrix contains NaN or infinite values".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("response contains NaN or infinite values".into()));
    }
    Ok(())
}

/// Fits the Elastic Net on a column-centred `x`; the intercept is the mean of
/// `y` and is not penalised.
pub fn fit_elastic_net(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    hyper: ENHyperParams,
    opts: &SolverOptions,
) -> Result<ElasticNetModel> {
    fit_elastic_net_warm(x, y, hyper, opts, None)
}

/// [`fit_elastic_net`] starting from `init` instead of zero.
pub fn fit_elastic_net_warm(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    hyper: ENHyperParams,
    opts: &SolverOptions,
    init: Option<&[f64]>,
) -> Result<ElasticNetModel> {
    hyper.validate()?;
    let (n, p) = x.dim();
    if n == 0 || p == 0 {
        return Err(Error::Data(format!("cannot fit a {n}x{p} problem")));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    check_finite(x, y)?;

    let intercept = y.mean().unwrap_or(0.0);
    let yc: Vec<f64> = y.iter().map(|v| v - intercept).collect();
    let columns: Vec<Vec<f64>> = x.columns().into_iter().map(|c| c.to_vec()).collect();
    let cols: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();

    let mut beta = match init {
        Some(b) if b.len() == p => b.to_vec(),
        Some(b) => return Err(Error::DimensionMismatch { expected: p, got: b.len() }),
        None => vec![0.0; p],
    };
    let out = coordinate_descent(&cols, &yc, hyper, opts, &mut beta)?;
    Ok(ElasticNetModel {
        hyper,
        intercept,
        selected: (0..p).filter(|&j| beta[j] != 0.0).collect(),
        coefficients: beta,
        objective_value: out.objective,
        scaling: None,
        sweeps: out.sweeps,
        converged: out.converged,
        objective_trace: out.trace,
    })
}

/// Standardizes `x` (statistics from these rows only), fits, and stores the
/// scaling so the model predicts from raw inputs.
pub fn fit_standardized_elastic_net(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    hyper: ENHyperParams,
    opts: &SolverOptions,
) -> Result<ElasticNetModel> {
    check_finite(x, y)?;
    let scaling = Scaling::fit(x);
    let z = scaling.apply(x)?;
    let mut model = fit_elastic_net(z.view(), y, hyper, opts)?;
    model.scaling = Some(scaling);
    Ok(model)
}

pub(crate) fn rmse(actual: &[f64], predicted: &[f64]) -> f64 {
    let mse = actual.iter().zip(predicted).map(|(a, p)| (a - p).powi(2)).sum::<f64>() / actual.len() as f64;
    mse.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    fn two_points() -> (Array2<f64>, Array1<f64>) {
        (array![[1.0], [-1.0]], array![1.0, -1.0])
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(1.0, 1.0), 0.0);
    }

    #[test]
    fn ols_limit() {
        let (x, y) = two_points();
        let m =
            fit_elastic_net(x.view(), y.view(), ENHyperParams::new(0.0, 0.5).unwrap(), &Default::default()).unwrap();
        assert_abs_diff_eq!(m.coefficients[0], 1.0, epsilon = 1e-12);
        assert_eq!(m.intercept, 0.0);
    }

    /// Brute-force 1-D minimisation of L on a fine grid around the KKT point.
    fn dense_1d_min(x: &[f64], y: &[f64], hyper: ENHyperParams) -> f64 {
        let l = |b: f64| {
            let sse: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - xi * b).powi(2)).sum();
            sse + hyper.alpha * hyper.rho * b.abs() + hyper.alpha * (1.0 - hyper.rho) * b * b
        };
        let mut best = (f64::INFINITY, 0.0);
        for i in -200_000..=200_000 {
            let b = i as f64 * 1e-5;
            let v = l(b);
            if v < best.0 {
                best = (v, b);
            }
        }
        best.1
    }

    #[test]
    fn lasso_threshold_kills_coefficient() {
        let (x, y) = two_points();
        let hyper = ENHyperParams::lasso(4.0);
        let oracle = dense_1d_min(&[1.0, -1.0], &[1.0, -1.0], hyper);
        assert_abs_diff_eq!(oracle, 0.0, epsilon = 1e-9);
        let m = fit_elastic_net(x.view(), y.view(), hyper, &Default::default()).unwrap();
        assert_eq!(m.coefficients[0], 0.0);
        assert!(m.selected.is_empty());
    }

    #[test]
    fn ridge_closed_form_single() {
        let (x, y) = two_points();
        let m = fit_elastic_net(x.view(), y.view(), ENHyperParams::ridge(2.0), &Default::default()).unwrap();
        assert_abs_diff_eq!(m.coefficients[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(dense_1d_min(&[1.0, -1.0], &[1.0, -1.0], ENHyperParams::ridge(2.0)), 0.5, epsilon = 1e-5);
    }

    #[test]
    fn zero_column_with_zero_alpha_is_ill_posed() {
        let x = array![[1.0, 0.0], [-1.0, 0.0]];
        let y = array![1.0, -1.0];
        let err = fit_elastic_net(x.view(), y.view(), ENHyperParams::ridge(0.0), &Default::default());
        assert!(matches!(err, Err(Error::IllPosed(_))));
        // with a penalty the zero column just stays at zero
        let m = fit_elastic_net(x.view(), y.view(), ENHyperParams::lasso(0.5), &Default::default()).unwrap();
        assert_eq!(m.coefficients[1], 0.0);
    }

    #[test]
    fn nan_input_is_data_error() {
        let x = array![[1.0], [f64::NAN]];
        let y = array![1.0, -1.0];
        let err = fit_elastic_net(x.view(), y.view(), ENHyperParams::ridge(1.0), &Default::default());
        assert!(matches!(err, Err(Error::Data(_))));
    }

    #[test]
    fn invalid_hyper_rejected() {
        assert!(ENHyperParams::new(-1.0, 0.5).is_err());
        assert!(ENHyperParams::new(1.0, 1.5).is_err());
    }

    #[test]
    fn predict_intercept_only_and_dimension_check() {
        let x = array![[1.0, 2.0], [-1.0, -2.0], [0.0, 0.0]];
        let y = array![3.0, 5.0, 4.0];
        let m = fit_elastic_net(x.view(), y.view(), ENHyperParams::lasso(1e6), &Default::default()).unwrap();
        assert!(m.selected.is_empty());
        let pred = m.predict(x.view()).unwrap();
        assert!(pred.iter().all(|&v| v == 4.0));
        assert!(matches!(m.predict(array![[1.0]].view()), Err(Error::DimensionMismatch { expected: 2, got: 1 })));
    }

    #[test]
    fn standardized_fit_interpolates_noiseless_full_rank() {
        // y = 2 + 3 x1 - x2 exactly, n > p, alpha = 0 -> OLS reproduces y.
        let x = array![[0.0, 1.0], [1.0, 0.5], [2.0, 3.0], [3.0, -1.0], [4.0, 2.0]];
        let y: Array1<f64> = x.rows().into_iter().map(|r| 2.0 + 3.0 * r[0] - r[1]).collect();
        let m =
            fit_standardized_elastic_net(x.view(), y.view(), ENHyperParams::ridge(0.0), &Default::default()).unwrap();
        let pred = m.predict(x.view()).unwrap();
        for (a, b) in pred.iter().zip(y.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
        // a single training row reproduces its response
        let row = x.slice(ndarray::s![2..3, ..]);
        assert_abs_diff_eq!(m.predict(row).unwrap()[0], y[2], epsilon = 1e-8);
    }

    #[test]
    fn model_json_shape() {
        let (x, y) = two_points();
        let m = fit_elastic_net(x.view(), y.view(), ENHyperParams::ridge(2.0), &Default::default()).unwrap();
        let v: serde_json::Value = serde_json::to_value(&m).unwrap();
        for key in ["alpha", "rho", "intercept", "coefficients", "selected", "objective_value"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let back: ElasticNetModel = serde_json::from_value(v).unwrap();
        assert_eq!(back.coefficients, m.coefficients);
    }
}
