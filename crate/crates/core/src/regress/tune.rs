use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::elastic_net::{coordinate_descent, rmse, ENHyperParams, SolverOptions};
use crate::data::{kfold_split, Scaling};
use crate::error::{Error, Result};

/// `count` values evenly spaced in log space over `[lo, hi]`, ascending.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| if i == count - 1 { hi } else { (a + (b - a) * i as f64 / (count - 1) as f64).exp() })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneGrid {
    /// Ascending, strictly positive.
    pub alphas: Vec<f64>,
    pub rhos: Vec<f64>,
    pub k: usize,
}

impl Default for TuneGrid {
    fn default() -> Self {
        Self { alphas: log_spaced(0.004, 50.0, 10), rhos: vec![0.1, 0.3, 0.5, 0.7, 0.9], k: 3 }
    }
}

impl TuneGrid {
    pub fn single(alpha: f64, rho: f64, k: usize) -> Self {
        Self { alphas: vec![alpha], rhos: vec![rho], k }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.rhos.is_empty() {
            return Err(Error::config("tuning grid needs at least one alpha and one rho"));
        }
        if self.alphas.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::config("grid alphas must be finite and strictly positive"));
        }
        if self.alphas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("grid alphas must be strictly ascending"));
        }
        if self.rhos.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::config("grid rhos must lie in [0, 1]"));
        }
        if self.k < 2 {
            return Err(Error::config("tuning needs at least 2 folds"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneCell {
    pub alpha: f64,
    pub rho: f64,
    pub cv_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub hyper: ENHyperParams,
    pub cv_error: f64,
    /// Every grid cell, rho-major then alpha ascending.
    pub cells: Vec<TuneCell>,
}

/// Picks (alpha, rho) by k-fold CV RMSE on raw `x`. Each training fold is
/// standardized with its own statistics. Along each rho the alphas are
/// visited in descending order with warm starts.
///
/// Ties go to the smaller rho, then the larger alpha.
pub fn tune_elastic_net(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    grid: &TuneGrid,
    seed: u64,
    opts: &SolverOptions,
) -> Result<TuneResult> {
    grid.validate()?;
    let n = x.nrows();
    if n < grid.k {
        return Err(Error::config(format!("{n} observations cannot fill {} folds", grid.k)));
    }
    let plan = kfold_split(n, grid.k, seed)?;

    // fold_errors[f][r * n_alpha + a]
    let fold_errors: Vec<Vec<f64>> = (0..grid.k)
        .into_par_iter()
        .map(|fold| {
            let train = plan.training_indices(fold);
            let valid = plan.validation_indices(fold);
            let x_train = x.select(Axis(0), &train);
            let scaling = Scaling::fit(x_train.view());
            let z_train = scaling.apply(x_train.view())?;
            let z_valid = scaling.apply(x.select(Axis(0), &valid).view())?;
            let y_train: Array1<f64> = y.select(Axis(0), &train);
            let y_valid: Vec<f64> = valid.iter().map(|&i| y[i]).collect();
            let intercept = y_train.mean().unwrap_or(0.0);
            let yc: Vec<f64> = y_train.iter().map(|v| v - intercept).collect();
            let columns: Vec<Vec<f64>> = z_train.columns().into_iter().map(|c| c.to_vec()).collect();
            let cols: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();

            let mut errors = vec![0.0; grid.rhos.len() * grid.alphas.len()];
            for (r, &rho) in grid.rhos.iter().enumerate() {
                let mut beta = vec![0.0; cols.len()];
                for (a, &alpha) in grid.alphas.iter().enumerate().rev() {
                    coordinate_descent(&cols, &yc, ENHyperParams { alpha, rho }, opts, &mut beta)?;
                    let pred = z_valid.dot(&ArrayView1::from(&beta)) + intercept;
                    errors[r * grid.alphas.len() + a] = rmse(&y_valid, pred.as_slice().unwrap());
                }
            }
            Ok(errors)
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::with_capacity(grid.rhos.len() * grid.alphas.len());
    for (r, &rho) in grid.rhos.iter().enumerate() {
        for (a, &alpha) in grid.alphas.iter().enumerate() {
            let idx = r * grid.alphas.len() + a;
            let cv_rmse = fold_errors.iter().map(|e| e[idx]).sum::<f64>() / grid.k as f64;
            cells.push(TuneCell { alpha, rho, cv_rmse });
        }
    }

    let best =
        cells.iter().copied().reduce(|best, c| if prefer(&c, &best) { c } else { best }).expect("grid is nonempty");
    Ok(TuneResult { hyper: ENHyperParams { alpha: best.alpha, rho: best.rho }, cv_error: best.cv_rmse, cells })
}

fn prefer(candidate: &TuneCell, incumbent: &TuneCell) -> bool {
    if candidate.cv_rmse != incumbent.cv_rmse {
        return candidate.cv_rmse < incumbent.cv_rmse;
    }
    if candidate.rho != incumbent.rho {
        return candidate.rho < incumbent.rho;
    }
    candidate.alpha > incumbent.alpha
}
