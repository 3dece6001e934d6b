//! Wrapper fitness: `w_r * min(r_rmse, 1) + w_p * n_p`, lower is better.
//!
//! `r_rmse` is the inner-CV RMSE of an Elastic Net restricted to the
//! chromosome's predictors, divided by the magnitude of the response mean.
//! `n_p` is the fraction of predictors switched on. The Elastic Net uses a
//! fixed `rho` and picks `alpha` from a short log grid by the same inner folds.

use std::collections::HashMap;
use std::sync::Mutex;

use ndarray::Axis;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Individual;
use crate::data::{Dataset, FoldPlan, Scaling};
use crate::error::{Error, Result};
use crate::regress::{coordinate_descent, log_spaced, rmse, ENHyperParams, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessWeights {
    pub w_r: f64,
    pub w_p: f64,
}

impl FitnessWeights {
    /// The four weight scenarios searched during tuning, in scenario order.
    /// `(0, 1)` is deliberately absent: it ignores prediction error entirely.
    pub const SCENARIOS: [FitnessWeights; 4] = [
        FitnessWeights { w_r: 0.15, w_p: 0.85 },
        FitnessWeights { w_r: 0.5, w_p: 0.5 },
        FitnessWeights { w_r: 0.85, w_p: 0.15 },
        FitnessWeights { w_r: 1.0, w_p: 0.0 },
    ];

    pub fn new(w_r: f64, w_p: f64) -> Result<Self> {
        let w = Self { w_r, w_p };
        w.validate()?;
        Ok(w)
    }

    /// Rescales arbitrary nonnegative weights to sum to one.
    pub fn normalized(w_r: f64, w_p: f64) -> Result<Self> {
        let total = w_r + w_p;
        if total.is_nan() || total <= 0.0 || w_r < 0.0 || w_p < 0.0 {
            return Err(Error::config("fitness weights must be nonnegative with a positive sum"));
        }
        Self::new(w_r / total, w_p / total)
    }

    pub fn validate(&self) -> Result<()> {
        if self.w_r < 0.0 || self.w_p < 0.0 || !self.w_r.is_finite() || !self.w_p.is_finite() {
            return Err(Error::config(format!("fitness weights must be >= 0, got {self:?}")));
        }
        if (self.w_r + self.w_p - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("fitness weights must sum to 1, got {self:?}")));
        }
        Ok(())
    }

    pub fn combine(&self, r_rmse: f64, n_p: f64) -> f64 {
        self.w_r * r_rmse.clamp(0.0, 1.0) + self.w_p * n_p
    }
}

impl Default for FitnessWeights {
    fn default() -> Self {
        Self { w_r: 0.85, w_p: 0.15 }
    }
}

/// Elastic Net settings used inside the fitness evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitnessModel {
    pub rho: f64,
    pub alphas: Vec<f64>,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for FitnessModel {
    fn default() -> Self {
        Self { rho: 0.5, alphas: log_spaced(0.004, 50.0, 5), tol: 1e-5, max_sweeps: 10_000 }
    }
}

impl FitnessModel {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.alphas.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::config("fitness alphas must be nonempty and strictly positive"));
        }
        ENHyperParams::new(1.0, self.rho).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessScore {
    pub fitness: f64,
    /// Relative inner-CV RMSE before clamping.
    pub r_rmse: f64,
    pub n_p: f64,
}

struct FoldData {
    train_cols: Vec<Vec<f64>>,
    train_yc: Vec<f64>,
    intercept: f64,
    valid_cols: Vec<Vec<f64>>,
    valid_y: Vec<f64>,
}

/// Scores chromosomes against one dataset and inner fold plan.
///
/// Standardization is per column, so each fold's standardized matrix is
/// computed once for all `P` columns and chromosomes just pick columns out of
/// it. Scores are memoised by bit pattern; the score is a pure function of the
/// bits, so sharing the cache across threads cannot change any result.
pub struct FitnessEvaluator {
    p: usize,
    weights: FitnessWeights,
    model: FitnessModel,
    y_scale: f64,
    folds: Vec<FoldData>,
    cache: Mutex<HashMap<Vec<bool>, FitnessScore>>,
}

impl FitnessEvaluator {
    pub fn new(d: &Dataset, folds: &FoldPlan, weights: FitnessWeights, model: FitnessModel) -> Result<Self> {
        weights.validate()?;
        model.validate()?;
        if folds.n() != d.n() {
            return Err(Error::DimensionMismatch { expected: d.n(), got: folds.n() });
        }
        if d.has_missing() {
            return Err(Error::Data("impute missing predictors before running the GA".into()));
        }
        let y_bar = d.y_mean();
        if y_bar == 0.0 || !y_bar.is_finite() {
            return Err(Error::UndefinedMetric(y_bar));
        }

        let mut fold_data = Vec::with_capacity(folds.k);
        for f in 0..folds.k {
            let train = folds.training_indices(f);
            let valid = folds.validation_indices(f);
            let x_train = d.x().select(Axis(0), &train);
            let scaling = Scaling::fit(x_train.view());
            let z_train = scaling.apply(x_train.view())?;
            let z_valid = scaling.apply(d.x().select(Axis(0), &valid).view())?;
            let intercept = train.iter().map(|&i| d.y()[i]).sum::<f64>() / train.len() as f64;
            fold_data.push(FoldData {
                train_cols: z_train.columns().into_iter().map(|c| c.to_vec()).collect(),
                train_yc: train.iter().map(|&i| d.y()[i] - intercept).collect(),
                intercept,
                valid_cols: z_valid.columns().into_iter().map(|c| c.to_vec()).collect(),
                valid_y: valid.iter().map(|&i| d.y()[i]).collect(),
            });
        }

        Ok(Self { p: d.p(), weights, model, y_scale: y_bar.abs(), folds: fold_data, cache: Mutex::new(HashMap::new()) })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn weights(&self) -> FitnessWeights {
        self.weights
    }

    pub fn score(&self, bits: &[bool]) -> FitnessScore {
        assert_eq!(bits.len(), self.p, "chromosome length must equal the predictor count");
        if let Some(s) = self.cache.lock().unwrap().get(bits) {
            return *s;
        }
        let s = self.compute(bits);
        self.cache.lock().unwrap().insert(bits.to_vec(), s);
        s
    }

    pub fn evaluate(&self, bits: &[bool]) -> f64 {
        self.score(bits).fitness
    }

    /// Fills in `fitness` for every individual, evaluating in parallel.
    pub fn evaluate_all(&self, population: &mut [Individual]) {
        let scores: Vec<f64> = population.par_iter().map(|ind| self.evaluate(&ind.bits)).collect();
        for (ind, s) in population.iter_mut().zip(scores) {
            ind.fitness = Some(s);
        }
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    fn compute(&self, bits: &[bool]) -> FitnessScore {
        let subset: Vec<usize> = (0..self.p).filter(|&j| bits[j]).collect();
        let n_p = subset.len() as f64 / self.p as f64;
        let rmse_cv = if subset.is_empty() { self.intercept_only_rmse() } else { self.elastic_net_rmse(&subset) };
        let r_rmse = rmse_cv / self.y_scale;
        FitnessScore { fitness: self.weights.combine(r_rmse, n_p), r_rmse, n_p }
    }

    fn intercept_only_rmse(&self) -> f64 {
        let total: f64 = self.folds.iter().map(|f| rmse(&f.valid_y, &vec![f.intercept; f.valid_y.len()])).sum();
        total / self.folds.len() as f64
    }

    fn elastic_net_rmse(&self, subset: &[usize]) -> f64 {
        let opts = SolverOptions { tol: self.model.tol, max_sweeps: self.model.max_sweeps, record_objective: false };
        let n_alpha = self.model.alphas.len();
        let mut totals = vec![0.0; n_alpha];
        let mut pred = Vec::new();
        for fold in &self.folds {
            let cols: Vec<&[f64]> = subset.iter().map(|&j| fold.train_cols[j].as_slice()).collect();
            let mut beta = vec![0.0; subset.len()];
            for (a, &alpha) in self.model.alphas.iter().enumerate().rev() {
                let hyper = ENHyperParams { alpha, rho: self.model.rho };
                // alpha > 0 is validated, so coordinate descent cannot fail here
                coordinate_descent(&cols, &fold.train_yc, hyper, &opts, &mut beta)
                    .expect("positive alpha is well-posed");
                pred.clear();
                pred.resize(fold.valid_y.len(), fold.intercept);
                for (k, &j) in subset.iter().enumerate() {
                    if beta[k] != 0.0 {
                        for (p, x) in pred.iter_mut().zip(&fold.valid_cols[j]) {
                            *p += beta[k] * x;
                        }
                    }
                }
                totals[a] += rmse(&fold.valid_y, &pred);
            }
        }
        let k = self.folds.len() as f64;
        totals.into_iter().map(|t| t / k).fold(f64::INFINITY, f64::min)
    }
}

/// One-off fitness evaluation. Builds a throwaway [`FitnessEvaluator`].
pub fn evaluate_fitness(
    ind: &Individual,
    d: &Dataset,
    folds: &FoldPlan,
    weights: FitnessWeights,
    model: &FitnessModel,
) -> Result<f64> {
    Ok(FitnessEvaluator::new(d, folds, weights, model.clone())?.evaluate(&ind.bits))
}
