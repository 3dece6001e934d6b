//! The two-layer method and its evaluation protocol.
//!
//! Layer 1 runs the GA several times on the training partition and keeps the
//! predictors that appear in at least a fraction `fsp` of the per-run best
//! chromosomes. Layer 2 tunes an Elastic Net on that subset. Every method is
//! scored by outer k-fold CV; all fitting, standardization and tuning for a
//! fold sees only that fold's training rows.
//!
//! Seeds: the outer fold plan, and each fold's GA runs, inner folds and
//! tuner, draw from streams derived from `PipelineConfig::seed` by label path
//! (see [`crate::seed`]). Methods are not part of the path, so GA-EN and GA-Lr
//! share identical layer-1 results on each fold.

mod report;
mod tuning;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{kfold_split, Dataset, FoldPlan};
use crate::error::{Error, Result};
use crate::ga::{run_ga, FitnessEvaluator, FitnessModel, FitnessWeights, GAConfig, GenerationRecord, Individual};
use crate::regress::{
    fit_standardized_elastic_net, fit_standardized_ols, tune_elastic_net, ENHyperParams, ElasticNetModel,
    SolverOptions, TuneGrid,
};
use crate::seed;

pub use report::{compare_methods, compare_methods_detailed, display_pct, render_table, ComparisonReport, ReportRow};
pub use tuning::{grid_tune, GridCell, GridTuneResult, TuneMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "GA-EN")]
    GaEn,
    #[serde(rename = "EN")]
    En,
    #[serde(rename = "GA-Lr")]
    GaLr,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::GaEn, Method::En, Method::GaLr];

    pub fn uses_ga(self) -> bool {
        matches!(self, Method::GaEn | Method::GaLr)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::GaEn => "GA-EN",
            Method::En => "EN",
            Method::GaLr => "GA-Lr",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ga-en" => Ok(Method::GaEn),
            "en" => Ok(Method::En),
            "ga-lr" => Ok(Method::GaLr),
            other => Err(Error::config(format!("unknown method `{other}` (expected ga-en, en or ga-lr)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub weights: FitnessWeights,
    /// Minimum share of per-run GA bests a predictor must appear in.
    pub fsp: f64,
    pub n_ga_iterations: usize,
    /// `ga.seed` is ignored inside the pipeline; run seeds are derived.
    pub ga: GAConfig,
    pub fitness: FitnessModel,
    pub grid: TuneGrid,
    pub outer_k: usize,
    /// Folds used by the GA fitness on each training partition.
    pub inner_k: usize,
    pub weight_grid: Vec<FitnessWeights>,
    pub fsp_grid: Vec<f64>,
    pub tune_mode: TuneMode,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            weights: FitnessWeights::default(),
            fsp: 0.3,
            n_ga_iterations: 5,
            ga: GAConfig::default(),
            fitness: FitnessModel::default(),
            grid: TuneGrid::default(),
            outer_k: 3,
            inner_k: 3,
            weight_grid: FitnessWeights::SCENARIOS.to_vec(),
            fsp_grid: vec![0.3, 0.5, 0.7],
            tune_mode: TuneMode::Inside,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        check_fsp(self.fsp)?;
        if self.n_ga_iterations == 0 {
            return Err(Error::config("n_ga_iterations must be at least 1"));
        }
        self.ga.validate()?;
        self.fitness.validate()?;
        self.grid.validate()?;
        if self.outer_k < 2 || self.inner_k < 2 {
            return Err(Error::config("outer_k and inner_k must be at least 2"));
        }
        if self.weight_grid.is_empty() || self.fsp_grid.is_empty() {
            return Err(Error::config("weight and FSP grids must be nonempty"));
        }
        for w in &self.weight_grid {
            w.validate()?;
        }
        for &f in &self.fsp_grid {
            check_fsp(f)?;
        }
        Ok(())
    }

    fn solver(&self) -> SolverOptions {
        SolverOptions::default()
    }
}

fn check_fsp(fsp: f64) -> Result<()> {
    if fsp > 0.0 && fsp <= 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!("fsp must lie in (0, 1], got {fsp}")))
    }
}

/// Mean over folds of each fold's RMSE.
pub fn rmse_cv(actuals: &[Vec<f64>], predictions: &[Vec<f64>]) -> Result<f64> {
    if actuals.is_empty() || actuals.len() != predictions.len() {
        return Err(Error::Data("rmse_cv needs one nonempty prediction list per fold".into()));
    }
    let mut total = 0.0;
    for (fold, (a, p)) in actuals.iter().zip(predictions).enumerate() {
        if a.is_empty() || a.len() != p.len() {
            return Err(Error::Data(format!("fold {fold} is empty or misaligned")));
        }
        total += crate::regress::rmse(a, p);
    }
    Ok(total / actuals.len() as f64)
}

/// `rmse_cv / y_bar`; not clamped, so values above 1 are possible.
pub fn relative_rmse_cv(rmse_cv: f64, y_bar: f64) -> Result<f64> {
    if y_bar == 0.0 || !y_bar.is_finite() {
        return Err(Error::UndefinedMetric(y_bar));
    }
    Ok(rmse_cv / y_bar)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer1Result {
    #[serde(with = "bit_strings")]
    pub per_iteration_best: Vec<Individual>,
    pub per_iteration_fitness: Vec<f64>,
    pub counts: Vec<usize>,
    pub fsp: f64,
    pub final_subset: Vec<usize>,
    /// True when no predictor reached the threshold and the max-count
    /// predictors were used instead.
    pub fallback: bool,
    #[serde(skip)]
    pub traces: Vec<Vec<GenerationRecord>>,
}

mod bit_strings {
    use super::Individual;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Individual], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(Individual::bit_string).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Individual>, D::Error> {
        Ok(Vec::<String>::deserialize(d)?.iter().map(|s| Individual::from_bit_str(s)).collect())
    }
}

impl Layer1Result {
    /// Same GA runs, different threshold.
    pub fn with_fsp(&self, fsp: f64) -> Self {
        let (final_subset, fallback) = fsp_subset(&self.counts, self.per_iteration_best.len(), fsp);
        Self { fsp, final_subset, fallback, ..self.clone() }
    }
}

/// Predictors with `count / n_iter >= fsp`. If none qualify, every predictor
/// with the maximum count is returned and the flag is set.
pub fn fsp_subset(counts: &[usize], n_iter: usize, fsp: f64) -> (Vec<usize>, bool) {
    let needed = fsp * n_iter as f64;
    // guard against 0.6 * 5 = 3.0000000000000004
    let subset: Vec<usize> = (0..counts.len()).filter(|&j| counts[j] as f64 >= needed - 1e-9).collect();
    if !subset.is_empty() {
        return (subset, false);
    }
    let max = counts.iter().copied().max().unwrap_or(0);
    ((0..counts.len()).filter(|&j| counts[j] == max).collect(), true)
}

/// Runs the GA `cfg.n_ga_iterations` times on `train` and forms the
/// consensus subset. `cfg.seed` is the base for the inner folds and runs.
pub fn run_layer1(train: &Dataset, cfg: &PipelineConfig) -> Result<Layer1Result> {
    cfg.validate()?;
    if train.n() < cfg.inner_k {
        return Err(Error::config(format!(
            "training partition of {} rows cannot fill {} inner folds",
            train.n(),
            cfg.inner_k
        )));
    }
    let inner = kfold_split(train.n(), cfg.inner_k, seed::derive(cfg.seed, &[seed::INNER_FOLDS]))?;
    let evaluator = FitnessEvaluator::new(train, &inner, cfg.weights, cfg.fitness.clone())?;
    let runs = (0..cfg.n_ga_iterations)
        .into_par_iter()
        .map(|it| {
            let ga = GAConfig { seed: seed::derive(cfg.seed, &[seed::GA_RUN, it as u64]), ..cfg.ga.clone() };
            run_ga(&evaluator, &ga)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut counts = vec![0; train.p()];
    for run in &runs {
        for j in run.best.selected() {
            counts[j] += 1;
        }
    }
    let (final_subset, fallback) = fsp_subset(&counts, runs.len(), cfg.fsp);
    if fallback {
        log::debug!("no predictor reached fsp {}; keeping the most frequent ones", cfg.fsp);
    }
    Ok(Layer1Result {
        per_iteration_fitness: runs.iter().map(|r| r.best.fitness_value()).collect(),
        per_iteration_best: runs.iter().map(|r| r.best.clone()).collect(),
        traces: runs.into_iter().map(|r| r.trace).collect(),
        counts,
        fsp: cfg.fsp,
        final_subset,
        fallback,
    })
}

/// Tunes (alpha, rho) on `train` (already restricted to the layer-1 subset)
/// and refits on all of it with the winning pair.
pub fn run_layer2(train: &Dataset, grid: &TuneGrid, seed: u64, opts: &SolverOptions) -> Result<ElasticNetModel> {
    let tuned = tune_elastic_net(train.x().view(), train.y().view(), grid, seed, opts)?;
    fit_standardized_elastic_net(train.x().view(), train.y().view(), tuned.hyper, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub selected_count: usize,
    pub rmse: f64,
    pub relative_rmse: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layer1_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hyper: Option<ENHyperParams>,
    /// Selected predictors as indices into the full dataset.
    pub selected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub method: Method,
    pub n_original: usize,
    pub relative_rmse_cv: f64,
    pub rmse_cv: f64,
    pub y_bar: f64,
    pub mean_final_predictors: f64,
    pub per_fold: Vec<FoldResult>,
}

/// Everything produced by one nested-CV pass over several methods.
#[derive(Debug, Clone)]
pub struct NestedRun {
    pub plan: FoldPlan,
    pub results: Vec<EvalResult>,
    /// Per outer fold; `None` when no GA method was requested.
    pub layer1: Vec<Option<Layer1Result>>,
}

pub(crate) fn outer_plan(d: &Dataset, cfg: &PipelineConfig) -> Result<FoldPlan> {
    kfold_split(d.n(), cfg.outer_k, seed::derive(cfg.seed, &[seed::OUTER_FOLDS]))
}

pub(crate) fn fold_seed(cfg: &PipelineConfig, fold: usize) -> u64 {
    seed::derive(cfg.seed, &[seed::FOLD, fold as u64])
}

fn check_dataset(d: &Dataset) -> Result<f64> {
    if d.has_missing() {
        return Err(Error::Data("dataset has missing predictor values; impute first".into()));
    }
    let y_bar = d.y_mean();
    relative_rmse_cv(0.0, y_bar)?;
    Ok(y_bar)
}

/// Fits `method` on `train` (with a precomputed layer-1 result for GA
/// methods) and scores it on `valid`.
pub(crate) fn fit_and_score(
    method: Method,
    train: &Dataset,
    valid: &Dataset,
    layer1: Option<&Layer1Result>,
    grid: &TuneGrid,
    tune_seed: u64,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, FoldResult)> {
    let (pred, selected_count, layer1_size, hyper, selected) = match method {
        Method::En => {
            let model = run_layer2(train, grid, tune_seed, opts)?;
            let pred = model.predict(valid.x().view())?;
            (pred, model.selected.len(), None, Some(model.hyper), model.selected.clone())
        }
        Method::GaEn | Method::GaLr => {
            let layer1 = layer1.expect("GA methods need a layer-1 result");
            let subset = &layer1.final_subset;
            let train_sub = train.select_columns(subset);
            let valid_sub = valid.select_columns(subset);
            if method == Method::GaEn {
                let model = run_layer2(&train_sub, grid, tune_seed, opts)?;
                let pred = model.predict(valid_sub.x().view())?;
                let selected = model.selected.iter().map(|&k| subset[k]).collect();
                (pred, model.selected.len(), Some(subset.len()), Some(model.hyper), selected)
            } else {
                let model = fit_standardized_ols(train_sub.x().view(), train_sub.y().view())?;
                let pred = model.predict(valid_sub.x().view())?;
                (pred, subset.len(), Some(subset.len()), None, subset.clone())
            }
        }
    };
    let actual = valid.y().to_vec();
    let rmse = crate::regress::rmse(&actual, pred.as_slice().expect("contiguous prediction"));
    Ok((
        pred.to_vec(),
        FoldResult { fold: 0, selected_count, rmse, relative_rmse: f64::NAN, layer1_size, hyper, selected },
    ))
}

pub(crate) fn assemble(
    method: Method,
    n_original: usize,
    y_bar: f64,
    mut per_fold: Vec<FoldResult>,
) -> Result<EvalResult> {
    for (f, r) in per_fold.iter_mut().enumerate() {
        r.fold = f;
        r.relative_rmse = relative_rmse_cv(r.rmse, y_bar)?;
    }
    let k = per_fold.len() as f64;
    let rmse_cv = per_fold.iter().map(|r| r.rmse).sum::<f64>() / k;
    Ok(EvalResult {
        method,
        n_original,
        relative_rmse_cv: relative_rmse_cv(rmse_cv, y_bar)?,
        rmse_cv,
        y_bar,
        mean_final_predictors: per_fold.iter().map(|r| r.selected_count as f64).sum::<f64>() / k,
        per_fold,
    })
}

/// Outer-CV evaluation of several methods over one shared fold plan. Layer 1
/// is computed once per fold and reused by every GA method.
pub fn run_nested(d: &Dataset, cfg: &PipelineConfig, methods: &[Method]) -> Result<NestedRun> {
    cfg.validate()?;
    let y_bar = check_dataset(d)?;
    if d.n() < cfg.outer_k {
        return Err(Error::config(format!("{} observations cannot fill {} outer folds", d.n(), cfg.outer_k)));
    }
    let plan = outer_plan(d, cfg)?;
    let opts = cfg.solver();
    let need_ga = methods.iter().any(|m| m.uses_ga());

    let per_fold = (0..cfg.outer_k)
        .into_par_iter()
        .map(|fold| {
            let run = || -> Result<_> {
                let train = d.select_rows(&plan.training_indices(fold));
                let valid = d.select_rows(&plan.validation_indices(fold));
                let fseed = fold_seed(cfg, fold);
                let layer1 = if need_ga {
                    Some(run_layer1(&train, &PipelineConfig { seed: fseed, ..cfg.clone() })?)
                } else {
                    None
                };
                let tune_seed = seed::derive(fseed, &[seed::TUNE]);
                let outcomes = methods
                    .iter()
                    .map(|&m| {
                        fit_and_score(m, &train, &valid, layer1.as_ref(), &cfg.grid, tune_seed, &opts).map(|(_, r)| r)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((layer1, outcomes))
            };
            run().map_err(|e| Error::Fold { fold, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut results = Vec::with_capacity(methods.len());
    for (mi, &m) in methods.iter().enumerate() {
        let folds = per_fold.iter().map(|(_, o)| o[mi].clone()).collect();
        results.push(assemble(m, d.p(), y_bar, folds)?);
    }
    Ok(NestedRun { plan, results, layer1: per_fold.into_iter().map(|(l, _)| l).collect() })
}

pub fn nested_cv_evaluate(d: &Dataset, cfg: &PipelineConfig, method: Method) -> Result<EvalResult> {
    Ok(run_nested(d, cfg, &[method])?.results.remove(0))
}
