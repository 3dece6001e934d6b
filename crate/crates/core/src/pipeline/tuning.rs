//! Grid search over fitness weights and FSP.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    assemble, check_dataset, fit_and_score, fold_seed, outer_plan, run_layer1, EvalResult, FoldResult, Method,
    PipelineConfig,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::ga::FitnessWeights;
use crate::seed;

/// Where the (weights, FSP) choice is made relative to the outer CV loop.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuneMode {
    /// Each outer training partition runs its own grid search by inner CV;
    /// the held-out fold is scored with that partition's winner.
    #[default]
    Inside,
    /// Every cell is scored by the outer CV itself and the best cell's score
    /// is reported. Cheaper, but the reported error is optimistically biased.
    Outside,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    /// 1-based position in the weight grid.
    pub scenario: usize,
    pub w_r: f64,
    pub w_p: f64,
    pub fsp: f64,
    pub relative_rmse_cv: f64,
    pub mean_final_predictors: f64,
}

impl GridCell {
    pub fn weights(&self) -> FitnessWeights {
        FitnessWeights { w_r: self.w_r, w_p: self.w_p }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTuneResult {
    pub mode: TuneMode,
    pub best_weights: FitnessWeights,
    pub best_fsp: f64,
    pub eval: EvalResult,
    /// Scenario-major, FSP in grid order. Under `Inside`, each metric is the
    /// mean of the per-partition inner scores.
    pub cells: Vec<GridCell>,
    /// `Inside` only: the cell each outer training partition picked.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_fold_winners: Vec<GridCell>,
}

/// Lower error wins; ties prefer the larger `w_p`, then the larger FSP.
fn prefer(candidate: &GridCell, incumbent: &GridCell) -> bool {
    if candidate.relative_rmse_cv != incumbent.relative_rmse_cv {
        return candidate.relative_rmse_cv < incumbent.relative_rmse_cv;
    }
    if candidate.w_p != incumbent.w_p {
        return candidate.w_p > incumbent.w_p;
    }
    candidate.fsp > incumbent.fsp
}

fn argmin(cells: &[GridCell]) -> GridCell {
    cells.iter().copied().reduce(|best, c| if prefer(&c, &best) { c } else { best }).expect("grid is nonempty")
}

/// Scores every (weights, FSP) cell by outer CV. Layer 1 depends on the
/// weights only, so it runs once per (weights, fold) and is re-thresholded
/// for each FSP.
fn score_cells(d: &Dataset, cfg: &PipelineConfig) -> Result<(Vec<GridCell>, Vec<EvalResult>)> {
    let y_bar = check_dataset(d)?;
    let plan = outer_plan(d, cfg)?;
    let opts = cfg.solver();
    let mut cells = Vec::new();
    let mut evals = Vec::new();
    for (s, &weights) in cfg.weight_grid.iter().enumerate() {
        // per_fold[fold][fsp index]
        let per_fold: Vec<Vec<FoldResult>> = (0..cfg.outer_k)
            .into_par_iter()
            .map(|fold| {
                let run = || -> Result<Vec<FoldResult>> {
                    let train = d.select_rows(&plan.training_indices(fold));
                    let valid = d.select_rows(&plan.validation_indices(fold));
                    let fseed = fold_seed(cfg, fold);
                    let layer1 = run_layer1(&train, &PipelineConfig { weights, seed: fseed, ..cfg.clone() })?;
                    let tune_seed = seed::derive(fseed, &[seed::TUNE]);
                    cfg.fsp_grid
                        .iter()
                        .map(|&fsp| {
                            let l1 = layer1.with_fsp(fsp);
                            fit_and_score(Method::GaEn, &train, &valid, Some(&l1), &cfg.grid, tune_seed, &opts)
                                .map(|(_, r)| r)
                        })
                        .collect()
                };
                run().map_err(|e| Error::Fold { fold, source: Box::new(e) })
            })
            .collect::<Result<_>>()?;
        for (fi, &fsp) in cfg.fsp_grid.iter().enumerate() {
            let folds = per_fold.iter().map(|f| f[fi].clone()).collect();
            let eval = assemble(Method::GaEn, d.p(), y_bar, folds)?;
            cells.push(GridCell {
                scenario: s + 1,
                w_r: weights.w_r,
                w_p: weights.w_p,
                fsp,
                relative_rmse_cv: eval.relative_rmse_cv,
                mean_final_predictors: eval.mean_final_predictors,
            });
            evals.push(eval);
        }
    }
    Ok((cells, evals))
}

/// Searches `base.weight_grid x base.fsp_grid` for the GA-EN configuration
/// with the lowest relative RMSE_CV.
pub fn grid_tune(d: &Dataset, base: &PipelineConfig) -> Result<GridTuneResult> {
    base.validate()?;
    match base.tune_mode {
        TuneMode::Outside => {
            let (cells, mut evals) = score_cells(d, base)?;
            let best = argmin(&cells);
            let idx = cells.iter().position(|c| *c == best).expect("winner is a cell");
            Ok(GridTuneResult {
                mode: TuneMode::Outside,
                best_weights: best.weights(),
                best_fsp: best.fsp,
                eval: evals.swap_remove(idx),
                cells,
                per_fold_winners: Vec::new(),
            })
        }
        TuneMode::Inside => tune_inside(d, base),
    }
}

fn tune_inside(d: &Dataset, base: &PipelineConfig) -> Result<GridTuneResult> {
    let y_bar = check_dataset(d)?;
    let plan = outer_plan(d, base)?;
    let opts = base.solver();

    let per_fold: Vec<(Vec<GridCell>, GridCell, FoldResult)> = (0..base.outer_k)
        .into_par_iter()
        .map(|fold| {
            let run = || -> Result<_> {
                let train = d.select_rows(&plan.training_indices(fold));
                let valid = d.select_rows(&plan.validation_indices(fold));
                let fseed = fold_seed(base, fold);
                let inner_cfg = PipelineConfig { seed: seed::derive(fseed, &[seed::GRID_CELL]), ..base.clone() };
                let (cells, _) = score_cells(&train, &inner_cfg)?;
                let winner = argmin(&cells);
                let cfg = PipelineConfig { weights: winner.weights(), fsp: winner.fsp, seed: fseed, ..base.clone() };
                let layer1 = run_layer1(&train, &cfg)?;
                let tune_seed = seed::derive(fseed, &[seed::TUNE]);
                let (_, result) =
                    fit_and_score(Method::GaEn, &train, &valid, Some(&layer1), &base.grid, tune_seed, &opts)?;
                Ok((cells, winner, result))
            };
            run().map_err(|e| Error::Fold { fold, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;

    let k = per_fold.len() as f64;
    let mut cells = per_fold[0].0.clone();
    for (i, cell) in cells.iter_mut().enumerate() {
        cell.relative_rmse_cv = per_fold.iter().map(|(c, _, _)| c[i].relative_rmse_cv).sum::<f64>() / k;
        cell.mean_final_predictors = per_fold.iter().map(|(c, _, _)| c[i].mean_final_predictors).sum::<f64>() / k;
    }
    let best = argmin(&cells);
    let winners = per_fold.iter().map(|(_, w, _)| *w).collect();
    let eval = assemble(Method::GaEn, d.p(), y_bar, per_fold.into_iter().map(|(_, _, r)| r).collect())?;
    Ok(GridTuneResult {
        mode: TuneMode::Inside,
        best_weights: best.weights(),
        best_fsp: best.fsp,
        eval,
        cells,
        per_fold_winners: winners,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(w_p: f64, fsp: f64, err: f64) -> GridCell {
        GridCell { scenario: 1, w_r: 1.0 - w_p, w_p, fsp, relative_rmse_cv: err, mean_final_predictors: 1.0 }
    }

    #[test]
    fn tie_breaks_prefer_sparser_cells() {
        assert_eq!(argmin(&[cell(0.15, 0.3, 0.2), cell(0.85, 0.3, 0.2)]).w_p, 0.85);
        assert_eq!(argmin(&[cell(0.5, 0.7, 0.2), cell(0.5, 0.3, 0.2)]).fsp, 0.7);
        assert_eq!(argmin(&[cell(0.85, 0.7, 0.3), cell(0.0, 0.3, 0.2)]).w_p, 0.0);
    }
}
