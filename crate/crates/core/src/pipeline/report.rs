//! Three-way method comparison and its table rendering.

use serde::{Deserialize, Serialize};

use super::{run_nested, Method, NestedRun, PipelineConfig};
use crate::data::Dataset;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: Method,
    pub n_original: usize,
    pub mean_final_predictors: f64,
    /// Unrounded ratio, e.g. 0.3379.
    pub relative_rmse_cv: f64,
    pub relative_rmse_cv_pct: f64,
    /// As printed in the table: two decimals, or `>100`.
    pub display_relative_rmse_cv: String,
    pub display_final_predictors: String,
    pub exceeds_100: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub n_original: usize,
    pub n_observations: usize,
    pub seed: u64,
    pub outer_k: usize,
    /// Outer fold of every observation, shared by all rows.
    pub outer_assignment: Vec<usize>,
    pub rows: Vec<ReportRow>,
}

/// Percentage with two decimals; anything above 100% prints as `>100`.
pub fn display_pct(relative: f64) -> String {
    let pct = relative * 100.0;
    if pct > 100.0 {
        ">100".to_string()
    } else {
        format!("{pct:.2}")
    }
}

fn display_count(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

impl ComparisonReport {
    fn from_run(d: &Dataset, cfg: &PipelineConfig, run: &NestedRun) -> Self {
        let rows = run
            .results
            .iter()
            .map(|r| ReportRow {
                method: r.method,
                n_original: r.n_original,
                mean_final_predictors: r.mean_final_predictors,
                relative_rmse_cv: r.relative_rmse_cv,
                relative_rmse_cv_pct: r.relative_rmse_cv * 100.0,
                display_relative_rmse_cv: display_pct(r.relative_rmse_cv),
                display_final_predictors: display_count(r.mean_final_predictors),
                exceeds_100: r.relative_rmse_cv > 1.0,
            })
            .collect();
        Self {
            n_original: d.p(),
            n_observations: d.n(),
            seed: cfg.seed,
            outer_k: cfg.outer_k,
            outer_assignment: run.plan.assignment.clone(),
            rows,
        }
    }

    pub fn row(&self, method: Method) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method)
    }
}

/// GA-EN, EN and GA-Lr under one outer fold plan and master seed.
pub fn compare_methods(d: &Dataset, cfg: &PipelineConfig) -> Result<ComparisonReport> {
    compare_methods_detailed(d, cfg).map(|(report, _)| report)
}

pub fn compare_methods_detailed(d: &Dataset, cfg: &PipelineConfig) -> Result<(ComparisonReport, NestedRun)> {
    let run = run_nested(d, cfg, &Method::ALL)?;
    Ok((ComparisonReport::from_run(d, cfg, &run), run))
}

/// Markdown table with padded columns.
pub fn render_table(report: &ComparisonReport) -> String {
    let header = ["Method", "# original predictors", "# final predictors", "relative RMSE_CV (%)"];
    let body: Vec<[String; 4]> = report
        .rows
        .iter()
        .map(|r| {
            [
                r.method.to_string(),
                r.n_original.to_string(),
                r.display_final_predictors.clone(),
                r.display_relative_rmse_cv.clone(),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: [&str; 4]| {
        let padded: Vec<String> = cells.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        format!("| {} |\n", padded.join(" | "))
    };
    let mut out = line(header);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    out.push_str(&format!("| {} |\n", rule.join(" | ")));
    for row in &body {
        out.push_str(&line([&row[0], &row[1], &row[2], &row[3]]));
    }
    out
}
