//! Datasets, preprocessing and fold plans.
//!
//! Missing predictor cells are stored as `NaN` until [`impute_missing`] fills
//! them. Missing responses are rejected at load time.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Observation matrix plus response.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Array2<f64>,
    y: Array1<f64>,
    column_names: Vec<String>,
    response_name: String,
    /// Positional key per column (genomic position stand-in); imputation
    /// neighbours are found by sorting on it.
    column_order: Vec<usize>,
    binary: bool,
}

impl Dataset {
    pub fn new(
        x: Array2<f64>,
        y: Array1<f64>,
        column_names: Vec<String>,
        response_name: impl Into<String>,
    ) -> Result<Self> {
        let (n, p) = x.dim();
        if n < 2 {
            return Err(Error::Data(format!("need at least 2 observations, got {n}")));
        }
        if p < 1 {
            return Err(Error::Data("need at least 1 predictor".into()));
        }
        if y.len() != n {
            return Err(Error::Data(format!("response has {} values but the predictor matrix has {n} rows", y.len())));
        }
        if column_names.len() != p {
            return Err(Error::Data(format!("{} column names for {p} predictor columns", column_names.len())));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("response value at row {i} is missing or not finite")));
        }
        if x.iter().any(|v| v.is_infinite()) {
            return Err(Error::Data("predictor matrix contains an infinite value".into()));
        }
        let binary = x.iter().all(|&v| v.is_nan() || v == 0.0 || v == 1.0);
        Ok(Self { x, y, column_names, response_name: response_name.into(), column_order: (0..p).collect(), binary })
    }

    /// Builds a dataset with generated column names `x1..xP` and response `y`.
    pub fn from_arrays(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        let names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(x, y, names, "y")
    }

    pub fn with_column_order(mut self, order: Vec<usize>) -> Result<Self> {
        if order.len() != self.p() {
            return Err(Error::DimensionMismatch { expected: self.p(), got: order.len() });
        }
        self.column_order = order;
        Ok(self)
    }

    pub fn with_binary(mut self, binary: bool) -> Self {
        self.binary = binary;
        self
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    pub fn column_order(&self) -> &[usize] {
        &self.column_order
    }

    /// True when every observed predictor value is 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.binary
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.x[[row, col]].is_nan()
    }

    pub fn missing_count(&self) -> usize {
        self.x.iter().filter(|v| v.is_nan()).count()
    }

    pub fn has_missing(&self) -> bool {
        self.x.iter().any(|v| v.is_nan())
    }

    pub fn y_mean(&self) -> f64 {
        self.y.mean().unwrap_or(0.0)
    }

    /// Row subset, in the given order. May produce fewer than two rows, so it
    /// bypasses the constructor's size check.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), rows),
            y: self.y.select(Axis(0), rows),
            column_names: self.column_names.clone(),
            response_name: self.response_name.clone(),
            column_order: self.column_order.clone(),
            binary: self.binary,
        }
    }

    /// Column subset, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(1), cols),
            y: self.y.clone(),
            column_names: cols.iter().map(|&j| self.column_names[j].clone()).collect(),
            response_name: self.response_name.clone(),
            column_order: cols.iter().map(|&j| self.column_order[j]).collect(),
            binary: self.binary,
        }
    }
}

/// Reads a CSV file with a header row. All columns except `response_column`
/// become predictors, in file order. Empty and `NA` cells are recorded as missing.
pub fn load_csv(path: impl AsRef<Path>, response_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io { path: path.into(), source })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers().map_err(|e| Error::Parse { row: 1, message: e.to_string() })?.clone();
    let response_idx = headers
        .iter()
        .position(|h| h.trim() == response_column)
        .ok_or_else(|| Error::config(format!("response column `{response_column}` not found in {}", path.display())))?;
    let column_names: Vec<String> =
        headers.iter().enumerate().filter(|&(i, _)| i != response_idx).map(|(_, h)| h.trim().to_string()).collect();

    let mut values = Vec::new();
    let mut response = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        // header is line 1, first data row is line 2
        let line = idx + 2;
        let record = record.map_err(|e| Error::Parse {
            row: e.position().map_or(line, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        for (i, field) in record.iter().enumerate() {
            let field = field.trim();
            let value = if field.is_empty() || field.eq_ignore_ascii_case("na") {
                f64::NAN
            } else {
                field.parse::<f64>().map_err(|_| Error::Parse {
                    row: line,
                    message: format!("column `{}`: cannot parse `{field}` as a number", &headers[i]),
                })?
            };
            if i == response_idx {
                if value.is_nan() {
                    return Err(Error::Data(format!("missing response at row {line}; responses are never imputed")));
                }
                response.push(value);
            } else {
                values.push(value);
            }
        }
    }
    let n = response.len();
    let x = Array2::from_shape_vec((n, column_names.len()), values)
        .map_err(|e| Error::Parse { row: 0, message: e.to_string() })?;
    Dataset::new(x, Array1::from(response), column_names, response_column)
}

fn format_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// Writes predictors followed by the response column. Missing cells are empty.
pub fn write_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |source| Error::Io { path: path.into(), source };
    let mut out = std::io::BufWriter::new(File::create(path).map_err(io)?);
    let mut header = d.column_names.join(",");
    header.push(',');
    header.push_str(&d.response_name);
    writeln!(out, "{header}").map_err(io)?;
    for (row, yi) in d.x.rows().into_iter().zip(d.y.iter()) {
        let mut line: Vec<String> = row.iter().map(|&v| format_value(v)).collect();
        line.push(format_value(*yi));
        writeln!(out, "{}", line.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Fills missing predictor cells from the nearest observed columns on each
/// side (by `column_order`), via least squares on the rows where the target
/// and its regressors are all observed. Only originally observed values feed
/// the regressions, so the result does not depend on fill order.
pub fn impute_missing(d: &Dataset) -> Result<Dataset> {
    if !d.has_missing() {
        return Ok(d.clone());
    }
    let (n, p) = d.x.dim();
    let original = &d.x;
    let mut filled = original.clone();

    let mut by_position: Vec<usize> = (0..p).collect();
    by_position.sort_by_key(|&j| (d.column_order[j], j));
    let mut rank = vec![0; p];
    for (r, &j) in by_position.iter().enumerate() {
        rank[j] = r;
    }

    for j in 0..p {
        let column = original.column(j);
        let observed: Vec<usize> = (0..n).filter(|&i| !column[i].is_nan()).collect();
        if observed.is_empty() {
            return Err(Error::Imputation {
                column: d.column_names[j].clone(),
                message: "has no observed values".into(),
            });
        }
        if observed.len() == n {
            continue;
        }
        let column_mean = observed.iter().map(|&i| column[i]).sum::<f64>() / observed.len() as f64;

        for i in (0..n).filter(|&i| column[i].is_nan()) {
            let left = by_position[..rank[j]].iter().rev().copied().find(|&c| !original[[i, c]].is_nan());
            let right = by_position[rank[j] + 1..].iter().copied().find(|&c| !original[[i, c]].is_nan());
            let regressors: Vec<usize> = left.into_iter().chain(right).collect();
            let mut value = neighbour_regression(original.view(), j, i, &regressors).unwrap_or(column_mean);
            if d.binary {
                value = if value >= 0.5 { 1.0 } else { 0.0 };
            }
            filled[[i, j]] = value;
        }
    }

    let mut out = d.clone();
    out.x = filled;
    Ok(out)
}

/// Predicts `x[row, target]` from `regressors` fitted on complete rows.
/// Returns `None` when no regressor carries information (no complete rows or
/// zero variance), in which case the caller falls back to the column mean.
fn neighbour_regression(x: ArrayView2<f64>, target: usize, row: usize, regressors: &[usize]) -> Option<f64> {
    if regressors.is_empty() {
        return None;
    }
    let rows: Vec<usize> = (0..x.nrows())
        .filter(|&t| !x[[t, target]].is_nan() && regressors.iter().all(|&c| !x[[t, c]].is_nan()))
        .collect();
    if rows.is_empty() {
        return None;
    }
    let m = rows.len() as f64;
    let target_mean = rows.iter().map(|&t| x[[t, target]]).sum::<f64>() / m;

    let mut kept = Vec::new();
    for &c in regressors {
        let mean = rows.iter().map(|&t| x[[t, c]]).sum::<f64>() / m;
        let var = rows.iter().map(|&t| (x[[t, c]] - mean).powi(2)).sum::<f64>() / m;
        if var > 1e-12 {
            kept.push((c, mean));
        }
    }
    if kept.is_empty() {
        return None;
    }

    let design = DMatrix::from_fn(rows.len(), kept.len(), |r, k| {
        let (c, mean) = kept[k];
        x[[rows[r], c]] - mean
    });
    let response = DVector::from_fn(rows.len(), |r, _| x[[rows[r], target]] - target_mean);
    // Collinear neighbours (e.g. identical columns) get the minimum-norm split.
    let svd = design.svd(true, true);
    let eps = svd.singular_values.max() * 1e-10;
    let coef = svd.solve(&response, eps).ok()?;
    let pred = kept.iter().zip(coef.iter()).map(|(&(c, mean), b)| b * (x[[row, c]] - mean)).sum::<f64>();
    Some(target_mean + pred)
}

/// Per-column centring and scaling fitted on one partition, applicable to
/// any other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub means: Vec<f64>,
    /// Population standard deviations; 1.0 for zero-variance columns.
    pub scales: Vec<f64>,
    pub zero_variance: Vec<bool>,
}

impl Scaling {
    pub fn fit(x: ArrayView2<f64>) -> Self {
        let n = x.nrows() as f64;
        let mut means = Vec::with_capacity(x.ncols());
        let mut scales = Vec::with_capacity(x.ncols());
        let mut zero_variance = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            let flat = sd.is_nan() || sd <= 1e-12 * mean.abs().max(1.0);
            means.push(mean);
            scales.push(if flat { 1.0 } else { sd });
            zero_variance.push(flat);
        }
        Self { means, scales, zero_variance }
    }

    pub fn identity(p: usize) -> Self {
        Self { means: vec![0.0; p], scales: vec![1.0; p], zero_variance: vec![false; p] }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// Flagged zero-variance columns map to all-zero columns.
    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: x.ncols() });
        }
        let mut out = x.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            if self.zero_variance[j] {
                col.fill(0.0);
            } else {
                let (m, s) = (self.means[j], self.scales[j]);
                col.mapv_inplace(|v| (v - m) / s);
            }
        }
        Ok(out)
    }

    pub fn invert(&self, z: ArrayView2<f64>) -> Result<Array2<f64>> {
        if z.ncols() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: z.ncols() });
        }
        let mut out = z.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.means[j], self.scales[j]);
            col.mapv_inplace(|v| v * s + m);
        }
        Ok(out)
    }
}

/// Standardizes every predictor column to mean 0 and unit population
/// standard deviation. The response is left untouched.
pub fn standardize(d: &Dataset) -> (Dataset, Scaling) {
    let scaling = Scaling::fit(d.x.view());
    let mut out = d.clone();
    out.x = scaling.apply(d.x.view()).expect("scaling fitted on the same columns");
    (out, scaling)
}

/// Assignment of observations to validation folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn validation_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn training_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignment[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Shuffles `0..n` under `seed` and deals the observations round-robin into
/// `k` folds, so sizes differ by at most one.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::config(format!("fold count must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::config(format!("cannot split {n} observations into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let mut assignment = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % k;
    }
    Ok(FoldPlan { k, assignment, seed })
}

/// Parameters of a synthetic sparse regression problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n: usize,
    pub p: usize,
    pub k_true: usize,
    pub beta_magnitude: f64,
    pub noise_sd: f64,
    /// Binary: probability that a column copies its left neighbour's value.
    /// Continuous: AR(1) coefficient between neighbours.
    pub adjacent_correlation: f64,
    pub missing_rate: f64,
    pub binary_predictors: bool,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n: 30,
            p: 120,
            k_true: 5,
            beta_magnitude: 1.0,
            noise_sd: 0.5,
            adjacent_correlation: 0.3,
            missing_rate: 0.0,
            binary_predictors: true,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::config(format!("n must be at least 2, got {}", self.n)));
        }
        if self.p < 1 {
            return Err(Error::config("p must be at least 1"));
        }
        if self.k_true > self.p {
            return Err(Error::config(format!(
                "k_true ({}) cannot exceed the predictor count ({})",
                self.k_true, self.p
            )));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::config("noise_sd must be a finite value >= 0"));
        }
        if !(0.0..1.0).contains(&self.adjacent_correlation) {
            return Err(Error::config("adjacent_correlation must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::config("missing_rate must lie in [0, 1)"));
        }
        if !self.beta_magnitude.is_finite() {
            return Err(Error::config("beta_magnitude must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub support: Vec<usize>,
    pub beta: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub truth: GroundTruth,
}

/// Draws a dataset `y = X beta + noise` with exactly `k_true` nonzero
/// coefficients, all equal to `+beta_magnitude` so the response mean stays
/// away from zero for binary predictors.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed);
    let (n, p) = (spec.n, spec.p);
    let c = spec.adjacent_correlation;

    let mut x = Array2::<f64>::zeros((n, p));
    for i in 0..n {
        for j in 0..p {
            x[[i, j]] = if spec.binary_predictors {
                if j > 0 && rng.random_bool(c) {
                    x[[i, j - 1]]
                } else if rng.random_bool(0.5) {
                    1.0
                } else {
                    0.0
                }
            } else {
                let z: f64 = StandardNormal.sample(&mut rng);
                if j > 0 {
                    c * x[[i, j - 1]] + (1.0 - c * c).sqrt() * z
                } else {
                    z
                }
            };
        }
    }

    let mut support = index::sample(&mut rng, p, spec.k_true).into_vec();
    support.sort_unstable();
    let mut beta = vec![0.0; p];
    for &j in &support {
        beta[j] = spec.beta_magnitude;
    }

    let mut y = x.dot(&Array1::from(beta.clone()));
    if spec.noise_sd > 0.0 {
        let noise = Normal::new(0.0, spec.noise_sd).expect("validated noise_sd");
        y.mapv_inplace(|v| v + noise.sample(&mut rng));
    }

    if spec.missing_rate > 0.0 {
        for v in x.iter_mut() {
            if rng.random_bool(spec.missing_rate) {
                *v = f64::NAN;
            }
        }
    }

    let dataset = Dataset::from_arrays(x, y)?.with_binary(spec.binary_predictors);
    Ok(SyntheticData { dataset, truth: GroundTruth { support, beta, seed: spec.seed } })
}
