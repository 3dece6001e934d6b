use nalgebra::{DMatrix, DVector};
use ndarray::{ArrayView1, ArrayView2};

use super::elastic_net::{ENHyperParams, ElasticNetModel};
use crate::data::Scaling;
use crate::error::{Error, Result};

/// Least squares through the origin. Uses the SVD pseudo-inverse, so a
/// rank-deficient or wide `x` gets the minimum-Euclidean-norm solution.
/// No intercept is fitted; every column counts as selected.
pub fn fit_min_norm_ols(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<ElasticNetModel> {
    let (n, p) = x.dim();
    if n == 0 || p == 0 {
        return Err(Error::Data(format!("cannot fit a {n}x{p} problem")));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Data("least-squares inputs contain NaN or infinite values".into()));
    }

    let a = DMatrix::from_fn(n, p, |i, j| x[[i, j]]);
    let b = DVector::from_fn(n, |i, _| y[i]);
    let svd = a.svd(true, true);
    let sigma_max = svd.singular_values.max();
    let coefficients = if sigma_max == 0.0 {
        vec![0.0; p]
    } else {
        let eps = sigma_max * n.max(p) as f64 * f64::EPSILON;
        svd.solve(&b, eps).map_err(|e| Error::Data(e.to_string()))?.iter().copied().collect()
    };

    let fitted = x.dot(&ArrayView1::from(&coefficients));
    let sse = y.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(ElasticNetModel {
        hyper: ENHyperParams { alpha: 0.0, rho: 0.0 },
        intercept: 0.0,
        coefficients,
        selected: (0..p).collect(),
        objective_value: sse,
        scaling: None,
        sweeps: 0,
        converged: true,
        objective_trace: Vec::new(),
    })
}

/// Standardizes `x`, centres `y`, solves the min-norm problem and stores the
/// scaling and intercept, mirroring [`super::fit_standardized_elastic_net`].
pub fn fit_standardized_ols(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<ElasticNetModel> {
    let scaling = Scaling::fit(x);
    let z = scaling.apply(x)?;
    let intercept = y.mean().unwrap_or(0.0);
    let yc = y.mapv(|v| v - intercept);
    let mut model = fit_min_norm_ols(z.view(), yc.view())?;
    model.intercept = intercept;
    model.scaling = Some(scaling);
    Ok(model)
}
