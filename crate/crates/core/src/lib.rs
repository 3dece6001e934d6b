//! Two-layer feature selection for high-dimensional (p >> n) regression.
//!
//! The first layer is a binary-chromosome genetic algorithm wrapper whose
//! fitness combines an Elastic Net cross-validated relative RMSE with the
//! fraction of predictors kept. Repeated GA runs vote on a consensus subset,
//! and the second layer tunes an Elastic Net on that subset to drop whatever
//! redundant predictors survived.
//!
//! Modules:
//!
//! * [`data`]: CSV loading, neighbour-regression imputation, standardization,
//!   fold plans and synthetic sparse datasets.
//! * [`regress`]: coordinate-descent Elastic Net, (alpha, rho) grid tuning and
//!   the minimum-norm least-squares baseline.
//! * [`ga`]: chromosome encoding, fitness, selection, crossover, mutation.
//! * [`pipeline`]: the layered method, nested CV evaluation, weight/FSP grid
//!   search and the three-way method comparison.
//!
//! The Elastic Net objective is
//!
//! ```text
//! L(b) = ||y - Xb||^2 + alpha * rho * ||b||_1 + alpha * (1 - rho) * ||b||^2
//! ```
//!
//! Note that the squared error is neither divided by `n` nor halved and the L2
//! term carries no `1/2`, so `alpha` is not on the same scale as glmnet or
//! scikit-learn penalties.

pub mod data;
pub mod error;
pub mod ga;
pub mod pipeline;
pub mod regress;
pub mod seed;

pub use error::{Error, Result};
