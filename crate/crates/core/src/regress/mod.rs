//! Linear models: Elastic Net by cyclic coordinate descent, cross-validated
//! (alpha, rho) tuning, and the minimum-norm least-squares baseline.

mod elastic_net;
mod ols;
mod tune;

pub use elastic_net::{
    fit_elastic_net, fit_elastic_net_warm, fit_standardized_elastic_net, objective, soft_threshold, ENHyperParams,
    ElasticNetModel, SolverOptions,
};
pub use ols::{fit_min_norm_ols, fit_standardized_ols};
pub use tune::{log_spaced, tune_elastic_net, TuneCell, TuneGrid, TuneResult};

pub(crate) use elastic_net::{coordinate_descent, rmse};
