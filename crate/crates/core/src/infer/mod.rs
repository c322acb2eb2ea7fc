//! Maximum-likelihood fitting of count models and of zero-inflated / hurdle
//! regressions, with Fisher information in coefficient space.

pub mod links;
pub mod mle;
mod optim;
pub mod regression;

pub use links::Link;
pub use mle::{fit_probabilistic, loglik, Baseline, Family, MleFit, ZeroKind};
pub use regression::{fit_regression, regression_fim, Dataset, RegressionSpec};
