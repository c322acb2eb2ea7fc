use rand::Rng;
use trigfree::counts::sample;
use trigfree::infer::regression::fitted_parameters;
use trigfree::infer::{Baseline, Dataset, Link, RegressionSpec, ZeroKind};
use trigfree::rng::{stream, tag};

use crate::error::Result;

/// A regression model with known coefficients, for simulation studies.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTruth {
    pub spec: RegressionSpec,
    pub coefficients: Vec<f64>,
}

impl RegressionTruth {
    /// ZINB main-effects model with a probit zero link on `x1 ~ U(−1, 1)` and
    /// a binary `x2`. The `p:x2` coefficient is small, so its significance is
    /// a close call at moderate sample sizes.
    pub fn zinb_probit() -> Self {
        let cov = vec!["x1".to_string(), "x2".to_string()];
        Self {
            spec: RegressionSpec::main_effects(ZeroKind::Inflated, Baseline::Nb, Link::Probit, &cov),
            coefficients: vec![-0.6, 0.5, 0.4, 1.5, 0.3, -0.2, -1.2, 0.4, 0.07],
        }
    }

    /// `n` observations; covariates and responses come from the replicate's data stream.
    pub fn simulate(&self, n: usize, seed: u64, replicate: u64) -> Result<Dataset> {
        let mut rng = stream(seed, replicate, tag::DATA);
        let x1: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let x2: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();
        let names = vec!["x1".to_string(), "x2".to_string()];
        let covariates = Dataset::new(vec![0; n], names.clone(), vec![x1.clone(), x2.clone()])?;
        let params = fitted_parameters(&self.spec, &covariates, &self.coefficients)?;
        let family = self.spec.family();
        let mut y = Vec::with_capacity(n);
        for p in &params {
            y.push(sample(&family.model(p)?, &mut rng, 1)[0]);
        }
        Ok(Dataset::new(y, names, vec![x1, x2])?)
    }
}
