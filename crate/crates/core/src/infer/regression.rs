use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::links::Link;
use super::mle::{fit_probabilistic, ln_pmf_flat, Baseline, Family, MleFit, ZeroKind, MAX_ITER};
use super::optim::minimize;
use crate::counts::{CountModel, Flat, Leaf};
use crate::error::{Error, Result};
use crate::expect::ExpectSpec;
use crate::fisher::{fim, FisherMatrix};
use crate::summation::CompensatedSum;

pub const INTERCEPT: &str = "(intercept)";

/// Responses with named numeric covariate columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub responses: Vec<u64>,
    pub names: Vec<String>,
    /// Column-major covariates, one vector per name.
    pub columns: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(responses: Vec<u64>, names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Shape(format!("{} names for {} columns", names.len(), columns.len())));
        }
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != responses.len() {
                return Err(Error::Shape(format!(
                    "column '{name}' has {} rows, responses have {}",
                    col.len(),
                    responses.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::Data(format!("column '{name}' has a non-finite value in row {}", i + 1)));
            }
        }
        if let Some(dup) = names.iter().enumerate().find(|(i, n)| names[..*i].contains(n)) {
            return Err(Error::Data(format!("duplicate column name '{}'", dup.1)));
        }
        Ok(Self { responses, names, columns })
    }

    pub fn n(&self) -> usize {
        self.responses.len()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    /// Intercept followed by the named columns.
    pub fn design(&self, columns: &[String]) -> Result<DMatrix<f64>> {
        let mut cols = vec![DVector::from_element(self.n(), 1.0)];
        for name in columns {
            let c = self.column(name).ok_or_else(|| Error::Data(format!("unknown column '{name}'")))?;
            cols.push(DVector::from_column_slice(c));
        }
        Ok(DMatrix::from_columns(&cols))
    }
}

/// Zero-inflated or hurdle regression: `g(φ_i) = G_iᵀγ`, `h_j(θ_ij) = B_ijᵀβ_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSpec {
    pub zero: ZeroKind,
    pub baseline: Baseline,
    pub zero_link: Link,
    /// Covariates of the zero model; an intercept is always included.
    pub zero_columns: Vec<String>,
    /// Covariates for each baseline parameter, in [`Baseline::labels`] order.
    pub param_columns: Vec<Vec<String>>,
}

impl RegressionSpec {
    /// Intercept plus every covariate in each linear predictor.
    pub fn main_effects(zero: ZeroKind, baseline: Baseline, zero_link: Link, covariates: &[String]) -> Self {
        Self {
            zero,
            baseline,
            zero_link,
            zero_columns: covariates.to_vec(),
            param_columns: vec![covariates.to_vec(); baseline.labels().len()],
        }
    }

    /// Intercept-only predictors.
    pub fn intercept_only(zero: ZeroKind, baseline: Baseline, zero_link: Link) -> Self {
        Self::main_effects(zero, baseline, zero_link, &[])
    }

    pub fn family(&self) -> Family {
        Family::of(Some(self.zero), self.baseline)
    }

    fn blocks(&self) -> Vec<(&'static str, Link, &[String])> {
        let mut out = vec![("zero", self.zero_link, self.zero_columns.as_slice())];
        for ((label, link), cols) in
            self.baseline.labels().iter().zip(self.baseline.links()).zip(&self.param_columns)
        {
            out.push((label, *link, cols.as_slice()));
        }
        out
    }

    /// Coefficient labels `block:column`.
    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (block, _, cols) in self.blocks() {
            out.push(format!("{block}:{INTERCEPT}"));
            out.extend(cols.iter().map(|c| format!("{block}:{c}")));
        }
        out
    }

    pub fn n_coefficients(&self) -> usize {
        self.blocks().iter().map(|b| b.2.len() + 1).sum()
    }

    fn validate(&self) -> Result<()> {
        if self.param_columns.len() != self.baseline.labels().len() {
            return Err(Error::Shape(format!(
                "{} predictor blocks for {} baseline parameters",
                self.param_columns.len(),
                self.baseline.labels().len()
            )));
        }
        Ok(())
    }
}

/// Design matrices with their links, one per linear predictor.
struct Designs {
    blocks: Vec<(Link, DMatrix<f64>)>,
}

impl Designs {
    fn build(spec: &RegressionSpec, data: &Dataset) -> Result<Self> {
        spec.validate()?;
        let mut blocks = Vec::new();
        for (block, link, cols) in spec.blocks() {
            let x = data.design(cols)?;
            check_rank(&x, block, cols)?;
            blocks.push((link, x));
        }
        Ok(Self { blocks })
    }

    /// Linear predictors `η[block][i]`.
    fn predictors(&self, coef: &[f64]) -> Vec<DVector<f64>> {
        let mut offset = 0;
        self.blocks
            .iter()
            .map(|(_, x)| {
                let k = x.ncols();
                let b = DVector::from_column_slice(&coef[offset..offset + k]);
                offset += k;
                x * b
            })
            .collect()
    }

    /// Natural-scale parameters `(φ_i, θ_i)` for every observation.
    fn parameters(&self, coef: &[f64]) -> Vec<Vec<f64>> {
        let eta = self.predictors(coef);
        let n = eta[0].len();
        (0..n)
            .map(|i| self.blocks.iter().zip(&eta).map(|((link, _), e)| link.invert(e[i])).collect())
            .collect()
    }
}

/// Rejects a design whose columns are linearly dependent, naming the offenders.
fn check_rank(x: &DMatrix<f64>, block: &str, cols: &[String]) -> Result<()> {
    let names: Vec<String> =
        std::iter::once(INTERCEPT.to_string()).chain(cols.iter().cloned()).map(|c| format!("{block}:{c}")).collect();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for (j, name) in names.iter().enumerate() {
        let original = x.column(j).into_owned();
        let mut v = original.clone();
        for _ in 0..2 {
            for q in &basis {
                v -= q * q.dot(&v);
            }
        }
        let norm = v.norm();
        if norm <= 1e-9 * original.norm().max(f64::MIN_POSITIVE) {
            dependent.push(name.clone());
        } else {
            basis.push(v / norm);
        }
    }
    if dependent.is_empty() {
        Ok(())
    } else {
        Err(Error::RankDeficient { columns: dependent })
    }
}

fn leaf(baseline: Baseline, theta: &[f64]) -> Leaf {
    match baseline {
        Baseline::Nb => Leaf::Nb { nu: theta[0], p: theta[1] },
        Baseline::Bnb => Leaf::Bnb { nu: theta[0], alpha: theta[1], beta: theta[2] },
    }
}

fn flat(spec: &RegressionSpec, params: &[f64]) -> Flat {
    let base = leaf(spec.baseline, &params[1..]).flat();
    match spec.zero {
        ZeroKind::Inflated => base.inflated(params[0]),
        ZeroKind::Hurdle => base.hurdle(params[0]),
    }
}

fn negative_loglik(spec: &RegressionSpec, designs: &Designs, data: &Dataset, coef: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for (params, &y) in designs.parameters(coef).iter().zip(&data.responses) {
        let f = flat(spec, params);
        acc.add(ln_pmf_flat(&f, f.c.ln(), y));
    }
    -acc.value()
}

/// Natural-scale `(φ_i, θ_i)` for each observation at coefficients `coef`.
pub fn fitted_parameters(spec: &RegressionSpec, data: &Dataset, coef: &[f64]) -> Result<Vec<Vec<f64>>> {
    let designs = Designs::build(spec, data)?;
    if coef.len() != spec.n_coefficients() {
        return Err(Error::Shape(format!("{} coefficients for {}", coef.len(), spec.n_coefficients())));
    }
    Ok(designs.parameters(coef))
}

/// Starting coefficients: intercepts from the intercept-only maximum-likelihood
/// fit, slopes zero.
fn initial(spec: &RegressionSpec, data: &Dataset) -> Result<Vec<f64>> {
    let fit = fit_probabilistic(spec.family(), &data.responses, None)?;
    let mut coef = Vec::with_capacity(spec.n_coefficients());
    for ((_, link, cols), &value) in spec.blocks().iter().zip(&fit.params) {
        coef.push(link.apply(value)?);
        coef.extend(std::iter::repeat_n(0.0, cols.len()));
    }
    Ok(coef)
}

pub fn fit_regression(spec: &RegressionSpec, data: &Dataset, init: Option<&[f64]>) -> Result<MleFit> {
    let designs = Designs::build(spec, data)?;
    let k = spec.n_coefficients();
    if data.n() <= k {
        return Err(Error::Data(format!("{} observations for {k} coefficients", data.n())));
    }
    if data.responses.iter().all(|&y| y == 0) {
        return Err(Error::Data("all observations are zero".into()));
    }
    let x0 = match init {
        Some(c) if c.len() == k => c.to_vec(),
        Some(c) => return Err(Error::Shape(format!("{} initial coefficients for {k}", c.len()))),
        None => initial(spec, data)?,
    };
    let objective = |coef: &[f64]| negative_loglik(spec, &designs, data, coef);
    let out = minimize(&objective, &x0, MAX_ITER);
    Ok(MleFit::from_outcome(spec.labels(), out.x.clone(), &out, data.n()))
}

/// Average over observations of `J_iᵀ F_i J_i`, the per-observation
/// information in coefficient space.
pub fn regression_fim(spec: &RegressionSpec, fit: &MleFit, data: &Dataset, expect: &ExpectSpec) -> Result<FisherMatrix> {
    let designs = Designs::build(spec, data)?;
    let k = spec.n_coefficients();
    if fit.params.len() != k {
        return Err(Error::Shape(format!("{} coefficients for {k}", fit.params.len())));
    }
    let family = spec.family();
    let eta = designs.predictors(&fit.params);
    let params = designs.parameters(&fit.params);
    let mut total = DMatrix::<f64>::zeros(k, k);
    let mut method = expect.method;
    let mut m_max = 0;
    for (i, p) in params.iter().enumerate() {
        let model: CountModel = family.model(p)?;
        let spec_i = expect.with_stream(expect.seed, (expect.replicate << 24) | i as u64);
        let f = fim(&model, &spec_i)?;
        method = f.method;
        m_max = m_max.max(f.m);
        let mut jac = DMatrix::<f64>::zeros(p.len(), k);
        let mut offset = 0;
        for (row, ((link, x), e)) in designs.blocks.iter().zip(&eta).enumerate() {
            let scale = link.inverse_derivative(e[i]);
            for c in 0..x.ncols() {
                jac[(row, offset + c)] = scale * x[(i, c)];
            }
            offset += x.ncols();
        }
        total += jac.transpose() * &f.entries * &jac;
    }
    total /= data.n() as f64;
    let total = (&total + total.transpose()) * 0.5;
    Ok(FisherMatrix { labels: spec.labels(), entries: total, method, m: m_max })
}
