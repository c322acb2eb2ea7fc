use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::links::Link;
use super::optim::{minimize, Outcome};
use crate::counts::{CountModel, Flat};
use crate::error::{Error, Result};
use crate::summation::CompensatedSum;

/// Default iteration cap for the optimizer.
pub const MAX_ITER: usize = 2000;

/// How zeros are modelled on top of the baseline count distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroKind {
    Inflated,
    Hurdle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Nb,
    Bnb,
}

impl Baseline {
    pub fn labels(self) -> &'static [&'static str] {
        match self {
            Baseline::Nb => &["nu", "p"],
            Baseline::Bnb => &["nu", "alpha", "beta"],
        }
    }

    /// Links used for the baseline parameters: log for positive parameters, logit for `p`.
    pub fn links(self) -> &'static [Link] {
        match self {
            Baseline::Nb => &[Link::Log, Link::Logit],
            Baseline::Bnb => &[Link::Log, Link::Log, Link::Log],
        }
    }

    pub fn model(self, theta: &[f64]) -> Result<CountModel> {
        match (self, theta) {
            (Baseline::Nb, &[nu, p]) => CountModel::nb(nu, p),
            (Baseline::Bnb, &[nu, a, b]) => CountModel::bnb(nu, a, b),
            _ => Err(Error::Shape(format!("wrong parameter count {} for {self:?}", theta.len()))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Nb,
    Bnb,
    Zinb,
    Zibnb,
    Zanb,
    Zabnb,
}

impl Family {
    pub const ALL: [Family; 6] = [Family::Nb, Family::Bnb, Family::Zinb, Family::Zibnb, Family::Zanb, Family::Zabnb];

    pub fn of(zero: Option<ZeroKind>, baseline: Baseline) -> Family {
        match (zero, baseline) {
            (None, Baseline::Nb) => Family::Nb,
            (None, Baseline::Bnb) => Family::Bnb,
            (Some(ZeroKind::Inflated), Baseline::Nb) => Family::Zinb,
            (Some(ZeroKind::Inflated), Baseline::Bnb) => Family::Zibnb,
            (Some(ZeroKind::Hurdle), Baseline::Nb) => Family::Zanb,
            (Some(ZeroKind::Hurdle), Baseline::Bnb) => Family::Zabnb,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Nb => "nb",
            Family::Bnb => "bnb",
            Family::Zinb => "zinb",
            Family::Zibnb => "zibnb",
            Family::Zanb => "zanb",
            Family::Zabnb => "zabnb",
        }
    }

    pub fn zero_kind(self) -> Option<ZeroKind> {
        match self {
            Family::Nb | Family::Bnb => None,
            Family::Zinb | Family::Zibnb => Some(ZeroKind::Inflated),
            Family::Zanb | Family::Zabnb => Some(ZeroKind::Hurdle),
        }
    }

    pub fn baseline(self) -> Baseline {
        match self {
            Family::Nb | Family::Zinb | Family::Zanb => Baseline::Nb,
            _ => Baseline::Bnb,
        }
    }

    pub fn labels(self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.zero_kind().is_some() {
            out.push("phi");
        }
        out.extend_from_slice(self.baseline().labels());
        out
    }

    pub fn n_params(self) -> usize {
        self.labels().len()
    }

    /// Model at natural-scale parameters in [`Family::labels`] order.
    pub fn model(self, params: &[f64]) -> Result<CountModel> {
        if params.len() != self.n_params() {
            return Err(Error::Shape(format!("{} needs {} parameters, got {}", self.name(), self.n_params(), params.len())));
        }
        match self.zero_kind() {
            None => self.baseline().model(params),
            Some(kind) => {
                let base = self.baseline().model(&params[1..])?;
                match kind {
                    ZeroKind::Inflated => CountModel::zero_inflated(params[0], base),
                    ZeroKind::Hurdle => CountModel::hurdle(params[0], base),
                }
            }
        }
    }

    /// Family and parameters of a model, if it belongs to one of these families.
    pub fn from_model(model: &CountModel) -> Option<(Family, Vec<f64>)> {
        let base = |m: &CountModel| match m {
            CountModel::NegBinomial(b) => Some((Baseline::Nb, vec![b.nu(), b.p()])),
            CountModel::BetaNegBinomial(b) => Some((Baseline::Bnb, vec![b.nu(), b.alpha(), b.beta()])),
            _ => None,
        };
        let (zero, phi, inner) = match model {
            CountModel::ZeroInflated(z) => (Some(ZeroKind::Inflated), Some(z.phi()), z.base()),
            CountModel::Hurdle(h) => (Some(ZeroKind::Hurdle), Some(h.phi()), h.base()),
            other => (None, None, other),
        };
        let (baseline, theta) = base(inner)?;
        let mut params: Vec<f64> = phi.into_iter().collect();
        params.extend(theta);
        Some((Family::of(zero, baseline), params))
    }

    fn links(self) -> Vec<Link> {
        let mut out = Vec::new();
        if self.zero_kind().is_some() {
            out.push(Link::Logit);
        }
        out.extend_from_slice(self.baseline().links());
        out
    }

    fn to_internal(self, params: &[f64]) -> Result<Vec<f64>> {
        self.links().iter().zip(params).map(|(l, &x)| l.apply(x)).collect()
    }

    fn from_internal(self, eta: &[f64]) -> Vec<f64> {
        self.links().iter().zip(eta).map(|(l, &e)| l.invert(e)).collect()
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Unsupported(format!("unknown family '{s}'")))
    }
}

/// Maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MleFit {
    pub labels: Vec<String>,
    /// Natural-scale parameters, or coefficients for a regression fit.
    pub params: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Gradient norm of the negative log-likelihood on the unconstrained scale.
    pub grad_norm: f64,
    pub n: usize,
    pub aic: f64,
    pub bic: f64,
}

impl MleFit {
    pub(crate) fn from_outcome(labels: Vec<String>, params: Vec<f64>, out: &Outcome, n: usize) -> Self {
        let k = params.len() as f64;
        let loglik = -out.value;
        MleFit {
            labels,
            params,
            loglik,
            converged: out.converged,
            iterations: out.iterations,
            grad_norm: out.grad_norm,
            n,
            aic: 2.0 * k - 2.0 * loglik,
            bic: k * (n as f64).ln() - 2.0 * loglik,
        }
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|i| self.params[i])
    }
}

/// `ln P(Y = y)` from precomputed model constants.
#[inline]
pub(crate) fn ln_pmf_flat(f: &Flat, ln_c: f64, y: u64) -> f64 {
    if y == 0 {
        f.p0.ln()
    } else {
        ln_c + f.leaf.ln_pmf(y as f64)
    }
}

/// Distinct values with their multiplicities.
pub(crate) fn frequency_table(data: &[u64]) -> Vec<(u64, f64)> {
    let mut t = BTreeMap::new();
    for &y in data {
        *t.entry(y).or_insert(0u64) += 1;
    }
    t.into_iter().map(|(y, c)| (y, c as f64)).collect()
}

fn loglik_table(model: &CountModel, table: &[(u64, f64)]) -> f64 {
    let f = model.flat();
    let ln_c = f.c.ln();
    let mut acc = CompensatedSum::new();
    for &(y, count) in table {
        acc.add(count * ln_pmf_flat(&f, ln_c, y));
    }
    acc.value()
}

/// Log-likelihood of `data`; `−∞` when some observation has zero probability.
pub fn loglik(family: Family, params: &[f64], data: &[u64]) -> Result<f64> {
    let model = family.model(params)?;
    Ok(loglik_table(&model, &frequency_table(data)))
}

fn moments(data: &[u64]) -> (f64, f64) {
    let n = data.len() as f64;
    let mean = data.iter().map(|&y| y as f64).sum::<f64>() / n;
    let second = data.iter().map(|&y| (y as f64).powi(2)).sum::<f64>() / n;
    (mean, second)
}

/// Method-of-moments NB parameters for a mean and second moment.
fn nb_from_moments(mean: f64, second: f64) -> (f64, f64) {
    let mean = mean.max(1e-3);
    let var = second - mean * mean;
    if var > mean * 1.001 {
        (mean * mean / (var - mean), (mean / var).clamp(1e-3, 0.999))
    } else {
        (mean * 9.0, 0.9)
    }
}

fn initial(family: Family, data: &[u64]) -> Vec<f64> {
    let zero_frac = data.iter().filter(|&&y| y == 0).count() as f64 / data.len() as f64;
    let (mean, second) = moments(data);
    let bnb_init = [3.0, 4.0, 3.0];
    let bnb_p0 = || CountModel::bnb(3.0, 4.0, 3.0).map(|m| m.pmf(0)).unwrap_or(0.0);
    match family {
        Family::Nb => {
            let (nu, p) = nb_from_moments(mean, second);
            vec![nu, p]
        }
        Family::Bnb => bnb_init.to_vec(),
        Family::Zinb => {
            let (nu, p) = nb_from_moments(mean, second);
            let phi = (zero_frac - p.powf(nu)).clamp(0.05, 0.9);
            let w = 1.0 - phi;
            let (nu, p) = nb_from_moments(mean / w, second / w);
            vec![phi, nu, p]
        }
        Family::Zibnb => {
            let phi = (zero_frac - bnb_p0()).clamp(0.05, 0.9);
            vec![phi, 3.0, 4.0, 3.0]
        }
        Family::Zanb => {
            let pos: Vec<u64> = data.iter().copied().filter(|&y| y > 0).collect();
            let (m, s) = moments(&pos);
            let (nu, p) = nb_from_moments(m, s);
            vec![zero_frac.clamp(0.01, 0.99), nu, p]
        }
        Family::Zabnb => vec![zero_frac.clamp(0.01, 0.99), 3.0, 4.0, 3.0],
    }
}

/// Maximum-likelihood fit of `family` to i.i.d. counts.
pub fn fit_probabilistic(family: Family, data: &[u64], init: Option<&[f64]>) -> Result<MleFit> {
    if data.len() < 10 {
        return Err(Error::Data(format!("need at least 10 observations, got {}", data.len())));
    }
    if family.zero_kind().is_some() && data.iter().all(|&y| y == 0) {
        return Err(Error::Data("all observations are zero".into()));
    }
    let start = match init {
        Some(p) => p.to_vec(),
        None => initial(family, data),
    };
    family.model(&start)?;
    let x0 = family.to_internal(&start)?;
    let table = frequency_table(data);
    let objective = |eta: &[f64]| match family.model(&family.from_internal(eta)) {
        Ok(m) => -loglik_table(&m, &table),
        Err(_) => f64::INFINITY,
    };
    let out = minimize(&objective, &x0, MAX_ITER);
    let params = family.from_internal(&out.x);
    let labels = family.labels().into_iter().map(String::from).collect();
    Ok(MleFit::from_outcome(labels, params, &out, data.len()))
}
