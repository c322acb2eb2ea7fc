use serde::Serialize;
use trigfree::expect::{ExpectSpec, MPolicy, Method};
use trigfree::fisher::{invert, wald_ci_from_inverse};
use trigfree::infer::{fit_regression, regression_fim, Baseline, Dataset, Link, MleFit, RegressionSpec, ZeroKind};

use crate::config::metadata_line;
use crate::error::{CliError, Result};
use crate::ingest::Schema;
use crate::output::{num, Table};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressArgs {
    pub schema: Schema,
    pub zero: ZeroKind,
    pub baseline: Baseline,
    pub zero_link: Link,
    /// Zero-model covariates; every covariate when `None`.
    pub zero_columns: Option<Vec<String>>,
    /// Covariates shared by the baseline-parameter predictors; every covariate when `None`.
    pub param_columns: Option<Vec<String>>,
    pub method: Method,
    pub m_grid: Vec<u64>,
    pub level: f64,
    pub seed: Option<u64>,
}

impl RegressArgs {
    pub fn spec(&self, data: &Dataset) -> RegressionSpec {
        let mut spec = RegressionSpec::main_effects(self.zero, self.baseline, self.zero_link, &data.names);
        if let Some(z) = &self.zero_columns {
            spec.zero_columns = z.clone();
        }
        if let Some(p) = &self.param_columns {
            spec.param_columns = vec![p.clone(); self.baseline.labels().len()];
        }
        spec
    }

    pub fn metadata_line(&self) -> String {
        metadata_line(self.seed, self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficient {
    pub label: String,
    pub estimate: f64,
    pub se: f64,
    pub lower: f64,
    pub upper: f64,
    pub excludes_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridEntry {
    #[serde(rename = "M")]
    pub m: u64,
    pub singular: bool,
    pub coefficients: Vec<Coefficient>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressReport {
    pub family: String,
    pub zero_link: Link,
    pub n: usize,
    pub converged: bool,
    pub iterations: usize,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub method: Method,
    pub level: f64,
    /// Intervals at every grid point, in grid order.
    pub grid: Vec<GridEntry>,
    /// Whether every coefficient's "interval excludes zero" decision agrees across the grid.
    pub stable_decisions: bool,
}

/// Wald intervals for fitted regression coefficients at truncation point `m`.
pub fn coefficient_intervals(
    spec: &RegressionSpec,
    fit: &MleFit,
    data: &Dataset,
    expect: &ExpectSpec,
    level: f64,
) -> Result<GridEntry> {
    let f = regression_fim(spec, fit, data, expect)?;
    let inv = invert(&f.entries)?;
    let n = data.n() as u64;
    let ci = wald_ci_from_inverse(&fit.params, &fit.labels, &inv, n, level)?;
    let coefficients = (0..fit.params.len())
        .map(|k| Coefficient {
            label: fit.labels[k].clone(),
            estimate: fit.params[k],
            se: (inv.matrix[(k, k)].max(0.0) / n as f64).sqrt(),
            lower: ci.lower[k],
            upper: ci.upper[k],
            excludes_zero: ci.excludes_zero(k),
        })
        .collect();
    Ok(GridEntry { m: f.m, singular: inv.singular, coefficients })
}

pub fn run_regress(data: &Dataset, args: &RegressArgs) -> Result<RegressReport> {
    if args.m_grid.is_empty() {
        return Err(CliError::usage("the M grid is empty"));
    }
    if args.method == Method::MonteCarlo && args.seed.is_none() {
        return Err(CliError::usage("monte-carlo needs --seed"));
    }
    let spec = args.spec(data);
    let fit = fit_regression(&spec, data, None)?;
    let mut grid = Vec::new();
    for &m in &args.m_grid {
        let es = ExpectSpec::new(args.method, MPolicy::Fixed(m)).with_stream(args.seed.unwrap_or(0), 0);
        let mut entry = coefficient_intervals(&spec, &fit, data, &es, args.level)?;
        entry.m = m;
        grid.push(entry);
    }
    let decisions = |g: &GridEntry| g.coefficients.iter().map(|c| c.excludes_zero).collect::<Vec<_>>();
    let stable_decisions = grid.windows(2).all(|w| decisions(&w[0]) == decisions(&w[1]));
    Ok(RegressReport {
        family: spec.family().to_string(),
        zero_link: args.zero_link,
        n: data.n(),
        converged: fit.converged,
        iterations: fit.iterations,
        loglik: fit.loglik,
        aic: fit.aic,
        bic: fit.bic,
        method: args.method,
        level: args.level,
        grid,
        stable_decisions,
    })
}

pub fn regress_table(args: &RegressArgs, report: &RegressReport) -> Table {
    let mut t = Table::new(
        vec![args.metadata_line(), format!("# stable_decisions={}", report.stable_decisions)],
        &["label", "M", "estimate", "se", "lower", "upper", "excludes_zero"],
    );
    for g in &report.grid {
        for c in &g.coefficients {
            t.push(vec![
                c.label.clone(),
                g.m.to_string(),
                num(c.estimate),
                num(c.se),
                num(c.lower),
                num(c.upper),
                c.excludes_zero.to_string(),
            ]);
        }
    }
    t
}
