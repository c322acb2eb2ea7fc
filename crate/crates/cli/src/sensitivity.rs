use serde::Serialize;
use trigfree::counts::sample;
use trigfree::expect::{self, Method};
use trigfree::infer::{fit_probabilistic, Family};
use trigfree::rng::{stream, tag};
use trigfree::CountModel;

use crate::config::StudyConfig;
use crate::error::{CliError, Result};
use crate::output::{num, quantile, run_ordered, Table};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityRow {
    #[serde(rename = "M")]
    pub m: u64,
    pub method: Method,
    pub median_ln_abs_diff: f64,
    pub q95_ln_abs_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub rows: Vec<SensitivityRow>,
    pub precise: f64,
    pub used: usize,
    pub excluded: usize,
}

/// Approximations built from NB fits to simulated data, compared with the
/// precise value at the true parameters.
pub fn run_sensitivity(cfg: &StudyConfig) -> Result<SensitivityReport> {
    cfg.validate()?;
    if cfg.model.family != "nb" {
        return Err(CliError::usage("sensitivity studies use an nb truth"));
    }
    let truth = cfg.model.build()?;
    let nu = cfg.model.nu.expect("nb has nu");
    let seed = cfg.seed.expect("validated");
    let precise = expect::psi1_trigamma_free(nu, &truth, cfg.m_ref)?.value;
    let per_rep = run_ordered(cfg.workers, cfg.replicates, |r| -> Result<Option<Vec<f64>>> {
        let data = sample(&truth, &mut stream(seed, r, tag::DATA), cfg.sample_size as usize);
        let fit = fit_probabilistic(Family::Nb, &data, None)?;
        if !fit.converged {
            return Ok(None);
        }
        let (nu_hat, p_hat) = (fit.params[0], fit.params[1]);
        let model = CountModel::nb(nu_hat, p_hat)?;
        let mut out = Vec::with_capacity(cfg.m_grid.len() * cfg.methods.len());
        for &m in &cfg.m_grid {
            for &method in &cfg.methods {
                let v = match method {
                    Method::TrigammaFree => expect::psi1_trigamma_free(nu_hat, &model, m)?,
                    Method::Calibrated => expect::psi1_calibrated(nu_hat, &model, m)?,
                    Method::Gfwl => expect::psi1_gfwl(nu_hat, &model, m)?,
                    Method::MonteCarlo => {
                        expect::psi1_monte_carlo(nu_hat, &model, m.max(1), &mut stream(seed, r, tag::MONTE_CARLO))?
                    }
                    other => return Err(CliError::usage(format!("sensitivity does not support method '{other}'"))),
                };
                out.push((v.value - precise).abs().ln());
            }
        }
        Ok(Some(out))
    })?;
    let mut kept = Vec::new();
    for rep in per_rep {
        if let Some(v) = rep? {
            kept.push(v);
        }
    }
    let excluded = cfg.replicates as usize - kept.len();
    let mut rows = Vec::new();
    let k = cfg.methods.len();
    for (g, &m) in cfg.m_grid.iter().enumerate() {
        for (j, &method) in cfg.methods.iter().enumerate() {
            let mut vals: Vec<f64> = kept.iter().map(|v| v[g * k + j]).collect();
            vals.sort_by(f64::total_cmp);
            rows.push(SensitivityRow {
                m,
                method,
                median_ln_abs_diff: quantile(&vals, 0.5),
                q95_ln_abs_diff: quantile(&vals, 0.95),
            });
        }
    }
    Ok(SensitivityReport { rows, precise, used: kept.len(), excluded })
}

pub fn sensitivity_table(cfg: &StudyConfig, report: &SensitivityReport) -> Table {
    let mut t = Table::new(
        vec![
            cfg.metadata_line(),
            format!("# precise={} used={} excluded={}", num(report.precise), report.used, report.excluded),
        ],
        &["M", "method", "median_ln_abs_diff", "q95_ln_abs_diff"],
    );
    for r in &report.rows {
        t.push(vec![r.m.to_string(), r.method.to_string(), num(r.median_ln_abs_diff), num(r.q95_ln_abs_diff)]);
    }
    t
}
