use serde::Serialize;
use trigfree::expect::{self, Method};
use trigfree::rng::{stream, tag};

use crate::config::StudyConfig;
use crate::error::{CliError, Result};
use crate::output::{median, num, opt, run_ordered, Table};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub family: String,
    pub nu: f64,
    pub p: Option<f64>,
    #[serde(rename = "M")]
    pub m: u64,
    pub method: Method,
    pub ln_abs_error: f64,
    pub mc_median_ln_abs_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    /// `E(Y)/2`, `E(Y)` and `2E(Y)`.
    pub markers: [f64; 3],
}

impl CompareReport {
    pub fn get(&self, m: u64, method: Method) -> Option<&CompareRow> {
        self.rows.iter().find(|r| r.m == m && r.method == method)
    }
}

/// Log absolute errors against the `M_ref` reference at every grid point.
///
/// Deterministic errors are computed from the tail terms, so they stay
/// accurate far below the rounding level of the estimates themselves. The
/// Monte Carlo entry is the median over `B` replicates of `M` draws each.
pub fn run_compare(cfg: &StudyConfig) -> Result<CompareReport> {
    cfg.validate()?;
    let model = cfg.model.build()?;
    let nu = cfg.model.nu.ok_or_else(|| CliError::usage("compare needs --nu"))?;
    if let Some(&m) = cfg.m_grid.iter().find(|&&m| m >= cfg.m_ref) {
        return Err(CliError::usage(format!("grid point {m} is not below the reference M {}", cfg.m_ref)));
    }
    for m in &cfg.methods {
        if !matches!(m, Method::TrigammaFree | Method::Calibrated | Method::Gfwl | Method::MonteCarlo) {
            return Err(CliError::usage(format!("compare does not support method '{m}'")));
        }
    }
    let mc_median = if cfg.methods.contains(&Method::MonteCarlo) {
        let seed = cfg.seed.expect("validated");
        let reference = expect::psi1_trigamma_free(nu, &model, cfg.m_ref)?.value;
        let b = cfg.replicates;
        let grid = &cfg.m_grid;
        let errs = run_ordered(cfg.workers, grid.len() as u64 * b, |i| {
            let (g, r) = ((i / b) as usize, i % b);
            let mut rng = stream(seed, r, tag::MONTE_CARLO);
            expect::psi1_monte_carlo(nu, &model, grid[g].max(1), &mut rng).map(|e| (e.value - reference).abs().ln())
        })?
        .into_iter()
        .collect::<std::result::Result<Vec<f64>, _>>()?;
        errs.chunks(b as usize).map(|c| Some(median(c))).collect()
    } else {
        vec![None; cfg.m_grid.len()]
    };

    let p = match cfg.model.family.as_str() {
        "nb" | "binomial" => cfg.model.p,
        _ => None,
    };
    let mut rows = Vec::new();
    for (g, &m) in cfg.m_grid.iter().enumerate() {
        let tail = || expect::tail_error(nu, &model, m, cfg.m_ref);
        for &method in &cfg.methods {
            let err = match method {
                Method::TrigammaFree => tail()?,
                Method::Calibrated => tail()? - expect::rho_star(nu, m) * expect::theorem2_bound(nu, &model, m)?,
                Method::Gfwl => expect::gfwl_tail_error(nu, &model, m, cfg.m_ref)?,
                _ => mc_median[g].expect("computed above").exp(),
            };
            rows.push(CompareRow {
                family: cfg.model.family.clone(),
                nu,
                p,
                m,
                method,
                ln_abs_error: err.abs().ln(),
                mc_median_ln_abs_error: mc_median[g],
            });
        }
    }
    let mean = model.mean();
    Ok(CompareReport { rows, markers: [mean / 2.0, mean, 2.0 * mean] })
}

pub fn compare_table(cfg: &StudyConfig, report: &CompareReport) -> Table {
    let [half, mean, twice] = report.markers;
    let mut t = Table::new(
        vec![
            cfg.metadata_line(),
            format!("# markers half_mean={} mean={} twice_mean={}", num(half), num(mean), num(twice)),
        ],
        &["family", "nu", "p", "M", "method", "ln_abs_error", "mc_median_ln_abs_error"],
    );
    for r in &report.rows {
        t.push(vec![
            r.family.clone(),
            num(r.nu),
            opt(r.p),
            r.m.to_string(),
            r.method.to_string(),
            num(r.ln_abs_error),
            opt(r.mc_median_ln_abs_error),
        ]);
    }
    t
}
