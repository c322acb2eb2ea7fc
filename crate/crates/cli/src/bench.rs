use std::time::Instant;

use serde::Serialize;
use trigfree::expect::{self, Method};

use crate::config::StudyConfig;
use crate::error::{CliError, Result};
use crate::output::{num, Table};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub method: Method,
    pub family: String,
    #[serde(rename = "M")]
    pub m: u64,
    pub mean_seconds: f64,
    pub trigamma_evals: u64,
}

/// Mean wall time over `replicates` repetitions and the trigamma call count of
/// one evaluation, for each method and grid point. Runs on the calling thread.
pub fn run_bench(cfg: &StudyConfig) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let model = cfg.model.build()?;
    let nu = cfg.model.nu.ok_or_else(|| CliError::usage("bench needs --nu"))?;
    let mut rows = Vec::new();
    for &m in &cfg.m_grid {
        for &method in &cfg.methods {
            let once = || match method {
                Method::TrigammaFree => expect::psi1_trigamma_free(nu, &model, m),
                Method::Calibrated => expect::psi1_calibrated(nu, &model, m),
                Method::Gfwl => expect::psi1_gfwl(nu, &model, m),
                _ => Err(trigfree::Error::Unsupported(format!("bench does not time method '{method}'"))),
            };
            let mut total = 0.0;
            let mut evals = 0;
            for _ in 0..cfg.replicates {
                let start = Instant::now();
                let r = once()?;
                total += start.elapsed().as_secs_f64();
                evals = r.trigamma_evals;
            }
            rows.push(BenchRow {
                method,
                family: cfg.model.family.clone(),
                m,
                mean_seconds: total / cfg.replicates as f64,
                trigamma_evals: evals,
            });
        }
    }
    Ok(rows)
}

pub fn bench_table(cfg: &StudyConfig, rows: &[BenchRow]) -> Table {
    let mut t = Table::new(vec![cfg.metadata_line()], &["method", "family", "M", "mean_seconds", "trigamma_evals"]);
    for r in rows {
        t.push(vec![r.method.to_string(), r.family.clone(), r.m.to_string(), num(r.mean_seconds), r.trigamma_evals.to_string()]);
    }
    t
}
