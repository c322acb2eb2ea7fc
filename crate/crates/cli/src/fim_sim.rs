use serde::Serialize;
use trigfree::counts::sample;
use trigfree::expect::{ExpectSpec, MPolicy, Method};
use trigfree::fisher::{fim, frobenius_distance, invert, max_ci_length_change, wald_ci_from_inverse, Inverse};
use trigfree::infer::fit_probabilistic;
use trigfree::rng::{stream, tag};

use crate::config::StudyConfig;
use crate::error::{CliError, Result};
use crate::output::{median, num, run_ordered, Table};

/// Share of non-converged replicates above which a study is reported as failed.
pub const MAX_NONCONVERGED_SHARE: f64 = 0.2;

/// Distances and interval hits for one `(method, M)` cell of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub method: Method,
    #[serde(rename = "M")]
    pub m: u64,
    pub frobenius: f64,
    pub max_ci_change: f64,
    pub covers: Vec<bool>,
    pub singular: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub replicate: u64,
    pub converged: bool,
    pub iterations: usize,
    pub estimates: Vec<f64>,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub method: Method,
    #[serde(rename = "M")]
    pub m: u64,
    pub used: usize,
    pub mean_frobenius: f64,
    pub median_frobenius: f64,
    pub mean_max_ci_change: f64,
    pub coverage: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub labels: Vec<String>,
    pub truth: Vec<f64>,
    pub records: Vec<ReplicateRecord>,
    pub aggregates: Vec<Aggregate>,
    pub excluded: usize,
}

impl SimulationReport {
    pub fn aggregate(&self, method: Method, m: u64) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.method == method && a.m == m)
    }

    /// Aggregates recomputed from the per-replicate records.
    pub fn recompute(&self) -> Vec<Aggregate> {
        let used: Vec<&ReplicateRecord> = self.records.iter().filter(|r| r.converged).collect();
        let Some(first) = used.first() else { return Vec::new() };
        (0..first.cells.len())
            .map(|c| {
                let cells: Vec<&Cell> = used.iter().map(|r| &r.cells[c]).collect();
                let n = cells.len() as f64;
                let frob: Vec<f64> = cells.iter().map(|x| x.frobenius).collect();
                Aggregate {
                    method: cells[0].method,
                    m: cells[0].m,
                    used: cells.len(),
                    mean_frobenius: frob.iter().sum::<f64>() / n,
                    median_frobenius: median(&frob),
                    mean_max_ci_change: cells.iter().map(|x| x.max_ci_change).sum::<f64>() / n,
                    coverage: (0..self.labels.len())
                        .map(|k| cells.iter().filter(|x| x.covers[k]).count() as f64 / n)
                        .collect(),
                }
            })
            .collect()
    }

    pub fn nonconverged_share(&self) -> f64 {
        self.excluded as f64 / self.records.len().max(1) as f64
    }
}

fn replicate(cfg: &StudyConfig, r: u64) -> Result<ReplicateRecord> {
    let seed = cfg.seed.expect("validated");
    let (family, truth) = cfg.model.family_and_truth()?;
    let labels: Vec<String> = family.labels().iter().map(|s| s.to_string()).collect();
    let data = sample(&cfg.model.build()?, &mut stream(seed, r, tag::DATA), cfg.sample_size as usize);
    let fit = fit_probabilistic(family, &data, None)?;
    let mut record = ReplicateRecord {
        replicate: r,
        converged: fit.converged,
        iterations: fit.iterations,
        estimates: fit.params.clone(),
        cells: Vec::new(),
    };
    if !fit.converged {
        return Ok(record);
    }
    let model = family.model(&fit.params)?;
    let exact = fim(&model, &ExpectSpec::new(Method::TrigammaFree, MPolicy::Fixed(cfg.m_ref)))?;
    let exact_inv = invert(&exact.entries)?;
    for &method in &cfg.methods {
        for &m in &cfg.m_grid {
            let spec = ExpectSpec::new(method, MPolicy::Fixed(m)).with_stream(seed, r);
            let f = fim(&model, &spec)?;
            let inv: Inverse = invert(&f.entries)?;
            let ci = wald_ci_from_inverse(&fit.params, &labels, &inv, cfg.sample_size, cfg.level)?;
            record.cells.push(Cell {
                method,
                m,
                frobenius: frobenius_distance(&inv.matrix, &exact_inv.matrix)?,
                max_ci_change: max_ci_length_change(&inv.matrix, &exact_inv.matrix).unwrap_or(f64::NAN),
                covers: (0..truth.len()).map(|k| ci.covers(k, truth[k])).collect(),
                singular: inv.singular,
            });
        }
    }
    Ok(record)
}

/// Simulate, fit, and compare approximate Fisher information against the
/// `M_ref` reference at each replicate's own estimates.
pub fn run_fim_sim(cfg: &StudyConfig) -> Result<SimulationReport> {
    cfg.validate()?;
    let (family, truth) = cfg.model.family_and_truth()?;
    if family.zero_kind().is_none() {
        return Err(CliError::usage("fim-sim needs a zero-inflated or hurdle family"));
    }
    if cfg.methods.is_empty() || cfg.methods.iter().any(|m| !matches!(m, Method::TrigammaFree | Method::Calibrated | Method::Gfwl | Method::MonteCarlo)) {
        return Err(CliError::usage("fim-sim methods are trigamma-free, calibrated, gfwl and monte-carlo"));
    }
    let records = run_ordered(cfg.workers, cfg.replicates, |r| replicate(cfg, r))?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let excluded = records.iter().filter(|r| !r.converged).count();
    let mut report = SimulationReport {
        labels: family.labels().iter().map(|s| s.to_string()).collect(),
        truth,
        records,
        aggregates: Vec::new(),
        excluded,
    };
    report.aggregates = report.recompute();
    Ok(report)
}

/// Fails with exit status 4 when too many replicates did not converge.
pub fn check_convergence(report: &SimulationReport) -> Result<()> {
    if report.nonconverged_share() > MAX_NONCONVERGED_SHARE {
        return Err(CliError::NonConvergence { failed: report.excluded, total: report.records.len() });
    }
    Ok(())
}

pub fn summary_table(cfg: &StudyConfig, report: &SimulationReport) -> Table {
    let mut header: Vec<String> =
        ["method", "M", "used", "mean_frobenius", "median_frobenius", "mean_max_ci_change"].map(String::from).to_vec();
    header.extend(report.labels.iter().map(|l| format!("coverage_{l}")));
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new(
        vec![cfg.metadata_line(), format!("# replicates={} excluded={}", report.records.len(), report.excluded)],
        &refs,
    );
    for a in &report.aggregates {
        let mut row = vec![
            a.method.to_string(),
            a.m.to_string(),
            a.used.to_string(),
            num(a.mean_frobenius),
            num(a.median_frobenius),
            num(a.mean_max_ci_change),
        ];
        row.extend(a.coverage.iter().map(|&c| num(c)));
        t.push(row);
    }
    t
}

pub fn records_table(cfg: &StudyConfig, report: &SimulationReport) -> Table {
    let mut header: Vec<String> = ["replicate", "converged", "iterations"].map(String::from).to_vec();
    header.extend(report.labels.iter().map(|l| format!("est_{l}")));
    header.extend(["method", "M", "frobenius", "max_ci_change", "singular"].map(String::from));
    header.extend(report.labels.iter().map(|l| format!("covers_{l}")));
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new(vec![cfg.metadata_line()], &refs);
    let flag = |b: bool| if b { "1" } else { "0" }.to_string();
    for r in &report.records {
        let mut lead = vec![r.replicate.to_string(), flag(r.converged), r.iterations.to_string()];
        lead.extend(r.estimates.iter().map(|&e| num(e)));
        if r.cells.is_empty() {
            let mut row = lead.clone();
            row.resize(header.len(), String::new());
            t.push(row);
        }
        for c in &r.cells {
            let mut row = lead.clone();
            row.extend([c.method.to_string(), c.m.to_string(), num(c.frobenius), num(c.max_ci_change), flag(c.singular)]);
            row.extend(c.covers.iter().map(|&b| flag(b)));
            t.push(row);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ModelSpec, StudyKind};

    fn small() -> StudyConfig {
        let mut c = StudyConfig::new(StudyKind::FimSim, ModelSpec::zinb(0.4, 10.0, 0.1));
        c.methods = vec![Method::TrigammaFree, Method::MonteCarlo];
        c.m_grid = vec![150, 1000];
        c.m_ref = 100_000;
        c.replicates = 6;
        c.sample_size = 500;
        c.seed = Some(5);
        c
    }

    #[test]
    fn aggregates_recompute_from_records() {
        let rep = run_fim_sim(&small()).unwrap();
        assert_eq!(rep.aggregates, rep.recompute());
        assert_eq!(rep.aggregates.len(), 4);
        for a in &rep.aggregates {
            assert!(a.coverage.iter().all(|c| (0.0..=1.0).contains(c)));
        }
        assert_eq!(rep.aggregate(Method::TrigammaFree, 1000).unwrap().mean_frobenius, 0.0);
        check_convergence(&rep).unwrap();
    }

    #[test]
    fn worker_count_does_not_change_bytes() {
        let mut c = small();
        let a = records_table(&c, &run_fim_sim(&c).unwrap()).render();
        c.workers = 4;
        let b = records_table(&c, &run_fim_sim(&c).unwrap()).render();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_plain_families() {
        let mut c = small();
        c.model = ModelSpec::nb(10.0, 0.1);
        assert_eq!(run_fim_sim(&c).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn nonconvergence_threshold() {
        let mut rep = run_fim_sim(&small()).unwrap();
        rep.excluded = 2;
        assert_eq!(check_convergence(&rep).unwrap_err().exit_code(), 4);
        rep.excluded = 1;
        check_convergence(&rep).unwrap();
    }
}
