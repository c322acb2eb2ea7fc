use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use trigfree::expect::Method;
use trigfree::infer::Family;
use trigfree::CountModel;

use crate::error::{CliError, Result};

/// A count distribution named on the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: String,
    pub nu: Option<f64>,
    pub p: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub phi: Option<f64>,
    pub n: Option<u64>,
}

impl ModelSpec {
    pub fn nb(nu: f64, p: f64) -> Self {
        Self { family: "nb".into(), nu: Some(nu), p: Some(p), alpha: None, beta: None, phi: None, n: None }
    }

    pub fn zinb(phi: f64, nu: f64, p: f64) -> Self {
        Self { family: "zinb".into(), phi: Some(phi), ..Self::nb(nu, p) }
    }

    fn need(&self, v: Option<f64>, name: &str) -> Result<f64> {
        v.ok_or_else(|| CliError::usage(format!("family '{}' needs --{name}", self.family)))
    }

    pub fn build(&self) -> Result<CountModel> {
        let nb = || Ok::<_, CliError>(CountModel::nb(self.need(self.nu, "nu")?, self.need(self.p, "p")?)?);
        let bnb = || {
            Ok::<_, CliError>(CountModel::bnb(
                self.need(self.nu, "nu")?,
                self.need(self.alpha, "alpha")?,
                self.need(self.beta, "beta")?,
            )?)
        };
        let phi = || self.need(self.phi, "phi");
        let n = || self.n.ok_or_else(|| CliError::usage(format!("family '{}' needs --n", self.family)));
        Ok(match self.family.as_str() {
            "nb" => nb()?,
            "bnb" => bnb()?,
            "zinb" => CountModel::zero_inflated(phi()?, nb()?)?,
            "zibnb" => CountModel::zero_inflated(phi()?, bnb()?)?,
            "zanb" => CountModel::hurdle(phi()?, nb()?)?,
            "zabnb" => CountModel::hurdle(phi()?, bnb()?)?,
            "binomial" => CountModel::binomial(n()?, self.need(self.p, "p")?)?,
            "beta-binomial" => CountModel::beta_binomial(
                n()?,
                self.need(self.alpha, "alpha")?,
                self.need(self.beta, "beta")?,
            )?,
            other => return Err(CliError::usage(format!("unknown family '{other}'"))),
        })
    }

    /// The fitted family and its true parameter vector, for models that can be fitted.
    pub fn family_and_truth(&self) -> Result<(Family, Vec<f64>)> {
        Family::from_model(&self.build()?)
            .ok_or_else(|| CliError::usage(format!("family '{}' cannot be fitted", self.family)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Compare,
    Sensitivity,
    FimSim,
    Bench,
    Regress,
    Expect,
}

/// Parameters of one study run. Everything that influences the output is
/// part of the hash; the worker count is not, since output does not depend on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub kind: StudyKind,
    pub model: ModelSpec,
    pub methods: Vec<Method>,
    pub m_grid: Vec<u64>,
    pub m_ref: u64,
    /// Replicate count `B` (or timing repetitions for a benchmark).
    pub replicates: u64,
    /// Sample size `N` per simulated dataset.
    pub sample_size: u64,
    pub seed: Option<u64>,
    pub level: f64,
    #[serde(skip)]
    pub workers: usize,
}

impl StudyConfig {
    pub fn new(kind: StudyKind, model: ModelSpec) -> Self {
        Self {
            kind,
            model,
            methods: Vec::new(),
            m_grid: Vec::new(),
            m_ref: trigfree::expect::DEFAULT_M_REF,
            replicates: 200,
            sample_size: 1000,
            seed: None,
            level: 0.95,
            workers: 1,
        }
    }

    pub fn stochastic(&self) -> bool {
        matches!(self.kind, StudyKind::Sensitivity | StudyKind::FimSim) || self.methods.contains(&Method::MonteCarlo)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 1 {
            return Err(CliError::usage("replicate count must be at least 1"));
        }
        if self.sample_size < 1 {
            return Err(CliError::usage("sample size must be at least 1"));
        }
        if self.m_grid.is_empty() {
            return Err(CliError::usage("the M grid is empty"));
        }
        if self.m_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::usage("the M grid must be strictly increasing"));
        }
        if self.stochastic() && self.seed.is_none() {
            return Err(CliError::usage("this study is stochastic and needs --seed"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(CliError::usage("confidence level must lie in (0, 1)"));
        }
        if self.workers < 1 {
            return Err(CliError::usage("worker count must be at least 1"));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }

    /// The `#` line that opens every CSV this config produces.
    pub fn metadata_line(&self) -> String {
        metadata_line(self.seed, self)
    }
}

pub fn config_hash<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// `# trigfree <version> seed=<seed> config-sha256=<hash>`.
pub fn metadata_line<T: Serialize>(seed: Option<u64>, config: &T) -> String {
    let seed = seed.map_or_else(|| "none".to_string(), |s| s.to_string());
    format!("# trigfree {} seed={seed} config-sha256={}", env!("CARGO_PKG_VERSION"), config_hash(config))
}

/// `a:b:step` ranges and comma lists, e.g. `10:200:10` or `1000,5000,20000`.
pub fn parse_grid(s: &str) -> Result<Vec<u64>> {
    let bad = || CliError::usage(format!("cannot parse M grid '{s}'"));
    let num = |t: &str| -> Result<u64> {
        let v: f64 = t.trim().parse().map_err(|_| bad())?;
        if v < 0.0 || v.fract() != 0.0 || v > u64::MAX as f64 {
            return Err(bad());
        }
        Ok(v as u64)
    };
    let mut out = Vec::new();
    for part in s.split(',') {
        let bits: Vec<&str> = part.split(':').collect();
        match bits.as_slice() {
            [one] => out.push(num(one)?),
            [a, b, step] => {
                let (a, b, step) = (num(a)?, num(b)?, num(step)?);
                if step == 0 || a > b {
                    return Err(bad());
                }
                out.extend((a..=b).step_by(step as usize));
            }
            _ => return Err(bad()),
        }
    }
    Ok(out)
}

pub fn parse_methods(s: &str) -> Result<Vec<Method>> {
    s.split(',').map(|m| m.trim().parse().map_err(CliError::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("10:50:10").unwrap(), vec![10, 20, 30, 40, 50]);
        assert_eq!(parse_grid("1000,5e3,20000").unwrap(), vec![1000, 5000, 20000]);
        assert!(parse_grid("1.5").is_err());
        assert!(parse_grid("10:5:1").is_err());
    }

    #[test]
    fn validation() {
        let mut c = StudyConfig::new(StudyKind::FimSim, ModelSpec::zinb(0.4, 10.0, 0.1));
        c.m_grid = vec![100, 1000];
        assert!(matches!(c.validate(), Err(CliError::Usage(_))));
        c.seed = Some(1);
        c.validate().unwrap();
        c.m_grid = vec![1000, 1000];
        assert!(c.validate().is_err());
        c.m_grid = vec![10];
        c.replicates = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_ignores_workers() {
        let mut a = StudyConfig::new(StudyKind::Compare, ModelSpec::nb(10.0, 0.1));
        let h = a.hash();
        a.workers = 8;
        assert_eq!(a.hash(), h);
        a.seed = Some(3);
        assert_ne!(a.hash(), h);
        assert_eq!(h.len(), 64);
    }

    #[test]
    fn models() {
        assert!(ModelSpec::zinb(0.4, 10.0, 0.1).build().is_ok());
        let mut m = ModelSpec::nb(10.0, 0.1);
        m.p = None;
        assert!(matches!(m.build(), Err(CliError::Usage(_))));
        m.family = "poisson".into();
        assert!(m.build().is_err());
        let (fam, truth) = ModelSpec::zinb(0.4, 10.0, 0.1).family_and_truth().unwrap();
        assert_eq!(fam, Family::Zinb);
        assert_eq!(truth, vec![0.4, 10.0, 0.1]);
    }
}
