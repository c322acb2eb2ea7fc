use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::normal;

/// Link `η = g(x)` between a parameter and its linear predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Logit,
    Probit,
    Log,
}

impl Link {
    pub fn name(self) -> &'static str {
        match self {
            Link::Logit => "logit",
            Link::Probit => "probit",
            Link::Log => "log",
        }
    }

    fn check(self, x: f64) -> Result<()> {
        let ok = match self {
            Link::Logit | Link::Probit => x > 0.0 && x < 1.0,
            Link::Log => x > 0.0 && x.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(domain(format!("{} link undefined at {x}", self.name())))
        }
    }

    /// `g(x)`.
    pub fn apply(self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(match self {
            Link::Logit => (x / (1.0 - x)).ln(),
            Link::Probit => normal::quantile(x)?,
            Link::Log => x.ln(),
        })
    }

    /// `g⁻¹(η)`, kept strictly inside the parameter domain.
    pub fn invert(self, eta: f64) -> f64 {
        let x = match self {
            Link::Logit => {
                if eta >= 0.0 {
                    1.0 / (1.0 + (-eta).exp())
                } else {
                    let e = eta.exp();
                    e / (1.0 + e)
                }
            }
            Link::Probit => normal::cdf(eta),
            Link::Log => eta.exp(),
        };
        match self {
            Link::Log => x.clamp(f64::MIN_POSITIVE, f64::MAX),
            _ => x.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0),
        }
    }

    /// `g′(x) = dη/dx`.
    pub fn derivative(self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(match self {
            Link::Logit => 1.0 / (x * (1.0 - x)),
            Link::Probit => 1.0 / normal::pdf(normal::quantile(x)?),
            Link::Log => 1.0 / x,
        })
    }

    /// `d g⁻¹(η) / dη`.
    pub fn inverse_derivative(self, eta: f64) -> f64 {
        match self {
            Link::Logit => {
                let x = self.invert(eta);
                x * (1.0 - x)
            }
            Link::Probit => normal::pdf(eta),
            Link::Log => eta.exp(),
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Link {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logit" => Ok(Link::Logit),
            "probit" => Ok(Link::Probit),
            "log" => Ok(Link::Log),
            _ => Err(Error::Unsupported(format!("unknown link '{s}'"))),
        }
    }
}
