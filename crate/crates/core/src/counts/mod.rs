//! Count distributions: negative binomial, beta negative binomial, binomial,
//! beta-binomial, and zero-inflated / hurdle wrappers around any of them.

mod leaf;
mod sample;
mod stream;
mod table;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub(crate) use leaf::Leaf;
pub use sample::{sample, Sampler};
pub use stream::SurvivalStream;
pub use table::{tail_table, TailTable, DEFAULT_TABLE_CAP};

fn check_pos(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} must be positive and finite, got {x}")))
    }
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} must lie in (0, 1), got {x}")))
    }
}

/// Negative binomial with size `nu` and success probability `p`:
/// `P(Y=y) = Γ(ν+y)/(Γ(y+1)Γ(ν)) p^ν (1−p)^y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegBinomial {
    nu: f64,
    p: f64,
}

impl NegBinomial {
    pub fn new(nu: f64, p: f64) -> Result<Self> {
        check_pos("nu", nu)?;
        check_unit("p", p)?;
        Ok(Self { nu, p })
    }
    pub fn nu(&self) -> f64 {
        self.nu
    }
    pub fn p(&self) -> f64 {
        self.p
    }
}

/// Beta negative binomial: a negative binomial whose `p` is `Beta(α, β)` distributed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaNegBinomial {
    nu: f64,
    alpha: f64,
    beta: f64,
}

impl BetaNegBinomial {
    pub fn new(nu: f64, alpha: f64, beta: f64) -> Result<Self> {
        check_pos("nu", nu)?;
        check_pos("alpha", alpha)?;
        check_pos("beta", beta)?;
        Ok(Self { nu, alpha, beta })
    }
    pub fn nu(&self) -> f64 {
        self.nu
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Binomial {
    n: u64,
    p: f64,
}

impl Binomial {
    pub fn new(n: u64, p: f64) -> Result<Self> {
        check_unit("p", p)?;
        Ok(Self { n, p })
    }
    pub fn n(&self) -> u64 {
        self.n
    }
    pub fn p(&self) -> f64 {
        self.p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaBinomial {
    n: u64,
    alpha: f64,
    beta: f64,
}

impl BetaBinomial {
    pub fn new(n: u64, alpha: f64, beta: f64) -> Result<Self> {
        check_pos("alpha", alpha)?;
        check_pos("beta", beta)?;
        Ok(Self { n, alpha, beta })
    }
    pub fn n(&self) -> u64 {
        self.n
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Mixture of a point mass at zero (weight `phi`) with `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroInflated {
    phi: f64,
    base: Box<CountModel>,
}

/// Zero with probability `phi`, otherwise a draw from `base` conditioned on being positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hurdle {
    phi: f64,
    base: Box<CountModel>,
}

impl ZeroInflated {
    pub fn new(phi: f64, base: CountModel) -> Result<Self> {
        check_unit("phi", phi)?;
        Ok(Self { phi, base: Box::new(base) })
    }
    pub fn phi(&self) -> f64 {
        self.phi
    }
    pub fn base(&self) -> &CountModel {
        &self.base
    }
}

impl Hurdle {
    pub fn new(phi: f64, base: CountModel) -> Result<Self> {
        check_unit("phi", phi)?;
        if base.flat().q0 <= 0.0 {
            return Err(domain("hurdle base must put positive mass above zero"));
        }
        Ok(Self { phi, base: Box::new(base) })
    }
    pub fn phi(&self) -> f64 {
        self.phi
    }
    pub fn base(&self) -> &CountModel {
        &self.base
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CountModel {
    NegBinomial(NegBinomial),
    BetaNegBinomial(BetaNegBinomial),
    Binomial(Binomial),
    BetaBinomial(BetaBinomial),
    ZeroInflated(ZeroInflated),
    Hurdle(Hurdle),
}

/// A model reduced to one leaf family: `pmf(0) = p0`, and for `y ≥ 1`
/// `pmf(y) = c·leaf(y)`, `S(y) = c·S_leaf(y)` (also at `y = 0`).
#[derive(Debug, Clone, Copy)]
pub(crate) struct Flat {
    pub leaf: Leaf,
    pub p0: f64,
    pub q0: f64,
    pub c: f64,
}

impl Flat {
    pub(crate) fn inflated(self, phi: f64) -> Flat {
        let w = 1.0 - phi;
        Flat { leaf: self.leaf, p0: phi + w * self.p0, q0: w * self.q0, c: w * self.c }
    }

    pub(crate) fn hurdle(self, phi: f64) -> Flat {
        let w = 1.0 - phi;
        Flat { leaf: self.leaf, p0: phi, q0: w, c: w * self.c / self.q0 }
    }
}

impl CountModel {
    pub fn nb(nu: f64, p: f64) -> Result<Self> {
        Ok(Self::NegBinomial(NegBinomial::new(nu, p)?))
    }
    pub fn bnb(nu: f64, alpha: f64, beta: f64) -> Result<Self> {
        Ok(Self::BetaNegBinomial(BetaNegBinomial::new(nu, alpha, beta)?))
    }
    pub fn binomial(n: u64, p: f64) -> Result<Self> {
        Ok(Self::Binomial(Binomial::new(n, p)?))
    }
    pub fn beta_binomial(n: u64, alpha: f64, beta: f64) -> Result<Self> {
        Ok(Self::BetaBinomial(BetaBinomial::new(n, alpha, beta)?))
    }
    pub fn zero_inflated(phi: f64, base: CountModel) -> Result<Self> {
        Ok(Self::ZeroInflated(ZeroInflated::new(phi, base)?))
    }
    pub fn hurdle(phi: f64, base: CountModel) -> Result<Self> {
        Ok(Self::Hurdle(Hurdle::new(phi, base)?))
    }

    pub(crate) fn flat(&self) -> Flat {
        match self {
            Self::NegBinomial(d) => Leaf::Nb { nu: d.nu, p: d.p }.flat(),
            Self::BetaNegBinomial(d) => Leaf::Bnb { nu: d.nu, alpha: d.alpha, beta: d.beta }.flat(),
            Self::Binomial(d) => Leaf::Bin { n: d.n, p: d.p }.flat(),
            Self::BetaBinomial(d) => Leaf::BetaBin { n: d.n, alpha: d.alpha, beta: d.beta }.flat(),
            Self::ZeroInflated(z) => z.base.flat().inflated(z.phi),
            Self::Hurdle(h) => h.base.flat().hurdle(h.phi),
        }
    }

    /// Largest attainable value, or `None` for unbounded support.
    pub fn support_max(&self) -> Option<u64> {
        self.flat().leaf.support_max()
    }

    /// `P(Y = y)`, evaluated directly in log space.
    pub fn pmf(&self, y: u64) -> f64 {
        let f = self.flat();
        if y == 0 {
            f.p0
        } else {
            f.c * f.leaf.ln_pmf(y as f64).exp()
        }
    }

    /// `ln P(Y = y)`; `−∞` outside the support.
    pub fn ln_pmf(&self, y: u64) -> f64 {
        let f = self.flat();
        if y == 0 {
            f.p0.ln()
        } else {
            f.c.ln() + f.leaf.ln_pmf(y as f64)
        }
    }

    /// `P(Y > y)` for `y ≥ −1`, computed as a forward tail sum so that tiny
    /// tail probabilities keep their relative accuracy.
    pub fn survival(&self, y: i64) -> Result<f64> {
        if y < -1 {
            return Err(domain(format!("survival needs y >= -1, got {y}")));
        }
        if y == -1 {
            return Ok(1.0);
        }
        let mut s = SurvivalStream::starting_at(self, y as u64);
        Ok(s.next_pair().1)
    }

    /// Mean; `f64::INFINITY` when it does not exist (beta negative binomial with `α ≤ 1`).
    pub fn mean(&self) -> f64 {
        let f = self.flat();
        f.c * f.leaf.mean()
    }

    /// Name used in reports and on the command line.
    pub fn family_name(&self) -> &'static str {
        match self {
            Self::NegBinomial(_) => "nb",
            Self::BetaNegBinomial(_) => "bnb",
            Self::Binomial(_) => "binomial",
            Self::BetaBinomial(_) => "beta-binomial",
            Self::ZeroInflated(z) => match *z.base {
                Self::NegBinomial(_) => "zinb",
                Self::BetaNegBinomial(_) => "zibnb",
                _ => "zero-inflated",
            },
            Self::Hurdle(h) => match *h.base {
                Self::NegBinomial(_) => "zanb",
                Self::BetaNegBinomial(_) => "zabnb",
                _ => "hurdle",
            },
        }
    }
}

impl TryFrom<&CountModel> for NegBinomial {
    type Error = Error;
    fn try_from(m: &CountModel) -> Result<Self> {
        match m {
            CountModel::NegBinomial(d) => Ok(*d),
            _ => Err(Error::Unsupported(format!("expected nb, got {}", m.family_name()))),
        }
    }
}
