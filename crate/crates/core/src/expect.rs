//! Expectations `E Ψ₁(ν + Y)` and `E Ψ(ν + Y)` for a count variable `Y`.
//!
//! The trigamma-free estimator uses the exact series
//! `E Ψ₁(ν+Y) = Ψ₁(ν) − Σ_{y≥0} P(Y>y)/(ν+y)²`, truncated after `y = M`, so it
//! needs a single trigamma evaluation. The truncation error lies in
//! `[0, P(Y>M+1)/(ν+M)]`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::counts::{CountModel, Sampler, SurvivalStream};
use crate::error::{domain, Error, Result};
use crate::rng;
use crate::specfun::{counter, psi, psi1, RealArg};
use crate::summation::CompensatedSum;

/// Truncation point used for reference values.
pub const DEFAULT_M_REF: u64 = 1_000_000;

/// Largest truncation point that automatic selection will return.
pub const DEFAULT_M_CAP: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    TrigammaFree,
    Calibrated,
    Gfwl,
    MonteCarlo,
    ExactFinite,
    Digamma,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::TrigammaFree,
        Method::Calibrated,
        Method::Gfwl,
        Method::MonteCarlo,
        Method::ExactFinite,
        Method::Digamma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::TrigammaFree => "trigamma-free",
            Method::Calibrated => "calibrated",
            Method::Gfwl => "gfwl",
            Method::MonteCarlo => "monte-carlo",
            Method::ExactFinite => "exact",
            Method::Digamma => "digamma",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Unsupported(format!("unknown method '{s}'")))
    }
}

/// What the reported bound means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// `P(Y>M+1)/(ν+M)`, a rigorous bound on the truncation error.
    Truncation,
    /// Worst-case error of the calibrated estimator, `U(ρ*)·P(Y>M+1)/(ν+M)`.
    Calibrated,
    /// The half-weighted continuation term `½Ψ₁(M+1+ν)P(Y>M)`.
    HalfTerm,
    /// The value is exact.
    Exact,
    /// `P(Y>M+1)·ln((ν+H)/(ν+M))` with `H = max(10⁶, 10(M+1))`; not a proven bound.
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationResult {
    pub value: f64,
    pub method: Method,
    pub m: u64,
    pub bound: Option<f64>,
    pub bound_kind: Option<BoundKind>,
    pub trigamma_evals: u64,
}

/// Rule for picking the truncation point `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MPolicy {
    /// First integer above `2·E(Y)`; `Tolerance(1e-12)` if the mean is infinite.
    Default,
    /// Smallest `M` with `P(Y>M+1)/(ν+M) ≤ t`.
    Tolerance(f64),
    Fixed(u64),
}

impl fmt::Display for MPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MPolicy::Default => f.write_str("policy:default"),
            MPolicy::Tolerance(t) => write!(f, "policy:tol={t:e}"),
            MPolicy::Fixed(m) => write!(f, "{m}"),
        }
    }
}

impl FromStr for MPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Unsupported(format!("cannot parse M '{s}'"));
        if s == "policy:default" {
            return Ok(MPolicy::Default);
        }
        if let Some(t) = s.strip_prefix("policy:tol=") {
            let t: f64 = t.parse().map_err(|_| bad())?;
            if !(t >= 0.0) {
                return Err(bad());
            }
            return Ok(MPolicy::Tolerance(t));
        }
        let m: f64 = s.parse().map_err(|_| bad())?;
        if m < 0.0 || m.fract() != 0.0 || m > u64::MAX as f64 {
            return Err(bad());
        }
        Ok(MPolicy::Fixed(m as u64))
    }
}

fn shift(nu: f64) -> Result<f64> {
    Ok(RealArg::new(nu)?.get())
}

/// `ρ* = ½ + (ν+M)/(2(ν+M+1)(ν+M+2))`.
pub fn rho_star(nu: f64, m: u64) -> f64 {
    let a = nu + m as f64;
    0.5 + a / (2.0 * (a + 1.0) * (a + 2.0))
}

/// `U(ρ) = max{|1−ρ|, |ρ − (ν+M)/((ν+M+1)(ν+M+2))|}`.
pub fn u_of_rho(rho: f64, nu: f64, m: u64) -> f64 {
    let a = nu + m as f64;
    (1.0 - rho).abs().max((rho - a / ((a + 1.0) * (a + 2.0))).abs())
}

/// Partial sums of `P(Y>y)/(s+y)²` for several shifts `s`, snapshotted at
/// each checkpoint `M`, together with `P(Y > M+1)`.
struct Checkpoint {
    sums: Vec<f64>,
    next_survival: f64,
}

fn trigamma_free_pass(shifts: &[f64], model: &CountModel, ms: &[u64]) -> Vec<Checkpoint> {
    debug_assert!(ms.windows(2).all(|w| w[0] < w[1]));
    let mut out: Vec<Checkpoint> = Vec::with_capacity(ms.len());
    let Some(&last) = ms.last() else { return out };
    let mut acc = vec![CompensatedSum::new(); shifts.len()];
    let mut stream = SurvivalStream::new(model);
    let mut pending = None;
    for y in 0..=last + 1 {
        let (_, s) = stream.next_pair();
        if let Some(i) = pending.take() {
            let cp: &mut Checkpoint = &mut out[i];
            cp.next_survival = s;
        }
        if y > last {
            break;
        }
        let yf = y as f64;
        for (a, &nu) in acc.iter_mut().zip(shifts) {
            let t = nu + yf;
            a.add(s / (t * t));
        }
        if out.len() < ms.len() && ms[out.len()] == y {
            out.push(Checkpoint { sums: acc.iter().map(CompensatedSum::value).collect(), next_survival: 0.0 });
            pending = Some(out.len() - 1);
        }
        if s == 0.0 {
            // The stream is exhausted: every later term is zero.
            while out.len() < ms.len() {
                out.push(Checkpoint { sums: acc.iter().map(CompensatedSum::value).collect(), next_survival: 0.0 });
            }
            break;
        }
    }
    out
}

/// `Ψₑ(ν, M, 0)` for every shift in `shifts` and every `M` in the strictly
/// increasing `ms`, in one pass over the survival sequence. Indexed `[m][shift]`.
pub fn psi1_trigamma_free_grid(
    shifts: &[f64],
    model: &CountModel,
    ms: &[u64],
) -> Result<Vec<Vec<ExpectationResult>>> {
    if !ms.windows(2).all(|w| w[0] < w[1]) {
        return Err(domain("truncation points must be strictly increasing"));
    }
    let heads: Vec<f64> = shifts.iter().map(|&nu| shift(nu).map(psi1)).collect::<Result<_>>()?;
    let cps = trigamma_free_pass(shifts, model, ms);
    Ok(cps
        .iter()
        .zip(ms)
        .map(|(cp, &m)| {
            shifts
                .iter()
                .zip(&heads)
                .zip(&cp.sums)
                .map(|((&nu, &head), &sum)| ExpectationResult {
                    value: head - sum,
                    method: Method::TrigammaFree,
                    m,
                    bound: Some(cp.next_survival / (nu + m as f64)),
                    bound_kind: Some(BoundKind::Truncation),
                    trigamma_evals: 1,
                })
                .collect()
        })
        .collect())
}

/// Trigamma-free estimate `Ψ₁(ν) − Σ_{y=0}^{M} P(Y>y)/(ν+y)²`.
pub fn psi1_trigamma_free(nu: f64, model: &CountModel, m: u64) -> Result<ExpectationResult> {
    let (res, calls) = counter::measure(|| psi1_trigamma_free_grid(&[nu], model, &[m]));
    let mut r = res?.remove(0).remove(0);
    r.trigamma_evals = calls;
    Ok(r)
}

/// Calibrated estimate `Ψₑ(ν, M, 0) − ρ*·P(Y>M+1)/(ν+M)`.
pub fn psi1_calibrated(nu: f64, model: &CountModel, m: u64) -> Result<ExpectationResult> {
    let base = psi1_trigamma_free(nu, model, m)?;
    Ok(calibrate(base, nu))
}

fn calibrate(base: ExpectationResult, nu: f64) -> ExpectationResult {
    let b = base.bound.unwrap_or(0.0);
    let rho = rho_star(nu, base.m);
    ExpectationResult {
        value: base.value - rho * b,
        method: Method::Calibrated,
        bound: Some(u_of_rho(rho, nu, base.m) * b),
        bound_kind: Some(BoundKind::Calibrated),
        ..base
    }
}

/// `Σ_{k=0}^{M} Ψ₁(k+ν)P(Y=k) + ½Ψ₁(M+1+ν)P(Y>M)`.
pub fn psi1_gfwl(nu: f64, model: &CountModel, m: u64) -> Result<ExpectationResult> {
    let nu = shift(nu)?;
    let ((value, half), calls) = counter::measure(|| {
        let mut acc = CompensatedSum::new();
        let mut stream = SurvivalStream::new(model);
        let mut last_s = 1.0;
        for k in 0..=m {
            let (p, s) = stream.next_pair();
            acc.add(psi1(k as f64 + nu) * p);
            last_s = s;
        }
        let half = 0.5 * psi1(m as f64 + 1.0 + nu) * last_s;
        acc.add(half);
        (acc.value(), half)
    });
    Ok(ExpectationResult {
        value,
        method: Method::Gfwl,
        m,
        bound: Some(half),
        bound_kind: Some(BoundKind::HalfTerm),
        trigamma_evals: calls,
    })
}

/// Monte Carlo mean of `Ψ₁(ν + Y_i)` over `M ≥ 1` draws.
pub fn psi1_monte_carlo<R: Rng + ?Sized>(
    nu: f64,
    model: &CountModel,
    m: u64,
    rng: &mut R,
) -> Result<ExpectationResult> {
    Ok(monte_carlo_multi(&[nu], model, m, rng)?.remove(0))
}

/// Monte Carlo means for several shifts from the same `M` draws.
pub fn monte_carlo_multi<R: Rng + ?Sized>(
    shifts: &[f64],
    model: &CountModel,
    m: u64,
    rng: &mut R,
) -> Result<Vec<ExpectationResult>> {
    if m == 0 {
        return Err(domain("Monte Carlo needs at least one draw"));
    }
    for &nu in shifts {
        shift(nu)?;
    }
    let sampler = Sampler::new(model);
    let mut firsts: Vec<f64> = Vec::new();
    let mut acc = vec![CompensatedSum::new(); shifts.len()];
    let (_, calls) = counter::measure(|| {
        for i in 0..m {
            let y = sampler.draw(rng) as f64;
            for (j, &nu) in shifts.iter().enumerate() {
                let v = psi1(nu + y);
                if i == 0 {
                    firsts.push(v);
                } else {
                    acc[j].add(v - firsts[j]);
                }
            }
        }
    });
    let per_shift = calls / shifts.len().max(1) as u64;
    Ok(firsts
        .iter()
        .zip(&acc)
        .map(|(&first, a)| ExpectationResult {
            value: first + a.value() / m as f64,
            method: Method::MonteCarlo,
            m,
            bound: None,
            bound_kind: None,
            trigamma_evals: per_shift,
        })
        .collect())
}

/// Exact `E Ψ₁(ν+Y)` for a finite-support model: the series up to `n − 1`.
pub fn psi1_exact_finite(nu: f64, model: &CountModel) -> Result<ExpectationResult> {
    let n = model
        .support_max()
        .ok_or_else(|| Error::Unsupported(format!("{} has unbounded support", model.family_name())))?;
    let r = psi1_trigamma_free(nu, model, n.saturating_sub(1))?;
    Ok(ExpectationResult { method: Method::ExactFinite, bound: Some(0.0), bound_kind: Some(BoundKind::Exact), ..r })
}

/// `Ψ(ν) + Σ_{y=0}^{M} P(Y>y)/(ν+y)`, exact once `M ≥ n − 1` for finite support.
pub fn psi_digamma_expect(nu: f64, model: &CountModel, m: u64) -> Result<ExpectationResult> {
    let nu = shift(nu)?;
    let mut acc = CompensatedSum::new();
    let mut stream = SurvivalStream::new(model);
    for y in 0..=m {
        let (_, s) = stream.next_pair();
        acc.add(s / (nu + y as f64));
    }
    let next = stream.next_pair().1;
    let exact = model.support_max().is_some_and(|n| m + 1 >= n);
    let (bound, kind) = if exact {
        (0.0, BoundKind::Exact)
    } else {
        let h = (10 * (m + 1)).max(DEFAULT_M_REF) as f64;
        (next * ((nu + h) / (nu + m as f64)).ln(), BoundKind::Heuristic)
    };
    Ok(ExpectationResult {
        value: psi(nu) + acc.value(),
        method: Method::Digamma,
        m,
        bound: Some(bound),
        bound_kind: Some(kind),
        trigamma_evals: 0,
    })
}

/// `P(Y > M+1)/(ν+M)`.
pub fn theorem2_bound(nu: f64, model: &CountModel, m: u64) -> Result<f64> {
    let nu = shift(nu)?;
    Ok(model.survival(m as i64 + 1)? / (nu + m as f64))
}

/// Truncation error of the trigamma-free estimate against the `M_ref`
/// reference, `Σ_{y=M+1}^{M_ref} P(Y>y)/(ν+y)²`, summed from the tail terms.
pub fn tail_error(nu: f64, model: &CountModel, m: u64, m_ref: u64) -> Result<f64> {
    let nu = shift(nu)?;
    if m_ref <= m {
        return Err(domain(format!("reference point {m_ref} must exceed M = {m}")));
    }
    let mut acc = CompensatedSum::new();
    let mut stream = SurvivalStream::starting_at(model, m + 1);
    for y in m + 1..=m_ref {
        let (_, s) = stream.next_pair();
        if s == 0.0 {
            break;
        }
        let t = nu + y as f64;
        acc.add(s / (t * t));
    }
    Ok(acc.value())
}

/// Signed error of the GFWL estimate against the `M_ref` reference,
/// `½Ψ₁(M+1+ν)P(Y>M) − Σ_{k=M+1}^{M_ref} Ψ₁(k+ν)P(Y=k)`.
pub fn gfwl_tail_error(nu: f64, model: &CountModel, m: u64, m_ref: u64) -> Result<f64> {
    let nu = shift(nu)?;
    if m_ref <= m {
        return Err(domain(format!("reference point {m_ref} must exceed M = {m}")));
    }
    let s_m = model.survival(m as i64)?;
    let mut acc = CompensatedSum::new();
    acc.add(0.5 * psi1(m as f64 + 1.0 + nu) * s_m);
    let mut stream = SurvivalStream::starting_at(model, m + 1);
    for k in m + 1..=m_ref {
        let (p, s) = stream.next_pair();
        if p == 0.0 && s == 0.0 {
            break;
        }
        acc.add(-psi1(k as f64 + nu) * p);
    }
    Ok(acc.value())
}

/// Lower and upper bounds on `Σ_{y=M+1}^{H} P(Y>y)/(ν+y)²`:
/// `Σ_{k=M+2}^{H+1} P(Y=k)(k−M−1)/((ν+M+1)(ν+k))` and
/// `Σ_{k=M+2}^{H+1} P(Y=k)(k−M−1)/((ν+M)(ν+k−1)) + P(Y>H+1)/(ν+M)`.
///
/// As `H → ∞` these become `P(Y>M+1)/(ν+M+1) − Σ_{k≥M+2} P(Y=k)/(ν+k)` and
/// `P(Y>M+1)/(ν+M) − Σ_{k≥M+2} P(Y=k)/(ν+k−1)`.
pub fn lemma1_bounds(nu: f64, model: &CountModel, m: u64, horizon: u64) -> Result<(f64, f64)> {
    let nu = shift(nu)?;
    if horizon <= m {
        return Err(domain(format!("horizon {horizon} must exceed M = {m}")));
    }
    let a = nu + m as f64;
    let mut lo = CompensatedSum::new();
    let mut hi = CompensatedSum::new();
    let mut stream = SurvivalStream::starting_at(model, m + 2);
    let mut beyond = 0.0;
    for k in m + 2..=horizon + 1 {
        let (p, s) = stream.next_pair();
        beyond = s;
        if p == 0.0 && s == 0.0 {
            break;
        }
        let gap = (k - m - 1) as f64;
        let kf = k as f64;
        lo.add(p * gap / ((a + 1.0) * (nu + kf)));
        hi.add(p * gap / (a * (nu + kf - 1.0)));
    }
    hi.add(beyond / a);
    Ok((lo.value(), hi.value()))
}

/// Truncation point under `policy`, refusing anything above `cap`.
pub fn choose_m(nu: f64, model: &CountModel, policy: MPolicy, cap: u64) -> Result<u64> {
    let nu = shift(nu)?;
    match policy {
        MPolicy::Fixed(m) => Ok(m),
        MPolicy::Default => {
            let mean = model.mean();
            if !mean.is_finite() {
                return choose_m(nu, model, MPolicy::Tolerance(1e-12), cap);
            }
            let t = 2.0 * mean;
            let r = t.round();
            let ceil = if (t - r).abs() <= 1e-9 * t.max(1.0) { r } else { t.ceil() };
            let m = ceil as u64 + 1;
            if m > cap {
                return Err(Error::Resource(format!("default M = {m} exceeds cap {cap}")));
            }
            Ok(m)
        }
        MPolicy::Tolerance(t) => {
            if !(t >= 0.0) {
                return Err(domain(format!("tolerance must be non-negative, got {t}")));
            }
            if let Some(n) = model.support_max() {
                if t == 0.0 {
                    return Ok(n.saturating_sub(1));
                }
            }
            let ok = |m: u64| theorem2_bound(nu, model, m).map(|b| b <= t);
            if ok(0)? {
                return Ok(0);
            }
            let mut lo = 0u64;
            let mut hi = 1u64;
            while !ok(hi)? {
                lo = hi;
                if hi >= cap {
                    return Err(Error::Resource(format!("tolerance {t:e} needs M above cap {cap}")));
                }
                hi = (hi * 2).min(cap);
            }
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if ok(mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(hi)
        }
    }
}

/// How to compute a batch of trigamma expectations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectSpec {
    pub method: Method,
    pub policy: MPolicy,
    /// Master seed and replicate index for the Monte Carlo stream.
    pub seed: u64,
    pub replicate: u64,
}

impl ExpectSpec {
    pub fn new(method: Method, policy: MPolicy) -> Self {
        Self { method, policy, seed: 0, replicate: 0 }
    }

    pub fn with_stream(self, seed: u64, replicate: u64) -> Self {
        Self { seed, replicate, ..self }
    }
}

/// `E Ψ₁(s + Y)` for every shift `s`, sharing one truncation point chosen for the
/// smallest shift (and, for Monte Carlo, one set of draws).
pub fn expectations(shifts: &[f64], model: &CountModel, spec: &ExpectSpec) -> Result<Vec<ExpectationResult>> {
    let smallest = shifts.iter().cloned().fold(f64::INFINITY, f64::min);
    if shifts.is_empty() {
        return Ok(Vec::new());
    }
    let m = || choose_m(smallest, model, spec.policy, DEFAULT_M_CAP);
    match spec.method {
        Method::TrigammaFree => Ok(psi1_trigamma_free_grid(shifts, model, &[m()?])?.remove(0)),
        Method::Calibrated => {
            let row = psi1_trigamma_free_grid(shifts, model, &[m()?])?.remove(0);
            Ok(row.into_iter().zip(shifts).map(|(r, &nu)| calibrate(r, nu)).collect())
        }
        Method::Gfwl => {
            let m = m()?;
            shifts.iter().map(|&nu| psi1_gfwl(nu, model, m)).collect()
        }
        Method::MonteCarlo => {
            let mut rng = rng::stream(spec.seed, spec.replicate, rng::tag::MONTE_CARLO);
            monte_carlo_multi(shifts, model, m()?.max(1), &mut rng)
        }
        Method::ExactFinite => shifts.iter().map(|&nu| psi1_exact_finite(nu, model)).collect(),
        Method::Digamma => Err(Error::Unsupported("digamma is not a trigamma method".into())),
    }
}
