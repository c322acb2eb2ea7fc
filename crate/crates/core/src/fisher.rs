//! Expected Fisher information for negative binomial and beta negative binomial
//! models and their zero-inflated and hurdle versions.
//!
//! All matrices are per observation. The only infinite-series ingredients are
//! trigamma expectations `E Ψ₁(s + Y)` under the base distribution, obtained
//! through [`crate::expect::expectations`].

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::counts::CountModel;
use crate::error::{domain, Error, Result};
use crate::expect::{expectations, ExpectSpec, Method};
use crate::normal;
use crate::specfun::{psi, psi1};

/// Symmetric per-observation information matrix with parameter labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    pub labels: Vec<String>,
    pub entries: DMatrix<f64>,
    pub method: Method,
    /// Truncation point (or draw count) used for the trigamma expectations.
    pub m: u64,
}

impl FisherMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

/// Information of the base distribution, together with `g(0)` and `∇ ln g(0)`.
struct Base {
    labels: Vec<&'static str>,
    info: DMatrix<f64>,
    g0: f64,
    grad0: DVector<f64>,
    method: Method,
    m: u64,
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} must lie in (0, 1), got {v}")))
    }
}

fn nb_base(nu: f64, p: f64, spec: &ExpectSpec) -> Result<Base> {
    let model = CountModel::nb(nu, p)?;
    let e = expectations(&[nu], &model, spec)?.remove(0);
    let info = DMatrix::from_row_slice(2, 2, &[
        psi1(nu) - e.value,
        -1.0 / p,
        -1.0 / p,
        nu / (p * p * (1.0 - p)),
    ]);
    Ok(Base {
        labels: vec!["nu", "p"],
        info,
        g0: (nu * p.ln()).exp(),
        grad0: DVector::from_vec(vec![p.ln(), nu / p]),
        method: e.method,
        m: e.m,
    })
}

fn bnb_base(nu: f64, alpha: f64, beta: f64, spec: &ExpectSpec) -> Result<Base> {
    let model = CountModel::bnb(nu, alpha, beta)?;
    let mut e = expectations(&[nu, beta, nu + alpha + beta], &model, spec)?;
    let (method, m) = (e[0].method, e[0].m);
    let c = e.pop().unwrap().value;
    let b = e.pop().unwrap().value;
    let a = e.pop().unwrap().value;
    let t_na = psi1(nu + alpha);
    let t_ab = psi1(alpha + beta);
    let nn = psi1(nu) - a - t_na + c;
    let na = c - t_na;
    let nb = c;
    let aa = c - t_na + psi1(alpha) - t_ab;
    let ab = c - t_ab;
    let bb = psi1(beta) - b + c - t_ab;
    let info = DMatrix::from_row_slice(3, 3, &[nn, na, nb, na, aa, ab, nb, ab, bb]);
    let d_na = psi(nu + alpha) - psi(nu + alpha + beta);
    let grad0 = DVector::from_vec(vec![
        d_na,
        d_na - psi(alpha) + psi(alpha + beta),
        psi(alpha + beta) - psi(nu + alpha + beta),
    ]);
    Ok(Base {
        labels: vec!["nu", "alpha", "beta"],
        info,
        g0: model.pmf(0),
        grad0,
        method,
        m,
    })
}

fn base_of(model: &CountModel, spec: &ExpectSpec) -> Result<Base> {
    match model {
        CountModel::NegBinomial(b) => nb_base(b.nu(), b.p(), spec),
        CountModel::BetaNegBinomial(b) => bnb_base(b.nu(), b.alpha(), b.beta(), spec),
        other => Err(Error::Unsupported(format!(
            "no Fisher information for base family {}",
            other.family_name()
        ))),
    }
}

fn finish(base: &Base, labels: Vec<&str>, entries: DMatrix<f64>) -> FisherMatrix {
    let entries = (&entries + entries.transpose()) * 0.5;
    FisherMatrix {
        labels: labels.into_iter().map(String::from).collect(),
        entries,
        method: base.method,
        m: base.m,
    }
}

fn plain(base: Base) -> FisherMatrix {
    let labels = base.labels.clone();
    let info = base.info.clone();
    finish(&base, labels, info)
}

fn zero_inflated(phi: f64, base: Base) -> FisherMatrix {
    let d = base.info.nrows();
    let g0 = base.g0;
    let f0 = phi + (1.0 - phi) * g0;
    let outer = &base.grad0 * base.grad0.transpose();
    let mut out = DMatrix::zeros(d + 1, d + 1);
    out[(0, 0)] = (1.0 - g0) / ((1.0 - phi) * f0);
    let cross = &base.grad0 * (g0 / f0);
    for k in 0..d {
        out[(0, k + 1)] = cross[k];
        out[(k + 1, 0)] = cross[k];
    }
    let block = &base.info * (1.0 - phi) - outer * ((1.0 - phi) * phi * g0 / f0);
    out.view_mut((1, 1), (d, d)).copy_from(&block);
    let mut labels = vec!["phi"];
    labels.extend(base.labels.iter().copied());
    finish(&base, labels, out)
}

fn hurdle(phi: f64, base: Base) -> FisherMatrix {
    let d = base.info.nrows();
    let g0 = base.g0;
    let q0 = 1.0 - g0;
    let outer = &base.grad0 * base.grad0.transpose();
    let mut out = DMatrix::zeros(d + 1, d + 1);
    out[(0, 0)] = 1.0 / (phi * (1.0 - phi));
    let block = (&base.info - outer * (g0 / q0)) * ((1.0 - phi) / q0);
    out.view_mut((1, 1), (d, d)).copy_from(&block);
    let mut labels = vec!["phi"];
    labels.extend(base.labels.iter().copied());
    finish(&base, labels, out)
}

/// Information for `(ν, p)` of the negative binomial.
pub fn fim_nb(nu: f64, p: f64, spec: &ExpectSpec) -> Result<FisherMatrix> {
    Ok(plain(nb_base(nu, p, spec)?))
}

/// Information for `(ν, α, β)` of the beta negative binomial.
pub fn fim_bnb(nu: f64, alpha: f64, beta: f64, spec: &ExpectSpec) -> Result<FisherMatrix> {
    Ok(plain(bnb_base(nu, alpha, beta, spec)?))
}

/// Information for `(φ, ν, p)` of the zero-inflated negative binomial.
pub fn fim_zinb(phi: f64, nu: f64, p: f64, spec: &ExpectSpec) -> Result<FisherMatrix> {
    check_unit("phi", phi)?;
    Ok(zero_inflated(phi, nb_base(nu, p, spec)?))
}

/// Information for `(φ, ν, α, β)` of the zero-inflated beta negative binomial.
pub fn fim_zibnb(phi: f64, nu: f64, alpha: f64, beta: f64, spec: &ExpectSpec) -> Result<FisherMatrix> {
    check_unit("phi", phi)?;
    Ok(zero_inflated(phi, bnb_base(nu, alpha, beta, spec)?))
}

/// Information for `(φ, θ)` of a hurdle model whose positive part is the
/// zero-truncated `base` (NB or BNB).
pub fn fim_hurdle(phi: f64, base: &CountModel, spec: &ExpectSpec) -> Result<FisherMatrix> {
    check_unit("phi", phi)?;
    let b = base_of(base, spec)?;
    if !(b.g0 < 1.0) {
        return Err(domain("hurdle base must put mass on positive counts"));
    }
    Ok(hurdle(phi, b))
}

/// Information matrix for any supported model: NB, BNB and their
/// zero-inflated and hurdle versions.
pub fn fim(model: &CountModel, spec: &ExpectSpec) -> Result<FisherMatrix> {
    match model {
        CountModel::NegBinomial(_) | CountModel::BetaNegBinomial(_) => Ok(plain(base_of(model, spec)?)),
        CountModel::ZeroInflated(z) => Ok(zero_inflated(z.phi(), base_of(z.base(), spec)?)),
        CountModel::Hurdle(h) => fim_hurdle(h.phi(), h.base(), spec),
        other => Err(Error::Unsupported(format!(
            "no Fisher information for family {}",
            other.family_name()
        ))),
    }
}

/// Inverse with eigenvalue diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Inverse {
    pub matrix: DMatrix<f64>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// `λ_max / λ_min`; infinite when the smallest eigenvalue is not positive.
    pub condition: f64,
    /// Set when the smallest eigenvalue falls below `1e3·ε·λ_max`; the matrix
    /// is then the pseudo-inverse over the remaining eigenvalues.
    pub singular: bool,
}

/// Inverts a symmetric matrix by Cholesky, or returns a flagged
/// pseudo-inverse when it is numerically singular.
pub fn invert(f: &DMatrix<f64>) -> Result<Inverse> {
    if !f.is_square() {
        return Err(Error::Shape(format!("cannot invert a {}×{} matrix", f.nrows(), f.ncols())));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(domain("matrix has non-finite entries"));
    }
    let eig = f.clone().symmetric_eigen();
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    let scale = eig.eigenvalues.amax();
    let threshold = 1e3 * f64::EPSILON * scale;
    let singular = scale == 0.0 || min.abs() <= threshold;
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    let eigen_inverse = |cut: f64| {
        let inv_vals = eig.eigenvalues.map(|l| if l.abs() <= cut { 0.0 } else { 1.0 / l });
        &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose()
    };
    let matrix = if singular {
        eigen_inverse(threshold)
    } else {
        match f.clone().cholesky() {
            Some(c) => c.inverse(),
            None => eigen_inverse(0.0),
        }
    };
    Ok(Inverse { matrix, min_eigenvalue: min, max_eigenvalue: max, condition, singular })
}

/// `‖A − B‖_F`.
pub fn frobenius_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("shapes {:?} and {:?} differ", a.shape(), b.shape())));
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// `max_k |√a_kk − √b_kk|`, the largest change in a standard-error scale.
pub fn max_ci_length_change(a_inv: &DMatrix<f64>, b_inv: &DMatrix<f64>) -> Result<f64> {
    if a_inv.shape() != b_inv.shape() || !a_inv.is_square() {
        return Err(Error::Shape(format!("shapes {:?} and {:?} differ", a_inv.shape(), b_inv.shape())));
    }
    let mut worst = 0.0f64;
    for k in 0..a_inv.nrows() {
        let (x, y) = (a_inv[(k, k)], b_inv[(k, k)]);
        if !(x >= 0.0 && y >= 0.0) {
            return Err(domain(format!("negative diagonal entry at {k}: input is not positive semidefinite")));
        }
        worst = worst.max((x.sqrt() - y.sqrt()).abs());
    }
    Ok(worst)
}

/// Wald intervals `estimate ± z·sqrt((F⁻¹)_kk / N)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CiSet {
    pub labels: Vec<String>,
    pub estimates: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
    pub n: u64,
    pub singular: bool,
}

impl CiSet {
    pub fn covers(&self, k: usize, value: f64) -> bool {
        self.lower[k] <= value && value <= self.upper[k]
    }

    pub fn excludes_zero(&self, k: usize) -> bool {
        !self.covers(k, 0.0)
    }
}

pub fn wald_ci(estimates: &[f64], f: &FisherMatrix, n: u64, level: f64) -> Result<CiSet> {
    let inv = invert(&f.entries)?;
    wald_ci_from_inverse(estimates, &f.labels, &inv, n, level)
}

/// As [`wald_ci`] for an already inverted matrix.
pub fn wald_ci_from_inverse(
    estimates: &[f64],
    labels: &[String],
    inv: &Inverse,
    n: u64,
    level: f64,
) -> Result<CiSet> {
    if n == 0 {
        return Err(domain("sample size must be at least 1"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(domain(format!("level must lie in (0, 1), got {level}")));
    }
    if estimates.len() != inv.matrix.nrows() {
        return Err(Error::Shape(format!(
            "{} estimates for a {}-parameter matrix",
            estimates.len(),
            inv.matrix.nrows()
        )));
    }
    let z = normal::quantile(0.5 + 0.5 * level)?;
    let mut lower = Vec::with_capacity(estimates.len());
    let mut upper = Vec::with_capacity(estimates.len());
    for (k, &est) in estimates.iter().enumerate() {
        let half = z * (inv.matrix[(k, k)].max(0.0) / n as f64).sqrt();
        lower.push(est - half);
        upper.push(est + half);
    }
    Ok(CiSet {
        labels: labels.to_vec(),
        estimates: estimates.to_vec(),
        lower,
        upper,
        level,
        n,
        singular: inv.singular,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expect::MPolicy;

    fn tf() -> ExpectSpec {
        ExpectSpec::new(Method::TrigammaFree, MPolicy::Tolerance(1e-16))
    }

    #[test]
    fn inverse_of_simple_matrices() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert_eq!(invert(&id).unwrap().matrix, id);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]));
        let inv = invert(&d).unwrap();
        assert!((inv.matrix[(0, 0)] - 0.25).abs() < 1e-15);
        assert!((inv.matrix[(1, 1)] - 1.0 / 9.0).abs() < 1e-15);
        assert!(!inv.singular);
        assert!((inv.condition - 2.25).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_is_flagged() {
        let f = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let inv = invert(&f).unwrap();
        assert!(inv.singular);
        // Pseudo-inverse of the rank-one all-ones matrix.
        for v in inv.matrix.iter() {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn frobenius_and_ci_change() {
        let a = DMatrix::from_element(2, 2, 3.0);
        let b = DMatrix::from_element(2, 2, 2.0);
        assert_eq!(frobenius_distance(&a, &b).unwrap(), 2.0);
        assert_eq!(frobenius_distance(&a, &a).unwrap(), 0.0);
        assert!(frobenius_distance(&a, &DMatrix::zeros(3, 3)).is_err());
        let x = DMatrix::from_row_slice(2, 2, &[4.0, 0.5, 0.5, 1.0]);
        let y = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        assert_eq!(max_ci_length_change(&x, &y).unwrap(), 1.0);
        assert_eq!(max_ci_length_change(&x, &x).unwrap(), 0.0);
        let bad = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        assert!(max_ci_length_change(&bad, &y).is_err());
    }

    #[test]
    fn wald_half_width() {
        let f = FisherMatrix {
            labels: vec!["a".into(), "b".into()],
            entries: DMatrix::identity(2, 2),
            method: Method::TrigammaFree,
            m: 0,
        };
        let ci = wald_ci(&[0.0, 1.0], &f, 1, 0.95).unwrap();
        assert!((ci.upper[0] - 1.959964).abs() < 1e-6);
        assert!((ci.upper[1] - ci.lower[1] - 2.0 * 1.959964).abs() < 1e-6);
        let ci4 = wald_ci(&[0.0, 1.0], &f, 2, 0.95).unwrap();
        assert!((ci.upper[0] / ci4.upper[0] - 2f64.sqrt()).abs() < 1e-12);
        assert!(wald_ci(&[0.0], &f, 1, 0.95).is_err());
    }

    #[test]
    fn hurdle_is_block_diagonal() {
        let base = CountModel::nb(10.0, 0.1).unwrap();
        let f = fim_hurdle(0.4, &base, &tf()).unwrap();
        assert_eq!(f.labels, ["phi", "nu", "p"]);
        for k in 1..3 {
            assert_eq!(f.entries[(0, k)], 0.0);
            assert_eq!(f.entries[(k, 0)], 0.0);
        }
        assert!((f.entries[(0, 0)] - 1.0 / 0.24).abs() < 1e-12);
    }

    #[test]
    fn deterministic_beyond_tolerance() {
        let at = |m| fim_zinb(0.4, 10.0, 0.1, &ExpectSpec::new(Method::TrigammaFree, MPolicy::Fixed(m))).unwrap();
        let a = at(1000);
        assert_eq!(a.entries, at(5000).entries);
        assert_eq!(a.entries, at(20_000).entries);
        assert_ne!(a.entries, at(150).entries);
    }

    #[test]
    fn unsupported_families() {
        let b = CountModel::binomial(4, 0.5).unwrap();
        assert!(matches!(fim(&b, &tf()), Err(Error::Unsupported(_))));
        assert!(fim_zinb(1.0, 10.0, 0.1, &tf()).is_err());
        assert!(fim_nb(0.0, 0.5, &tf()).is_err());
    }
}
