//! Reference computations shared by the integration tests. They rebuild pmfs
//! and survival sequences from the public log-gamma, without the library's
//! streaming code.
#![allow(dead_code)]

use trigfree::specfun::{digamma, ln_gamma, trigamma};

pub mod fim;

fn lg(x: f64) -> f64 {
    ln_gamma(x).unwrap()
}

pub fn nb_ln_pmf(nu: f64, p: f64, y: u64) -> f64 {
    let y = y as f64;
    lg(nu + y) - lg(y + 1.0) - lg(nu) + nu * p.ln() + y * (1.0 - p).ln()
}

pub fn bnb_ln_pmf(nu: f64, a: f64, b: f64, y: u64) -> f64 {
    let y = y as f64;
    lg(nu + y) - lg(y + 1.0) - lg(nu) + lg(nu + a) + lg(b + y) - lg(nu + a + b + y) - lg(a) - lg(b)
        + lg(a + b)
}

/// `C(n, y)` as a running product of `(n − y + k)/k`.
fn choose(n: u64, y: u64) -> f64 {
    let y = y.min(n - y);
    (1..=y).fold(1.0, |acc, k| acc * (n - y + k) as f64 / k as f64)
}

pub fn binomial_pmf(n: u64, p: f64, y: u64) -> f64 {
    if y > n {
        return 0.0;
    }
    choose(n, y) * p.powi(y as i32) * (1.0 - p).powi((n - y) as i32)
}

/// Pochhammer product form, `C(n,y) (a)_y (b)_{n−y} / (a+b)_n`, one factor at a time.
pub fn beta_binomial_pmf(n: u64, a: f64, b: f64, y: u64) -> f64 {
    if y > n {
        return 0.0;
    }
    let head = (0..y).fold(1.0, |acc, k| acc * (a + k as f64) / (a + b + k as f64));
    let tail = (0..n - y).fold(1.0, |acc, k| acc * (b + k as f64) / (a + b + (y + k) as f64));
    choose(n, y) * head * tail
}

/// Kahan sum.
pub fn kahan(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for x in xs {
        let y = x - c;
        let t = s + y;
        c = (t - s) - y;
        s = t;
    }
    s
}

/// `P(Y > y)` for `y = 0..len` from a pmf vector covering essentially all mass,
/// accumulated backwards from the far end.
pub fn survival_from_pmf(pmf: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; pmf.len()];
    let mut acc = 0.0f64;
    let mut c = 0.0f64;
    for i in (0..pmf.len()).rev() {
        out[i] = acc;
        let y = pmf[i] - c;
        let t = acc + y;
        c = (t - acc) - y;
        acc = t;
    }
    out
}

/// `Σ_y pmf(y)·Ψ₁(ν + y)` by direct enumeration.
pub fn enumerate_psi1(nu: f64, pmf: &[f64]) -> f64 {
    kahan(pmf.iter().enumerate().map(|(y, &p)| p * trigamma(nu + y as f64).unwrap()))
}

pub fn enumerate_psi(nu: f64, pmf: &[f64]) -> f64 {
    kahan(pmf.iter().enumerate().map(|(y, &p)| p * digamma(nu + y as f64).unwrap()))
}

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(a.abs())
    }
}
