use super::Flat;
use crate::specfun::{bd0, lbeta, lgamma, lgamma_diff, psi, stirlerr};

/// One of the four base families, with parameters already validated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Leaf {
    Nb { nu: f64, p: f64 },
    Bnb { nu: f64, alpha: f64, beta: f64 },
    Bin { n: u64, p: f64 },
    BetaBin { n: u64, alpha: f64, beta: f64 },
}

/// How the mass beyond a buffered block is accounted for.
pub(crate) enum TailKind {
    /// Support ends at `n`.
    Finite(u64),
    /// Ratios beyond the mode are bounded by a geometric sequence.
    Geometric,
    /// Polynomial decay; remainder from an Euler–Maclaurin expansion.
    PowerLaw,
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn ln_choose(n: u64, k: f64) -> f64 {
    let n = n as f64;
    lgamma(n + 1.0) - lgamma(k + 1.0) - lgamma(n - k + 1.0)
}

impl Leaf {
    pub fn flat(self) -> Flat {
        let lp0 = self.ln_pmf(0.0);
        Flat { leaf: self, p0: lp0.exp(), q0: -lp0.exp_m1(), c: 1.0 }
    }

    pub fn support_max(self) -> Option<u64> {
        match self {
            Leaf::Bin { n, .. } | Leaf::BetaBin { n, .. } => Some(n),
            _ => None,
        }
    }

    pub fn tail_kind(self) -> TailKind {
        match self {
            Leaf::Nb { .. } => TailKind::Geometric,
            Leaf::Bnb { .. } => TailKind::PowerLaw,
            Leaf::Bin { n, .. } | Leaf::BetaBin { n, .. } => TailKind::Finite(n),
        }
    }

    pub fn mean(self) -> f64 {
        match self {
            Leaf::Nb { nu, p } => nu * (1.0 - p) / p,
            Leaf::Bnb { nu, alpha, beta } => {
                if alpha > 1.0 {
                    nu * beta / (alpha - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            Leaf::Bin { n, p } => n as f64 * p,
            Leaf::BetaBin { n, alpha, beta } => n as f64 * alpha / (alpha + beta),
        }
    }

    /// Log pmf at a real argument `x ≥ 0` (the analytic continuation in `x`);
    /// `−∞` beyond a finite support.
    pub fn ln_pmf(self, x: f64) -> f64 {
        match self {
            Leaf::Nb { nu, p } => {
                if x == 0.0 {
                    return nu * p.ln();
                }
                // Saddle-point form of ν/(ν+x) · Binomial(ν; ν+x, p).
                let n = nu + x;
                let lc = stirlerr(n) - stirlerr(nu) - stirlerr(x) - bd0(nu, n * p) - bd0(x, n * (1.0 - p));
                let lf = 2.0 * LN_SQRT_2PI + nu.ln() + (x / n).ln();
                (nu / n).ln() + lc - 0.5 * lf
            }
            Leaf::Bnb { nu, alpha, beta } => {
                lgamma_diff(x + 1.0, nu - 1.0) - lgamma(nu)
                    + lgamma_diff(nu + alpha + beta + x, -(nu + alpha))
                    + lgamma(nu + alpha)
                    - lbeta(alpha, beta)
            }
            Leaf::Bin { n, p } => {
                if x > n as f64 {
                    return f64::NEG_INFINITY;
                }
                ln_choose(n, x) + x * p.ln() + (n as f64 - x) * (-p).ln_1p()
            }
            Leaf::BetaBin { n, alpha, beta } => {
                if x > n as f64 {
                    return f64::NEG_INFINITY;
                }
                ln_choose(n, x) + lbeta(x + alpha, n as f64 - x + beta) - lbeta(alpha, beta)
            }
        }
    }

    /// `pmf(k + 1) / pmf(k)`.
    #[inline]
    pub fn ratio(self, k: u64) -> f64 {
        let kf = k as f64;
        match self {
            Leaf::Nb { nu, p } => (nu + kf) * (1.0 - p) / (kf + 1.0),
            Leaf::Bnb { nu, alpha, beta } => {
                (nu + kf) * (beta + kf) / ((kf + 1.0) * (nu + alpha + beta + kf))
            }
            Leaf::Bin { n, p } => {
                if k >= n {
                    0.0
                } else {
                    (n - k) as f64 * p / ((kf + 1.0) * (1.0 - p))
                }
            }
            Leaf::BetaBin { n, alpha, beta } => {
                if k >= n {
                    0.0
                } else {
                    (n - k) as f64 * (kf + alpha) / ((kf + 1.0) * ((n - k - 1) as f64 + beta))
                }
            }
        }
    }

    /// A bound on every ratio `pmf(j+1)/pmf(j)` for `j ≥ k`, valid once
    /// past the mode. Only meaningful for geometric tails.
    pub fn ratio_bound(self, k: u64) -> f64 {
        match self {
            Leaf::Nb { nu, p } if nu < 1.0 => 1.0 - p,
            _ => self.ratio(k),
        }
    }

    /// `Σ_{k ≥ K} pmf(k)` for a power-law tail, with an error estimate.
    ///
    /// Euler–Maclaurin with the integral split at `X = K·1e18`: the finite part
    /// is integrated in `s = ln(x/K)` by tanh-sinh quadrature and the rest from
    /// the leading power-law asymptote `C·x^{−α−1}`.
    pub fn power_tail(self, k_start: u64) -> (f64, f64) {
        let Leaf::Bnb { nu, alpha, beta } = self else {
            unreachable!("power-law tail only for the beta negative binomial")
        };
        let k = k_start as f64;
        let ln_k = k.ln();
        let span = 18.0 * std::f64::consts::LN_10;
        let integrand = |s: f64| (self.ln_pmf(k * s.exp()) + ln_k + s).exp();
        let (body, quad_err) = tanh_sinh(integrand, 0.0, span);

        let ln_c = lgamma(nu + alpha) - lgamma(nu) - lbeta(alpha, beta);
        let far = (ln_c - alpha * (ln_k + span)).exp() / alpha;
        let far_err = far * (nu * nu + alpha * alpha + beta * beta + 1.0) * (-span).exp() / k;

        let fk = self.ln_pmf(k).exp();
        let d1 = psi(nu + k) - psi(k + 1.0) + psi(beta + k) - psi(nu + alpha + beta + k);
        let f1 = fk * d1;
        let s = -k * d1;
        let f3 = -s * (s + 1.0) * (s + 2.0) * fk / (k * k * k);
        let f5 = s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * fk / k.powi(5);

        let rem = body + far + 0.5 * fk - f1 / 12.0 + f3 / 720.0;
        let err = quad_err + far_err + f3.abs() / 720.0 + f5.abs() / 30240.0 + 1e-15 * rem;
        (rem, err)
    }
}

/// Tanh-sinh quadrature of a smooth `f` over `[a, b]`; returns (value, error estimate).
pub(crate) fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    use std::f64::consts::FRAC_PI_2;
    let half = 0.5 * (b - a);
    let u_max = 4.5;
    // Node at parameter u: x = mid + half·tanh(π/2·sinh u).
    let node = |u: f64| {
        let w = FRAC_PI_2 * u.sinh();
        let ch = w.cosh();
        let weight = FRAC_PI_2 * u.cosh() / (ch * ch);
        // Distance to the nearer endpoint, kept exact for large |w|.
        let gap = half * 2.0 / (1.0 + (2.0 * w.abs()).exp());
        let x = if w >= 0.0 { b - gap } else { a + gap };
        (x, weight)
    };
    let eval = |u: f64| {
        let (x, weight) = node(u);
        if weight == 0.0 || x <= a || x >= b {
            0.0
        } else {
            weight * f(x)
        }
    };

    let mut h = 1.0;
    let mut total = eval(0.0);
    let mut j = 1;
    while (j as f64) * h <= u_max {
        let u = j as f64 * h;
        total += eval(u) + eval(-u);
        j += 1;
    }
    let mut estimate = half * h * total;
    let mut err = f64::INFINITY;
    for _ in 0..9 {
        h *= 0.5;
        let mut j = 1;
        while (j as f64) * h <= u_max {
            let u = j as f64 * h;
            total += eval(u) + eval(-u);
            j += 2;
        }
        let next = half * h * total;
        err = (next - estimate).abs();
        estimate = next;
        if err <= 1e-16 * estimate.abs() {
            break;
        }
    }
    (estimate, err)
}
