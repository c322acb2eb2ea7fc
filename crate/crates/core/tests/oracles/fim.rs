//! Fisher-information oracles: per-observation scores and second
//! derivatives summed over a truncated support, in double and double-double
//! precision.

use nalgebra::DMatrix;
use trigfree::expect::{ExpectSpec, MPolicy, Method};
use trigfree::fisher::fim;
use trigfree::specfun::digamma;
use trigfree::CountModel;

use super::*;
#[derive(Clone, Copy, Debug)]
pub enum Fam {
    Nb,
    Bnb,
    Zinb,
    Zibnb,
    Zanb,
    Zabnb,
}

pub fn dg(x: f64) -> f64 {
    digamma(x).unwrap()
}

pub fn base_is_nb(f: Fam) -> bool {
    matches!(f, Fam::Nb | Fam::Zinb | Fam::Zanb)
}

pub fn has_phi(f: Fam) -> bool {
    !matches!(f, Fam::Nb | Fam::Bnb)
}

pub fn base_ln_pmf(nb: bool, t: &[f64], y: u64) -> f64 {
    if nb { nb_ln_pmf(t[0], t[1], y) } else { bnb_ln_pmf(t[0], t[1], t[2], y) }
}

pub fn base_score(nb: bool, t: &[f64], y: u64) -> Vec<f64> {
    let yf = y as f64;
    if nb {
        let (nu, p) = (t[0], t[1]);
        vec![dg(nu + yf) - dg(nu) + p.ln(), nu / p - yf / (1.0 - p)]
    } else {
        let (nu, a, b) = (t[0], t[1], t[2]);
        let common = dg(nu + a) - dg(nu + a + b + yf);
        vec![
            dg(nu + yf) - dg(nu) + common,
            common - dg(a) + dg(a + b),
            dg(b + yf) - dg(nu + a + b + yf) - dg(b) + dg(a + b),
        ]
    }
}

pub fn ln_pmf(f: Fam, th: &[f64], y: u64) -> f64 {
    let nb = base_is_nb(f);
    if !has_phi(f) {
        return base_ln_pmf(nb, th, y);
    }
    let (phi, t) = (th[0], &th[1..]);
    let g0 = base_ln_pmf(nb, t, 0).exp();
    match f {
        Fam::Zinb | Fam::Zibnb => {
            if y == 0 { (phi + (1.0 - phi) * g0).ln() } else { (1.0 - phi).ln() + base_ln_pmf(nb, t, y) }
        }
        _ => {
            if y == 0 { phi.ln() } else { (1.0 - phi).ln() + base_ln_pmf(nb, t, y) - (1.0 - g0).ln() }
        }
    }
}

pub fn score(f: Fam, th: &[f64], y: u64) -> Vec<f64> {
    let nb = base_is_nb(f);
    if !has_phi(f) {
        return base_score(nb, th, y);
    }
    let (phi, t) = (th[0], &th[1..]);
    let g0 = base_ln_pmf(nb, t, 0).exp();
    let s0 = base_score(nb, t, 0);
    let mut out = Vec::with_capacity(th.len());
    match (f, y) {
        (Fam::Zinb | Fam::Zibnb, 0) => {
            let f0 = phi + (1.0 - phi) * g0;
            out.push((1.0 - g0) / f0);
            out.extend(s0.iter().map(|d| (1.0 - phi) * g0 * d / f0));
        }
        (Fam::Zinb | Fam::Zibnb, _) => {
            out.push(-1.0 / (1.0 - phi));
            out.extend(base_score(nb, t, y));
        }
        (_, 0) => {
            out.push(1.0 / phi);
            out.extend(std::iter::repeat_n(0.0, t.len()));
        }
        _ => {
            out.push(-1.0 / (1.0 - phi));
            let s = base_score(nb, t, y);
            out.extend(s.iter().zip(&s0).map(|(a, b)| a + g0 * b / (1.0 - g0)));
        }
    }
    out
}

/// `Σ_y pmf(y)·v(y)` over a truncated support, entrywise.
pub fn expect_matrix(f: Fam, th: &[f64], v: impl Fn(u64) -> DMatrix<f64>) -> DMatrix<f64> {
    let d = th.len();
    let mut acc = vec![vec![0.0; 0]; d * d];
    let mut biggest = 0.0f64;
    let mut quiet = 0;
    for y in 0..1_000_000u64 {
        let p = ln_pmf(f, th, y).exp();
        let m = v(y) * p;
        let mag = m.amax();
        for (k, x) in m.iter().enumerate() {
            acc[k].push(*x);
        }
        biggest = biggest.max(mag);
        quiet = if mag < 1e-20 * biggest { quiet + 1 } else { 0 };
        if quiet > 200 {
            break;
        }
    }
    DMatrix::from_iterator(d, d, acc.into_iter().map(|c| kahan(c.into_iter().rev())))
}

pub fn outer_oracle(f: Fam, th: &[f64]) -> DMatrix<f64> {
    expect_matrix(f, th, |y| {
        let s = nalgebra::DVector::from_vec(score(f, th, y));
        &s * s.transpose()
    })
}

pub fn hessian_oracle(f: Fam, th: &[f64]) -> DMatrix<f64> {
    let d = th.len();
    expect_matrix(f, th, |y| {
        let mut h = DMatrix::zeros(d, d);
        for j in 0..d {
            let step = 1e-5 * th[j];
            let mut up = th.to_vec();
            let mut dn = th.to_vec();
            up[j] += step;
            dn[j] -= step;
            let (su, sd) = (score(f, &up, y), score(f, &dn, y));
            for i in 0..d {
                h[(i, j)] = -(su[i] - sd[i]) / (2.0 * step);
            }
        }
        h
    })
}

pub fn model(f: Fam, th: &[f64]) -> CountModel {
    let base = |t: &[f64]| {
        if base_is_nb(f) { CountModel::nb(t[0], t[1]).unwrap() } else { CountModel::bnb(t[0], t[1], t[2]).unwrap() }
    };
    match f {
        Fam::Nb | Fam::Bnb => base(th),
        Fam::Zinb | Fam::Zibnb => CountModel::zero_inflated(th[0], base(&th[1..])).unwrap(),
        Fam::Zanb | Fam::Zabnb => CountModel::hurdle(th[0], base(&th[1..])).unwrap(),
    }
}

pub fn spec() -> ExpectSpec {
    ExpectSpec::new(Method::TrigammaFree, MPolicy::Tolerance(1e-16))
}

pub fn assert_entrywise(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64, what: &str) {
    for (x, y) in a.iter().zip(b.iter()) {
        let ok = if *x == 0.0 || *y == 0.0 { (x - y).abs() <= 1e-12 * a.amax() } else { rel(*x, *y) <= tol };
        assert!(ok, "{what}: {x} vs {y}\nanalytic {a}\noracle {b}");
    }
}

/// Compares on the scale `sqrt(a_ii·a_jj)`, for entries that come out of
/// heavy cancellation in a double-precision oracle.
pub fn assert_scaled(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64, what: &str) {
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let scale = (a[(i, i)] * a[(j, j)]).sqrt();
            assert!((a[(i, j)] - b[(i, j)]).abs() <= tol * scale, "{what} ({i},{j}): {} vs {}", a[(i, j)], b[(i, j)]);
        }
    }
}

pub fn check(f: Fam, th: &[f64], tol: f64) {
    let m = model(f, th);
    let analytic = fim(&m, &spec()).unwrap().entries;
    let outer = outer_oracle(f, th);
    let hess = hessian_oracle(f, th);
    assert_entrywise(&analytic, &outer, tol, &format!("{f:?} outer"));
    assert_entrywise(&hess, &outer, tol, &format!("{f:?} hessian identity"));
}

/// Double-double score outer product for the NB-based families with integer
/// `ν`, where `p^ν` and the digamma differences `Σ_{k<y} 1/(ν+k)` are exact
/// finite operations.
pub mod dd {
    use nalgebra::DMatrix;
    use std::ops::{Add, AddAssign, Div, Mul, Sub};

    /// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
    #[derive(Clone, Copy, Debug)]
    pub struct T {
        hi: f64,
        lo: f64,
    }

    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    }

    fn norm(hi: f64, lo: f64) -> T {
        let s = hi + lo;
        T { hi: s, lo: lo - (s - hi) }
    }

    pub fn t(x: f64) -> T {
        T { hi: x, lo: 0.0 }
    }

    impl T {
        pub fn hi(self) -> f64 {
            self.hi
        }
    }

    impl Add for T {
        type Output = T;
        fn add(self, o: T) -> T {
            let (s, e) = two_sum(self.hi, o.hi);
            let (t2, f) = two_sum(self.lo, o.lo);
            let (s, e) = {
                let e = e + t2;
                let n = norm(s, e);
                (n.hi, n.lo + f)
            };
            norm(s, e)
        }
    }

    impl Sub for T {
        type Output = T;
        fn sub(self, o: T) -> T {
            self + T { hi: -o.hi, lo: -o.lo }
        }
    }

    impl Mul for T {
        type Output = T;
        fn mul(self, o: T) -> T {
            let p = self.hi * o.hi;
            let e = self.hi.mul_add(o.hi, -p) + (self.hi * o.lo + self.lo * o.hi);
            norm(p, e)
        }
    }

    impl Div for T {
        type Output = T;
        fn div(self, o: T) -> T {
            let q1 = self.hi / o.hi;
            let r = self - o * t(q1);
            let q2 = r.hi / o.hi;
            let r = r - o * t(q2);
            let q3 = r.hi / o.hi;
            let n = norm(q1, q2);
            n + t(q3)
        }
    }

    impl AddAssign for T {
        fn add_assign(&mut self, o: T) {
            *self = *self + o;
        }
    }

    impl Add<f64> for T {
        type Output = T;
        fn add(self, o: f64) -> T {
            self + t(o)
        }
    }

    impl Sub<f64> for T {
        type Output = T;
        fn sub(self, o: f64) -> T {
            self - t(o)
        }
    }

    impl Mul<f64> for T {
        type Output = T;
        fn mul(self, o: f64) -> T {
            self * t(o)
        }
    }

    impl Div<f64> for T {
        type Output = T;
        fn div(self, o: f64) -> T {
            self / t(o)
        }
    }

    /// `ln x` from the atanh series.
    fn ln(x: T) -> T {
        let z = (x - 1.0) / (x + 1.0);
        let z2 = z * z;
        let mut pow = z;
        let mut acc = t(0.0);
        for k in 0..4000 {
            let term = pow / (2.0 * k as f64 + 1.0);
            acc += term;
            if term.hi().abs() < 1e-36 {
                break;
            }
            pow = pow * z2;
        }
        acc * 2.0
    }

    /// `kind`: 0 plain NB, 1 zero-inflated, 2 hurdle.
    pub fn outer(kind: u8, phi: f64, nu: u32, p: f64) -> DMatrix<f64> {
        let (pd, nud) = (t(p), t(nu as f64));
        let q = t(1.0) - pd;
        let lp = ln(pd);
        let mut g0 = t(1.0);
        for _ in 0..nu {
            g0 = g0 * pd;
        }
        let s_g = |h: T, y: f64| [h + lp, nud / pd - t(y) / q];
        let d = if kind == 0 { 2 } else { 3 };
        let mut acc = vec![t(0.0); d * d];
        let mut add = |w: T, s: &[T]| {
            for i in 0..d {
                for j in 0..d {
                    acc[i * d + j] += w * s[i] * s[j];
                }
            }
        };
        let phi = t(phi);
        let one_m = t(1.0) - phi;
        let s0 = s_g(t(0.0), 0.0);
        match kind {
            0 => add(g0, &s0),
            1 => {
                let f0 = phi + one_m * g0;
                add(f0, &[(t(1.0) - g0) / f0, one_m * g0 * s0[0] / f0, one_m * g0 * s0[1] / f0]);
            }
            _ => add(phi, &[t(1.0) / phi, t(0.0), t(0.0)]),
        }
        let mut g = g0;
        let mut h = t(0.0);
        let mut peak = 0.0f64;
        for y in 1..1_000_000u32 {
            let k = (y - 1) as f64;
            g = g * (nud + k) * q / (k + 1.0);
            h += t(1.0) / (nud + k);
            let s = s_g(h, y as f64);
            let size = (g * (s[1] * s[1] + s[0] * s[0] + 1.0)).hi();
            peak = peak.max(size);
            match kind {
                0 => add(g, &s),
                1 => add(one_m * g, &[t(-1.0) / one_m, s[0], s[1]]),
                _ => {
                    let c = g0 / (t(1.0) - g0);
                    add(one_m * g / (t(1.0) - g0), &[t(-1.0) / one_m, s[0] + c * s0[0], s[1] + c * s0[1]]);
                }
            }
            if size < 1e-40 * peak {
                break;
            }
        }
        DMatrix::from_row_iterator(d, d, acc.into_iter().map(T::hi))
    }

    /// `−E[∂² ln f(Y)]` from hand-derived per-observation second derivatives;
    /// `kind`: 0 plain NB, 1 zero-inflated.
    pub fn neg_hessian(kind: u8, phi: f64, nu: u32, p: f64) -> DMatrix<f64> {
        let (pd, nud) = (t(p), t(nu as f64));
        let q = t(1.0) - pd;
        let lp = ln(pd);
        let mut g0 = t(1.0);
        for _ in 0..nu {
            g0 = g0 * pd;
        }
        // Second derivatives of ln g(y) in (ν, p), given Σ_{k<y} 1/(ν+k)².
        let h_g = |tri: T, y: f64| [[t(0.0) - tri, t(1.0) / pd], [t(1.0) / pd, t(0.0) - nud / (pd * pd) - t(y) / (q * q)]];
        let d = if kind == 0 { 2 } else { 3 };
        let off = d - 2;
        let mut acc = vec![t(0.0); d * d];
        let mut add = |w: T, h: &[Vec<T>]| {
            for i in 0..d {
                for j in 0..d {
                    acc[i * d + j] = acc[i * d + j] - w * h[i][j];
                }
            }
        };
        let phi = t(phi);
        let one_m = t(1.0) - phi;
        let h0 = h_g(t(0.0), 0.0);
        if kind == 0 {
            add(g0, &[h0[0].to_vec(), h0[1].to_vec()]);
        } else {
            let f0 = phi + one_m * g0;
            let f2 = f0 * f0;
            let dv = [lp, nud / pd];
            let mut h = vec![vec![t(0.0); 3]; 3];
            let r = t(1.0) - g0;
            h[0][0] = t(0.0) - r * r / f2;
            for j in 0..2 {
                h[0][j + 1] = t(0.0) - g0 * dv[j] / f2;
                h[j + 1][0] = h[0][j + 1];
                for i in 0..2 {
                    h[i + 1][j + 1] = one_m * g0 * (phi * dv[i] * dv[j] + f0 * h0[i][j]) / f2;
                }
            }
            add(f0, &h);
        }
        let mut g = g0;
        let mut tri = t(0.0);
        let mut peak = 0.0f64;
        for y in 1..1_000_000u32 {
            let k = (y - 1) as f64;
            g = g * (nud + k) * q / (k + 1.0);
            let inv = t(1.0) / (nud + k);
            tri += inv * inv;
            let hg = h_g(tri, y as f64);
            let mut h = vec![vec![t(0.0); d]; d];
            for i in 0..2 {
                for j in 0..2 {
                    h[i + off][j + off] = hg[i][j];
                }
            }
            let size = (g * (hg[1][1].hi().abs() + 1.0)).hi();
            peak = peak.max(size);
            if kind == 0 {
                add(g, &h);
            } else {
                h[0][0] = t(-1.0) / (one_m * one_m);
                add(one_m * g, &h);
            }
            if size < 1e-40 * peak {
                break;
            }
        }
        DMatrix::from_row_iterator(d, d, acc.into_iter().map(T::hi))
    }
}
