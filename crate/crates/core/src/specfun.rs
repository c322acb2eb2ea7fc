//! Log-gamma, log-beta, digamma and trigamma for positive real arguments.
//!
//! All three gamma-family functions share one code path: the argument is
//! shifted upward with the unit recurrences until it reaches
//! [`ASYMPTOTIC_THRESHOLD`], the Bernoulli-number asymptotic series is evaluated
//! there, and the recurrence corrections are applied smallest-first.
//!
//! Trigamma evaluations are tallied per thread; see [`counter`].

use crate::error::{domain, Result};

/// Shift target for the asymptotic series.
pub const ASYMPTOTIC_THRESHOLD: f64 = 10.0;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// A strictly positive, finite argument.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RealArg(f64);

impl RealArg {
    pub fn new(x: f64) -> Result<Self> {
        if x.is_finite() && x > 0.0 {
            Ok(Self(x))
        } else {
            Err(domain(format!("argument must be positive and finite, got {x}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for RealArg {
    type Error = crate::Error;

    fn try_from(x: f64) -> Result<Self> {
        Self::new(x)
    }
}

/// `ln Γ(x)`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    Ok(lgamma(RealArg::new(x)?.get()))
}

/// `ln B(a, b) = ln Γ(a) + ln Γ(b) − ln Γ(a + b)`.
pub fn ln_beta(a: f64, b: f64) -> Result<f64> {
    let a = RealArg::new(a)?.get();
    let b = RealArg::new(b)?.get();
    Ok(lbeta(a, b))
}

/// Digamma `Ψ(x) = Γ'(x)/Γ(x)`.
pub fn digamma(x: f64) -> Result<f64> {
    Ok(psi(RealArg::new(x)?.get()))
}

/// Trigamma `Ψ₁(x) = Ψ'(x)`. Each call is counted by [`counter`].
pub fn trigamma(x: f64) -> Result<f64> {
    Ok(psi1(RealArg::new(x)?.get()))
}

/// Number of unit shifts needed to bring `x` up to the asymptotic region.
#[inline]
fn shifts(x: f64) -> u32 {
    if x >= ASYMPTOTIC_THRESHOLD {
        0
    } else {
        (ASYMPTOTIC_THRESHOLD - x).ceil() as u32
    }
}

/// Stirling correction `ln Γ(z) − [(z − ½) ln z − z + ½ ln 2π]` for `z ≥ 10`.
#[inline]
fn stirling_correction(z: f64) -> f64 {
    let r = 1.0 / z;
    let w = r * r;
    r * (1.0 / 12.0
        - w * (1.0 / 360.0
            - w * (1.0 / 1260.0
                - w * (1.0 / 1680.0
                    - w * (1.0 / 1188.0 - w * (691.0 / 360_360.0 - w / 156.0))))))
}

/// Taylor coefficients of `ln Γ(2 + z)` from `z²` on: `(−1)^k (ζ(k) − 1)/k`.
const LGAMMA2_TAYLOR: [f64; 31] = [
    3.2246703342411321824e-1,
    -6.7352301053198095133e-2,
    2.0580808427784547879e-2,
    -7.3855510286739852663e-3,
    2.8905103307415232858e-3,
    -1.1927539117032609771e-3,
    5.0966952474304242234e-4,
    -2.2315475845357937976e-4,
    9.9457512781808533715e-5,
    -4.49262367381331417e-5,
    2.0507212775670691553e-5,
    -9.439488275268395904e-6,
    4.3748667899074878042e-6,
    -2.0392157538013662368e-6,
    9.5514121304074198329e-7,
    -4.4924691987645660433e-7,
    2.1207184805554665869e-7,
    -1.0043224823968099609e-7,
    4.7698101693639805658e-8,
    -2.271109460894316491e-8,
    1.0838659214896954091e-8,
    -5.1834750419700466551e-9,
    2.4836745438024783172e-9,
    -1.1921401405860912074e-9,
    5.7313672416788620133e-10,
    -2.7595228851242331452e-10,
    1.3304764374244489481e-10,
    -6.4229645638381000221e-11,
    3.1044247747322272762e-11,
    -1.5021384080754142171e-11,
    7.2759744802390796625e-12,
];

/// `ln Γ(2 + z)` for `|z| ≤ ½`, exact zero at `z = 0`.
fn lgamma_near_two(z: f64) -> f64 {
    const ONE_MINUS_EULER: f64 = 0.422_784_335_098_467_1;
    let tail = LGAMMA2_TAYLOR.iter().rev().fold(0.0, |acc, &c| acc * z + c);
    z * (ONE_MINUS_EULER + z * tail)
}

pub(crate) fn lgamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 0.5 {
        return lgamma(x + 1.0) - x.ln();
    }
    if x < 1.5 {
        return lgamma_near_two(x - 1.0) - x.ln();
    }
    if x <= 2.5 {
        return lgamma_near_two(x - 2.0);
    }
    let n = shifts(x);
    let mut prod = 1.0;
    for k in 0..n {
        prod *= x + f64::from(k);
    }
    let z = x + f64::from(n);
    let head = (z - 0.5) * z.ln() - z + LN_SQRT_2PI + stirling_correction(z);
    if n == 0 {
        head
    } else {
        head - prod.ln()
    }
}

/// `ln Γ(z) − [(z − ½) ln z − z + ½ ln 2π]` for any `z > 0`.
pub(crate) fn stirlerr(z: f64) -> f64 {
    if z >= ASYMPTOTIC_THRESHOLD {
        stirling_correction(z)
    } else {
        lgamma(z) - ((z - 0.5) * z.ln() - z + LN_SQRT_2PI)
    }
}

/// Deviance term `x ln(x/m) + m − x`, without cancellation when `x ≈ m`.
pub(crate) fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let v2 = v * v;
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        for j in 1..1000 {
            ej *= v2;
            let next = s + ej / f64::from(2 * j + 1);
            if next == s {
                break;
            }
            s = next;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

pub(crate) fn lbeta(a: f64, b: f64) -> f64 {
    lgamma(a) + lgamma(b) - lgamma(a + b)
}

/// `ln Γ(x + d) − ln Γ(x)`, stable when `x` is huge relative to `d`.
///
/// Requires `x > 0` and `x + d > 0`.
pub(crate) fn lgamma_diff(x: f64, d: f64) -> f64 {
    let y = x + d;
    debug_assert!(x > 0.0 && y > 0.0);
    if x.min(y) < ASYMPTOTIC_THRESHOLD {
        return lgamma(y) - lgamma(x);
    }
    d * x.ln() + (y - 0.5) * (d / x).ln_1p() - d + stirling_correction(y)
        - stirling_correction(x)
}

pub(crate) fn psi(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let n = shifts(x);
    let z = x + f64::from(n);
    let w = 1.0 / (z * z);
    let mut acc = z.ln()
        - 0.5 / z
        - w * (1.0 / 12.0
            - w * (1.0 / 120.0
                - w * (1.0 / 252.0
                    - w * (1.0 / 240.0
                        - w * (1.0 / 132.0 - w * (691.0 / 32_760.0 - w / 12.0))))));
    for k in (0..n).rev() {
        acc -= 1.0 / (x + f64::from(k));
    }
    acc
}

pub(crate) fn psi1(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    counter::bump();
    let n = shifts(x);
    let z = x + f64::from(n);
    let r = 1.0 / z;
    let w = r * r;
    let mut acc = r
        + 0.5 * w
        + r * w
            * (1.0 / 6.0
                - w * (1.0 / 30.0
                    - w * (1.0 / 42.0
                        - w * (1.0 / 30.0
                            - w * (5.0 / 66.0 - w * (691.0 / 2730.0 - w * 7.0 / 6.0))))));
    for k in (0..n).rev() {
        let t = x + f64::from(k);
        acc += 1.0 / (t * t);
    }
    acc
}

/// Per-thread tally of trigamma evaluations.
///
/// The count is thread-local, so concurrent work on other threads never
/// leaks into a measurement taken with [`counter::measure`].
pub mod counter {
    use std::cell::Cell;

    thread_local! {
        static CALLS: Cell<u64> = const { Cell::new(0) };
    }

    #[inline]
    pub(crate) fn bump() {
        CALLS.with(|c| c.set(c.get() + 1));
    }

    /// Total trigamma calls made on this thread so far.
    pub fn calls() -> u64 {
        CALLS.with(Cell::get)
    }

    /// Runs `f` and returns its result with the number of trigamma calls it made.
    pub fn measure<R>(f: impl FnOnce() -> R) -> (R, u64) {
        let start = calls();
        let out = f();
        (out, calls() - start)
    }
}
