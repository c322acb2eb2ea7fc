//! Sequential `(pmf(y), P(Y > y))` generation with tail-accurate survival.
//!
//! The pmf is produced by the forward ratio recurrence, re-anchored from the
//! direct log-space formula at the start of every block. Survival values are
//! never formed as `1 − cumulative sum`: each block buffers the pmf ahead until
//! the mass beyond it is either zero (finite support), bounded geometrically, or
//! given by a power-law remainder, and survival is accumulated backwards from
//! there. Values are emitted only while the remainder's error is below `1e-16`
//! of the survival being emitted; then a new block starts.
//!
//! If a block cannot converge within [`BLOCK_CAP`] entries the stream switches
//! to running subtraction from that point on.

use super::leaf::{Leaf, TailKind};
use super::{CountModel, Flat};
use crate::summation::CompensatedSum;

/// Longest buffered block.
pub const BLOCK_CAP: usize = 1 << 20;

const GEOMETRIC_REL: f64 = 1e-32;
const EMIT_REL: f64 = 1e-16;
const MIN_POWER_START: u64 = 2048;
const MAX_POWER_BLOCK: u64 = 1 << 16;

/// Scaled pmf cursor: `pmf(k) = v·exp(ln_scale)`.
#[derive(Debug, Clone, Copy)]
struct Cursor {
    leaf: Leaf,
    k: u64,
    v: f64,
    ln_scale: f64,
    scale: f64,
}

impl Cursor {
    fn at(leaf: Leaf, k: u64) -> Self {
        let lp = leaf.ln_pmf(k as f64);
        Self { leaf, k, v: 1.0, ln_scale: lp, scale: lp.exp() }
    }

    #[inline]
    fn value(&self) -> f64 {
        if self.ln_scale == f64::NEG_INFINITY {
            0.0
        } else {
            self.v * self.scale
        }
    }

    #[inline]
    fn advance(&mut self) {
        self.v *= self.leaf.ratio(self.k);
        self.k += 1;
        if self.v != 0.0 && !(1e-32..=1e32).contains(&self.v) {
            self.ln_scale += self.v.ln();
            self.v = 1.0;
            self.scale = self.ln_scale.exp();
        }
    }
}

#[derive(Debug, Clone)]
enum Mode {
    Block,
    /// `S(y) = 1 − Σ_{k≤y} pmf(k)`; `bulk` streams go back to blocks once `S < ½`.
    Subtract { cursor: Cursor, surv: CompensatedSum, bulk: bool },
    Exhausted,
}

/// Leaf-level stream of `(pmf(y), S(y))` for `y = start, start+1, …`.
#[derive(Debug, Clone)]
struct LeafStream {
    leaf: Leaf,
    next_y: u64,
    pmf: Vec<f64>,
    surv: Vec<f64>,
    idx: usize,
    usable: usize,
    mode: Mode,
}

impl LeafStream {
    fn new(leaf: Leaf, start: u64) -> Self {
        Self {
            leaf,
            next_y: start,
            pmf: Vec::new(),
            surv: Vec::new(),
            idx: 0,
            usable: 0,
            mode: Mode::Block,
        }
    }

    #[inline]
    fn next(&mut self) -> (f64, f64) {
        match self.mode {
            Mode::Exhausted => return (0.0, 0.0),
            Mode::Subtract { .. } => return self.next_subtract(),
            Mode::Block => {}
        }
        if self.idx >= self.usable {
            self.refill();
            return self.next();
        }
        let out = (self.pmf[self.idx], self.surv[self.idx]);
        self.idx += 1;
        self.next_y += 1;
        out
    }

    fn next_subtract(&mut self) -> (f64, f64) {
        let Mode::Subtract { cursor, surv, bulk } = &mut self.mode else { unreachable!() };
        let p = cursor.value();
        surv.add(-p);
        cursor.advance();
        self.next_y += 1;
        let s = surv.value().max(0.0);
        if *bulk && s < 0.5 {
            self.mode = Mode::Block;
            self.idx = 0;
            self.usable = 0;
        }
        (p, s)
    }

    fn start_subtract(&mut self) {
        let (c, surv) = self.lower_sum();
        self.mode = Mode::Subtract { cursor: c, surv, bulk: false };
    }

    /// Cursor at `next_y` and `1 − P(Y < next_y)` summed up from zero.
    fn lower_sum(&self) -> (Cursor, CompensatedSum) {
        let mut surv = CompensatedSum::new();
        surv.add(1.0);
        let mut c = Cursor::at(self.leaf, 0);
        while c.k < self.next_y {
            surv.add(-c.value());
            c.advance();
        }
        (c, surv)
    }

    /// Whole finite support `0..=n` from ratio products, normalized to unit
    /// mass; keeps the entries from `pos` on.
    fn fill_normalized(&mut self, pos: u64, n: u64) {
        const BIG: f64 = 4.149515568880993e180; // 2^600
        const SHRINK: f64 = 2.409919865102884e-181; // 2^-600
        let mut w = Vec::with_capacity(n as usize + 1);
        let mut v = 1.0;
        w.push(v);
        for k in 0..n {
            v *= self.leaf.ratio(k);
            if v > BIG {
                w.iter_mut().for_each(|x| *x *= SHRINK);
                v *= SHRINK;
            }
            w.push(v);
        }
        let total: f64 = crate::summation::sum(w.iter().copied());
        self.pmf.clear();
        self.pmf.extend(w[pos as usize..].iter().map(|x| x / total));
        let m = self.pmf.len();
        self.surv.clear();
        self.surv.resize(m, 0.0);
        let mut acc = CompensatedSum::new();
        for i in (0..m).rev() {
            self.surv[i] = acc.value().min(1.0);
            acc.add(self.pmf[i]);
        }
        self.idx = 0;
        self.usable = m;
    }

    /// Builds the next block starting at `next_y`.
    fn refill(&mut self) {
        let pos = self.next_y;
        if let Some(n) = self.leaf.support_max() {
            if pos > n {
                self.mode = Mode::Exhausted;
                return;
            }
        }
        if let TailKind::Finite(n) = self.leaf.tail_kind() {
            if (n as usize) < BLOCK_CAP {
                self.fill_normalized(pos, n);
                return;
            }
        }
        // A pmf anchored far from zero carries the relative error of its
        // log-gamma terms, which dominates S(y) near one.
        if pos > 0 && self.pmf.is_empty() && !matches!(self.leaf.tail_kind(), TailKind::Finite(_)) {
            let (c, surv) = self.lower_sum();
            if surv.value() - c.value() >= 0.5 {
                self.mode = Mode::Subtract { cursor: c, surv, bulk: true };
                return;
            }
        }
        let mut cur = Cursor::at(self.leaf, pos);
        self.pmf.clear();
        self.pmf.push(cur.value());
        let mut ahead = 0.0; // Σ pmf beyond the first entry
        let (rem, rem_err) = match self.leaf.tail_kind() {
            TailKind::Finite(n) => {
                if (n - pos) as usize >= BLOCK_CAP {
                    self.start_subtract();
                    return;
                }
                while cur.k < n {
                    cur.advance();
                    let v = cur.value();
                    ahead += v;
                    self.pmf.push(v);
                }
                (0.0, 0.0)
            }
            TailKind::Geometric => loop {
                if self.pmf.len() >= BLOCK_CAP {
                    self.start_subtract();
                    return;
                }
                let r = self.leaf.ratio_bound(cur.k);
                let v = cur.value();
                if r < 1.0 {
                    let bound = v * r / (1.0 - r);
                    if bound <= GEOMETRIC_REL * ahead || (v == 0.0 && ahead == 0.0) {
                        break (0.0, bound);
                    }
                }
                cur.advance();
                let v = cur.value();
                ahead += v;
                self.pmf.push(v);
            },
            TailKind::PowerLaw => {
                let mut len = pos.clamp(MIN_POWER_START, MAX_POWER_BLOCK);
                loop {
                    while (self.pmf.len() as u64) <= len {
                        cur.advance();
                        let v = cur.value();
                        ahead += v;
                        self.pmf.push(v);
                    }
                    let (rem, err) = self.leaf.power_tail(cur.k + 1);
                    if rem >= err / EMIT_REL || self.pmf.len() >= BLOCK_CAP {
                        break (rem, err);
                    }
                    len *= 2;
                }
            }
        };

        // Backward accumulation: surv[i] = S(pos + i).
        let m = self.pmf.len();
        self.surv.clear();
        self.surv.resize(m, 0.0);
        let mut acc = CompensatedSum::new();
        acc.add(rem);
        for i in (0..m).rev() {
            self.surv[i] = acc.value().min(1.0);
            acc.add(self.pmf[i]);
        }
        let threshold = rem_err / EMIT_REL;
        let usable = self.surv.iter().take_while(|&&s| s >= threshold).count();
        let exhausted = ahead == 0.0 && self.pmf[0] == 0.0 && rem == 0.0 && rem_err == 0.0;
        if exhausted {
            self.mode = Mode::Exhausted;
            return;
        }
        if usable == 0 {
            self.start_subtract();
            return;
        }
        self.idx = 0;
        self.usable = usable;
    }
}

/// Stream of `(P(Y = y), P(Y > y))` for consecutive `y`.
///
/// Once the distribution's mass is exhausted (finite support, or the survival
/// underflows) the stream keeps yielding `(0, 0)`.
#[derive(Debug, Clone)]
pub struct SurvivalStream {
    flat: Flat,
    y: u64,
    inner: LeafStream,
}

impl SurvivalStream {
    pub fn new(model: &CountModel) -> Self {
        Self::starting_at(model, 0)
    }

    pub fn starting_at(model: &CountModel, y: u64) -> Self {
        let flat = model.flat();
        Self { flat, y, inner: LeafStream::new(flat.leaf, y) }
    }

    /// Next `y` to be produced.
    pub fn position(&self) -> u64 {
        self.y
    }

    /// `(pmf(y), S(y))` for the current `y`, then advances.
    #[inline]
    pub fn next_pair(&mut self) -> (f64, f64) {
        let (p, s) = self.inner.next();
        let f = &self.flat;
        let y = self.y;
        self.y += 1;
        if y == 0 {
            (f.p0, if f.c == 1.0 { s } else { f.c * s })
        } else if f.c == 1.0 {
            (p, s)
        } else {
            (f.c * p, f.c * s)
        }
    }
}

impl Iterator for SurvivalStream {
    type Item = (f64, f64);

    fn next(&mut self) -> Option<(f64, f64)> {
        Some(self.next_pair())
    }
}
