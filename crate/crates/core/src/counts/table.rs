use serde::Serialize;

use super::{CountModel, SurvivalStream};
use crate::error::{Error, Result};

/// Largest `M` accepted by [`tail_table`] unless a different cap is given.
pub const DEFAULT_TABLE_CAP: u64 = 100_000_000;

/// Precomputed `pmf(y)` for `y = 0..=M` and `P(Y ≥ y)` for `y = 0..=M+1`.
///
/// `survival[i]` holds `P(Y > i − 1)`, so `survival[0] = 1` and
/// `survival[i] − survival[i+1] = pmf[i]`. `beyond` is `P(Y > M + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailTable {
    pub pmf: Vec<f64>,
    pub survival: Vec<f64>,
    pub beyond: f64,
}

impl TailTable {
    pub fn m(&self) -> u64 {
        self.pmf.len() as u64 - 1
    }

    /// `P(Y > y)` for `−1 ≤ y ≤ M + 1`.
    pub fn tail(&self, y: i64) -> Option<f64> {
        let i = usize::try_from(y + 1).ok()?;
        if i < self.survival.len() {
            Some(self.survival[i])
        } else if i == self.survival.len() {
            Some(self.beyond)
        } else {
            None
        }
    }
}

/// Builds the table for `model` up to `m`, refusing `m > cap`.
pub fn tail_table(model: &CountModel, m: u64, cap: u64) -> Result<TailTable> {
    if m > cap {
        return Err(Error::Resource(format!("table size {m} exceeds cap {cap}")));
    }
    let len = m as usize + 1;
    let mut pmf = Vec::with_capacity(len);
    let mut survival = Vec::with_capacity(len + 1);
    survival.push(1.0);
    let mut stream = SurvivalStream::new(model);
    for _ in 0..len {
        let (p, s) = stream.next_pair();
        pmf.push(p);
        survival.push(s);
    }
    let beyond = stream.next_pair().1;
    Ok(TailTable { pmf, survival, beyond })
}
