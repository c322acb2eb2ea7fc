//! Trigamma-free expectations of `Ψ₁(ν + Y)` and `Ψ(ν + Y)` for count
//! distributions, with error bounds, and their use in Fisher information and
//! maximum-likelihood inference for zero-inflated and hurdle count models.

pub mod counts;
pub mod expect;
pub mod fisher;
pub mod infer;
mod error;
pub mod normal;
pub mod rng;
pub mod specfun;
pub mod summation;

pub use counts::CountModel;
pub use error::{Error, Result};
