//! Study harness for the `trigfree` library: expectation queries, error and
//! sensitivity studies, Fisher-information simulations, benchmarks and
//! regression fits on CSV data, all with seeded, worker-count-invariant output.

pub mod bench;
pub mod compare;
pub mod config;
pub mod error;
pub mod expect_cmd;
pub mod fim_sim;
pub mod ingest;
pub mod output;
pub mod regress;
pub mod sensitivity;
pub mod synthetic;

pub use error::{CliError, Result};
