#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod coda;
pub mod error;
pub mod ets;
pub mod evaluate;
pub mod ingest;
pub mod model;
pub mod reconcile;
pub mod synth;

pub use error::{Error, Result};
