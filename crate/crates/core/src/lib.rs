// negated float comparisons are deliberate: they reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod parallel;
pub mod riccati_lqt;
pub mod scenarios;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
pub use parallel::Execution;
