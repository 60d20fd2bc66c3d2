#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod clusters;
pub mod combinatorics;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod models;
pub mod pauli;
pub mod schedule;

pub use error::{Error, Result};
