#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod api;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod matrix;
pub mod noise;
pub mod plot;
pub mod provisioner;
pub mod scenario;
pub mod sim;
pub mod trace;

pub use error::{Error, Result};
