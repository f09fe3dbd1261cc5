//! Identification of abnormal spatio-temporal sources in 1-D linear parabolic
//! systems from pointwise measurements.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod harness;
pub mod io;
pub mod lmi;
pub mod observer;
pub mod pde;
pub mod reduction;
pub mod series;
pub mod simulator;
pub mod spectral;

pub use error::{Error, Result};
