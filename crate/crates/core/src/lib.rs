//! Fifth-order Boussinesq system on a bounded interval with delayed boundary
//! feedback: discretization, time stepping, energy tracking and decay
//! certificates.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod banded;
pub mod certificate;
pub mod config;
pub mod energy;
pub mod error;
pub mod harness;
pub mod history;
pub mod interp;
pub mod mms;
pub mod operators;
pub mod params;
pub mod stepper;

pub use error::{Error, Result};
