//! Loosely coupled INS/GNSS navigation with a GNSS-derived acceleration update.
//!
//! The filter is a fifteen-state error-state EKF driven by a strapdown
//! mechanization. Besides the usual GNSS position update it can fuse an
//! acceleration measurement obtained by least-squares fitting a quadratic to
//! the last few GNSS fixes; that measurement couples directly to attitude and
//! accelerometer-bias errors.

// Negated comparisons reject NaN inputs along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod ekf;
pub mod error;
pub mod eval;
pub mod geodesy;
pub mod gnss_accel;
pub mod io;
pub mod measurement;
pub mod pipeline;
pub mod simulator;
pub mod strapdown;

pub use error::{Error, Result};
