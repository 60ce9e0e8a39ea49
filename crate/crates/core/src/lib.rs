//! Concurrent-learning depth observers for a moving monocular camera tracking
//! a static feature point.

// `!(x > 0.0)` is used deliberately so NaN is rejected along with the bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod derivative;
pub mod dynamics;
pub mod error;
pub mod excitation;
pub mod figures;
pub mod integrate;
pub mod io;
pub mod metrics;
pub mod noise;
pub mod observers;
pub mod scenario;
pub mod truth;

pub use error::{Error, Result};
