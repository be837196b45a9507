//! Monocentric standard urban model: closed forms, closed-city equilibrium,
//! synthetic gridded cities, and the gradient estimation pipeline that
//! recovers structural parameters from them.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod model;
pub mod quad;

pub use error::{Error, Result};
pub mod grid;
pub mod transport;
pub mod econo;
pub mod cityforge;
pub mod gradient;
pub mod crosscity;
pub mod landcover;
pub mod io;
pub mod config;
pub mod pipeline;
pub mod report;
