// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod interferometer;
pub mod interp;
pub mod io;
pub mod noisemodel;
pub mod photoncount;
pub mod seed;
pub mod spectral;
pub mod synth;
pub mod trace;

pub use error::{Error, Result};
