//! Approximate message passing for matrix tensor product models.
//!
//! The crate covers observation synthesis ([`model`]), posterior-mean
//! denoisers ([`denoise`]), the AMP engine ([`amp`]), its state evolution
//! ([`se`]), stability of SE fixed points ([`stability`]) and the
//! fundamental-limits solver for heteroskedastic rank-one models
//! ([`limits`]).
//!
//! Large arrays (signals, observations, iterates) are generic over
//! [`Real`], implemented for `f32` and `f64`. Small `d×d` quantities are
//! always `f64`.

pub mod amp;
pub mod denoise;
pub mod error;
pub mod model;
pub mod limits;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod se;
pub mod stability;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision matrix, the default storage for large arrays.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Single-precision matrix.
pub type Matrix32 = nalgebra::DMatrix<f32>;
/// Double-precision MTP instance.
pub type Instance = model::MtpInstance<f64>;
/// Single-precision MTP instance.
pub type Instance32 = model::MtpInstance<f32>;
