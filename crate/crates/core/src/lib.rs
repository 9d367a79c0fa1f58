//! Codebook-based direction estimation and user tracking for IRS-assisted
//! mmWave downlinks.
//!
//! The crate is organised bottom-up: [`geometry`] and [`channel`] model the
//! propagation environment, [`codebook`] builds separable IRS codebooks,
//! [`estimation`] recovers user directions from pilot measurements,
//! [`tracking`] extrapolates them over time, [`beamopt`] designs estimation
//! beam shapes and [`sim`] ties everything into the time-block protocol.

// `!(x > 0.0)` style checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamopt;
pub mod channel;
pub mod codebook;
pub mod error;
pub mod estimation;
pub mod geometry;
pub mod sim;
pub mod tracking;

pub use codebook::{BeamShape, Codebook, CodebookKind, Codeword};
pub use error::{Error, Result};
pub use geometry::{ArrayFrame, ArrayGeometry, AzEl, Direction, Position};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Converts dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts a linear power ratio to decibels.
pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Converts decibels to a linear power ratio.
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
