//! Simulation toolkit for broadband squeezed vacuum from a below-threshold
//! optical parametric oscillator and its coherent phase control.
//!
//! The crate models the full signal chain of a squeezed-light source that is
//! phase-locked without a carrier-frequency seed: a frequency-shifted
//! quadrature control field propagates through the squeezer ([`opo`]),
//! photocurrents are synthesized and demodulated into the two servo error
//! signals ([`detection`]), the servo loops are closed in the time domain
//! ([`control`]), and detected squeezing levels are propagated through loss
//! and injection budgets for interferometric detectors ([`budget`]).
//!
//! Fields are handled at the expectation-value / Gaussian-variance level as
//! sideband pairs around an optical carrier ([`sideband`]); no operator
//! algebra is involved. Absolute field and photocurrent scales are arbitrary
//! throughout; only ratios, phases, and variances relative to shot noise
//! matter.

pub mod budget;
pub mod control;
pub mod detection;
pub mod error;
pub mod opo;
pub mod sideband;
pub mod signals;

pub use error::{Error, Result};

/// Variance ratio expressed in decibel, `10·log10(ratio)`.
pub fn db_from_ratio(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Inverse of [`db_from_ratio`].
pub fn ratio_from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db_round_trip() {
        for &v in &[1e-3, 0.25, 1.0, 3.98, 1e4] {
            assert!((ratio_from_db(db_from_ratio(v)) - v).abs() < 1e-12 * v);
        }
        assert_eq!(db_from_ratio(1.0), 0.0);
    }
}
