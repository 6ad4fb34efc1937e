//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },

    #[error("{name} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("sample rate {rate_hz} Hz is below the {required_hz} Hz needed to resolve this field")]
    BelowNyquist { rate_hz: f64, required_hz: f64 },

    #[error("detuning {detuning_hz} Hz outside the ±{limit_hz} Hz alias window of one free spectral range")]
    DetuningOutOfRange { detuning_hz: f64, limit_hz: f64 },

    #[error("pump ratio {x} at or above oscillation threshold; only below-threshold operation is modeled")]
    AboveThreshold { x: f64 },

    #[error("signal of {actual_s} s is too short to settle the low-pass filter; need at least {required_s} s")]
    SignalTooShort { actual_s: f64, required_s: f64 },

    #[error("timestep {dt_s} s unstable for proportional gain {p_gain} 1/s; p_gain*dt must stay below 0.5")]
    UnstableTimestep { p_gain: f64, dt_s: f64 },

    #[error("resolution bandwidth {rbw_hz} Hz exceeds the window span {span_hz} Hz")]
    RbwExceedsSpan { rbw_hz: f64, span_hz: f64 },

    #[error("resolution bandwidth {rbw_hz} Hz finer than the attainable resolution {resolution_hz} Hz")]
    RbwUnresolvable { rbw_hz: f64, resolution_hz: f64 },

    #[error("window up to {f_hi_hz} Hz exceeds the Nyquist frequency {nyquist_hz} Hz of the series")]
    WindowAboveNyquist { f_hi_hz: f64, nyquist_hz: f64 },

    #[error("window [{f_lo_hz}, {f_hi_hz}] Hz needs {required} samples, series has {actual}")]
    InsufficientSamples {
        f_lo_hz: f64,
        f_hi_hz: f64,
        required: usize,
        actual: usize,
    },

    #[error("spectra have mismatched bins at index {index}")]
    BinMismatch { index: usize },

    #[error("modulation frequency {mod_freq_hz} Hz does not resolve the cavity linewidth {fwhm_hz} Hz")]
    UnresolvedSidebands { mod_freq_hz: f64, fwhm_hz: f64 },

    #[error("dark-port power reflectivity {r_power} in the signal band is below the supported regime (needs >= {min})")]
    UnsupportedInjection { r_power: f64, min: f64 },

    #[error("frequencies must be strictly increasing (violated at index {index})")]
    FrequenciesNotIncreasing { index: usize },
}
