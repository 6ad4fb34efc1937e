//! Photocurrent synthesis, lock-in demodulation, and the two closed-form
//! servo error signals.
//!
//! The pump-phase error signal comes from the squared control-field
//! photocurrent demodulated at twice the offset frequency; the
//! local-oscillator error signal comes from the homodyne difference current
//! demodulated at the offset frequency. Both demodulation pipelines agree
//! with the closed forms [`pump_phase_error`] and [`lo_phase_error`] up to
//! one global scale each.

pub mod spectrum;

use crate::error::{Error, Result};
use crate::opo::SqueezerSetting;
use crate::sideband::{
    quadrature_envelopes, quads_from_sidebands, synthesize_time_series, CarrierFrame,
    SidebandPair, SynthesisMode, TimeSeries,
};
use num_complex::Complex64;
use std::f64::consts::{SQRT_2, TAU};

/// Settling allowance of the demodulation low-pass filter, in filter time
/// constants. Averaging starts after this interval.
pub const SETTLE_TIME_CONSTANTS: f64 = 16.0;

/// Lock-in demodulator: reference frequency and phase plus the low-pass
/// corner of the output filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemodulatorConfig {
    frequency_hz: f64,
    phase_rad: f64,
    lowpass_cutoff_hz: f64,
}

impl DemodulatorConfig {
    pub fn new(frequency_hz: f64, phase_rad: f64, lowpass_cutoff_hz: f64) -> Result<Self> {
        if frequency_hz <= 0.0 || !frequency_hz.is_finite() {
            return Err(Error::NonPositive {
                name: "frequency",
                value: frequency_hz,
            });
        }
        if !(lowpass_cutoff_hz > 0.0 && lowpass_cutoff_hz < frequency_hz) {
            return Err(Error::OutOfRange {
                name: "lowpass_cutoff",
                value: lowpass_cutoff_hz,
                lo: 0.0,
                hi: frequency_hz,
            });
        }
        if !phase_rad.is_finite() {
            return Err(Error::NonFinite {
                name: "phase",
                value: phase_rad,
            });
        }
        Ok(Self {
            frequency_hz,
            phase_rad,
            lowpass_cutoff_hz,
        })
    }

    pub fn frequency_hz(&self) -> f64 {
        self.frequency_hz
    }

    pub fn phase_rad(&self) -> f64 {
        self.phase_rad
    }

    pub fn lowpass_cutoff_hz(&self) -> f64 {
        self.lowpass_cutoff_hz
    }

    pub fn with_phase(&self, phase_rad: f64) -> Self {
        Self {
            phase_rad,
            ..*self
        }
    }
}

/// Balanced homodyne detector parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomodyneSetup {
    pub lo_amplitude: f64,
    pub lo_phase: f64,
    pub splitter_ratio: f64,
    pub mode_matching: f64,
}

impl HomodyneSetup {
    pub fn new(
        lo_amplitude: f64,
        lo_phase: f64,
        splitter_ratio: f64,
        mode_matching: f64,
    ) -> Result<Self> {
        if lo_amplitude < 0.0 || !lo_amplitude.is_finite() {
            return Err(Error::OutOfRange {
                name: "lo_amplitude",
                value: lo_amplitude,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        if !(0.0..=1.0).contains(&splitter_ratio) {
            return Err(Error::OutOfRange {
                name: "splitter_ratio",
                value: splitter_ratio,
                lo: 0.0,
                hi: 1.0,
            });
        }
        if !(0.0..=1.0).contains(&mode_matching) {
            return Err(Error::OutOfRange {
                name: "mode_matching",
                value: mode_matching,
                lo: 0.0,
                hi: 1.0,
            });
        }
        if !lo_phase.is_finite() {
            return Err(Error::NonFinite {
                name: "lo_phase",
                value: lo_phase,
            });
        }
        Ok(Self {
            lo_amplitude,
            lo_phase,
            splitter_ratio,
            mode_matching,
        })
    }
}

/// Mix a signal with `cos(2π·f·t + phase)`, low-pass filter, and average.
///
/// The filter is a first-order IIR section initialized on the first sample;
/// averaging starts after [`SETTLE_TIME_CONSTANTS`] filter time constants
/// and, when the sample rate is commensurate with the reference, covers an
/// integer number of reference periods counted back from the end. Linear in
/// the signal.
pub fn demodulate(sig: &TimeSeries, cfg: &DemodulatorConfig) -> Result<f64> {
    let required_s = 10.0 / cfg.lowpass_cutoff_hz;
    if sig.duration() < required_s {
        return Err(Error::SignalTooShort {
            actual_s: sig.duration(),
            required_s,
        });
    }
    let fs = sig.sample_rate();
    let dt = 1.0 / fs;
    let rc = 1.0 / (TAU * cfg.lowpass_cutoff_hz);
    let a = dt / (rc + dt);

    let n = sig.len();
    let mut filtered = Vec::with_capacity(n);
    let mut y = 0.0;
    for (k, &x) in sig.samples().iter().enumerate() {
        let p = x * (TAU * cfg.frequency_hz * sig.time_at(k) + cfg.phase_rad).cos();
        if k == 0 {
            y = p;
        } else {
            y += a * (p - y);
        }
        filtered.push(y);
    }

    let settle = (SETTLE_TIME_CONSTANTS * rc * fs).ceil() as usize;
    let s0 = settle.min(n - 1);
    let mut start = s0;
    let per = fs / cfg.frequency_hz;
    if (per - per.round()).abs() < 1e-9 * per && per.round() >= 1.0 {
        let p = per.round() as usize;
        let usable = ((n - s0) / p) * p;
        if usable > 0 {
            start = n - usable;
        }
    }
    let window = &filtered[start..];
    Ok(window.iter().sum::<f64>() / window.len() as f64)
}

/// Demodulation phase that maximizes the error-signal slope at the lock
/// point, from the slopes measured with in-phase (phase 0) and quadrature
/// (phase π/2) references.
pub fn auto_demod_phase(slope_inphase: f64, slope_quadrature: f64) -> f64 {
    slope_quadrature.atan2(slope_inphase)
}

/// Photocurrent of a single detector monitoring the control field leaving
/// the squeezer.
///
/// The samples are the squared field. In literal mode they contain the
/// optical-frequency terms, which the demodulation low-pass removes the way
/// a finite detector bandwidth would; in baseband mode the samples are the
/// optical-cycle average `(b1² + b2²)/2` directly, so demodulated results
/// agree between the modes. The current carries a DC part and a beat at
/// twice the offset frequency whose phase is twice the squeezing angle.
pub fn qcf_monitor_current(
    qcf: &SidebandPair,
    frame: &CarrierFrame,
    duration_s: f64,
    sample_rate_hz: f64,
    mode: SynthesisMode,
) -> Result<TimeSeries> {
    let qv = quads_from_sidebands(qcf);
    match mode {
        SynthesisMode::Literal => {
            let field =
                synthesize_time_series(&qv, frame, duration_s, sample_rate_hz, mode)?;
            let samples = field.samples().iter().map(|&e| e * e).collect();
            TimeSeries::new(sample_rate_hz, field.t0(), samples)
        }
        SynthesisMode::Baseband => {
            let (b1, b2) = quadrature_envelopes(&qv, duration_s, sample_rate_hz)?;
            let samples = b1
                .samples()
                .iter()
                .zip(b2.samples())
                .map(|(&x, &y)| 0.5 * (x * x + y * y))
                .collect();
            TimeSeries::new(sample_rate_hz, b1.t0(), samples)
        }
    }
}

/// Closed-form pump-phase error signal,
/// `(g² - 1)·alpha²·sin(2·phi)/(4g)`.
///
/// Equals the demodulated monitor current at twice the offset frequency
/// (demodulation phase π/2) up to one global normalization constant. Zero
/// for an unpumped squeezer and at every multiple of π/2 in the angle.
pub fn pump_phase_error(alpha: f64, s: &SqueezerSetting) -> f64 {
    0.5 * (2.0 * s.r()).sinh() * alpha * alpha * (2.0 * s.phi()).sin()
}

/// Fields on the two homodyne detectors for a splitter with power ratio
/// `s`: `(√s·E_LO + √(1-s)·E_QCF, √(1-s)·E_LO - √s·E_QCF)`.
///
/// The local oscillator is `2·lo_amplitude·cos(w0·t + lo_phase)`. The
/// splitter matrix is orthogonal, so the summed output power equals the
/// summed input power sample by sample. Mode matching does not act on the
/// fields; it enters at photodetection ([`homodyne_difference_current`]).
pub fn homodyne_fields(
    setup: &HomodyneSetup,
    qcf: &SidebandPair,
    frame: &CarrierFrame,
    duration_s: f64,
    sample_rate_hz: f64,
) -> Result<(TimeSeries, TimeSeries)> {
    if !(setup.splitter_ratio > 0.0 && setup.splitter_ratio < 1.0) {
        return Err(Error::OutOfRange {
            name: "splitter_ratio",
            value: setup.splitter_ratio,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let qv = quads_from_sidebands(qcf);
    let field = synthesize_time_series(
        &qv,
        frame,
        duration_s,
        sample_rate_hz,
        SynthesisMode::Literal,
    )?;
    let t_s = setup.splitter_ratio.sqrt();
    let t_r = (1.0 - setup.splitter_ratio).sqrt();
    let mut hd1 = Vec::with_capacity(field.len());
    let mut hd2 = Vec::with_capacity(field.len());
    for (k, &e_qcf) in field.samples().iter().enumerate() {
        let t = field.time_at(k);
        let e_lo = 2.0 * setup.lo_amplitude * (frame.omega0() * t + setup.lo_phase).cos();
        hd1.push(t_s * e_lo + t_r * e_qcf);
        hd2.push(t_r * e_lo - t_s * e_qcf);
    }
    Ok((
        TimeSeries::new(sample_rate_hz, field.t0(), hd1)?,
        TimeSeries::new(sample_rate_hz, field.t0(), hd2)?,
    ))
}

/// Low-passed difference current of the two homodyne detectors in the
/// servo model.
///
/// The retained term is the beat of the local oscillator with the
/// pump-generated lower sideband, a single oscillation at the offset
/// frequency with phase `2·phi + lo_phase`:
///
/// `I(t) ∝ mode_matching·lo_amplitude·|lower|·cos(offset·t + arg(lower) + lo_phase)`.
///
/// An unpumped squeezer generates no lower sideband, so the output
/// vanishes at `g = 1`; the seed-sideband beat carries no pump-phase
/// information and is not part of this model. Mode matching scales the
/// interference amplitude.
pub fn homodyne_difference_current(
    setup: &HomodyneSetup,
    qcf: &SidebandPair,
    duration_s: f64,
    sample_rate_hz: f64,
) -> Result<TimeSeries> {
    if duration_s <= 0.0 || !duration_s.is_finite() {
        return Err(Error::NonPositive {
            name: "duration",
            value: duration_s,
        });
    }
    if sample_rate_hz <= qcf.offset / std::f64::consts::PI {
        return Err(Error::BelowNyquist {
            rate_hz: sample_rate_hz,
            required_hz: qcf.offset / std::f64::consts::PI,
        });
    }
    let n = ((duration_s * sample_rate_hz).round() as usize).max(1);
    let balance = 2.0 * (setup.splitter_ratio * (1.0 - setup.splitter_ratio)).sqrt();
    let amp = balance * setup.mode_matching * 2.0 * setup.lo_amplitude * SQRT_2;
    let phasor = qcf.lower * Complex64::from_polar(1.0, setup.lo_phase);
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / sample_rate_hz;
        let (s, c) = (qcf.offset * t).sin_cos();
        // Re[phasor·exp(i·offset·t)]
        samples.push(amp * (phasor.re * c - phasor.im * s));
    }
    TimeSeries::new(sample_rate_hz, 0.0, samples)
}

/// Closed-form local-oscillator phase error signal,
/// `√2·alpha_lo·alpha·(g - 1)/√g·sin(2·phi + Phi)`.
///
/// Equals the demodulated homodyne difference current at the offset
/// frequency (demodulation phase π/2) up to one global normalization
/// constant. Zero for an unpumped squeezer and wherever `2·phi + Phi` is a
/// multiple of π.
pub fn lo_phase_error(alpha_lo: f64, alpha: f64, s: &SqueezerSetting, big_phi: f64) -> f64 {
    SQRT_2 * alpha_lo * alpha * 2.0 * s.r().sinh() * (2.0 * s.phi() + big_phi).sin()
}
