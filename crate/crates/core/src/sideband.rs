//! Frequency-domain representation of optical fields as sideband pairs
//! around a carrier, conversion to and from quadrature amplitudes, and
//! synthesis of real-valued time series.
//!
//! Conventions used throughout the crate:
//!
//! * A sideband amplitude `c` multiplies `exp(-i(w0 ± W)t)` in the analytic
//!   signal; the real field is `E(t) = sqrt(2)·Re[c·exp(-i(w0 ± W)t)]`.
//! * Quadrature 1 is the amplitude quadrature (0°) and quadrature 2 the
//!   phase quadrature (90°); the conversion carries exact `1/sqrt(2)`
//!   coefficients, so the change of basis is unitary.
//! * The absolute field scale is arbitrary. Only ratios, beat phases, and
//!   demodulated values matter downstream.
//!
//! All quantities live at one discrete offset frequency; spectra and
//! variances enter only in [`crate::detection`].

use num_complex::Complex64;
use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use crate::error::{Error, Result};

/// Labeling of the two field quadratures. There is exactly one convention
/// in this crate and it is fixed at construction of a [`CarrierFrame`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureConvention {
    /// Quadrature 1 is the amplitude quadrature (0°), quadrature 2 the
    /// phase quadrature (90°).
    AmplitudePhase,
}

/// Optical carrier the sideband picture is referred to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierFrame {
    omega0: f64,
}

impl CarrierFrame {
    /// `omega0` is the carrier angular frequency in rad/s, strictly positive.
    pub fn new(omega0: f64) -> Result<Self> {
        if !omega0.is_finite() {
            return Err(Error::NonFinite {
                name: "omega0",
                value: omega0,
            });
        }
        if omega0 <= 0.0 {
            return Err(Error::NonPositive {
                name: "omega0",
                value: omega0,
            });
        }
        Ok(Self { omega0 })
    }

    /// Carrier frame for a vacuum wavelength in meters.
    pub fn from_wavelength(lambda_m: f64) -> Result<Self> {
        const C: f64 = 299_792_458.0;
        if lambda_m <= 0.0 || !lambda_m.is_finite() {
            return Err(Error::NonPositive {
                name: "wavelength",
                value: lambda_m,
            });
        }
        Self::new(TAU * C / lambda_m)
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn carrier_freq_hz(&self) -> f64 {
        self.omega0 / TAU
    }

    /// The quadrature labeling is immutable after construction.
    pub fn convention(&self) -> QuadratureConvention {
        QuadratureConvention::AmplitudePhase
    }
}

/// Complex amplitudes of the upper and lower sidebands at `w0 ± offset`.
///
/// A pure single-sideband control field has `lower == 0` and a real
/// `upper` amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidebandPair {
    /// Offset from the carrier, rad/s, non-negative.
    pub offset: f64,
    /// Amplitude at `w0 + offset`.
    pub upper: Complex64,
    /// Amplitude at `w0 - offset`.
    pub lower: Complex64,
}

impl SidebandPair {
    pub fn new(offset: f64, upper: Complex64, lower: Complex64) -> Result<Self> {
        if !offset.is_finite() {
            return Err(Error::NonFinite {
                name: "offset",
                value: offset,
            });
        }
        if offset < 0.0 {
            return Err(Error::OutOfRange {
                name: "offset",
                value: offset,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        for (name, c) in [("upper", upper), ("lower", lower)] {
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(Error::NonFinite {
                    name,
                    value: c.norm_sqr(),
                });
            }
        }
        Ok(Self {
            offset,
            upper,
            lower,
        })
    }

    /// Single upper sideband with a real amplitude and no lower sideband.
    pub fn single_upper(offset: f64, amplitude: f64) -> Result<Self> {
        Self::new(
            offset,
            Complex64::new(amplitude, 0.0),
            Complex64::new(0.0, 0.0),
        )
    }
}

/// Complex quadrature amplitudes at one offset frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureVector {
    /// Offset from the carrier, rad/s.
    pub offset: f64,
    /// Amplitude quadrature.
    pub q1: Complex64,
    /// Phase quadrature.
    pub q2: Complex64,
}

impl QuadratureVector {
    pub fn new(offset: f64, q1: Complex64, q2: Complex64) -> Result<Self> {
        // shares the validity rules of SidebandPair
        let sb = SidebandPair::new(offset, q1, q2)?;
        Ok(Self {
            offset: sb.offset,
            q1,
            q2,
        })
    }
}

/// Real-valued, uniformly sampled signal (field or photocurrent, arbitrary
/// normalized units).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    sample_rate: f64,
    t0: f64,
    samples: Vec<f64>,
}

impl TimeSeries {
    pub fn new(sample_rate: f64, t0: f64, samples: Vec<f64>) -> Result<Self> {
        if sample_rate <= 0.0 || !sample_rate.is_finite() {
            return Err(Error::NonPositive {
                name: "sample_rate",
                value: sample_rate,
            });
        }
        if samples.is_empty() {
            return Err(Error::NonPositive {
                name: "samples.len",
                value: 0.0,
            });
        }
        Ok(Self {
            sample_rate,
            t0,
            samples,
        })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn time_at(&self, index: usize) -> f64 {
        self.t0 + index as f64 / self.sample_rate
    }
}

/// How [`synthesize_time_series`] treats the optical carrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthesisMode {
    /// Sample the full field including the carrier oscillation. The sample
    /// rate has to resolve `w0 + offset`.
    Literal,
    /// Remove the carrier analytically and sample the field in the frame
    /// co-rotating at `w0` (the in-phase envelope `b1(t)`). Use this when the
    /// optical carrier frequency is unsampleable, which is always the case
    /// for real carriers; demodulated results agree with literal synthesis
    /// for every component that survives the low-pass filter.
    Baseband,
}

/// Quadrature amplitudes of a sideband pair:
/// `q1 = (upper + conj(lower))/sqrt(2)`, `q2 = (upper - conj(lower))/(i*sqrt(2))`.
pub fn quads_from_sidebands(sb: &SidebandPair) -> QuadratureVector {
    let cl = sb.lower.conj();
    let q1 = (sb.upper + cl) * FRAC_1_SQRT_2;
    let q2 = (sb.upper - cl) * FRAC_1_SQRT_2 * Complex64::new(0.0, -1.0);
    QuadratureVector {
        offset: sb.offset,
        q1,
        q2,
    }
}

/// Exact algebraic inverse of [`quads_from_sidebands`].
pub fn sidebands_from_quads(qv: &QuadratureVector) -> SidebandPair {
    let i = Complex64::new(0.0, 1.0);
    let upper = (qv.q1 + i * qv.q2) * FRAC_1_SQRT_2;
    let lower = ((qv.q1 - i * qv.q2) * FRAC_1_SQRT_2).conj();
    SidebandPair {
        offset: qv.offset,
        upper,
        lower,
    }
}

fn validate_timebase(duration_s: f64, sample_rate_hz: f64) -> Result<usize> {
    if duration_s <= 0.0 || !duration_s.is_finite() {
        return Err(Error::NonPositive {
            name: "duration",
            value: duration_s,
        });
    }
    if sample_rate_hz <= 0.0 || !sample_rate_hz.is_finite() {
        return Err(Error::NonPositive {
            name: "sample_rate",
            value: sample_rate_hz,
        });
    }
    Ok(((duration_s * sample_rate_hz).round() as usize).max(1))
}

/// Real time-domain envelopes `b1(t)`, `b2(t)` of the two quadratures,
/// `bi(t) = qi·exp(-i·offset·t) + conj(qi)·exp(+i·offset·t)`.
///
/// These are the building blocks of every synthesized field and of the
/// baseband photocurrents in [`crate::detection`].
pub fn quadrature_envelopes(
    qv: &QuadratureVector,
    duration_s: f64,
    sample_rate_hz: f64,
) -> Result<(TimeSeries, TimeSeries)> {
    let n = validate_timebase(duration_s, sample_rate_hz)?;
    let required = qv.offset / PI;
    if sample_rate_hz <= required {
        return Err(Error::BelowNyquist {
            rate_hz: sample_rate_hz,
            required_hz: required,
        });
    }
    let mut b1 = Vec::with_capacity(n);
    let mut b2 = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / sample_rate_hz;
        let (s, c) = (qv.offset * t).sin_cos();
        b1.push(2.0 * (qv.q1.re * c + qv.q1.im * s));
        b2.push(2.0 * (qv.q2.re * c + qv.q2.im * s));
    }
    Ok((
        TimeSeries::new(sample_rate_hz, 0.0, b1)?,
        TimeSeries::new(sample_rate_hz, 0.0, b2)?,
    ))
}

/// Synthesize the real field carried by a quadrature vector.
///
/// In [`SynthesisMode::Literal`] the samples are
/// `E(t) = b1(t)·cos(w0 t) + b2(t)·sin(w0 t)`; in
/// [`SynthesisMode::Baseband`] the carrier is removed analytically and the
/// samples are the in-phase envelope `b1(t)`. Deterministic for identical
/// inputs.
pub fn synthesize_time_series(
    qv: &QuadratureVector,
    frame: &CarrierFrame,
    duration_s: f64,
    sample_rate_hz: f64,
    mode: SynthesisMode,
) -> Result<TimeSeries> {
    let n = validate_timebase(duration_s, sample_rate_hz)?;
    match mode {
        SynthesisMode::Literal => {
            let required = (frame.omega0() + qv.offset) / PI;
            if sample_rate_hz <= required {
                return Err(Error::BelowNyquist {
                    rate_hz: sample_rate_hz,
                    required_hz: required,
                });
            }
            let mut out = Vec::with_capacity(n);
            for k in 0..n {
                let t = k as f64 / sample_rate_hz;
                let (s, c) = (qv.offset * t).sin_cos();
                let b1 = 2.0 * (qv.q1.re * c + qv.q1.im * s);
                let b2 = 2.0 * (qv.q2.re * c + qv.q2.im * s);
                let (so, co) = (frame.omega0() * t).sin_cos();
                out.push(b1 * co + b2 * so);
            }
            TimeSeries::new(sample_rate_hz, 0.0, out)
        }
        SynthesisMode::Baseband => {
            let (b1, _) = quadrature_envelopes(qv, duration_s, sample_rate_hz)?;
            Ok(b1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EPS: f64 = 1e-12;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn carrier_frame_rejects_bad_omega() {
        assert!(CarrierFrame::new(0.0).is_err());
        assert!(CarrierFrame::new(-1.0).is_err());
        assert!(CarrierFrame::new(f64::NAN).is_err());
        let frame = CarrierFrame::from_wavelength(1064e-9).unwrap();
        assert!((frame.omega0() - 1.77036e15).abs() < 1e11);
        assert_eq!(frame.convention(), QuadratureConvention::AmplitudePhase);
    }

    #[test]
    fn single_upper_sideband_quads() {
        let sb = SidebandPair::single_upper(TAU * 40e6, 1.0).unwrap();
        let qv = quads_from_sidebands(&sb);
        assert!((qv.q1 - c(FRAC_1_SQRT_2, 0.0)).norm() < EPS);
        assert!((qv.q2 - c(0.0, -FRAC_1_SQRT_2)).norm() < EPS);
        assert_eq!(qv.offset, sb.offset);
    }

    #[test]
    fn zero_field_quads() {
        let sb = SidebandPair::new(1.0, c(0.0, 0.0), c(0.0, 0.0)).unwrap();
        let qv = quads_from_sidebands(&sb);
        assert_eq!(qv.q1, c(0.0, 0.0));
        assert_eq!(qv.q2, c(0.0, 0.0));
    }

    #[test]
    fn symmetric_real_sidebands_beat_in_q1() {
        let sb = SidebandPair::new(1.0, c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        let qv = quads_from_sidebands(&sb);
        assert!((qv.q1 - c(2.0 * FRAC_1_SQRT_2, 0.0)).norm() < EPS);
        assert!(qv.q2.norm() < EPS);
    }

    #[test]
    fn quads_invert_to_single_sideband() {
        let qv = QuadratureVector::new(2.0, c(FRAC_1_SQRT_2, 0.0), c(0.0, -FRAC_1_SQRT_2)).unwrap();
        let sb = sidebands_from_quads(&qv);
        assert!((sb.upper - c(1.0, 0.0)).norm() < EPS);
        assert!(sb.lower.norm() < EPS);
    }

    #[test]
    fn synthesis_rejects_bad_timebase() {
        let frame = CarrierFrame::new(TAU * 500.0).unwrap();
        let qv = QuadratureVector::new(TAU * 40.0, c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        assert!(
            synthesize_time_series(&qv, &frame, -1.0, 100.0, SynthesisMode::Baseband).is_err()
        );
        assert!(synthesize_time_series(&qv, &frame, 1.0, 0.0, SynthesisMode::Baseband).is_err());
        // literal mode below Nyquist of w0 + offset
        let err =
            synthesize_time_series(&qv, &frame, 1.0, 800.0, SynthesisMode::Literal).unwrap_err();
        assert!(matches!(err, Error::BelowNyquist { .. }));
        // baseband mode only needs to resolve the offset
        assert!(synthesize_time_series(&qv, &frame, 1.0, 800.0, SynthesisMode::Baseband).is_ok());
    }

    #[test]
    fn zero_quads_give_zero_series() {
        let frame = CarrierFrame::new(TAU * 500.0).unwrap();
        let qv = QuadratureVector::new(TAU * 40.0, c(0.0, 0.0), c(0.0, 0.0)).unwrap();
        let ts =
            synthesize_time_series(&qv, &frame, 0.5, 4096.0, SynthesisMode::Literal).unwrap();
        assert!(ts.samples().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn baseband_single_sideband_is_scaled_cosine() {
        // upper sideband with real amplitude alpha: b1(t) = sqrt(2)·alpha·cos(Wt)
        let alpha = 0.7;
        let offset = TAU * 25.0;
        let sb = SidebandPair::single_upper(offset, alpha).unwrap();
        let qv = quads_from_sidebands(&sb);
        let frame = CarrierFrame::new(TAU * 1e6).unwrap();
        let ts =
            synthesize_time_series(&qv, &frame, 1.0, 1024.0, SynthesisMode::Baseband).unwrap();
        for (k, &x) in ts.samples().iter().enumerate() {
            let t = k as f64 / 1024.0;
            let expected = 2f64.sqrt() * alpha * (offset * t).cos();
            assert!((x - expected).abs() < 1e-12, "sample {k}: {x} vs {expected}");
        }
    }

    #[test]
    fn envelope_lengths_and_rate() {
        let qv = QuadratureVector::new(TAU * 10.0, c(1.0, 0.5), c(-0.5, 0.25)).unwrap();
        let (b1, b2) = quadrature_envelopes(&qv, 2.0, 256.0).unwrap();
        assert_eq!(b1.len(), 512);
        assert_eq!(b2.len(), 512);
        assert_eq!(b1.sample_rate(), 256.0);
        assert_eq!(b1.time_at(0), 0.0);
        assert!((b1.duration() - 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(
            re_u in -10.0f64..10.0, im_u in -10.0f64..10.0,
            re_l in -10.0f64..10.0, im_l in -10.0f64..10.0,
            offset in 0.0f64..1e9,
        ) {
            let sb = SidebandPair::new(offset, c(re_u, im_u), c(re_l, im_l)).unwrap();
            let back = sidebands_from_quads(&quads_from_sidebands(&sb));
            prop_assert!((back.upper - sb.upper).norm() < EPS);
            prop_assert!((back.lower - sb.lower).norm() < EPS);
            prop_assert_eq!(back.offset, sb.offset);
        }

        #[test]
        fn conversion_is_linear(
            a_re in -3.0f64..3.0, a_im in -3.0f64..3.0,
            b_re in -3.0f64..3.0, b_im in -3.0f64..3.0,
            s1 in -2.0f64..2.0, s2 in -2.0f64..2.0,
        ) {
            let x = SidebandPair::new(1.0, c(a_re, a_im), c(b_re, b_im)).unwrap();
            let y = SidebandPair::new(1.0, c(b_im, a_re), c(a_im, b_re)).unwrap();
            let lhs = quads_from_sidebands(
                &SidebandPair::new(1.0, s1 * x.upper + s2 * y.upper, s1 * x.lower + s2 * y.lower)
                    .unwrap(),
            );
            let qx = quads_from_sidebands(&x);
            let qy = quads_from_sidebands(&y);
            prop_assert!((lhs.q1 - (s1 * qx.q1 + s2 * qy.q1)).norm() < EPS);
            prop_assert!((lhs.q2 - (s1 * qx.q2 + s2 * qy.q2)).norm() < EPS);
        }

        #[test]
        fn norm_is_preserved(
            re_u in -10.0f64..10.0, im_u in -10.0f64..10.0,
            re_l in -10.0f64..10.0, im_l in -10.0f64..10.0,
        ) {
            let sb = SidebandPair::new(0.5, c(re_u, im_u), c(re_l, im_l)).unwrap();
            let qv = quads_from_sidebands(&sb);
            let lhs = sb.upper.norm_sqr() + sb.lower.norm_sqr();
            let rhs = qv.q1.norm_sqr() + qv.q2.norm_sqr();
            prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs));
        }
    }
}
