//! The squeezer: quadrature-domain squeezing transformation, the
//! parametrically amplified quadrature control field, and the
//! below-threshold cavity model (Lorentzian coupling, linewidth-limited
//! squeezing spectra).
//!
//! Two gain conventions coexist and are never converted implicitly:
//!
//! * the single-pass gain `g = exp(2r)` of [`SqueezerSetting`], which drives
//!   every error-signal expression, and
//! * the classical cavity gain `G = 1/(1-x)^2` of [`PumpSetting`], which
//!   drives the squeezing spectra.
//!
//! Callers must state which convention a number uses by constructing the
//! matching type.

use num_complex::Complex64;
use std::f64::consts::SQRT_2;

use crate::detection::spectrum::{NoiseSpectrum, SpectralBin};
use crate::error::{Error, Result};
use crate::sideband::{QuadratureVector, SidebandPair};

/// Squeezer working point: squeezing factor `r >= 0` and angle `phi`.
///
/// The single-pass gain `g = exp(2r)` is derived, so the relation holds
/// exactly by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezerSetting {
    r: f64,
    phi: f64,
}

impl SqueezerSetting {
    /// From squeezing factor `r >= 0` and angle `phi`.
    pub fn from_factor(r: f64, phi: f64) -> Result<Self> {
        if !r.is_finite() || !phi.is_finite() {
            return Err(Error::NonFinite {
                name: "squeezer setting",
                value: if r.is_finite() { phi } else { r },
            });
        }
        if r < 0.0 {
            return Err(Error::OutOfRange {
                name: "r",
                value: r,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        Ok(Self { r, phi })
    }

    /// From the single-pass gain `g >= 1` (i.e. `exp(r) = sqrt(g)`).
    pub fn from_single_pass_gain(g: f64, phi: f64) -> Result<Self> {
        if !g.is_finite() || g < 1.0 {
            return Err(Error::OutOfRange {
                name: "single_pass_gain",
                value: g,
                lo: 1.0,
                hi: f64::INFINITY,
            });
        }
        Self::from_factor(0.5 * g.ln(), phi)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Single-pass gain `g = exp(2r)`; `r = 0` corresponds to `g = 1`.
    pub fn gain(&self) -> f64 {
        (2.0 * self.r).exp()
    }

    pub fn with_phi(&self, phi: f64) -> Self {
        Self { r: self.r, phi }
    }
}

/// Symmetric squeezing matrix acting on `(q1, q2)`:
/// `[[cosh r + sinh r·cos 2phi, sinh r·sin 2phi],
///   [sinh r·sin 2phi, cosh r - sinh r·cos 2phi]]`, determinant 1.
pub fn squeeze_matrix(s: &SqueezerSetting) -> [[f64; 2]; 2] {
    let (s2, c2) = (2.0 * s.phi).sin_cos();
    let ch = s.r.cosh();
    let sh = s.r.sinh();
    [[ch + sh * c2, sh * s2], [sh * s2, ch - sh * c2]]
}

/// Apply the squeezing transformation to a quadrature vector.
pub fn squeeze_quadratures(qv: &QuadratureVector, s: &SqueezerSetting) -> QuadratureVector {
    let m = squeeze_matrix(s);
    QuadratureVector {
        offset: qv.offset,
        q1: qv.q1 * m[0][0] + qv.q2 * m[0][1],
        q2: qv.q1 * m[1][0] + qv.q2 * m[1][1],
    }
}

/// Parametrically amplified quadrature control field leaving the squeezer.
///
/// The input is a single upper sideband with real amplitude `alpha >= 0` at
/// `w0 + offset`; the squeezer generates the lower sideband at `w0 - offset`.
/// The returned amplitudes are
///
/// * `upper = (1+g)/sqrt(2g)·alpha`, real, and
/// * `lower = (g-1)/sqrt(2g)·alpha·exp(+2i·phi)`,
///
/// so the synthesized real field beats as
/// `cos((w0+W)t)` and `cos((w0-W)t - 2·phi)` term by term. At `g = 1` no
/// lower sideband is generated.
pub fn amplified_qcf(alpha: f64, offset: f64, s: &SqueezerSetting) -> Result<SidebandPair> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::OutOfRange {
            name: "alpha",
            value: alpha,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    // (1+g)/sqrt(2g) = sqrt(2)·cosh r, (g-1)/sqrt(2g) = sqrt(2)·sinh r
    let upper = Complex64::new(SQRT_2 * s.r.cosh() * alpha, 0.0);
    let lower = Complex64::from_polar(SQRT_2 * s.r.sinh() * alpha, 2.0 * s.phi);
    SidebandPair::new(offset, upper, lower)
}

/// Optical cavity of the squeezer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityParams {
    fwhm_hz: f64,
    fsr_hz: f64,
    escape_efficiency: f64,
}

impl CavityParams {
    pub fn new(fwhm_hz: f64, fsr_hz: f64, escape_efficiency: f64) -> Result<Self> {
        if fwhm_hz <= 0.0 || !fwhm_hz.is_finite() {
            return Err(Error::NonPositive {
                name: "fwhm",
                value: fwhm_hz,
            });
        }
        if fsr_hz <= fwhm_hz || !fsr_hz.is_finite() {
            return Err(Error::OutOfRange {
                name: "fsr",
                value: fsr_hz,
                lo: fwhm_hz,
                hi: f64::INFINITY,
            });
        }
        if !(0.0..=1.0).contains(&escape_efficiency) {
            return Err(Error::OutOfRange {
                name: "escape_efficiency",
                value: escape_efficiency,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(Self {
            fwhm_hz,
            fsr_hz,
            escape_efficiency,
        })
    }

    pub fn fwhm_hz(&self) -> f64 {
        self.fwhm_hz
    }

    pub fn fsr_hz(&self) -> f64 {
        self.fsr_hz
    }

    /// Half linewidth, the decay rate entering the squeezing spectrum.
    pub fn half_width_hz(&self) -> f64 {
        0.5 * self.fwhm_hz
    }

    pub fn escape_efficiency(&self) -> f64 {
        self.escape_efficiency
    }
}

/// Pump strength as the below-threshold ratio `x = sqrt(P/P_threshold) < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpSetting {
    x: f64,
    pump_power_w: Option<f64>,
}

impl PumpSetting {
    pub fn from_pump_ratio(x: f64) -> Result<Self> {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::OutOfRange {
                name: "pump_ratio",
                value: x,
                lo: 0.0,
                hi: 1.0,
            });
        }
        if x >= 1.0 {
            return Err(Error::AboveThreshold { x });
        }
        Ok(Self {
            x,
            pump_power_w: None,
        })
    }

    /// From the classical (cavity) parametric gain `G = 1/(1-x)^2 >= 1`.
    ///
    /// This is the gain quoted for pumped cavities and is distinct from the
    /// single-pass `g = exp(2r)` of [`SqueezerSetting`].
    pub fn from_classical_gain(g_classical: f64) -> Result<Self> {
        if !g_classical.is_finite() || g_classical < 1.0 {
            return Err(Error::OutOfRange {
                name: "classical_gain",
                value: g_classical,
                lo: 1.0,
                hi: f64::INFINITY,
            });
        }
        Self::from_pump_ratio(1.0 - 1.0 / g_classical.sqrt())
    }

    /// Informational pump power tag; does not change the model.
    pub fn with_power(mut self, watts: f64) -> Self {
        self.pump_power_w = Some(watts);
        self
    }

    pub fn pump_ratio(&self) -> f64 {
        self.x
    }

    pub fn classical_gain(&self) -> f64 {
        let d = 1.0 - self.x;
        1.0 / (d * d)
    }

    pub fn pump_power_w(&self) -> Option<f64> {
        self.pump_power_w
    }
}

/// Peak-normalized Lorentzian power transmission of the cavity,
/// `1/(1 + (2·detuning/fwhm)^2)`.
pub fn cavity_power_transmission(detuning_hz: f64, cav: &CavityParams) -> Result<f64> {
    let limit = 0.5 * cav.fsr_hz();
    if !detuning_hz.is_finite() || detuning_hz.abs() >= limit {
        return Err(Error::DetuningOutOfRange {
            detuning_hz,
            limit_hz: limit,
        });
    }
    let u = 2.0 * detuning_hz / cav.fwhm_hz();
    Ok(1.0 / (1.0 + u * u))
}

/// Squeezed and antisqueezed spectra of one model evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumPair {
    pub squeezed: NoiseSpectrum,
    pub antisqueezed: NoiseSpectrum,
}

/// Squeezed (`V-`) and antisqueezed (`V+`) quadrature variances relative to
/// shot noise for a below-threshold cavity:
///
/// `V∓(f) = 1 ∓ eta·4x/((1±x)^2 + (f/gamma)^2)`
///
/// with `eta = total_efficiency·escape_efficiency` and `gamma` the cavity
/// half linewidth. `V-·V+ >= 1` always, with equality exactly at `eta = 1`.
///
/// `frequencies` must be strictly increasing. Model bins carry the local
/// grid spacing as nominal RBW and an averaging count of 1.
pub fn squeezing_spectrum(
    pump: &PumpSetting,
    cav: &CavityParams,
    total_efficiency: f64,
    frequencies: &[f64],
) -> Result<SpectrumPair> {
    if !(0.0..=1.0).contains(&total_efficiency) {
        return Err(Error::OutOfRange {
            name: "total_efficiency",
            value: total_efficiency,
            lo: 0.0,
            hi: 1.0,
        });
    }
    if frequencies.is_empty() {
        return Err(Error::NonPositive {
            name: "frequencies.len",
            value: 0.0,
        });
    }
    for &f in frequencies {
        if f < 0.0 || !f.is_finite() {
            return Err(Error::OutOfRange {
                name: "frequency",
                value: f,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
    }
    for (i, w) in frequencies.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(Error::FrequenciesNotIncreasing { index: i + 1 });
        }
    }

    let x = pump.pump_ratio();
    let eta = total_efficiency * cav.escape_efficiency();
    let gamma = cav.half_width_hz();
    let strength = 4.0 * x * eta;

    let rbw_at = |i: usize| -> f64 {
        if frequencies.len() == 1 {
            1.0
        } else if i + 1 < frequencies.len() {
            frequencies[i + 1] - frequencies[i]
        } else {
            frequencies[i] - frequencies[i - 1]
        }
    };

    let mut minus = Vec::with_capacity(frequencies.len());
    let mut plus = Vec::with_capacity(frequencies.len());
    for (i, &f) in frequencies.iter().enumerate() {
        let u2 = (f / gamma) * (f / gamma);
        let dm = (1.0 + x) * (1.0 + x) + u2;
        let dp = (1.0 - x) * (1.0 - x) + u2;
        let rbw = rbw_at(i);
        minus.push(SpectralBin {
            freq_hz: f,
            rel_variance: 1.0 - strength / dm,
            rbw_hz: rbw,
            n_avg: 1,
        });
        plus.push(SpectralBin {
            freq_hz: f,
            rel_variance: 1.0 + strength / dp,
            rbw_hz: rbw,
            n_avg: 1,
        });
    }
    Ok(SpectrumPair {
        squeezed: NoiseSpectrum::new(minus)?,
        antisqueezed: NoiseSpectrum::new(plus)?,
    })
}
