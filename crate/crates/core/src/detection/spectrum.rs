//! Noise spectra relative to shot noise: the windowed, averaged
//! periodogram estimator, the shot-noise reference, and dark-noise
//! subtraction.
//!
//! A reported bin covers one resolution bandwidth (RBW): the estimator
//! integrates the averaged periodogram over the RBW band, so the effective
//! number of averages per bin is the segment count times the number of FFT
//! bins inside the band. `average_count` on a bin is the segment count.

use rustfft::FftPlanner;

use crate::db_from_ratio;
use crate::error::{Error, Result};
use crate::sideband::TimeSeries;

/// One spectral bin: variance relative to shot noise over one RBW.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBin {
    pub freq_hz: f64,
    /// Linear variance relative to the shot-noise reference.
    pub rel_variance: f64,
    pub rbw_hz: f64,
    pub n_avg: usize,
}

/// Frequency-binned variance relative to shot noise.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpectrum {
    bins: Vec<SpectralBin>,
}

impl NoiseSpectrum {
    /// Bins must have positive variance and RBW and strictly increasing
    /// frequencies.
    pub fn new(bins: Vec<SpectralBin>) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::NonPositive {
                name: "bins.len",
                value: 0.0,
            });
        }
        for (i, b) in bins.iter().enumerate() {
            if b.rel_variance <= 0.0 || !b.rel_variance.is_finite() {
                return Err(Error::NonPositive {
                    name: "rel_variance",
                    value: b.rel_variance,
                });
            }
            if b.rbw_hz <= 0.0 || !b.rbw_hz.is_finite() {
                return Err(Error::NonPositive {
                    name: "rbw",
                    value: b.rbw_hz,
                });
            }
            if !b.freq_hz.is_finite() {
                return Err(Error::NonFinite {
                    name: "freq",
                    value: b.freq_hz,
                });
            }
            if i > 0 && b.freq_hz <= bins[i - 1].freq_hz {
                return Err(Error::FrequenciesNotIncreasing { index: i });
            }
        }
        Ok(Self { bins })
    }

    pub fn bins(&self) -> &[SpectralBin] {
        &self.bins
    }

    /// Concatenate spectra over adjacent, ascending frequency ranges.
    pub fn concat(parts: &[NoiseSpectrum]) -> Result<NoiseSpectrum> {
        let mut bins = Vec::new();
        for p in parts {
            bins.extend_from_slice(&p.bins);
        }
        NoiseSpectrum::new(bins)
    }

    /// CSV with columns `freq_hz,rel_variance_db,rbw_hz,n_avg`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_hz,rel_variance_db,rbw_hz,n_avg\n");
        for b in &self.bins {
            out.push_str(&format!(
                "{},{},{},{}\n",
                b.freq_hz,
                db_from_ratio(b.rel_variance),
                b.rbw_hz,
                b.n_avg
            ));
        }
        out
    }
}

/// One analysis window of the piecewise spectral estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralWindow {
    pub f_lo_hz: f64,
    pub f_hi_hz: f64,
    pub rbw_hz: f64,
    pub n_avg: usize,
}

impl SpectralWindow {
    pub fn new(f_lo_hz: f64, f_hi_hz: f64, rbw_hz: f64, n_avg: usize) -> Result<Self> {
        if f_lo_hz <= 0.0 || !f_lo_hz.is_finite() {
            return Err(Error::NonPositive {
                name: "f_lo",
                value: f_lo_hz,
            });
        }
        if f_hi_hz <= f_lo_hz || !f_hi_hz.is_finite() {
            return Err(Error::OutOfRange {
                name: "f_hi",
                value: f_hi_hz,
                lo: f_lo_hz,
                hi: f64::INFINITY,
            });
        }
        if rbw_hz <= 0.0 || !rbw_hz.is_finite() {
            return Err(Error::NonPositive {
                name: "rbw",
                value: rbw_hz,
            });
        }
        if rbw_hz > f_hi_hz - f_lo_hz {
            return Err(Error::RbwExceedsSpan {
                rbw_hz,
                span_hz: f_hi_hz - f_lo_hz,
            });
        }
        if n_avg == 0 {
            return Err(Error::NonPositive {
                name: "n_avg",
                value: 0.0,
            });
        }
        Ok(Self {
            f_lo_hz,
            f_hi_hz,
            rbw_hz,
            n_avg,
        })
    }

    /// The five standard audio-band analysis windows used for pieced-together
    /// low-frequency spectra: 10–50 Hz at 250 mHz RBW (100 averages),
    /// 50–200 Hz at 1 Hz (100), 200–800 Hz at 2 Hz (400), 800 Hz–3.2 kHz at
    /// 4 Hz (400), and 3.2–10 kHz at 16 Hz (800).
    pub fn audio_band_preset() -> [SpectralWindow; 5] {
        [
            SpectralWindow::new(10.0, 50.0, 0.25, 100).unwrap(),
            SpectralWindow::new(50.0, 200.0, 1.0, 100).unwrap(),
            SpectralWindow::new(200.0, 800.0, 2.0, 400).unwrap(),
            SpectralWindow::new(800.0, 3200.0, 4.0, 400).unwrap(),
            SpectralWindow::new(3200.0, 10e3, 16.0, 800).unwrap(),
        ]
    }
}

/// Tuning of the spectral estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// Target for segment count times FFT bins per RBW band. Segments are
    /// lengthened (finer FFT resolution) until a window's bins reach this
    /// many effective averages, data permitting.
    pub min_effective_averages: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        // sized so that RBW-integrated bins stay within ±0.2 dB of a flat
        // input despite the bin-to-bin correlation of the Hann window
        Self {
            min_effective_averages: 24_000,
        }
    }
}

/// Shot-noise power spectral density reference for a given local-oscillator
/// power. Linear in the power; the absolute scale is an arbitrary
/// normalization ([`SHOT_NOISE_PSD_PER_WATT`]).
pub const SHOT_NOISE_PSD_PER_WATT: f64 = 1.0;

pub fn shot_noise_reference(lo_power_w: f64) -> Result<f64> {
    if lo_power_w <= 0.0 || !lo_power_w.is_finite() {
        return Err(Error::NonPositive {
            name: "lo_power",
            value: lo_power_w,
        });
    }
    Ok(lo_power_w * SHOT_NOISE_PSD_PER_WATT)
}

/// Averaged-periodogram estimate of the variance relative to a shot-noise
/// PSD reference, windowed per [`SpectralWindow`].
///
/// Each window is estimated from `n_avg` non-overlapping Hann segments; the
/// segment length is chosen so that one RBW band spans enough FFT bins to
/// reach [`EstimatorConfig::min_effective_averages`], shrinking to the
/// available data if necessary. Unbiased on white noise.
pub fn estimate_noise_spectrum(
    ts: &TimeSeries,
    windows: &[SpectralWindow],
    shot_psd: f64,
    cfg: &EstimatorConfig,
) -> Result<NoiseSpectrum> {
    if shot_psd <= 0.0 || !shot_psd.is_finite() {
        return Err(Error::NonPositive {
            name: "shot_psd",
            value: shot_psd,
        });
    }
    let fs = ts.sample_rate();
    let mut planner = FftPlanner::<f64>::new();
    let mut bins = Vec::new();

    for w in windows {
        if w.f_hi_hz > 0.5 * fs {
            return Err(Error::WindowAboveNyquist {
                f_hi_hz: w.f_hi_hz,
                nyquist_hz: 0.5 * fs,
            });
        }
        let base_len = (fs / w.rbw_hz).round() as usize;
        let required = w.n_avg * base_len;
        if ts.len() < required {
            return Err(Error::InsufficientSamples {
                f_lo_hz: w.f_lo_hz,
                f_hi_hz: w.f_hi_hz,
                required,
                actual: ts.len(),
            });
        }
        let k_target = cfg.min_effective_averages.div_ceil(w.n_avg).max(1);
        let n_fft = (k_target * base_len).min(ts.len() / w.n_avg).max(base_len);
        let df = fs / n_fft as f64;
        if df > w.rbw_hz * (1.0 + 1e-9) {
            return Err(Error::RbwUnresolvable {
                rbw_hz: w.rbw_hz,
                resolution_hz: df,
            });
        }

        // Hann-windowed averaged periodogram, one-sided PSD normalization
        let hann: Vec<f64> = (0..n_fft)
            .map(|i| 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / n_fft as f64).cos()))
            .collect();
        let u: f64 = hann.iter().map(|w| w * w).sum();
        let fft = planner.plan_fft_forward(n_fft);
        let half = n_fft / 2;
        let mut acc = vec![0.0f64; half + 1];
        let mut buf = vec![rustfft::num_complex::Complex64::new(0.0, 0.0); n_fft];
        for seg in 0..w.n_avg {
            let offset = seg * n_fft;
            for i in 0..n_fft {
                buf[i] = rustfft::num_complex::Complex64::new(
                    ts.samples()[offset + i] * hann[i],
                    0.0,
                );
            }
            fft.process(&mut buf);
            for (k, a) in acc.iter_mut().enumerate() {
                *a += buf[k].norm_sqr();
            }
        }
        let psd_at = |k: usize| 2.0 * acc[k] / (w.n_avg as f64 * fs * u);

        let n_bins = ((w.f_hi_hz - w.f_lo_hz) / w.rbw_hz + 1e-9).floor() as usize;
        for j in 0..n_bins {
            let band_lo = w.f_lo_hz + j as f64 * w.rbw_hz;
            let band_hi = band_lo + w.rbw_hz;
            let k_start = (band_lo / df - 1e-9).ceil().max(1.0) as usize;
            let mut k = k_start;
            let mut power = 0.0;
            let mut count = 0usize;
            while k <= half && (k as f64) * df < band_hi - 1e-9 * df {
                power += psd_at(k) * df;
                count += 1;
                k += 1;
            }
            if count == 0 {
                return Err(Error::RbwUnresolvable {
                    rbw_hz: w.rbw_hz,
                    resolution_hz: df,
                });
            }
            bins.push(SpectralBin {
                freq_hz: band_lo + 0.5 * w.rbw_hz,
                rel_variance: power / (shot_psd * count as f64 * df),
                rbw_hz: w.rbw_hz,
                n_avg: w.n_avg,
            });
        }
    }
    NoiseSpectrum::new(bins)
}

/// Dark-noise-corrected spectrum plus the bins that could not be corrected.
#[derive(Debug, Clone, PartialEq)]
pub struct DarkCorrected {
    pub spectrum: NoiseSpectrum,
    /// Indices where the dark variance was at or above the measured one;
    /// those bins keep the uncorrected value.
    pub flagged: Vec<usize>,
}

/// Per-bin linear variance subtraction of detector dark noise.
///
/// Both spectra must share the same bin layout and shot-noise
/// normalization. Bins where the dark level reaches the measured one are
/// reported in `flagged` rather than clamped.
pub fn dark_noise_subtract(measured: &NoiseSpectrum, dark: &NoiseSpectrum) -> Result<DarkCorrected> {
    let m = measured.bins();
    let d = dark.bins();
    if m.len() != d.len() {
        return Err(Error::BinMismatch { index: m.len().min(d.len()) });
    }
    let mut out = Vec::with_capacity(m.len());
    let mut flagged = Vec::new();
    for (i, (mb, db)) in m.iter().zip(d).enumerate() {
        let tol = 1e-9 * mb.freq_hz.abs().max(1.0);
        if (mb.freq_hz - db.freq_hz).abs() > tol || (mb.rbw_hz - db.rbw_hz).abs() > tol {
            return Err(Error::BinMismatch { index: i });
        }
        let corrected = mb.rel_variance - db.rel_variance;
        if corrected > 0.0 {
            out.push(SpectralBin {
                rel_variance: corrected,
                ..*mb
            });
        } else {
            flagged.push(i);
            out.push(*mb);
        }
    }
    Ok(DarkCorrected {
        spectrum: NoiseSpectrum::new(out)?,
        flagged,
    })
}
