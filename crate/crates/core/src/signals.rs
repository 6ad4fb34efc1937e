//! Seeded Gaussian test-signal generators, optionally shaped to a target
//! one-sided power spectral density.

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::sideband::TimeSeries;

/// White Gaussian noise with one-sided PSD `psd` up to Nyquist
/// (sample variance `psd·fs/2`).
pub fn white_noise(
    sample_rate_hz: f64,
    n: usize,
    psd: f64,
    rng: &mut impl Rng,
) -> Result<TimeSeries> {
    if psd <= 0.0 || !psd.is_finite() {
        return Err(Error::NonPositive {
            name: "psd",
            value: psd,
        });
    }
    let sigma = (psd * sample_rate_hz / 2.0).sqrt();
    let samples = (0..n)
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    TimeSeries::new(sample_rate_hz, 0.0, samples)
}

/// Gaussian noise whose one-sided PSD follows `psd_fn(f)`, synthesized in
/// the frequency domain. DC and Nyquist are zeroed.
pub fn noise_with_psd(
    sample_rate_hz: f64,
    n: usize,
    rng: &mut impl Rng,
    psd_fn: impl Fn(f64) -> f64,
) -> Result<TimeSeries> {
    if n < 4 {
        return Err(Error::NonPositive {
            name: "n",
            value: n as f64,
        });
    }
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    let df = sample_rate_hz / n as f64;
    for k in 1..n / 2 {
        let s = psd_fn(k as f64 * df).max(0.0);
        // E|X_k|^2 = S·fs·N/2 so that the inverse transform has PSD S
        let sigma = (s * sample_rate_hz * n as f64 / 4.0).sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        spec[k] = Complex64::new(sigma * re, sigma * im);
        spec[n - k] = spec[k].conj();
    }
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_inverse(n).process(&mut spec);
    let inv_n = 1.0 / n as f64;
    let samples = spec.iter().map(|c| c.re * inv_n).collect();
    TimeSeries::new(sample_rate_hz, 0.0, samples)
}
