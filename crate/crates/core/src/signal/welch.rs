//! Power spectral density by Welch's method: averaged periodograms of
//! Hann-windowed segments. No detrending, so a constant signal keeps all of
//! its power in the DC bin.

use super::SignalError;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// One-sided power spectral density with its estimation metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    /// Ascending frequencies, `k / (segment_length * dt)`.
    pub frequencies: Vec<f64>,
    /// Density-scaled power per frequency bin.
    pub power: Vec<f64>,
    pub segment_length: usize,
    pub overlap: usize,
    pub n_segments: usize,
    pub window: &'static str,
}

impl PowerSpectrum {
    pub fn frequency_resolution(&self) -> f64 {
        self.frequencies.get(1).copied().unwrap_or(0.0)
    }

    /// Frequency and power of the strongest bin inside `[f_lo, f_hi]`.
    pub fn peak_in_band(&self, f_lo: f64, f_hi: f64) -> Option<(f64, f64)> {
        self.frequencies
            .iter()
            .zip(&self.power)
            .filter(|(&f, _)| f >= f_lo && f <= f_hi)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(&f, &p)| (f, p))
    }

    /// Peak power in the band divided by the median power within `window`
    /// of the peak (the `notch` immediately around it excluded): a
    /// peak-versus-local-broadband ratio. Near 1 for smooth spectra, large
    /// for line spectra.
    pub fn prominence_in_band(&self, f_lo: f64, f_hi: f64, window: f64, notch: f64) -> Option<f64> {
        let (f_peak, p_peak) = self.peak_in_band(f_lo, f_hi)?;
        let mut background: Vec<f64> = self
            .frequencies
            .iter()
            .zip(&self.power)
            .filter(|(&f, _)| {
                let d = (f - f_peak).abs();
                d <= window && d > notch
            })
            .map(|(_, &p)| p)
            .collect();
        if background.is_empty() {
            return None;
        }
        background.sort_by(f64::total_cmp);
        let median = background[background.len() / 2];
        (median > 0.0).then(|| p_peak / median)
    }
}

/// Welch PSD of a uniformly sampled signal: split into Hann-windowed
/// segments advanced by `segment_length - overlap`, average the squared
/// spectra, and scale so the integral of the PSD over frequency recovers
/// the signal's mean square (Parseval-consistent density scaling).
pub fn welch_psd(
    signal: &[f64],
    dt: f64,
    segment_length: usize,
    overlap: usize,
) -> Result<PowerSpectrum, SignalError> {
    if segment_length > signal.len() {
        return Err(SignalError::SegmentTooLong {
            signal: signal.len(),
            segment: segment_length,
        });
    }
    if overlap >= segment_length {
        return Err(SignalError::InvalidOverlap {
            overlap,
            segment: segment_length,
        });
    }
    let n = segment_length;
    let step = n - overlap;
    let fs = 1.0 / dt;

    // Periodic Hann window.
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect();
    let window_power: f64 = window.iter().map(|w| w * w).sum();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);

    let n_out = n / 2 + 1;
    let mut accum = vec![0.0; n_out];
    let mut n_segments = 0usize;
    let mut buffer: Vec<Complex<f64>> = vec![Complex::default(); n];
    let mut offset = 0usize;
    while offset + n <= signal.len() {
        for i in 0..n {
            buffer[i] = Complex::new(signal[offset + i] * window[i], 0.0);
        }
        fft.process(&mut buffer);
        for (k, acc) in accum.iter_mut().enumerate() {
            *acc += buffer[k].norm_sqr();
        }
        n_segments += 1;
        offset += step;
    }

    let base_scale = 1.0 / (fs * window_power * n_segments as f64);
    let power: Vec<f64> = accum
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            // One-sided: double everything except DC and (for even n) Nyquist.
            let one_sided = if k == 0 || (n % 2 == 0 && k == n / 2) {
                1.0
            } else {
                2.0
            };
            p * base_scale * one_sided
        })
        .collect();
    let frequencies: Vec<f64> = (0..n_out).map(|k| k as f64 * fs / n as f64).collect();

    Ok(PowerSpectrum {
        frequencies,
        power,
        segment_length: n,
        overlap,
        n_segments,
        window: "hann",
    })
}
