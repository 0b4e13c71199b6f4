//! Instantaneous phase through the analytic signal.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Analytic signal `x + i H(x)` of a real signal, computed in the frequency
/// domain (zero the negative frequencies, double the positive ones). The
/// mean is removed first so the phase is not pinned by a DC offset.
pub fn analytic_signal(signal: &[f64]) -> Vec<Complex<f64>> {
    let n = signal.len();
    assert!(n >= 4, "analytic signal needs at least 4 samples");
    let mean = signal.iter().sum::<f64>() / n as f64;
    let mut buffer: Vec<Complex<f64>> = signal.iter().map(|&v| Complex::new(v - mean, 0.0)).collect();

    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buffer);

    let half = n / 2;
    for (k, value) in buffer.iter_mut().enumerate() {
        if k == 0 || (n % 2 == 0 && k == half) {
            // DC and Nyquist stay.
        } else if k < half || (n % 2 == 1 && k == half) {
            *value *= 2.0;
        } else {
            *value = Complex::default();
        }
    }

    planner.plan_fft_inverse(n).process(&mut buffer);
    let scale = 1.0 / n as f64;
    for value in &mut buffer {
        *value *= scale;
    }
    buffer
}

/// Instantaneous phase (radians, wrapped to (-pi, pi]) of the analytic
/// signal.
pub fn hilbert_phase(signal: &[f64]) -> Vec<f64> {
    analytic_signal(signal).iter().map(|c| c.arg()).collect()
}

/// Remove 2-pi jumps so the phase becomes a continuous curve.
pub fn unwrap_phase(phase: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phase.len());
    let mut offset = 0.0;
    for (i, &p) in phase.iter().enumerate() {
        if i > 0 {
            let delta = p - phase[i - 1];
            if delta > std::f64::consts::PI {
                offset -= 2.0 * std::f64::consts::PI;
            } else if delta < -std::f64::consts::PI {
                offset += 2.0 * std::f64::consts::PI;
            }
        }
        out.push(p + offset);
    }
    out
}
