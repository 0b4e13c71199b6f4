//! Spectral and correlation tooling: Welch power spectra, Hilbert-transform
//! phase, Pearson correlation, and embedding-lag selection by shadow
//! manifold interpolation.

mod hilbert;
mod smi;
mod welch;

use crate::embedding::EmbeddingError;
use thiserror::Error;

pub use hilbert::{analytic_signal, hilbert_phase, unwrap_phase};
pub use smi::{greedy_tau_scan, smi_reconstruct, GreedyTauScan, SmiResult, TauScanCurve};
pub use welch::{welch_psd, PowerSpectrum};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("segment length {segment} exceeds signal length {signal}")]
    SegmentTooLong { signal: usize, segment: usize },
    #[error("overlap {overlap} must be smaller than segment length {segment}")]
    InvalidOverlap { overlap: usize, segment: usize },
    #[error("sequence lengths differ: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("sequence of length {len} is too short (need at least {needed})")]
    TooShort { len: usize, needed: usize },
    #[error("zero variance leaves the correlation undefined")]
    ZeroVariance,
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// Sample Pearson correlation coefficient, bounded in [-1, 1].
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64, SignalError> {
    if a.len() != b.len() {
        return Err(SignalError::LengthMismatch { a: a.len(), b: b.len() });
    }
    if a.len() < 2 {
        return Err(SignalError::TooShort { len: a.len(), needed: 2 });
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(SignalError::ZeroVariance);
    }
    Ok((cov / (var_a * var_b).sqrt()).clamp(-1.0, 1.0))
}
