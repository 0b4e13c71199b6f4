//! Shadow manifold interpolation: reconstruct one measurement of a system
//! from the delay embedding of another.
//!
//! For every delay vector of the source signal, find its nearest neighbor
//! vectors (excluding a temporal window around the query itself to prevent
//! trivial self-matching) and average the target values at the neighbor
//! times with simplex-projection weights `exp(-d_i / d_min)`. A high
//! Pearson correlation between the reconstruction and the true target means
//! the embedding captures the shared dynamics, which is how embedding lags
//! are chosen.

use super::{pearson, SignalError};
use crate::embedding::{embed, DelayVectorSet};
use rayon::prelude::*;

/// Outcome of one reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct SmiResult {
    /// Lags used for the source embedding (time units).
    pub lags: Vec<f64>,
    /// Embedding dimension E = lags.len() + 1.
    pub dim: usize,
    /// Reconstructed target, one value per delay vector (anchored at the
    /// vector's first coordinate).
    pub reconstruction: Vec<f64>,
    /// Correlation between reconstruction and the true target.
    pub pearson: f64,
}

/// One dimension of the greedy lag scan.
#[derive(Debug, Clone, PartialEq)]
pub struct TauScanCurve {
    pub dim: usize,
    /// Lags frozen from lower dimensions.
    pub fixed_lags: Vec<f64>,
    /// (scanned lag, reconstruction pearson) pairs.
    pub scanned: Vec<(f64, f64)>,
    pub best_lag: f64,
    pub best_pearson: f64,
}

/// Greedy per-dimension scan result.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyTauScan {
    pub curves: Vec<TauScanCurve>,
}

/// Reconstruct `target` from the delay embedding of `source`.
pub fn smi_reconstruct(
    source: &[f64],
    target: &[f64],
    lags: &[f64],
    dt: f64,
    n_neighbors: usize,
) -> Result<SmiResult, SignalError> {
    if source.len() != target.len() {
        return Err(SignalError::LengthMismatch {
            a: source.len(),
            b: target.len(),
        });
    }
    let vectors = embed(source, lags, dt)?;
    let n_points = vectors.len();
    // Need the query itself, its exclusion window, and enough neighbors.
    let exclusion = vectors.lag_indices.iter().copied().max().unwrap_or(1);
    let needed = n_neighbors + 2 * exclusion + 2;
    if n_points < needed {
        return Err(SignalError::TooShort {
            len: n_points,
            needed,
        });
    }

    let truth = &target[..n_points];
    let reconstruction: Vec<f64> = (0..n_points)
        .into_par_iter()
        .map(|query| {
            let neighbors = nearest_neighbors(&vectors, query, n_neighbors, exclusion);
            weighted_average(&neighbors, truth)
        })
        .collect();

    let rho = pearson(&reconstruction, truth)?;
    Ok(SmiResult {
        lags: lags.to_vec(),
        dim: vectors.dim,
        reconstruction,
        pearson: rho,
    })
}

/// `k` nearest vectors to `query`, skipping indices within `exclusion`
/// samples of it. Returns (distance, index) sorted ascending by distance.
fn nearest_neighbors(
    vectors: &DelayVectorSet,
    query: usize,
    k: usize,
    exclusion: usize,
) -> Vec<(f64, usize)> {
    let q = vectors.point(query);
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for j in 0..vectors.len() {
        if j.abs_diff(query) <= exclusion {
            continue;
        }
        let p = vectors.point(j);
        let mut d2 = 0.0;
        for (a, b) in q.iter().zip(p) {
            let d = a - b;
            d2 += d * d;
        }
        if best.len() == k && d2 >= best[k - 1].0 {
            continue;
        }
        let pos = best.partition_point(|&(bd, _)| bd < d2);
        best.insert(pos, (d2, j));
        best.truncate(k);
    }
    for entry in &mut best {
        entry.0 = entry.0.sqrt();
    }
    best
}

/// Simplex-projection weighting: `w_i = exp(-d_i / d_min)`. When the
/// nearest distance is zero the weights degenerate to an indicator on the
/// zero-distance neighbors (uniform if all distances vanish), which is the
/// continuous limit of the formula.
fn weighted_average(neighbors: &[(f64, usize)], values: &[f64]) -> f64 {
    let d_min = neighbors[0].0;
    let mut num = 0.0;
    let mut den = 0.0;
    for &(d, j) in neighbors {
        let w = if d_min > 0.0 {
            (-d / d_min).exp()
        } else if d == 0.0 {
            1.0
        } else {
            0.0
        };
        num += w * values[j];
        den += w;
    }
    num / den
}

/// Greedy lag selection: for E = 2 scan the first lag over `tau_grid`; for
/// each higher dimension freeze the winners and scan the newly added lag.
/// Uses E + 1 nearest neighbors at each dimension.
pub fn greedy_tau_scan(
    source: &[f64],
    target: &[f64],
    dt: f64,
    e_max: usize,
    tau_grid: &[f64],
) -> Result<GreedyTauScan, SignalError> {
    let mut fixed: Vec<f64> = Vec::new();
    let mut curves = Vec::new();
    for dim in 2..=e_max {
        let mut scanned = Vec::with_capacity(tau_grid.len());
        let mut best: Option<(f64, f64)> = None;
        for &tau in tau_grid {
            let mut lags = fixed.clone();
            lags.push(tau);
            let result = smi_reconstruct(source, target, &lags, dt, dim + 1)?;
            scanned.push((tau, result.pearson));
            if best.map_or(true, |(_, b)| result.pearson > b) {
                best = Some((tau, result.pearson));
            }
        }
        let (best_lag, best_pearson) = best.expect("non-empty tau grid");
        curves.push(TauScanCurve {
            dim,
            fixed_lags: fixed.clone(),
            scanned,
            best_lag,
            best_pearson,
        });
        fixed.push(best_lag);
    }
    Ok(GreedyTauScan { curves })
}
