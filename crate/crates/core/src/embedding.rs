//! Time-lagged phase portraits and their histogram fingerprints.
//!
//! A scalar measurement is embedded into E dimensions by stacking
//! forward-lagged copies of itself: point i is
//! `(x_i, x_{i+n1}, ..., x_{i+n_{E-1}})` with lag indices `n_k = tau_k/dt`.
//! The repeated trajectories of the embedded signal form a fingerprint of
//! the dynamics; binning the 2D embedding on a fixed grid turns it into a
//! mass distribution that distances (Earth Mover's) can compare.

use thiserror::Error;

/// An E-dimensional delay embedding of a uniformly sampled signal.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayVectorSet {
    /// Embedding dimension E >= 2.
    pub dim: usize,
    /// Lags in time units, one per extra coordinate (length E-1).
    pub lags: Vec<f64>,
    /// Lag indices `n_k = lags[k] / dt`.
    pub lag_indices: Vec<usize>,
    /// Point coordinates, row-major `[point][coordinate]`, flattened.
    coords: Vec<f64>,
}

impl DelayVectorSet {
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Per-axis (min, max) over all points.
    pub fn extents(&self) -> Vec<(f64, f64)> {
        let mut ext = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dim];
        for p in self.iter_points() {
            for (axis, &v) in p.iter().enumerate() {
                ext[axis].0 = ext[axis].0.min(v);
                ext[axis].1 = ext[axis].1.max(v);
            }
        }
        ext
    }
}

/// Uniform 2D binning grid in measurement units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Per-axis lower bounds.
    pub lo: [f64; 2],
    /// Per-axis upper bounds.
    pub hi: [f64; 2],
    /// Bins per axis.
    pub bins: [usize; 2],
}

impl GridSpec {
    pub fn new(lo: [f64; 2], hi: [f64; 2], bins: [usize; 2]) -> Result<Self, EmbeddingError> {
        for axis in 0..2 {
            if !(lo[axis] < hi[axis]) {
                return Err(EmbeddingError::DegenerateExtent { axis });
            }
            if bins[axis] == 0 {
                return Err(EmbeddingError::EmptyGrid);
            }
        }
        Ok(Self { lo, hi, bins })
    }

    pub fn n_cells(&self) -> usize {
        self.bins[0] * self.bins[1]
    }

    pub fn cell_width(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.bins[axis] as f64
    }

    /// Physical coordinates of a cell center.
    pub fn center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [
            self.lo[0] + (ix as f64 + 0.5) * self.cell_width(0),
            self.lo[1] + (iy as f64 + 0.5) * self.cell_width(1),
        ]
    }

    /// Cell index of a point. Cells are half-open `[low, high)` with the top
    /// edge closed; points outside the grid clamp to the nearest edge cell.
    pub fn locate(&self, p: &[f64]) -> (usize, usize) {
        let mut idx = [0usize; 2];
        for axis in 0..2 {
            let rel = (p[axis] - self.lo[axis]) / self.cell_width(axis);
            let i = rel.floor() as i64;
            idx[axis] = i.clamp(0, self.bins[axis] as i64 - 1) as usize;
        }
        (idx[0], idx[1])
    }
}

/// A 2D histogram of an embedding on a shared grid. Mass is raw point
/// counts, not normalized probability, so equal-length measurements give
/// equal-mass distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedPdf {
    pub grid: GridSpec,
    /// Row-major `counts[ix * bins_y + iy]`.
    pub counts: Vec<f64>,
    pub total_mass: f64,
}

impl BinnedPdf {
    pub fn count(&self, ix: usize, iy: usize) -> f64 {
        self.counts[ix * self.grid.bins[1] + iy]
    }

    /// Cells with non-zero mass as `(ix, iy, mass)`.
    pub fn occupied(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let ny = self.grid.bins[1];
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0.0)
            .map(move |(i, &c)| (i / ny, i % ny, c))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("lag {lag} is not an integer multiple of dt = {dt}")]
    LagNotMultipleOfDt { lag: f64, dt: f64 },
    #[error("signal of length {len} is too short for max lag index {max_lag_index}")]
    SignalTooShort { len: usize, max_lag_index: usize },
    #[error("reference extent is degenerate on axis {axis}")]
    DegenerateExtent { axis: usize },
    #[error("grid must have at least one bin per axis")]
    EmptyGrid,
    #[error("binning requires a 2D embedding, got E = {0}")]
    NotTwoDimensional(usize),
}

/// Convert a lag in time units to an exact sample count.
pub fn lag_index(lag: f64, dt: f64) -> Result<usize, EmbeddingError> {
    let ratio = lag / dt;
    let rounded = ratio.round();
    if rounded < 1.0 || (ratio - rounded).abs() > 1e-6 * ratio.abs().max(1.0) {
        return Err(EmbeddingError::LagNotMultipleOfDt { lag, dt });
    }
    Ok(rounded as usize)
}

/// Embed a uniformly sampled signal with the given lags (time units).
pub fn embed(signal: &[f64], lags: &[f64], dt: f64) -> Result<DelayVectorSet, EmbeddingError> {
    let lag_indices: Vec<usize> = lags
        .iter()
        .map(|&lag| lag_index(lag, dt))
        .collect::<Result<_, _>>()?;
    let max_lag = lag_indices.iter().copied().max().unwrap_or(0);
    if signal.len() <= max_lag {
        return Err(EmbeddingError::SignalTooShort {
            len: signal.len(),
            max_lag_index: max_lag,
        });
    }
    let dim = lags.len() + 1;
    let n_points = signal.len() - max_lag;
    let mut coords = Vec::with_capacity(n_points * dim);
    for i in 0..n_points {
        coords.push(signal[i]);
        for &n in &lag_indices {
            coords.push(signal[i + n]);
        }
    }
    Ok(DelayVectorSet {
        dim,
        lags: lags.to_vec(),
        lag_indices,
        coords,
    })
}

/// Histogram a 2D embedding on `grid`. Out-of-grid points clamp to edge
/// cells rather than dropping, so the total mass always equals the point
/// count and equal-length measurements stay comparable.
pub fn bin(points: &DelayVectorSet, grid: &GridSpec) -> Result<BinnedPdf, EmbeddingError> {
    if points.dim != 2 {
        return Err(EmbeddingError::NotTwoDimensional(points.dim));
    }
    let mut counts = vec![0.0; grid.n_cells()];
    for p in points.iter_points() {
        let (ix, iy) = grid.locate(p);
        counts[ix * grid.bins[1] + iy] += 1.0;
    }
    Ok(BinnedPdf {
        grid: *grid,
        counts,
        total_mass: points.len() as f64,
    })
}

/// Fraction of points that fall outside the grid (and would clamp).
pub fn clamped_fraction(points: &DelayVectorSet, grid: &GridSpec) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let outside = points
        .iter_points()
        .filter(|p| {
            // Top edge is closed, so landing exactly on `hi` is in-grid.
            (0..2).any(|axis| p[axis] < grid.lo[axis] || p[axis] > grid.hi[axis])
        })
        .count();
    outside as f64 / points.len() as f64
}

/// Derive the campaign-wide grid from a reference embedding: per-axis
/// extents expanded by `padding` (a fraction of the extent) on each side.
/// The same grid must be reused for every fingerprint that will be compared,
/// so distances live in one common metric space.
pub fn shared_grid(
    reference: &DelayVectorSet,
    bins: usize,
    padding: f64,
) -> Result<GridSpec, EmbeddingError> {
    let ext = reference.extents();
    if reference.dim != 2 {
        return Err(EmbeddingError::NotTwoDimensional(reference.dim));
    }
    let mut lo = [0.0; 2];
    let mut hi = [0.0; 2];
    for axis in 0..2 {
        let (min, max) = ext[axis];
        if !(min < max) {
            return Err(EmbeddingError::DegenerateExtent { axis });
        }
        let pad = padding * (max - min);
        lo[axis] = min - pad;
        hi[axis] = max + pad;
    }
    GridSpec::new(lo, hi, [bins, bins])
}
