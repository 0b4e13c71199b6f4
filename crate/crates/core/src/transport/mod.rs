//! Earth Mover's Distance between equal-mass binned fingerprints.
//!
//! The distance is the minimum total mass-times-distance cost of morphing
//! one histogram into the other, with distances measured between cell
//! centers in physical (measurement-unit) coordinates. The minimization is
//! solved exactly by a transportation simplex — no entropic smoothing — so
//! the distance is zero only when the two distributions are identical.

mod simplex;

use crate::embedding::BinnedPdf;
use thiserror::Error;

pub use simplex::SimplexError;

/// One entry of an optimal plan: mass moved between two grid cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportMove {
    /// Source cell index pair (ix, iy).
    pub from: (usize, usize),
    /// Destination cell index pair (ix, iy).
    pub to: (usize, usize),
    pub mass: f64,
}

/// An optimal transport plan together with its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub moves: Vec<TransportMove>,
    pub cost: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmdError {
    #[error("distributions live on different grids")]
    GridMismatch,
    #[error("total masses differ: {f} vs {g}")]
    MassMismatch { f: f64, g: f64 },
    #[error(transparent)]
    Solver(#[from] SimplexError),
}

/// Earth Mover's Distance between two equal-mass distributions on the same
/// grid.
pub fn emd(f: &BinnedPdf, g: &BinnedPdf) -> Result<f64, EmdError> {
    Ok(solve(f, g)?.0)
}

/// As [`emd`], also returning an optimal plan (positive moves only).
pub fn emd_with_plan(f: &BinnedPdf, g: &BinnedPdf) -> Result<(f64, TransportPlan), EmdError> {
    let (cost, moves) = solve(f, g)?;
    Ok((cost, TransportPlan { moves, cost }))
}

fn solve(f: &BinnedPdf, g: &BinnedPdf) -> Result<(f64, Vec<TransportMove>), EmdError> {
    if f.grid != g.grid {
        return Err(EmdError::GridMismatch);
    }
    if (f.total_mass - g.total_mass).abs()
        > 1e-9 * f.total_mass.max(g.total_mass).max(1.0)
    {
        return Err(EmdError::MassMismatch {
            f: f.total_mass,
            g: g.total_mass,
        });
    }

    // Only occupied cells become nodes; fingerprints fill a fraction of the
    // grid, so this keeps the simplex small.
    let sources: Vec<(usize, usize, f64)> = f.occupied().collect();
    let sinks: Vec<(usize, usize, f64)> = g.occupied().collect();
    if sources.is_empty() && sinks.is_empty() {
        return Ok((0.0, Vec::new()));
    }

    let supply: Vec<f64> = sources.iter().map(|&(_, _, c)| c).collect();
    let mut demand: Vec<f64> = sinks.iter().map(|&(_, _, c)| c).collect();
    // Remove any sub-tolerance imbalance so the equality constraints close.
    let total_supply: f64 = supply.iter().sum();
    let total_demand: f64 = demand.iter().sum();
    if total_supply != total_demand && total_demand > 0.0 {
        let correction = total_supply / total_demand;
        for d in &mut demand {
            *d *= correction;
        }
    }

    let grid = &f.grid;
    let mut cost = Vec::with_capacity(sources.len() * sinks.len());
    for &(sx, sy, _) in &sources {
        let cs = grid.center(sx, sy);
        for &(tx, ty, _) in &sinks {
            let ct = grid.center(tx, ty);
            cost.push(((cs[0] - ct[0]).powi(2) + (cs[1] - ct[1]).powi(2)).sqrt());
        }
    }

    let (objective, flows) = simplex::solve_transportation(&supply, &demand, &cost)?;
    let moves = flows
        .into_iter()
        .map(|(i, j, mass)| TransportMove {
            from: (sources[i].0, sources[i].1),
            to: (sinks[j].0, sinks[j].1),
            mass,
        })
        .collect();
    Ok((objective, moves))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::GridSpec;
    use approx::assert_relative_eq;

    fn pdf_from_counts(grid: GridSpec, cells: &[((usize, usize), f64)]) -> BinnedPdf {
        let mut counts = vec![0.0; grid.n_cells()];
        let mut total = 0.0;
        for &((ix, iy), c) in cells {
            counts[ix * grid.bins[1] + iy] += c;
            total += c;
        }
        BinnedPdf {
            grid,
            counts,
            total_mass: total,
        }
    }

    fn unit_spacing_grid(bins: usize) -> GridSpec {
        // Cell centers are exactly one unit apart.
        GridSpec::new([0.0, 0.0], [bins as f64, bins as f64], [bins, bins]).unwrap()
    }

    #[test]
    fn identical_distributions_have_zero_distance() {
        let grid = unit_spacing_grid(6);
        let f = pdf_from_counts(grid, &[((0, 0), 3.0), ((2, 5), 4.0), ((4, 1), 2.0)]);
        assert_relative_eq!(emd(&f, &f).unwrap(), 0.0);
        let (cost, plan) = emd_with_plan(&f, &f).unwrap();
        assert_relative_eq!(cost, 0.0);
        // Identity plan: all mass stays in place.
        for mv in &plan.moves {
            assert_eq!(mv.from, mv.to);
        }
    }

    #[test]
    fn single_mass_moves_euclidean_distance() {
        let grid = unit_spacing_grid(8);
        let f = pdf_from_counts(grid, &[((0, 0), 1.0)]);
        let g = pdf_from_counts(grid, &[((3, 4), 1.0)]);
        assert_relative_eq!(emd(&f, &g).unwrap(), 5.0);
    }

    #[test]
    fn two_bin_swap_plan() {
        let grid = unit_spacing_grid(2);
        let f = pdf_from_counts(grid, &[((0, 0), 1.0)]);
        let g = pdf_from_counts(grid, &[((1, 0), 1.0)]);
        let (cost, plan) = emd_with_plan(&f, &g).unwrap();
        assert_relative_eq!(cost, 1.0);
        assert_eq!(plan.moves.len(), 1);
        assert_eq!(plan.moves[0].from, (0, 0));
        assert_eq!(plan.moves[0].to, (1, 0));
        assert_relative_eq!(plan.moves[0].mass, 1.0);
    }

    #[test]
    fn plan_marginals_match_inputs() {
        let grid = unit_spacing_grid(3);
        let f = pdf_from_counts(grid, &[((0, 0), 4.0), ((1, 2), 5.0), ((2, 1), 1.0)]);
        let g = pdf_from_counts(grid, &[((2, 2), 6.0), ((0, 1), 3.0), ((1, 0), 1.0)]);
        let (_, plan) = emd_with_plan(&f, &g).unwrap();
        for (ix, iy, c) in f.occupied() {
            let out: f64 = plan
                .moves
                .iter()
                .filter(|m| m.from == (ix, iy))
                .map(|m| m.mass)
                .sum();
            assert_relative_eq!(out, c, epsilon = 1e-12);
        }
        for (ix, iy, c) in g.occupied() {
            let inflow: f64 = plan
                .moves
                .iter()
                .filter(|m| m.to == (ix, iy))
                .map(|m| m.mass)
                .sum();
            assert_relative_eq!(inflow, c, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_grid_and_mass_mismatches() {
        let f = pdf_from_counts(unit_spacing_grid(3), &[((0, 0), 1.0)]);
        let g = pdf_from_counts(unit_spacing_grid(4), &[((0, 0), 1.0)]);
        assert!(matches!(emd(&f, &g), Err(EmdError::GridMismatch)));

        let h = pdf_from_counts(unit_spacing_grid(3), &[((0, 0), 2.0)]);
        assert!(matches!(emd(&f, &h), Err(EmdError::MassMismatch { .. })));
    }

    #[test]
    fn distance_is_symmetric() {
        let grid = unit_spacing_grid(4);
        let f = pdf_from_counts(grid, &[((0, 0), 2.0), ((3, 3), 3.0), ((1, 2), 5.0)]);
        let g = pdf_from_counts(grid, &[((2, 0), 4.0), ((0, 3), 6.0)]);
        assert_relative_eq!(emd(&f, &g).unwrap(), emd(&g, &f).unwrap(), epsilon = 1e-9);
    }

    #[test]
    fn scaling_grid_coordinates_scales_distance() {
        let cells_f = [((0usize, 0usize), 2.0), ((2, 3), 1.0)];
        let cells_g = [((1usize, 1usize), 1.5), ((3, 0), 1.5)];
        let base = unit_spacing_grid(4);
        let scaled = GridSpec::new([0.0, 0.0], [12.0, 12.0], [4, 4]).unwrap();
        let d1 = emd(&pdf_from_counts(base, &cells_f), &pdf_from_counts(base, &cells_g)).unwrap();
        let d3 = emd(
            &pdf_from_counts(scaled, &cells_f),
            &pdf_from_counts(scaled, &cells_g),
        )
        .unwrap();
        assert_relative_eq!(d3, 3.0 * d1, epsilon = 1e-9);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn optimal_plans_are_symmetric_with_exact_marginals(
                placements in prop::collection::vec((0usize..25, 0usize..25), 1..60)
            ) {
                // One unit of mass per placement on a 5x5 grid: both sides
                // get equal mass by construction.
                let grid = unit_spacing_grid(5);
                let build = |pick: fn(&(usize, usize)) -> usize| {
                    let mut counts = vec![0.0; grid.n_cells()];
                    for cell in &placements {
                        counts[pick(cell)] += 1.0;
                    }
                    BinnedPdf {
                        grid,
                        counts,
                        total_mass: placements.len() as f64,
                    }
                };
                let f = build(|c| c.0);
                let g = build(|c| c.1);

                prop_assert_eq!(emd(&f, &f).unwrap(), 0.0);
                let (cost, plan) = emd_with_plan(&f, &g).unwrap();
                let reverse = emd(&g, &f).unwrap();
                prop_assert!(cost >= 0.0);
                prop_assert!((cost - reverse).abs() <= 1e-9 * cost.max(1.0));
                for (ix, iy, c) in f.occupied() {
                    let out: f64 = plan
                        .moves
                        .iter()
                        .filter(|m| m.from == (ix, iy))
                        .map(|m| m.mass)
                        .sum();
                    prop_assert!((out - c).abs() < 1e-9);
                }
                for (ix, iy, c) in g.occupied() {
                    let inflow: f64 = plan
                        .moves
                        .iter()
                        .filter(|m| m.to == (ix, iy))
                        .map(|m| m.mass)
                        .sum();
                    prop_assert!((inflow - c).abs() < 1e-9);
                }
            }
        }
    }
}
