//! Built-in benchmark problems.
//!
//! `two_state`: states A (0) and B (1) on `[0, 8]`; A→B at rate 1 while `t < 4`
//! with B absorbing, then B→A at rate 1 with A absorbing.
//!
//! `triple_well`: SQRA diffusion on a 9×7 grid over `[-2, 2] × [-1, 2]`
//! (h = 0.5) in a three-well potential, annealed from β = 1 on `[0, 1)`
//! to β = 10 on `[1, 2]`.

use alloc::vec::Vec;

use crate::error::Result;
use crate::generator::{
    rate_sequence_from_protocol, sqra_generator, GridPotential, RateMatrixSequence,
    SparseRateMatrix, TimeGrid,
};
use crate::math;

pub const TWO_STATE_HORIZON: f64 = 8.0;
pub const TWO_STATE_SWITCH: f64 = 4.0;
pub const TWO_STATE_CELLS: usize = 8;

pub const TRIPLE_WELL_NX: usize = 9;
pub const TRIPLE_WELL_NY: usize = 7;
pub const TRIPLE_WELL_H: f64 = 0.5;
pub const TRIPLE_WELL_ORIGIN: (f64, f64) = (-2.0, -1.0);
pub const TRIPLE_WELL_HORIZON: f64 = 2.0;
pub const TRIPLE_WELL_SWITCH: f64 = 1.0;
pub const TRIPLE_WELL_CELLS: usize = 6;
pub const TRIPLE_WELL_BETA_HOT: f64 = 1.0;
pub const TRIPLE_WELL_BETA_COLD: f64 = 10.0;

/// Generator of the two-state switch at time `t`.
pub fn two_state_generator(t: f64) -> SparseRateMatrix {
    let entries = if t < TWO_STATE_SWITCH {
        [(0, 1, 1.0)]
    } else {
        [(1, 0, 1.0)]
    };
    SparseRateMatrix::from_off_diagonal(2, entries).expect("static two-state generator")
}

/// Two-state switch on a custom grid over `[0, 8]`; each cell takes the
/// generator at its midpoint, so the grid must contain `t = 4` as an edge
/// for the protocol to be represented exactly.
pub fn two_state_on(grid: TimeGrid) -> Result<RateMatrixSequence> {
    rate_sequence_from_protocol(grid, |_, lo, hi| Ok(two_state_generator(0.5 * (lo + hi))))
}

pub fn two_state() -> RateMatrixSequence {
    let grid = TimeGrid::uniform(0.0, TWO_STATE_HORIZON, TWO_STATE_CELLS).expect("static grid");
    two_state_on(grid).expect("static two-state protocol")
}

/// Three-well potential with deep minima near `(±1, 0)` and a shallow one near `(0, 5/3)`:
/// a Gaussian mixture with quartic confinement.
pub fn triple_well_potential(x: f64, y: f64) -> f64 {
    let g = |dx: f64, dy: f64| math::exp(-dx * dx - dy * dy);
    let quartic = |z: f64| z * z * z * z;
    3.0 * g(x, y - 1.0 / 3.0) - 3.0 * g(x, y - 5.0 / 3.0) - 5.0 * g(x - 1.0, y)
        - 5.0 * g(x + 1.0, y)
        + 0.2 * quartic(x)
        + 0.2 * quartic(y - 1.0 / 3.0)
}

pub fn triple_well_grid() -> GridPotential {
    GridPotential::from_fn(
        TRIPLE_WELL_NX,
        TRIPLE_WELL_NY,
        TRIPLE_WELL_H,
        TRIPLE_WELL_ORIGIN,
        triple_well_potential,
    )
    .expect("static triple-well grid")
}

/// Annealing schedule: hot on `[0, 1)`, cold afterwards.
pub fn triple_well_beta(t: f64) -> f64 {
    if t < TRIPLE_WELL_SWITCH {
        TRIPLE_WELL_BETA_HOT
    } else {
        TRIPLE_WELL_BETA_COLD
    }
}

/// Triple-well protocol on a custom grid; cells take β at their midpoint.
pub fn triple_well_on(grid: TimeGrid) -> Result<RateMatrixSequence> {
    let potential = triple_well_grid();
    let hot = sqra_generator(&potential, TRIPLE_WELL_BETA_HOT)?;
    let cold = sqra_generator(&potential, TRIPLE_WELL_BETA_COLD)?;
    rate_sequence_from_protocol(grid, |_, lo, hi| {
        let mid = 0.5 * (lo + hi);
        Ok(if mid < TRIPLE_WELL_SWITCH {
            hot.clone()
        } else {
            cold.clone()
        })
    })
}

pub fn triple_well() -> RateMatrixSequence {
    let grid = TimeGrid::uniform(0.0, TRIPLE_WELL_HORIZON, TRIPLE_WELL_CELLS).expect("static grid");
    triple_well_on(grid).expect("static triple-well protocol")
}

/// Uniform grid with step `dt` over `[start, end]`, if `dt` divides the span.
pub fn uniform_grid_with_step(start: f64, end: f64, dt: f64) -> Option<TimeGrid> {
    let cells = math::round((end - start) / dt);
    if cells < 1.0 || math::abs(cells * dt - (end - start)) > 1e-9 * (end - start) {
        return None;
    }
    let cells = cells as usize;
    let edges: Vec<f64> = (0..=cells)
        .map(|k| if k == cells { end } else { start + k as f64 * dt })
        .collect();
    TimeGrid::new(edges).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_protocol_switches_after_four_cells() {
        let seq = two_state();
        for k in 0..4 {
            let m = seq.matrix(k);
            assert_eq!((m.rate(0, 0), m.rate(0, 1), m.rate(1, 0), m.rate(1, 1)), (-1.0, 1.0, 0.0, 0.0));
        }
        for k in 4..8 {
            let m = seq.matrix(k);
            assert_eq!((m.rate(0, 0), m.rate(0, 1), m.rate(1, 0), m.rate(1, 1)), (0.0, 0.0, 1.0, -1.0));
        }
    }

    #[test]
    fn triple_well_protocol_is_hot_then_cold() {
        let seq = triple_well();
        let p = triple_well_grid();
        let hot = sqra_generator(&p, 1.0).unwrap();
        let cold = sqra_generator(&p, 10.0).unwrap();
        for k in 0..3 {
            assert_eq!(seq.matrix(k), &hot);
        }
        for k in 3..6 {
            assert_eq!(seq.matrix(k), &cold);
        }
        assert_eq!(seq.num_states(), 63);
    }

    #[test]
    fn triple_well_minima_are_where_expected() {
        let v = triple_well_potential;
        // Deep wells lower than the shallow one, which is lower than the saddle region.
        assert!(v(1.0, 0.0) < v(0.0, 1.5));
        assert!((v(1.0, 0.0) - v(-1.0, 0.0)).abs() < 1e-12);
        assert!(v(0.0, 1.5) < v(0.0, 0.5));
        assert!(v(1.0, 0.0) < v(1.5, 0.0) && v(1.0, 0.0) < v(0.5, 0.0));
    }

    #[test]
    fn step_grid_rejects_non_divisors() {
        assert!(uniform_grid_with_step(0.0, 2.0, 0.3).is_none());
        assert_eq!(uniform_grid_with_step(0.0, 2.0, 0.25).unwrap().len(), 8);
    }
}
