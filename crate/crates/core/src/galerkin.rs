//! Ulam–Galerkin discretization of the jump operator.
//!
//! Space-time is cut into cells `(i, k)`: state `i` and time cell `k`. The
//! entry `Ĵ[(i,k), (j,l)]` is the probability that the next jump lands in
//! cell `(j, l)` when the current jump time is uniform on cell `k` in state
//! `i`. For a generator constant on each cell these entries have closed
//! forms, so assembly needs no quadrature. Rows are indexed time-block
//! outer, state inner: `flat(i, k) = k·N + i`.

use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::generator::{RateMatrixSequence, TimeGrid};
use crate::math::{self, phi, psi};
use crate::operators::{SpaceTimeVector, VectorKind};
use crate::sparse::{CsrMatrix, CsrRows};

/// Flat layout of `N` states times `M` time cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceTimeIndexer {
    n: usize,
    m: usize,
}

impl SpaceTimeIndexer {
    pub fn new(n: usize, m: usize) -> Self {
        Self { n, m }
    }

    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn num_blocks(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.n * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn flat(&self, state: usize, block: usize) -> usize {
        block * self.n + state
    }

    #[inline]
    pub fn cell(&self, flat: usize) -> (usize, usize) {
        (flat % self.n, flat / self.n)
    }

    /// Flat index range of time block `block`.
    pub fn block_range(&self, block: usize) -> Range<usize> {
        block * self.n..(block + 1) * self.n
    }

    pub fn check_state(&self, state: usize) -> Result<()> {
        if state < self.n {
            Ok(())
        } else {
            Err(Error::StateOutOfRange {
                index: state,
                n: self.n,
            })
        }
    }

    pub fn check_block(&self, block: usize) -> Result<()> {
        if block < self.m {
            Ok(())
        } else {
            Err(Error::BlockOutOfRange {
                index: block,
                m: self.m,
            })
        }
    }
}

/// Sparse block upper-triangular jump matrix with its survival data.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpMatrix {
    indexer: SpaceTimeIndexer,
    grid: TimeGrid,
    matrix: CsrMatrix,
    /// `q_i` on each cell, flat layout.
    outbound: Vec<f64>,
    /// `1 - Σ_row Ĵ`, clamped to `[0, 1]`.
    survival_mass: Vec<f64>,
}

/// Mass split of one row: jump probability and closed-form survival past the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowMass {
    pub jump: f64,
    pub survival: f64,
}

/// Pushes the entries of row `(i, k)` in ascending column order.
fn row_entries(seq: &RateMatrixSequence, i: usize, k: usize, out: &mut CsrRows) {
    let n = seq.num_states();
    let grid = seq.grid();
    let m = grid.len();
    let q_k = seq.outbound(i, k);
    let width_k = grid.width(k);
    let same_block = psi(q_k, width_k) / width_k;
    let lead = phi(q_k, width_k) / width_k;

    let mut entries: Vec<(usize, f64)> = seq
        .matrix(k)
        .row(i)
        .map(|(j, rate)| (k * n + j, rate * same_block))
        .collect();

    let mut through = 1.0;
    for l in k + 1..m {
        let q_l = seq.outbound(i, l);
        let width_l = grid.width(l);
        if q_l > 0.0 {
            let leave = -math::expm1(-q_l * width_l);
            let common = lead * leave * through;
            entries.extend(
                seq.matrix(l)
                    .row(i)
                    .map(|(j, rate)| (l * n + j, rate / q_l * common)),
            );
        }
        through *= math::exp(-q_l * width_l);
    }
    out.push_row(entries);
}

/// Assembles rows `flat_rows` (a contiguous range) of the jump matrix.
pub fn assemble_rows(seq: &RateMatrixSequence, flat_rows: Range<usize>) -> CsrRows {
    let n = seq.num_states();
    let mut out = CsrRows::default();
    for r in flat_rows {
        row_entries(seq, r % n, r / n, &mut out);
    }
    out
}

/// Closed-form assembly of the whole jump matrix.
pub fn assemble(seq: &RateMatrixSequence) -> JumpMatrix {
    let total = seq.num_states() * seq.num_cells();
    JumpMatrix::from_row_runs(seq, alloc::vec![assemble_rows(seq, 0..total)])
}

impl JumpMatrix {
    /// Joins row runs covering `0..N·M` in order (see [`assemble_rows`]).
    pub fn from_row_runs(seq: &RateMatrixSequence, runs: Vec<CsrRows>) -> Self {
        let indexer = SpaceTimeIndexer::new(seq.num_states(), seq.num_cells());
        let matrix = CsrMatrix::from_row_runs(indexer.len(), runs);
        assert_eq!(matrix.rows(), indexer.len(), "row runs must cover every cell");
        let outbound = (0..indexer.len())
            .map(|r| {
                let (i, k) = indexer.cell(r);
                seq.outbound(i, k)
            })
            .collect();
        Self::finish(indexer, seq.grid().clone(), matrix, outbound)
    }

    fn finish(indexer: SpaceTimeIndexer, grid: TimeGrid, matrix: CsrMatrix, outbound: Vec<f64>) -> Self {
        let survival_mass = (0..indexer.len())
            .map(|r| (1.0 - matrix.row_sum(r)).clamp(0.0, 1.0))
            .collect();
        Self {
            indexer,
            grid,
            matrix,
            outbound,
            survival_mass,
        }
    }

    /// Rebuilds a jump matrix from stored parts, checking its invariants.
    pub fn from_parts(grid: TimeGrid, num_states: usize, matrix: CsrMatrix, outbound: Vec<f64>) -> Result<Self> {
        let indexer = SpaceTimeIndexer::new(num_states, grid.len());
        if matrix.rows() != indexer.len() || matrix.cols() != indexer.len() {
            return Err(Error::DimensionMismatch {
                expected: indexer.len(),
                found: matrix.rows(),
            });
        }
        if outbound.len() != indexer.len() {
            return Err(Error::DimensionMismatch {
                expected: indexer.len(),
                found: outbound.len(),
            });
        }
        for r in 0..indexer.len() {
            let (_, k) = indexer.cell(r);
            let (cols, vals) = matrix.row(r);
            if cols.iter().any(|&c| indexer.cell(c).1 < k) {
                return Err(Error::InvalidJumpMatrix {
                    row: r,
                    reason: "entry below the block diagonal",
                });
            }
            if vals.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidJumpMatrix {
                    row: r,
                    reason: "entry outside [0, 1]",
                });
            }
            if matrix.row_sum(r) > 1.0 + 1e-12 {
                return Err(Error::InvalidJumpMatrix {
                    row: r,
                    reason: "row mass exceeds one",
                });
            }
        }
        Ok(Self::finish(indexer, grid, matrix, outbound))
    }

    pub fn indexer(&self) -> SpaceTimeIndexer {
        self.indexer
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn num_states(&self) -> usize {
        self.indexer.num_states()
    }

    pub fn num_blocks(&self) -> usize {
        self.indexer.num_blocks()
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }

    /// `q_i` on time cell `k`.
    pub fn outbound(&self, i: usize, k: usize) -> f64 {
        self.outbound[self.indexer.flat(i, k)]
    }

    pub fn outbound_rates(&self) -> &[f64] {
        &self.outbound
    }

    /// `Ĵ[(i,k), (j,l)]`.
    pub fn entry(&self, i: usize, k: usize, j: usize, l: usize) -> f64 {
        self.matrix.get(self.indexer.flat(i, k), self.indexer.flat(j, l))
    }

    /// Probability of no further jump before the horizon, per cell.
    pub fn survival_masses(&self) -> &[f64] {
        &self.survival_mass
    }

    pub fn survival_mass(&self, i: usize, k: usize) -> f64 {
        self.survival_mass[self.indexer.flat(i, k)]
    }

    /// `Ŝ(i,k,l) = 1 - Σ_{j, s ≤ l} Ĵ[(i,k),(j,s)]`: probability of no jump
    /// up to `t_l` from a uniform start in cell `(i, k)`, `k ≤ l`.
    pub fn block_survival(&self, i: usize, k: usize, l: usize) -> f64 {
        let r = self.indexer.flat(i, k);
        let (cols, vals) = self.matrix.row(r);
        let end = (l + 1) * self.indexer.num_states();
        let upto = cols.partition_point(|&c| c < end);
        1.0 - vals[..upto].iter().sum::<f64>()
    }

    /// `Ŝ(·,·,l)` for every cell; cells after block `l` get zero.
    pub fn block_survival_slice(&self, l: usize) -> Vec<f64> {
        let end = self.indexer.block_range(l).end;
        (0..self.indexer.len())
            .map(|r| if r < end { self.block_survival(r % self.num_states(), r / self.num_states(), l) } else { 0.0 })
            .collect()
    }

    /// Exact `ΔT_k⁻¹ ∫_{T_k} S(i, τ, t_l) dτ` for `k ≤ l`.
    pub fn closed_form_survival(&self, i: usize, k: usize, l: usize) -> f64 {
        let q_k = self.outbound(i, k);
        let mut value = phi(q_k, self.grid.width(k)) / self.grid.width(k);
        for m in k + 1..=l {
            value *= math::exp(-self.outbound(i, m) * self.grid.width(m));
        }
        value
    }

    /// Jump mass of row `(i, k)` and its closed-form survival to the horizon.
    pub fn row_mass(&self, i: usize, k: usize) -> Result<RowMass> {
        self.indexer.check_state(i)?;
        self.indexer.check_block(k)?;
        Ok(RowMass {
            jump: self.matrix.row_sum(self.indexer.flat(i, k)),
            survival: self.closed_form_survival(i, k, self.num_blocks() - 1),
        })
    }

    fn check_len(&self, v: &SpaceTimeVector) -> Result<()> {
        if v.len() != self.indexer.len() {
            return Err(Error::DimensionMismatch {
                expected: self.indexer.len(),
                found: v.len(),
            });
        }
        Ok(())
    }

    /// Pushes cell masses one jump forward: `f ↦ fᵀ Ĵ`.
    pub fn apply_forward(&self, f: &SpaceTimeVector) -> Result<SpaceTimeVector> {
        self.check_len(f)?;
        let values = self.matrix.vec_mul(f.values())?;
        Ok(SpaceTimeVector::new(self.indexer, values, VectorKind::Density))
    }

    /// Pulls an observable one jump back: `g ↦ Ĵ g`.
    pub fn apply_adjoint(&self, g: &SpaceTimeVector) -> Result<SpaceTimeVector> {
        self.check_len(g)?;
        let values = self.matrix.mul_vec(g.values())?;
        Ok(SpaceTimeVector::new(self.indexer, values, VectorKind::Observable))
    }
}
