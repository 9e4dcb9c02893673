//! Dense reference computations for verification.
//!
//! Everything here is `O(N³)` and meant for small systems: matrix
//! exponentials of piecewise-constant generators, exact propagators, and the
//! operator-norm error of the reconstructed propagator.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::galerkin::{assemble, JumpMatrix};
use crate::generator::{RateMatrixSequence, SparseRateMatrix, TimeGrid};
use crate::math;
use crate::operators::{reconstruct_propagator, ActivityOptions, SpatialVector};
use crate::presets::uniform_grid_with_step;

/// Largest state space the dense oracle accepts.
pub const ORACLE_MAX_STATES: usize = 500;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// # Panics
    /// If rows have unequal lengths.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn from_sparse(q: &SparseRateMatrix) -> Self {
        let n = q.dim();
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = q.diagonal(i);
        }
        for (i, j, v) in q.off_diagonal_entries() {
            m.data[i * n + j] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// # Panics
    /// On a dimension mismatch.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// # Panics
    /// On a dimension mismatch.
    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "dimension mismatch");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.row(r).iter().sum()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| f64::max(m, math::abs(*v)))
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|v| math::abs(*v)).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        math::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    /// Largest singular value by power iteration on `AᵀA`.
    pub fn two_norm(&self, tol: f64) -> Result<f64> {
        const MAX_ITERATIONS: usize = 1_000_000;
        let gram = self.transpose().mul(self);
        let n = gram.rows;
        if n == 0 || gram.max_abs() == 0.0 {
            return Ok(0.0);
        }
        // Slightly uneven start so it is not orthogonal to the top singular vector by symmetry.
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 + 1.0) / (n as f64 + 1.0)).collect();
        normalize(&mut v);
        let mut lambda = 0.0;
        for it in 0..MAX_ITERATIONS {
            let mut w: Vec<f64> = (0..n).map(|r| dot(gram.row(r), &v)).collect();
            let next = normalize(&mut w);
            if next == 0.0 {
                return Ok(0.0);
            }
            let done = it > 0 && math::abs(next - lambda) <= tol * next;
            lambda = next;
            v = w;
            if done {
                return Ok(math::sqrt(lambda));
            }
        }
        Err(Error::NonConvergence {
            iterations: MAX_ITERATIONS,
            residual: lambda,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = math::sqrt(dot(v, v));
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

/// `e^{tQ}` by scaling and squaring.
///
/// The scaled matrix is shifted by a multiple of the identity so that, for
/// generators, every Taylor term is entrywise nonnegative and no
/// cancellation occurs. For generators each diagonal entry is also reset to
/// one minus its off-diagonal row mass before every squaring; otherwise a
/// rounding defect in the row sums doubles with each squaring, which on stiff
/// generators (30 or more squarings) grows past 1e-8.
pub fn expm(q: &DenseMatrix, t: f64) -> Result<DenseMatrix> {
    if q.rows != q.cols {
        return Err(Error::DimensionMismatch {
            expected: q.rows,
            found: q.cols,
        });
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: "time must be finite and nonnegative",
        });
    }
    if q.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow);
    }
    let n = q.rows;
    let a = q.scale(t);
    let norm = a.inf_norm();
    if !norm.is_finite() {
        return Err(Error::Overflow);
    }
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
        if squarings > 1000 {
            return Err(Error::Overflow);
        }
    }
    let b = a.scale(scale);
    let shift = (0..n).map(|i| math::abs(b.get(i, i))).fold(0.0, f64::max);
    let mut shifted = b;
    for i in 0..n {
        shifted.data[i * n + i] += shift;
    }

    let mut sum = DenseMatrix::identity(n);
    let mut term = DenseMatrix::identity(n);
    for k in 1..=40 {
        term = term.mul(&shifted).scale(1.0 / k as f64);
        let size = term.max_abs();
        for (s, x) in sum.data.iter_mut().zip(&term.data) {
            *s += x;
        }
        if size <= 1e-18 * sum.max_abs() {
            break;
        }
    }
    let conservative = is_generator(q);
    let mut result = sum.scale(math::exp(-shift));
    for _ in 0..squarings {
        if conservative {
            restore_row_sums(&mut result);
        }
        result = result.mul(&result);
    }
    if conservative {
        restore_row_sums(&mut result);
    }
    if result.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow);
    }
    Ok(result)
}

fn is_generator(q: &DenseMatrix) -> bool {
    (0..q.rows).all(|r| {
        let row = q.row(r);
        let off_ok = row.iter().enumerate().all(|(c, &v)| c == r || v >= 0.0);
        let scale: f64 = row.iter().map(|v| math::abs(*v)).sum();
        off_ok && math::abs(row.iter().sum::<f64>()) <= 1e-12 * (1.0 + scale)
    })
}

fn restore_row_sums(p: &mut DenseMatrix) {
    let n = p.rows;
    for r in 0..n {
        let off: f64 = p.row(r).iter().enumerate().filter(|(c, _)| *c != r).map(|(_, v)| v).sum();
        p.data[r * n + r] = 1.0 - off;
    }
}

/// Exact transition matrix `P(s, t)`; row `i` is the law at `t` started from `i` at `s`.
pub fn exact_propagator(seq: &RateMatrixSequence, s: f64, t: f64) -> Result<DenseMatrix> {
    let grid = seq.grid();
    grid.check_time(s)?;
    grid.check_time(t)?;
    if s > t {
        return Err(Error::ReversedTimes { start: s, end: t });
    }
    check_oracle_size(seq.num_states())?;
    let mut p = DenseMatrix::identity(seq.num_states());
    for k in 0..grid.len() {
        let lo = grid.lower(k).max(s);
        let hi = grid.upper(k).min(t);
        if hi > lo {
            let q = DenseMatrix::from_sparse(seq.matrix(k));
            p = p.mul(&expm(&q, hi - lo)?);
        }
    }
    Ok(p)
}

fn check_oracle_size(n: usize) -> Result<()> {
    if n > ORACLE_MAX_STATES {
        return Err(Error::InvalidParameter {
            name: "num_states",
            reason: "dense oracle is limited to 500 states",
        });
    }
    Ok(())
}

/// Reconstructed propagator to the end of block `l`; row `i` is the image of `δ_i`.
pub fn reconstructed_propagator_matrix(j: &JumpMatrix, l: usize, opts: &ActivityOptions) -> Result<DenseMatrix> {
    let n = j.num_states();
    let rows = (0..n)
        .map(|i| reconstruct_propagator(j, &SpatialVector::delta(n, i), l, opts).map(|v| v.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(DenseMatrix::from_rows(&rows))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormError {
    pub two_norm: f64,
    pub frobenius: f64,
}

/// Tolerance of the power iteration behind the induced 2-norm.
pub const TWO_NORM_TOL: f64 = 1e-10;

pub fn norm_error(reconstructed: &DenseMatrix, exact: &DenseMatrix) -> Result<NormError> {
    if (reconstructed.rows, reconstructed.cols) != (exact.rows, exact.cols) {
        return Err(Error::DimensionMismatch {
            expected: exact.rows,
            found: reconstructed.rows,
        });
    }
    let d = reconstructed.sub(exact);
    Ok(NormError {
        two_norm: d.two_norm(TWO_NORM_TOL)?,
        frobenius: d.frobenius_norm(),
    })
}

/// `‖M_l - P(t_0, t_{l+1})‖` for the reconstructed propagator at the end of block `l`.
pub fn operator_norm_error(j: &JumpMatrix, seq: &RateMatrixSequence, l: usize, opts: &ActivityOptions) -> Result<NormError> {
    j.indexer().check_block(l)?;
    check_oracle_size(j.num_states())?;
    let exact = exact_propagator(seq, j.grid().start(), j.grid().upper(l))?;
    let reconstructed = reconstructed_propagator_matrix(j, l, opts)?;
    norm_error(&reconstructed, &exact)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub error: NormError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `ln ε₂` against `ln ΔT`; needs two rows.
    pub slope: Option<f64>,
}

impl ConvergenceTable {
    pub fn from_rows(rows: Vec<ConvergenceRow>) -> Self {
        let slope = fit_slope(&rows);
        Self { rows, slope }
    }

    pub fn is_monotone_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error.two_norm < w[0].error.two_norm)
    }
}

fn fit_slope(rows: &[ConvergenceRow]) -> Option<f64> {
    if rows.len() < 2 || rows.iter().any(|r| !(r.error.two_norm > 0.0)) {
        return None;
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (math::ln(r.dt), math::ln(r.error.two_norm))).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Uniform grid of step `dt` on `[start, end]` that has every switch time as an edge.
pub fn aligned_grid(start: f64, end: f64, switch_times: &[f64], dt: f64) -> Result<TimeGrid> {
    let misaligned = Error::MisalignedStep { dt, start, end };
    if !(dt > 0.0) {
        return Err(misaligned);
    }
    let grid = uniform_grid_with_step(start, end, dt).ok_or_else(|| misaligned.clone())?;
    for &s in switch_times {
        let steps = (s - start) / dt;
        if math::abs(steps - math::round(steps)) > 1e-9 * (1.0 + steps) {
            return Err(misaligned);
        }
    }
    Ok(grid)
}

/// Operator-norm error at the horizon for each `dt` in `dt_list` (sorted descending).
pub fn convergence_study<F>(
    start: f64,
    end: f64,
    switch_times: &[f64],
    dt_list: &[f64],
    builder: F,
    opts: &ActivityOptions,
) -> Result<ConvergenceTable>
where
    F: FnMut(TimeGrid) -> Result<RateMatrixSequence>,
{
    convergence_study_with(start, end, switch_times, dt_list, builder, |seq| {
        let j = assemble(seq);
        operator_norm_error(&j, seq, j.num_blocks() - 1, opts)
    })
}

/// [`convergence_study`] with a caller-supplied error evaluation, e.g. one
/// that assembles and solves columns in parallel.
pub fn convergence_study_with<F, E>(
    start: f64,
    end: f64,
    switch_times: &[f64],
    dt_list: &[f64],
    mut builder: F,
    mut evaluate: E,
) -> Result<ConvergenceTable>
where
    F: FnMut(TimeGrid) -> Result<RateMatrixSequence>,
    E: FnMut(&RateMatrixSequence) -> Result<NormError>,
{
    if dt_list.is_empty() {
        return Err(Error::InvalidParameter {
            name: "dt_list",
            reason: "need at least one step size",
        });
    }
    if dt_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter {
            name: "dt_list",
            reason: "step sizes must be strictly decreasing",
        });
    }
    let grids = dt_list
        .iter()
        .map(|&dt| aligned_grid(start, end, switch_times, dt))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(dt_list.len());
    for (&dt, grid) in dt_list.iter().zip(grids) {
        let seq = builder(grid)?;
        let error = evaluate(&seq)?;
        rows.push(ConvergenceRow { dt, error });
    }
    Ok(ConvergenceTable::from_rows(rows))
}
