//! Time-dependent generators: time grids, sparse rate matrices, embedded
//! jump probabilities and the square-root approximation on grids.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result, Violation};
use crate::math;

/// Ordered cell edges `t_0 < t_1 < ... < t_M`; cell `k` (0-based) is `(t_k, t_{k+1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    edges: Vec<f64>,
}

impl TimeGrid {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2
            || edges.iter().any(|t| !t.is_finite())
            || edges.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidTimeGrid);
        }
        Ok(Self { edges })
    }

    /// `cells` equal-width cells covering `[start, end]`.
    pub fn uniform(start: f64, end: f64, cells: usize) -> Result<Self> {
        if cells == 0 || !(end > start) {
            return Err(Error::InvalidTimeGrid);
        }
        let width = (end - start) / cells as f64;
        let mut edges: Vec<f64> = (0..cells).map(|k| start + k as f64 * width).collect();
        edges.push(end);
        Self::new(edges)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Number of cells `M`.
    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start(&self) -> f64 {
        self.edges[0]
    }

    pub fn end(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    /// Left edge of cell `k`.
    pub fn lower(&self, k: usize) -> f64 {
        self.edges[k]
    }

    /// Right edge of cell `k`.
    pub fn upper(&self, k: usize) -> f64 {
        self.edges[k + 1]
    }

    pub fn width(&self, k: usize) -> f64 {
        self.edges[k + 1] - self.edges[k]
    }

    /// Cell containing `t` under the left-open convention; `t_0` maps to cell 0.
    pub fn cell_of(&self, t: f64) -> Option<usize> {
        if !(t >= self.start() && t <= self.end()) {
            return None;
        }
        let idx = self.edges.partition_point(|&e| e < t);
        Some(idx.saturating_sub(1))
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        if t >= self.start() && t <= self.end() {
            Ok(())
        } else {
            Err(Error::TimeOutOfRange {
                time: t,
                start: self.start(),
                end: self.end(),
            })
        }
    }
}

/// Sparse generator: off-diagonal rates in compressed rows plus a stored diagonal.
///
/// Explicit zero off-diagonals are dropped, so the stored pattern is the
/// set of pairs with a nonzero rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRateMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    rates: Vec<f64>,
    diag: Vec<f64>,
}

impl SparseRateMatrix {
    /// Builds a generator from off-diagonal rates; the diagonal is set to the
    /// negative row sum. Diagonal triplets in the input are ignored.
    pub fn from_off_diagonal<I>(n: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut m = Self::from_entries(n, entries.into_iter().filter(|&(i, j, _)| i != j))?;
        m.recompute_diagonal();
        Ok(m)
    }

    /// Stores entries as given, diagonal included (absent diagonal entries are zero).
    /// The result may violate generator invariants; see [`validate_generator`].
    pub fn from_entries<I>(n: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut diag = vec![0.0; n];
        let mut seen_diag = vec![false; n];
        let mut off: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in entries {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange { row: i, col: j, n });
            }
            if i == j {
                if seen_diag[i] {
                    return Err(Error::DuplicateEntry { row: i, col: j });
                }
                seen_diag[i] = true;
                diag[i] = v;
            } else {
                off.push((i, j, v));
            }
        }
        off.sort_by_key(|e| (e.0, e.1));
        if let Some(w) = off.windows(2).find(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1) {
            return Err(Error::DuplicateEntry {
                row: w[0].0,
                col: w[0].1,
            });
        }
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(off.len());
        let mut rates = Vec::with_capacity(off.len());
        for &(i, j, v) in off.iter().filter(|e| e.2 != 0.0) {
            row_ptr[i + 1] += 1;
            cols.push(j);
            rates.push(v);
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            n,
            row_ptr,
            cols,
            rates,
            diag,
        })
    }

    /// Row-major dense input, diagonal taken as given.
    pub fn from_dense(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: r.len(),
            });
        }
        Self::from_entries(
            n,
            rows.iter()
                .enumerate()
                .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &v)| (i, j, v))),
        )
    }

    pub fn with_recomputed_diagonal(mut self) -> Self {
        self.recompute_diagonal();
        self
    }

    fn recompute_diagonal(&mut self) {
        for i in 0..self.n {
            self.diag[i] = -self.outbound_rate(i);
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Off-diagonal `(j, q_ij)` pairs of row `i`, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.rates[r].iter().copied())
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.diag[i]
    }

    /// `q_i = Σ_{j≠i} q_ij`.
    pub fn outbound_rate(&self, i: usize) -> f64 {
        self.row(i).map(|(_, v)| v).sum()
    }

    /// Entry `q_ij`, diagonal included.
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(p) => self.rates[r.start + p],
            Err(_) => 0.0,
        }
    }

    /// Number of stored off-diagonal entries.
    pub fn nnz_off_diagonal(&self) -> usize {
        self.cols.len()
    }

    pub fn off_diagonal_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    fn violations(&self, index: usize, expected_dim: usize, out: &mut Vec<Violation>) {
        if self.n != expected_dim {
            out.push(Violation::Dimension {
                matrix: index,
                expected: expected_dim,
                found: self.n,
            });
        }
        for i in 0..self.n {
            let mut off_sum = 0.0;
            let mut scale: f64 = 1.0;
            for (j, v) in self.row(i) {
                if !v.is_finite() {
                    out.push(Violation::NonFinite {
                        matrix: index,
                        row: i,
                        col: j,
                    });
                } else if v < 0.0 {
                    out.push(Violation::NegativeRate {
                        matrix: index,
                        row: i,
                        col: j,
                        value: v,
                    });
                }
                off_sum += v;
                scale += math::abs(v);
            }
            let d = self.diag[i];
            if !d.is_finite() {
                out.push(Violation::NonFinite {
                    matrix: index,
                    row: i,
                    col: i,
                });
                continue;
            }
            let defect = off_sum + d;
            if math::abs(defect) > ROW_SUM_TOL * scale {
                out.push(Violation::RowSum {
                    matrix: index,
                    row: i,
                    defect,
                });
            }
        }
    }
}

/// Row-sum tolerance, relative to `1 + Σ_j |q_ij|`.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Lists every broken invariant across `matrices`; empty iff all are valid
/// generators of a common dimension (that of the first matrix).
pub fn validate_generator(matrices: &[SparseRateMatrix]) -> Vec<Violation> {
    let mut out = Vec::new();
    let Some(first) = matrices.first() else {
        return out;
    };
    for (k, m) in matrices.iter().enumerate() {
        m.violations(k, first.n, &mut out);
    }
    out
}

/// Embedded jump-chain row `q̃_i·` as sparse `(j, probability)` pairs.
///
/// An absorbing row (`q_i = 0`) maps to itself with probability one.
pub fn embedded_probabilities(q: &SparseRateMatrix, i: usize) -> Vec<(usize, f64)> {
    let total = q.outbound_rate(i);
    if total == 0.0 {
        return vec![(i, 1.0)];
    }
    q.row(i).map(|(j, v)| (j, v / total)).collect()
}

/// Piecewise-constant generator: `matrices[k]` holds on cell `k` of `grid`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrixSequence {
    grid: TimeGrid,
    matrices: Vec<SparseRateMatrix>,
    outbound: Vec<f64>,
}

impl RateMatrixSequence {
    pub fn new(grid: TimeGrid, matrices: Vec<SparseRateMatrix>) -> Result<Self> {
        if matrices.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: matrices.len(),
            });
        }
        let violations = validate_generator(&matrices);
        if !violations.is_empty() {
            return Err(Error::InvalidGenerator(violations));
        }
        let n = matrices[0].dim();
        let mut outbound = Vec::with_capacity(n * matrices.len());
        for m in &matrices {
            outbound.extend((0..n).map(|i| m.outbound_rate(i)));
        }
        Ok(Self {
            grid,
            matrices,
            outbound,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn matrices(&self) -> &[SparseRateMatrix] {
        &self.matrices
    }

    pub fn matrix(&self, k: usize) -> &SparseRateMatrix {
        &self.matrices[k]
    }

    pub fn num_states(&self) -> usize {
        self.matrices[0].dim()
    }

    pub fn num_cells(&self) -> usize {
        self.matrices.len()
    }

    /// `q_i` on cell `k`.
    pub fn outbound(&self, i: usize, k: usize) -> f64 {
        self.outbound[k * self.num_states() + i]
    }

    /// Generator in force at time `t` (left-open cells).
    pub fn at(&self, t: f64) -> Option<&SparseRateMatrix> {
        self.grid.cell_of(t).map(|k| &self.matrices[k])
    }

    pub(crate) fn check_state(&self, i: usize) -> Result<()> {
        let n = self.num_states();
        if i < n {
            Ok(())
        } else {
            Err(Error::StateOutOfRange { index: i, n })
        }
    }
}

/// Calls `builder(k, t_lo, t_hi)` for every cell and collects a validated sequence.
pub fn rate_sequence_from_protocol<F>(grid: TimeGrid, mut builder: F) -> Result<RateMatrixSequence>
where
    F: FnMut(usize, f64, f64) -> Result<SparseRateMatrix>,
{
    let mut matrices = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let m = builder(k, grid.lower(k), grid.upper(k)).map_err(|e| Error::Builder {
            interval: k,
            source: Box::new(e),
        })?;
        matrices.push(m);
    }
    RateMatrixSequence::new(grid, matrices)
}

/// Potential values on an `nx × ny` rectangular grid with square cells of side `h`.
///
/// State index is `row * nx + col` (row-major); neighbors are the 4-neighborhood.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPotential {
    nx: usize,
    ny: usize,
    h: f64,
    values: Vec<f64>,
}

impl GridPotential {
    pub fn new(nx: usize, ny: usize, h: f64, values: Vec<f64>) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidParameter {
                name: "nx/ny",
                reason: "grid extents must be positive",
            });
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter {
                name: "h",
                reason: "cell size must be positive and finite",
            });
        }
        if values.len() != nx * ny {
            return Err(Error::DimensionMismatch {
                expected: nx * ny,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "values",
                reason: "potential values must be finite",
            });
        }
        Ok(Self { nx, ny, h, values })
    }

    /// Samples `potential(x, y)` at `(x0 + col·h, y0 + row·h)`.
    pub fn from_fn<F>(nx: usize, ny: usize, h: f64, origin: (f64, f64), potential: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64,
    {
        let values = (0..ny)
            .flat_map(|r| (0..nx).map(move |c| (r, c)))
            .map(|(r, c)| potential(origin.0 + c as f64 * h, origin.1 + r as f64 * h))
            .collect();
        Self::new(nx, ny, h, values)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn state(&self, row: usize, col: usize) -> usize {
        row * self.nx + col
    }

    /// 4-neighbors of state `i` in ascending index order.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let (r, c) = (i / self.nx, i % self.nx);
        let up = (r > 0).then(|| i - self.nx);
        let left = (c > 0).then(|| i - 1);
        let right = (c + 1 < self.nx).then(|| i + 1);
        let down = (r + 1 < self.ny).then(|| i + self.nx);
        [up, left, right, down].into_iter().flatten()
    }
}

/// Square-root approximation generator at inverse temperature `beta`:
/// `Q_ij = Φ·A_ij·exp(-β(V_j - V_i)/2)` with `Φ = 1/(β h²)`.
pub fn sqra_generator(potential: &GridPotential, beta: f64) -> Result<SparseRateMatrix> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter {
            name: "beta",
            reason: "inverse temperature must be positive and finite",
        });
    }
    let flat_rate = 1.0 / (beta * potential.h * potential.h);
    let v = &potential.values;
    let entries = (0..potential.len()).flat_map(|i| {
        potential
            .neighbors(i)
            .map(move |j| (i, j, flat_rate * math::exp(-0.5 * beta * (v[j] - v[i]))))
    });
    SparseRateMatrix::from_off_diagonal(potential.len(), entries)
}
