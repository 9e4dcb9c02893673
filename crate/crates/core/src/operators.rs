//! Solvers on the assembled jump matrix.
//!
//! Densities are cell masses pushed forward by `fᵀĴ`; observables are cell
//! values pulled back by `Ĵg`. Because `Ĵ` is block upper-triangular in
//! time, backward problems are solved block by block from the terminal
//! block down, with one `N × N` solve per block.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::galerkin::{JumpMatrix, SpaceTimeIndexer};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorKind {
    /// Mass per cell.
    Density,
    /// Value per cell.
    Observable,
}

/// Values over all `N·M` space-time cells in the flat layout of [`SpaceTimeIndexer`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeVector {
    indexer: SpaceTimeIndexer,
    values: Vec<f64>,
    kind: VectorKind,
}

impl SpaceTimeVector {
    /// # Panics
    /// If `values.len()` does not match the indexer.
    pub fn new(indexer: SpaceTimeIndexer, values: Vec<f64>, kind: VectorKind) -> Self {
        assert_eq!(values.len(), indexer.len(), "vector length must be N·M");
        Self {
            indexer,
            values,
            kind,
        }
    }

    pub fn zeros(indexer: SpaceTimeIndexer, kind: VectorKind) -> Self {
        Self::new(indexer, vec![0.0; indexer.len()], kind)
    }

    /// Spacelike embedding: `spatial` placed on time block `block`.
    pub fn spacelike(indexer: SpaceTimeIndexer, spatial: &SpatialVector, block: usize) -> Result<Self> {
        indexer.check_block(block)?;
        if spatial.len() != indexer.num_states() {
            return Err(Error::DimensionMismatch {
                expected: indexer.num_states(),
                found: spatial.len(),
            });
        }
        let mut v = Self::zeros(indexer, VectorKind::Density);
        v.values[indexer.block_range(block)].copy_from_slice(spatial.values());
        Ok(v)
    }

    pub fn indexer(&self) -> SpaceTimeIndexer {
        self.indexer
    }

    pub fn kind(&self) -> VectorKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, state: usize, block: usize) -> f64 {
        self.values[self.indexer.flat(state, block)]
    }

    pub fn block(&self, block: usize) -> &[f64] {
        &self.values[self.indexer.block_range(block)]
    }

    pub fn l1_norm(&self) -> f64 {
        l1(&self.values)
    }

    pub fn dot(&self, other: &Self) -> f64 {
        dot(&self.values, &other.values)
    }
}

/// A density or observable on the `N` states.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialVector(pub Vec<f64>);

impl SpatialVector {
    pub fn delta(n: usize, state: usize) -> Self {
        let mut v = vec![0.0; n];
        v[state] = 1.0;
        Self(v)
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self(vec![value; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        dot(&self.0, &other.0)
    }
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| math::abs(*x)).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Truncation control for the Neumann series of the jump activity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivityOptions {
    pub tol: f64,
    /// Defaults to `10·M·(1 + max q_i ΔT_k)`.
    pub n_max: Option<usize>,
}

impl Default for ActivityOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            n_max: None,
        }
    }
}

impl ActivityOptions {
    pub fn max_terms(&self, j: &JumpMatrix) -> usize {
        if let Some(n) = self.n_max {
            return n;
        }
        let n = j.num_states();
        let max_load = j
            .outbound_rates()
            .iter()
            .enumerate()
            .map(|(r, q)| q * j.grid().width(r / n))
            .fold(0.0, f64::max);
        let bound = 10.0 * j.num_blocks() as f64 * (1.0 + max_load);
        if bound >= usize::MAX as f64 {
            usize::MAX
        } else {
            math::ceil(bound) as usize
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Activity {
    pub activity: SpaceTimeVector,
    /// Index `n*` of the last series term included.
    pub terms: usize,
    /// `‖Ĵ^{n*} f‖₁`.
    pub residual: f64,
}

/// Jump activity `E f = Σ_n (Ĵᵀ)ⁿ f`, truncated at the first term whose
/// ℓ¹ mass drops below `opts.tol`.
pub fn jump_activity(j: &JumpMatrix, f: &SpaceTimeVector, opts: &ActivityOptions) -> Result<Activity> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: "truncation tolerance must be positive",
        });
    }
    if f.len() != j.indexer().len() {
        return Err(Error::DimensionMismatch {
            expected: j.indexer().len(),
            found: f.len(),
        });
    }
    let n_max = opts.max_terms(j);
    let mut term = f.values.clone();
    let mut sum = term.clone();
    let mut residual = l1(&term);
    let mut n = 0;
    while residual >= opts.tol {
        if n >= n_max {
            return Err(Error::NonConvergence {
                iterations: n,
                residual,
            });
        }
        term = j.matrix().vec_mul(&term)?;
        n += 1;
        for (s, t) in sum.iter_mut().zip(&term) {
            *s += t;
        }
        residual = l1(&term);
    }
    Ok(Activity {
        activity: SpaceTimeVector::new(j.indexer(), sum, VectorKind::Density),
        terms: n,
        residual,
    })
}

/// Projects activity onto time `t_l`: `Σ_{k ≤ l} a_{ik} Ŝ(i,k,l)`.
pub fn synchronize(j: &JumpMatrix, activity: &SpaceTimeVector, l: usize) -> Result<SpatialVector> {
    let idx = j.indexer();
    idx.check_block(l)?;
    if activity.len() != idx.len() {
        return Err(Error::DimensionMismatch {
            expected: idx.len(),
            found: activity.len(),
        });
    }
    let mut out = vec![0.0; idx.num_states()];
    for k in 0..=l {
        for (i, slot) in out.iter_mut().enumerate() {
            let a = activity.get(i, k);
            if a != 0.0 {
                *slot += a * j.block_survival(i, k, l);
            }
        }
    }
    Ok(SpatialVector(out))
}

/// Reconstructed propagator at `t_l` applied to `initial`, placed uniformly
/// on the first time block.
pub fn reconstruct_propagator(
    j: &JumpMatrix,
    initial: &SpatialVector,
    l: usize,
    opts: &ActivityOptions,
) -> Result<SpatialVector> {
    j.indexer().check_block(l)?;
    let f = SpaceTimeVector::spacelike(j.indexer(), initial, 0)?;
    let a = jump_activity(j, &f, opts)?;
    synchronize(j, &a.activity, l)
}

/// Reconstructed densities at every block edge `t_1, ..., t_M`, sharing one activity solve.
pub fn reconstruct_propagator_all(
    j: &JumpMatrix,
    initial: &SpatialVector,
    opts: &ActivityOptions,
) -> Result<(Activity, Vec<SpatialVector>)> {
    let f = SpaceTimeVector::spacelike(j.indexer(), initial, 0)?;
    let a = jump_activity(j, &f, opts)?;
    let densities = (0..j.num_blocks())
        .map(|l| synchronize(j, &a.activity, l))
        .collect::<Result<Vec<_>>>()?;
    Ok((a, densities))
}

/// Blocks with at most this many unknowns are solved by dense LU; larger
/// ones by Gauss–Seidel sweeps.
pub const DIRECT_SOLVE_LIMIT: usize = 2000;
const BLOCK_RESIDUAL_TOL: f64 = 1e-12;
const GAUSS_SEIDEL_MAX_SWEEPS: usize = 100_000;

/// Solves `x = Ĵ x + source` on free cells of blocks `0..=last`, with
/// `fixed` cells held at their values and cells after `last` at zero.
pub(crate) fn solve_backward(
    j: &JumpMatrix,
    last: usize,
    fixed: &[Option<f64>],
    source: &[f64],
) -> Result<Vec<f64>> {
    let idx = j.indexer();
    let n = idx.num_states();
    let horizon = idx.block_range(last).end;
    let mut x = vec![0.0; idx.len()];
    let mut free: Vec<usize> = Vec::with_capacity(n);
    let mut local: Vec<Option<usize>> = vec![None; n];

    for k in (0..=last).rev() {
        let range = idx.block_range(k);
        free.clear();
        for (i, r) in range.clone().enumerate() {
            match fixed[r] {
                Some(v) => {
                    x[r] = v;
                    local[i] = None;
                }
                None => {
                    local[i] = Some(free.len());
                    free.push(i);
                }
            }
        }
        if free.is_empty() {
            continue;
        }
        let size = free.len();
        let mut rhs = vec![0.0; size];
        // Within-block couplings among free cells, as sparse (a, b, value).
        let mut couplings: Vec<(usize, usize, f64)> = Vec::new();
        for (a, &i) in free.iter().enumerate() {
            let r = range.start + i;
            let (cols, vals) = j.matrix().row(r);
            let mut acc = source[r];
            for (&c, &v) in cols.iter().zip(vals) {
                if c >= horizon {
                    break;
                }
                if c < range.end {
                    match local[c - range.start] {
                        Some(b) => couplings.push((a, b, v)),
                        None => acc += v * x[c],
                    }
                } else {
                    acc += v * x[c];
                }
            }
            rhs[a] = acc;
        }

        let sol = if size <= DIRECT_SOLVE_LIMIT {
            solve_dense(size, &couplings, &rhs)?
        } else {
            solve_gauss_seidel(size, &couplings, &rhs)?
        };

        let scale = rhs.iter().fold(1.0f64, |m, v| m.max(math::abs(*v)));
        let mut resid = sol.clone();
        for (a, r) in resid.iter_mut().enumerate() {
            *r -= rhs[a];
        }
        for &(a, b, v) in &couplings {
            resid[a] -= v * sol[b];
        }
        let worst = resid.iter().fold(0.0f64, |m, v| m.max(math::abs(*v)));
        if !(worst <= BLOCK_RESIDUAL_TOL * scale) {
            return Err(Error::NonConvergence {
                iterations: 0,
                residual: worst,
            });
        }
        for (a, &i) in free.iter().enumerate() {
            x[range.start + i] = sol[a];
        }
    }
    Ok(x)
}

/// `(I - B) x = rhs` by LU with partial pivoting.
fn solve_dense(size: usize, couplings: &[(usize, usize, f64)], rhs: &[f64]) -> Result<Vec<f64>> {
    let mut a = vec![0.0; size * size];
    for d in 0..size {
        a[d * size + d] = 1.0;
    }
    for &(r, c, v) in couplings {
        a[r * size + c] -= v;
    }
    let mut x = rhs.to_vec();
    for col in 0..size {
        let pivot = (col..size)
            .max_by(|&p, &q| math::abs(a[p * size + col]).total_cmp(&math::abs(a[q * size + col])))
            .unwrap();
        if a[pivot * size + col] == 0.0 {
            return Err(Error::NonConvergence {
                iterations: 0,
                residual: f64::INFINITY,
            });
        }
        if pivot != col {
            for c in 0..size {
                a.swap(col * size + c, pivot * size + c);
            }
            x.swap(col, pivot);
        }
        let diag = a[col * size + col];
        for r in col + 1..size {
            let factor = a[r * size + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for c in col..size {
                a[r * size + c] -= factor * a[col * size + c];
            }
            x[r] -= factor * x[col];
        }
    }
    for r in (0..size).rev() {
        let mut acc = x[r];
        for c in r + 1..size {
            acc -= a[r * size + c] * x[c];
        }
        x[r] = acc / a[r * size + r];
    }
    Ok(x)
}

fn solve_gauss_seidel(size: usize, couplings: &[(usize, usize, f64)], rhs: &[f64]) -> Result<Vec<f64>> {
    let mut by_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); size];
    for &(r, c, v) in couplings {
        by_row[r].push((c, v));
    }
    let scale = rhs.iter().fold(1.0f64, |m, v| m.max(math::abs(*v)));
    let mut x = rhs.to_vec();
    for _ in 0..GAUSS_SEIDEL_MAX_SWEEPS {
        let mut change = 0.0f64;
        for r in 0..size {
            let new = rhs[r] + by_row[r].iter().map(|&(c, v)| v * x[c]).sum::<f64>();
            change = change.max(math::abs(new - x[r]));
            x[r] = new;
        }
        if change <= 1e-3 * BLOCK_RESIDUAL_TOL * scale {
            return Ok(x);
        }
    }
    Err(Error::NonConvergence {
        iterations: GAUSS_SEIDEL_MAX_SWEEPS,
        residual: f64::NAN,
    })
}

/// Koopman values `K(i, k) ≈ E[g(X_{t_l}) | uniform start in cell (i, k)]`
/// for `k ≤ l`, from `K = ĴK + Ŝ(·,·,l)·g`; cells after `l` are zero.
pub fn koopman_solve(j: &JumpMatrix, g: &SpatialVector, l: usize) -> Result<SpaceTimeVector> {
    let idx = j.indexer();
    idx.check_block(l)?;
    if g.len() != idx.num_states() {
        return Err(Error::DimensionMismatch {
            expected: idx.num_states(),
            found: g.len(),
        });
    }
    let survival = j.block_survival_slice(l);
    let source: Vec<f64> = survival
        .iter()
        .enumerate()
        .map(|(r, s)| s * g.0[r % idx.num_states()])
        .collect();
    let fixed = vec![None; idx.len()];
    let x = solve_backward(j, l, &fixed, &source)?;
    Ok(SpaceTimeVector::new(idx, x, VectorKind::Observable))
}

/// Column `y` of the reconstructed transition kernel to time `t_l`.
pub fn koopman_matrix_column(j: &JumpMatrix, y: usize, l: usize) -> Result<SpaceTimeVector> {
    j.indexer().check_state(y)?;
    koopman_solve(j, &SpatialVector::delta(j.num_states(), y), l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::assemble;
    use crate::generator::{RateMatrixSequence, SparseRateMatrix, TimeGrid};
    use crate::presets;

    #[test]
    fn activity_of_zero_is_zero() {
        let j = assemble(&presets::two_state());
        let f = SpaceTimeVector::zeros(j.indexer(), VectorKind::Density);
        let a = jump_activity(&j, &f, &ActivityOptions::default()).unwrap();
        assert_eq!(a.terms, 0);
        assert!(a.activity.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn activity_without_further_jumps_is_identity() {
        // Last block of the two-state switch: A is absorbing there.
        let j = assemble(&presets::two_state());
        let f = SpaceTimeVector::spacelike(j.indexer(), &SpatialVector::delta(2, 0), 7).unwrap();
        let a = jump_activity(&j, &f, &ActivityOptions::default()).unwrap();
        assert_eq!(a.activity, f);
    }

    #[test]
    fn activity_telescopes() {
        let j = assemble(&presets::two_state());
        let f = SpaceTimeVector::spacelike(j.indexer(), &SpatialVector(vec![0.7, 0.3]), 0).unwrap();
        let opts = ActivityOptions::default();
        let a = jump_activity(&j, &f, &opts).unwrap();
        let ja = j.apply_forward(&a.activity).unwrap();
        assert!((a.activity.l1_norm() - f.l1_norm() - ja.l1_norm()).abs() < 10.0 * opts.tol);
    }

    #[test]
    fn activity_reports_non_convergence() {
        let j = assemble(&presets::two_state());
        let f = SpaceTimeVector::spacelike(j.indexer(), &SpatialVector::delta(2, 0), 0).unwrap();
        let opts = ActivityOptions {
            tol: 1e-10,
            n_max: Some(1),
        };
        assert!(matches!(jump_activity(&j, &f, &opts), Err(Error::NonConvergence { iterations: 1, .. })));
    }

    #[test]
    fn synchronize_unit_mass_gives_block_survival() {
        let j = assemble(&presets::two_state());
        let mut a = SpaceTimeVector::zeros(j.indexer(), VectorKind::Density);
        a.values[j.indexer().flat(0, 1)] = 1.0;
        let s = synchronize(&j, &a, 3).unwrap();
        assert_eq!(s.0[0], j.block_survival(0, 1, 3));
        assert_eq!(s.0[1], 0.0);
        // Closed form: (1 - e^{-1}) e^{-2} for rate 1 and two more unit cells.
        let exact = (1.0 - (-1.0f64).exp()) * (-2.0f64).exp();
        assert!((s.0[0] - exact).abs() < 1e-14);
    }

    #[test]
    fn absorbing_system_keeps_the_density() {
        let grid = TimeGrid::uniform(0.0, 1.0, 4).unwrap();
        let zero = SparseRateMatrix::from_off_diagonal(3, []).unwrap();
        let seq = RateMatrixSequence::new(grid, vec![zero; 4]).unwrap();
        let j = assemble(&seq);
        let f = SpatialVector(vec![0.2, 0.5, 0.3]);
        for l in 0..4 {
            let p = reconstruct_propagator(&j, &f, l, &ActivityOptions::default()).unwrap();
            assert_eq!(p, f);
        }
    }

    #[test]
    fn koopman_of_constants() {
        let j = assemble(&presets::triple_well());
        let ones = koopman_solve(&j, &SpatialVector::constant(63, 1.0), 5).unwrap();
        assert!(ones.values().iter().all(|v| (v - 1.0).abs() < 1e-10));
        let zeros = koopman_solve(&j, &SpatialVector::constant(63, 0.0), 5).unwrap();
        assert!(zeros.values().iter().all(|&v| v == 0.0));
        let early = koopman_solve(&j, &SpatialVector::constant(63, 1.0), 2).unwrap();
        for k in 0..6 {
            let expect = if k <= 2 { 1.0 } else { 0.0 };
            assert!(early.block(k).iter().all(|v| (v - expect).abs() < 1e-10));
        }
    }

    #[test]
    fn koopman_columns_sum_to_one() {
        let j = assemble(&presets::two_state());
        let a = koopman_matrix_column(&j, 0, 7).unwrap();
        let b = koopman_matrix_column(&j, 1, 7).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x + y - 1.0).abs() < 1e-12);
        }
        let direct = koopman_solve(&j, &SpatialVector::delta(2, 1), 7).unwrap();
        assert_eq!(b, direct);
    }

    #[test]
    fn absorbing_column_without_inflow_is_its_fiber() {
        // State 2 is absorbing and unreachable.
        let grid = TimeGrid::uniform(0.0, 2.0, 4).unwrap();
        let q = SparseRateMatrix::from_off_diagonal(3, [(0, 1, 1.0), (1, 0, 2.0)]).unwrap();
        let seq = RateMatrixSequence::new(grid, vec![q; 4]).unwrap();
        let j = assemble(&seq);
        let col = koopman_matrix_column(&j, 2, 3).unwrap();
        for k in 0..4 {
            assert_eq!(col.get(2, k), 1.0);
            assert_eq!(col.get(0, k), 0.0);
            assert_eq!(col.get(1, k), 0.0);
        }
    }

    #[test]
    fn dense_and_iterative_block_solves_agree() {
        let couplings = vec![(0, 1, 0.5), (1, 0, 0.25), (1, 2, 0.5), (2, 0, 0.9)];
        let rhs = vec![1.0, 0.0, 0.1];
        let d = solve_dense(3, &couplings, &rhs).unwrap();
        let g = solve_gauss_seidel(3, &couplings, &rhs).unwrap();
        for (a, b) in d.iter().zip(&g) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
