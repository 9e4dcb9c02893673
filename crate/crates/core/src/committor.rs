//! Space-time committors and the forward-coherence defect.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::galerkin::{JumpMatrix, SpaceTimeIndexer};
use crate::math;
use crate::operators::{solve_backward, SpaceTimeVector, VectorKind};

/// A set of `(state, block)` cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceTimeSet {
    indexer: SpaceTimeIndexer,
    mask: Vec<bool>,
}

impl SpaceTimeSet {
    pub fn empty(indexer: SpaceTimeIndexer) -> Self {
        Self {
            indexer,
            mask: vec![false; indexer.len()],
        }
    }

    pub fn full(indexer: SpaceTimeIndexer) -> Self {
        Self {
            indexer,
            mask: vec![true; indexer.len()],
        }
    }

    pub fn from_cells<I>(indexer: SpaceTimeIndexer, cells: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut set = Self::empty(indexer);
        for (s, b) in cells {
            set.insert(s, b)?;
        }
        Ok(set)
    }

    /// `states × {blocks.0, ..., blocks.1}`.
    pub fn rect(indexer: SpaceTimeIndexer, states: &[usize], blocks: (usize, usize)) -> Result<Self> {
        let mut set = Self::empty(indexer);
        set.insert_rect(states, blocks)?;
        Ok(set)
    }

    pub fn insert(&mut self, state: usize, block: usize) -> Result<()> {
        self.indexer.check_state(state)?;
        self.indexer.check_block(block)?;
        self.mask[self.indexer.flat(state, block)] = true;
        Ok(())
    }

    pub fn insert_rect(&mut self, states: &[usize], blocks: (usize, usize)) -> Result<()> {
        if blocks.0 > blocks.1 {
            return Err(Error::InvalidParameter {
                name: "blocks",
                reason: "block range must satisfy lo <= hi",
            });
        }
        for b in blocks.0..=blocks.1 {
            for &s in states {
                self.insert(s, b)?;
            }
        }
        Ok(())
    }

    pub fn indexer(&self) -> SpaceTimeIndexer {
        self.indexer
    }

    pub fn contains(&self, state: usize, block: usize) -> bool {
        self.mask[self.indexer.flat(state, block)]
    }

    pub fn contains_flat(&self, flat: usize) -> bool {
        self.mask[flat]
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }

    pub fn complement(&self) -> Self {
        Self {
            indexer: self.indexer,
            mask: self.mask.iter().map(|m| !m).collect(),
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        Self {
            indexer: self.indexer,
            mask: self.mask.iter().zip(&other.mask).map(|(a, b)| *a || *b).collect(),
        }
    }

    /// Cells as `(state, block)`, block-major.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(move |(r, _)| self.indexer.cell(r))
    }

    pub fn indicator(&self) -> SpaceTimeVector {
        let values = self.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
        SpaceTimeVector::new(self.indexer, values, VectorKind::Observable)
    }
}

/// Committor value assigned to paths that never jump again before the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum TailPolicy {
    #[default]
    AbsorbToB,
    AbsorbToA,
    Value(f64),
}

impl TailPolicy {
    pub fn value(self) -> Result<f64> {
        match self {
            TailPolicy::AbsorbToB => Ok(0.0),
            TailPolicy::AbsorbToA => Ok(1.0),
            TailPolicy::Value(v) if (0.0..=1.0).contains(&v) => Ok(v),
            TailPolicy::Value(_) => Err(Error::InvalidParameter {
                name: "tail",
                reason: "tail value must lie in [0, 1]",
            }),
        }
    }

    /// The policy with `1 - v`, used for the swapped problem.
    pub fn complement(self) -> Self {
        match self {
            TailPolicy::AbsorbToB => TailPolicy::AbsorbToA,
            TailPolicy::AbsorbToA => TailPolicy::AbsorbToB,
            TailPolicy::Value(v) => TailPolicy::Value(1.0 - v),
        }
    }
}

fn check_indexer(j: &JumpMatrix, set: &SpaceTimeSet) -> Result<()> {
    if set.indexer != j.indexer() {
        return Err(Error::DimensionMismatch {
            expected: j.indexer().len(),
            found: set.indexer.len(),
        });
    }
    Ok(())
}

/// Probability of landing in `a` before `b`: `c = 1` on `a`, `0` on `b`,
/// and `c = Ĵc + Ŝ∞·tail` elsewhere.
pub fn committor_solve(j: &JumpMatrix, a: &SpaceTimeSet, b: &SpaceTimeSet, tail: TailPolicy) -> Result<SpaceTimeVector> {
    check_indexer(j, a)?;
    check_indexer(j, b)?;
    let tail = tail.value()?;
    if a.is_empty() {
        return Err(Error::EmptyTarget);
    }
    if let Some(r) = (0..a.mask.len()).find(|&r| a.mask[r] && b.mask[r]) {
        let (state, block) = j.indexer().cell(r);
        return Err(Error::OverlappingSets { state, block });
    }
    let fixed: Vec<Option<f64>> = a
        .mask
        .iter()
        .zip(&b.mask)
        .map(|(&in_a, &in_b)| match (in_a, in_b) {
            (true, _) => Some(1.0),
            (_, true) => Some(0.0),
            _ => None,
        })
        .collect();
    let source: Vec<f64> = j.survival_masses().iter().map(|s| s * tail).collect();
    let x = solve_backward(j, j.num_blocks() - 1, &fixed, &source)?;
    Ok(SpaceTimeVector::new(j.indexer(), x, VectorKind::Observable))
}

/// Whether surviving past the horizon counts as staying in the set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SurvivalCounting {
    #[default]
    Ignore,
    Count,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceDefect {
    /// `min_{C} (Ĵ1_C - 1)`; nonnegative iff `1_C` is forward coherent.
    pub min_slack: f64,
    /// `Σ_{C} max(0, 1 - Ĵ1_C)`.
    pub violation_mass: f64,
}

const SNAP_TOL: f64 = 1e-12;

/// `Ĵ1_C`, plus `Ŝ∞` on every cell when survival counts.
pub fn forward_coherence(j: &JumpMatrix, c: &SpaceTimeSet, counting: SurvivalCounting) -> Result<SpaceTimeVector> {
    check_indexer(j, c)?;
    let mut h = j.apply_adjoint(&c.indicator())?.into_values();
    if counting == SurvivalCounting::Count {
        for (v, s) in h.iter_mut().zip(j.survival_masses()) {
            *v += s;
        }
    }
    Ok(SpaceTimeVector::new(j.indexer(), h, VectorKind::Observable))
}

pub fn coherence_defect(j: &JumpMatrix, c: &SpaceTimeSet, counting: SurvivalCounting) -> Result<CoherenceDefect> {
    if c.is_empty() {
        return Err(Error::EmptyTarget);
    }
    let h = forward_coherence(j, c, counting)?;
    let mut min_slack = f64::INFINITY;
    let mut violation_mass = 0.0;
    for (r, &v) in h.values().iter().enumerate() {
        if !c.mask[r] {
            continue;
        }
        let mut d = v - 1.0;
        if math::abs(d) <= SNAP_TOL {
            d = 0.0;
        }
        min_slack = min_slack.min(d);
        violation_mass += (-d).max(0.0);
    }
    Ok(CoherenceDefect {
        min_slack,
        violation_mass,
    })
}
