use alloc::boxed::Box;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// A single broken generator invariant, located by matrix index and row.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Violation {
    #[error("matrix {matrix}: negative rate {value} at ({row}, {col})")]
    NegativeRate {
        matrix: usize,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("matrix {matrix}: row {row} sums to {defect:e} instead of zero")]
    RowSum {
        matrix: usize,
        row: usize,
        defect: f64,
    },
    #[error("matrix {matrix}: non-finite entry at ({row}, {col})")]
    NonFinite {
        matrix: usize,
        row: usize,
        col: usize,
    },
    #[error("matrix {matrix}: dimension {found}, expected {expected}")]
    Dimension {
        matrix: usize,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    #[error("time grid needs at least two strictly increasing finite edges")]
    InvalidTimeGrid,
    #[error("state {index} out of range for {n} states")]
    StateOutOfRange { index: usize, n: usize },
    #[error("time block {index} out of range for {m} blocks")]
    BlockOutOfRange { index: usize, m: usize },
    #[error("entry ({row}, {col}) out of range for dimension {n}")]
    IndexOutOfRange { row: usize, col: usize, n: usize },
    #[error("duplicate entry at ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    #[error("invalid generator ({} violation(s)), first: {}", .0.len(), .0[0])]
    InvalidGenerator(Vec<Violation>),
    #[error("protocol builder failed on interval {interval}: {source}")]
    Builder { interval: usize, source: Box<Error> },
    #[error("time {time} outside horizon [{start}, {end}]")]
    TimeOutOfRange { time: f64, start: f64, end: f64 },
    #[error("start time {start} is after end time {end}")]
    ReversedTimes { start: f64, end: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("target set is empty")]
    EmptyTarget,
    #[error("sets overlap at state {state}, block {block}")]
    OverlappingSets { state: usize, block: usize },
    #[error("step size {dt} does not align with the protocol on [{start}, {end}]")]
    MisalignedStep { dt: f64, start: f64, end: f64 },
    #[error("jump matrix invariant broken at row {row}: {reason}")]
    InvalidJumpMatrix { row: usize, reason: &'static str },
    #[error("matrix exponential overflowed")]
    Overflow,
}
