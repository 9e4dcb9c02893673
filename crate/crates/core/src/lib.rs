//! Augmented jump chain numerics for non-autonomous Markov jump processes.
//!
//! A time-dependent jump process on `N` states is re-expressed as an
//! autonomous Markov chain on space-time pairs `(state, jump time)`. This
//! crate holds the pure numerical core:
//!
//! - [`generator`]: piecewise-constant rate matrices, embedded chains, SQRA.
//! - [`jumpchain`]: the exact kernel, survival, and temporal Gillespie sampling.
//! - [`galerkin`]: closed-form Ulam–Galerkin assembly of the sparse jump matrix.
//! - [`operators`]: jump activity, synchronization, propagator and Koopman solves.
//! - [`committor`]: space-time committors and a forward-coherence defect.
//! - [`oracle`]: dense matrix-exponential reference computations.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! seeding live in the `ajc` companion crate.

#![no_std]
#![deny(rust_2018_idioms)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod committor;
pub mod error;
pub mod galerkin;
pub mod generator;
pub mod jumpchain;
mod math;
pub mod operators;
pub mod oracle;
pub mod presets;
pub mod sparse;

pub use committor::{
    coherence_defect, committor_solve, CoherenceDefect, SpaceTimeSet, SurvivalCounting,
    TailPolicy,
};
pub use error::{Error, Result, Violation};
pub use galerkin::{assemble, JumpMatrix, RowMass, SpaceTimeIndexer};
pub use generator::{
    embedded_probabilities, rate_sequence_from_protocol, sqra_generator, validate_generator,
    GridPotential, RateMatrixSequence, SparseRateMatrix, TimeGrid,
};
pub use jumpchain::{
    kernel_density, path_state_at, sample_jump_time, sample_trajectory, survival, JumpTime,
    SpaceTimePoint, TrajectorySample,
};
pub use operators::{
    jump_activity, koopman_matrix_column, koopman_solve, reconstruct_propagator, synchronize,
    Activity, ActivityOptions, SpaceTimeVector, SpatialVector, VectorKind,
};
pub use oracle::{
    convergence_study, exact_propagator, expm, operator_norm_error, ConvergenceTable,
    DenseMatrix, NormError,
};
pub use sparse::CsrMatrix;
