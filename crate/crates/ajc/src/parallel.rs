//! Scoped-thread helpers. Results never depend on the thread count: work is
//! split into contiguous chunks and reassembled in order.

use std::thread;

use ajc_core::galerkin::assemble_rows;
use ajc_core::{JumpMatrix, RateMatrixSequence};

/// `f` over `items`, in order, on up to `threads` workers.
pub fn map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let threads = threads.clamp(1, items.len().max(1));
    if threads == 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| {
                let f = &f;
                s.spawn(move || part.iter().map(f).collect::<Vec<_>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

/// Row-parallel assembly; identical to [`ajc_core::assemble`].
pub fn assemble(seq: &RateMatrixSequence, threads: usize) -> JumpMatrix {
    let total = seq.num_states() * seq.num_cells();
    let threads = threads.clamp(1, total.max(1));
    let chunk = total.div_ceil(threads);
    let ranges: Vec<_> = (0..total).step_by(chunk.max(1)).map(|lo| lo..(lo + chunk).min(total)).collect();
    let runs = map(&ranges, threads, |r| assemble_rows(seq, r.clone()));
    JumpMatrix::from_row_runs(seq, runs)
}
