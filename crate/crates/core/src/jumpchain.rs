//! The exact augmented jump chain on `states × time`.
//!
//! Holding times follow the non-homogeneous exponential law with hazard
//! `q_i(t)`; the target of a jump at time `t` is drawn from the embedded
//! chain of `Q(t)`. Sampling both in turn is the temporal Gillespie scheme.

use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::generator::{RateMatrixSequence, SparseRateMatrix};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimePoint {
    pub state: usize,
    pub time: f64,
}

impl SpaceTimePoint {
    pub fn new(state: usize, time: f64) -> Self {
        Self { state, time }
    }
}

/// One realization `(Y_0, J_0), (Y_1, J_1), ...` observed up to `horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub points: Vec<SpaceTimePoint>,
    pub horizon: f64,
}

impl TrajectorySample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Holding times `J_n - J_{n-1}`.
    pub fn holding_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.windows(2).map(|w| w[1].time - w[0].time)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpTime {
    At(f64),
    PastHorizon,
}

/// `∫_s^t q_i(u) du` for the piecewise-constant outbound rate.
pub fn integrated_rate(seq: &RateMatrixSequence, i: usize, s: f64, t: f64) -> Result<f64> {
    seq.check_state(i)?;
    let grid = seq.grid();
    grid.check_time(s)?;
    grid.check_time(t)?;
    if s > t {
        return Err(Error::ReversedTimes { start: s, end: t });
    }
    if s == t {
        return Ok(0.0);
    }
    let first = grid.cell_of(s).unwrap_or(0);
    let mut acc = 0.0;
    for k in first..grid.len() {
        let lo = grid.lower(k).max(s);
        let hi = grid.upper(k).min(t);
        if hi > lo {
            acc += seq.outbound(i, k) * (hi - lo);
        }
        if grid.upper(k) >= t {
            break;
        }
    }
    Ok(acc)
}

/// Probability `exp(-∫_s^t q_i)` of no jump out of `i` during `(s, t]`.
pub fn survival(seq: &RateMatrixSequence, i: usize, s: f64, t: f64) -> Result<f64> {
    integrated_rate(seq, i, s, t).map(|a| math::exp(-a))
}

/// Density `q_ij(t)·exp(-∫_s^t q_i)` of the next event being a jump to `j` at
/// time `t`, given the chain sits in `i` since `s`. Zero for `t ≤ s`, for
/// `t` beyond the horizon and for `j = i`.
pub fn kernel_density(seq: &RateMatrixSequence, i: usize, s: f64, j: usize, t: f64) -> Result<f64> {
    seq.check_state(i)?;
    seq.check_state(j)?;
    seq.grid().check_time(s)?;
    if t <= s || i == j {
        return Ok(0.0);
    }
    let Some(q) = seq.at(t) else {
        return Ok(0.0);
    };
    let rate = q.rate(i, j);
    if rate == 0.0 {
        return Ok(0.0);
    }
    Ok(rate * survival(seq, i, s, t)?)
}

/// Inverse-CDF draw of the next jump time out of `i` after `s`: the `t`
/// solving `∫_s^t q_i = -ln(1 - u)`, or [`JumpTime::PastHorizon`] when the
/// accumulated hazard up to the horizon falls short.
pub fn sample_jump_time(seq: &RateMatrixSequence, i: usize, s: f64, u: f64) -> Result<JumpTime> {
    seq.check_state(i)?;
    let grid = seq.grid();
    grid.check_time(s)?;
    if !(0.0..1.0).contains(&u) {
        return Err(Error::InvalidParameter {
            name: "u",
            reason: "uniform draw must lie in [0, 1)",
        });
    }
    let target = -math::ln_1p(-u);
    if target == 0.0 {
        return Ok(JumpTime::At(s));
    }
    let mut acc = 0.0;
    let first = grid.cell_of(s).unwrap_or(0);
    for k in first..grid.len() {
        let rate = seq.outbound(i, k);
        if rate == 0.0 {
            continue;
        }
        let lo = grid.lower(k).max(s);
        let hi = grid.upper(k);
        if hi <= lo {
            continue;
        }
        let gained = rate * (hi - lo);
        if acc + gained >= target {
            let t = lo + (target - acc) / rate;
            return Ok(JumpTime::At(t.min(hi)));
        }
        acc += gained;
    }
    Ok(JumpTime::PastHorizon)
}

fn draw_target<R: RngCore + ?Sized>(q: &SparseRateMatrix, i: usize, rng: &mut R) -> usize {
    let total = q.outbound_rate(i);
    let threshold = math::open_unit(rng.next_u64()) * total;
    let mut acc = 0.0;
    let mut last = i;
    for (j, v) in q.row(i) {
        acc += v;
        last = j;
        if threshold < acc {
            return j;
        }
    }
    last
}

/// Draws the next point of the augmented chain from `(i, s)`, or `None` if
/// no jump occurs before the end of the grid.
pub fn sample_next<R: RngCore + ?Sized>(
    seq: &RateMatrixSequence,
    i: usize,
    s: f64,
    rng: &mut R,
) -> Result<Option<SpaceTimePoint>> {
    let u = math::open_unit(rng.next_u64());
    match sample_jump_time(seq, i, s, u)? {
        JumpTime::PastHorizon => Ok(None),
        JumpTime::At(t) => {
            let q = seq.at(t).expect("jump time lies on the grid");
            Ok(Some(SpaceTimePoint::new(draw_target(q, i, rng), t)))
        }
    }
}

/// Temporal Gillespie trajectory from `start` until `horizon`.
pub fn sample_trajectory<R: RngCore + ?Sized>(
    seq: &RateMatrixSequence,
    start: SpaceTimePoint,
    horizon: f64,
    rng: &mut R,
) -> Result<TrajectorySample> {
    seq.check_state(start.state)?;
    let grid = seq.grid();
    grid.check_time(start.time)?;
    grid.check_time(horizon)?;
    if start.time > horizon {
        return Err(Error::ReversedTimes {
            start: start.time,
            end: horizon,
        });
    }
    let mut points = vec![start];
    let mut cur = start;
    while let Some(next) = sample_next(seq, cur.state, cur.time, rng)? {
        if next.time > horizon {
            break;
        }
        points.push(next);
        cur = next;
    }
    Ok(TrajectorySample { points, horizon })
}

/// State `X_t = Y_{c(t)}` with `c(t) = max{n : J_n ≤ t}`.
pub fn path_state_at(traj: &TrajectorySample, t: f64) -> Result<usize> {
    let first = traj.points.first().ok_or(Error::EmptyTarget)?;
    if !(t >= first.time && t <= traj.horizon) {
        return Err(Error::TimeOutOfRange {
            time: t,
            start: first.time,
            end: traj.horizon,
        });
    }
    let count = traj.points.partition_point(|p| p.time <= t);
    Ok(traj.points[count - 1].state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::TimeGrid;
    use crate::presets;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn constant(q: SparseRateMatrix, end: f64, cells: usize) -> RateMatrixSequence {
        let grid = TimeGrid::uniform(0.0, end, cells).unwrap();
        RateMatrixSequence::new(grid, alloc::vec![q; cells]).unwrap()
    }

    #[test]
    fn survival_edge_cases() {
        let seq = constant(SparseRateMatrix::from_off_diagonal(2, [(0, 1, 1.0)]).unwrap(), 3.0, 3);
        assert_eq!(survival(&seq, 0, 1.3, 1.3).unwrap(), 1.0);
        assert!((survival(&seq, 0, 0.5, 1.5).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(
            survival(&seq, 0, 2.0, 1.0),
            Err(Error::ReversedTimes { start: 2.0, end: 1.0 })
        );
    }

    #[test]
    fn survival_over_piecewise_rate() {
        // Rate 1 on [0, 4], 0 after: integral over [3, 6] is 1.
        let seq = presets::two_state();
        let s = survival(&seq, 0, 3.0, 6.0).unwrap();
        // Independent midpoint-rule quadrature of the hazard.
        let n = 30_000;
        let h = 3.0 / n as f64;
        let integral: f64 = (0..n)
            .map(|m| {
                let t = 3.0 + (m as f64 + 0.5) * h;
                if t < 4.0 { 1.0 } else { 0.0 }
            })
            .sum::<f64>()
            * h;
        assert!((integral - 1.0).abs() < 1e-9);
        assert!((s - (-integral).exp()).abs() < 1e-9);
        assert!((s - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn kernel_examples_on_two_state() {
        let seq = presets::two_state();
        assert_eq!(kernel_density(&seq, 0, 2.0, 1, 2.0).unwrap(), 0.0);
        assert_eq!(kernel_density(&seq, 0, 3.0, 1, 2.0).unwrap(), 0.0);
        let k = kernel_density(&seq, 0, 0.0, 1, 2.0).unwrap();
        assert!((k - (-2.0f64).exp()).abs() < 1e-15);
        let k = kernel_density(&seq, 1, 0.0, 0, 5.0).unwrap();
        assert!((k - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn jump_time_inversion_examples() {
        let seq = constant(SparseRateMatrix::from_off_diagonal(2, [(0, 1, 2.0)]).unwrap(), 4.0, 4);
        let u = 1.0 - (-2.0f64).exp();
        match sample_jump_time(&seq, 0, 0.5, u).unwrap() {
            JumpTime::At(t) => assert!((t - 1.5).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        // State 1 is absorbing.
        assert_eq!(sample_jump_time(&seq, 1, 0.0, 0.9).unwrap(), JumpTime::PastHorizon);

        let two = presets::two_state();
        let u = 1.0 - (-1.0f64).exp();
        match sample_jump_time(&two, 1, 0.0, u).unwrap() {
            JumpTime::At(t) => assert!((t - 5.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert_eq!(sample_jump_time(&two, 0, 0.0, 0.0).unwrap(), JumpTime::At(0.0));
    }

    #[test]
    fn absorbing_start_gives_single_point() {
        let seq = presets::two_state();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let traj = sample_trajectory(&seq, SpaceTimePoint::new(1, 0.0), 3.0, &mut rng).unwrap();
        assert_eq!(traj.points, alloc::vec![SpaceTimePoint::new(1, 0.0)]);
    }

    #[test]
    fn trajectories_are_reproducible_and_well_formed() {
        let seq = presets::triple_well();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample_trajectory(&seq, SpaceTimePoint::new(30, 0.0), 2.0, &mut rng).unwrap()
        };
        let a = run(99);
        assert_eq!(a, run(99));
        assert!(a.len() > 1);
        assert!(a.holding_times().all(|h| h > 0.0));
        assert!(a.points.windows(2).all(|w| w[0].state != w[1].state));
        assert!(a.points.last().unwrap().time <= 2.0);
    }

    #[test]
    fn path_reconstruction() {
        let traj = TrajectorySample {
            points: alloc::vec![
                SpaceTimePoint::new(0, 0.0),
                SpaceTimePoint::new(1, 1.0),
                SpaceTimePoint::new(0, 2.5)
            ],
            horizon: 4.0,
        };
        assert_eq!(path_state_at(&traj, 0.0).unwrap(), 0);
        assert_eq!(path_state_at(&traj, 1.0).unwrap(), 1);
        assert_eq!(path_state_at(&traj, 1.7).unwrap(), 1);
        assert_eq!(path_state_at(&traj, 2.5).unwrap(), 0);
        assert_eq!(path_state_at(&traj, 4.0).unwrap(), 0);
        assert!(path_state_at(&traj, -0.1).is_err());

        let single = TrajectorySample {
            points: alloc::vec![SpaceTimePoint::new(3, 1.0)],
            horizon: 2.0,
        };
        assert_eq!(path_state_at(&single, 1.5).unwrap(), 3);
        assert!(path_state_at(&single, 0.5).is_err());
    }
}
