//! Monte Carlo cross-checks of the exact kernel, the sampler and the Galerkin rows.

use ajc_core::jumpchain::sample_next;
use ajc_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf(x);
            (f - k as f64 / n).abs().max(((k + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

#[test]
fn ned_sampler_matches_delayed_exponential() {
    // State B of the two-state switch: hazard 0 before t = 4, then 1. The
    // protocol is extended to t = 60 so that censoring at the horizon
    // (probability e^{-56}) never occurs.
    let grid = TimeGrid::uniform(0.0, 60.0, 15).unwrap();
    let seq = presets::two_state_on(grid).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 20_000;
    let draws: Vec<f64> = (0..n)
        .map(|_| match sample_jump_time(&seq, 1, 0.0, rng.random::<f64>()).unwrap() {
            JumpTime::At(t) => t,
            JumpTime::PastHorizon => panic!("censored draw"),
        })
        .collect();
    let d = ks_statistic(draws, |t| 1.0 - (-(t - 4.0).max(0.0)).exp());
    assert!(d < ks_critical_1pct(n), "KS {d} vs {}", ks_critical_1pct(n));
}

#[test]
fn autonomous_limit_recovers_the_embedded_chain() {
    let q = SparseRateMatrix::from_off_diagonal(3, [(0, 1, 1.5), (0, 2, 0.5), (1, 0, 2.0), (1, 2, 1.0), (2, 0, 3.0)]).unwrap();
    let grid = TimeGrid::uniform(0.0, 10.0, 5).unwrap();
    let seq = RateMatrixSequence::new(grid, vec![q.clone(); 5]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 20_000;
    let mut holds = Vec::with_capacity(n);
    let mut counts = [0usize; 3];
    while holds.len() < n {
        let s = rng.random::<f64>() * 5.0;
        if let Some(p) = sample_next(&seq, 0, s, &mut rng).unwrap() {
            holds.push(p.time - s);
            counts[p.state] += 1;
        }
        // Holding times beyond the horizon are censored; the uniform start
        // in [0, 5] keeps censoring at e^{-10} per draw.
    }
    let d = ks_statistic(holds, |t| 1.0 - (-2.0 * t).exp());
    assert!(d < ks_critical_1pct(n));

    let expected = [0.0, 0.75, 0.25];
    let total: usize = counts.iter().sum();
    assert_eq!(counts[0], 0);
    let chi2: f64 = (1..3)
        .map(|j| {
            let e = expected[j] * total as f64;
            (counts[j] as f64 - e).powi(2) / e
        })
        .sum();
    assert!(chi2 < ChiSquared::new(1.0).unwrap().inverse_cdf(0.99));
    let emb = embedded_probabilities(&q, 0);
    assert_eq!(emb, vec![(1, 0.75), (2, 0.25)]);
}

#[test]
fn galerkin_rows_match_first_jump_frequencies() {
    let seq = presets::two_state();
    let j = assemble(&seq);
    let grid = seq.grid().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 20_000;
    for k in 0..j.num_blocks() {
        for i in 0..2 {
            let mut freq = vec![0usize; j.indexer().len()];
            for _ in 0..n {
                let s = grid.lower(k) + rng.random::<f64>() * grid.width(k);
                if let Some(p) = sample_next(&seq, i, s, &mut rng).unwrap() {
                    let l = grid.cell_of(p.time).unwrap();
                    freq[j.indexer().flat(p.state, l)] += 1;
                }
            }
            for (c, &hits) in freq.iter().enumerate() {
                let (jj, l) = j.indexer().cell(c);
                let p = j.entry(i, k, jj, l);
                let sigma = (p * (1.0 - p) / n as f64).sqrt();
                let emp = hits as f64 / n as f64;
                if p == 0.0 {
                    assert_eq!(hits, 0, "row ({i},{k}) col ({jj},{l})");
                } else {
                    assert!((emp - p).abs() <= 3.0 * sigma, "row ({i},{k}) col ({jj},{l}): {emp} vs {p}");
                }
            }
        }
    }
}

#[test]
fn exact_propagator_matches_trajectory_frequencies() {
    let seq = presets::two_state();
    let p = exact_propagator(&seq, 0.0, 6.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 1_000_000;
    for i in 0..2 {
        let mut at_b = 0usize;
        for _ in 0..n {
            let traj = sample_trajectory(&seq, SpaceTimePoint::new(i, 0.0), 6.0, &mut rng).unwrap();
            if path_state_at(&traj, 6.0).unwrap() == 1 {
                at_b += 1;
            }
        }
        let prob = p.get(i, 1);
        let emp = at_b as f64 / n as f64;
        let sigma = (prob * (1.0 - prob) / n as f64).sqrt();
        assert!((emp - prob).abs() <= 3.0 * sigma, "from {i}: {emp} vs {prob}");
    }
}

#[test]
fn committor_matches_hitting_frequency() {
    // A = state B at any block, no B set, tail 0: probability of jumping
    // into B before the horizon from a uniform start in the first cell.
    let seq = presets::two_state();
    let j = assemble(&seq);
    let idx = j.indexer();
    let a = SpaceTimeSet::rect(idx, &[1], (0, 7)).unwrap();
    let c = committor_solve(&j, &a, &SpaceTimeSet::empty(idx), TailPolicy::Value(0.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let n = 100_000;
    let hits = (0..n)
        .filter(|_| {
            let s = rng.random::<f64>();
            sample_next(&seq, 0, s, &mut rng).unwrap().is_some()
        })
        .count();
    let p = c.get(0, 0);
    let emp = hits as f64 / n as f64;
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    assert!((emp - p).abs() <= 3.0 * sigma, "{emp} vs {p}");
}
