use ajc_core::committor::forward_coherence;
use ajc_core::oracle::norm_error;
use ajc_core::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Random piecewise-constant generator: `n` states, `m` cells of random width,
/// about half the off-diagonal rates zero.
fn arb_sequence() -> impl Strategy<Value = RateMatrixSequence> {
    (2usize..5, 1usize..5).prop_flat_map(|(n, m)| {
        let widths = proptest::collection::vec(0.05f64..1.5, m);
        let rates = proptest::collection::vec(
            proptest::collection::vec(prop_oneof![Just(0.0), 0.01f64..5.0], n * n),
            m,
        );
        (Just(n), widths, rates).prop_map(|(n, widths, rates)| {
            let mut edges = vec![0.0];
            for w in widths {
                edges.push(edges.last().unwrap() + w);
            }
            let grid = TimeGrid::new(edges).unwrap();
            let qs = rates
                .into_iter()
                .map(|r| {
                    let entries = (0..n * n)
                        .filter(|&p| p / n != p % n)
                        .map(|p| (p / n, p % n, r[p]));
                    SparseRateMatrix::from_off_diagonal(n, entries).unwrap()
                })
                .collect();
            RateMatrixSequence::new(grid, qs).unwrap()
        })
    })
}

fn arb_unit_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0f64..1.0, len)
}

// The default term budget assumes SQRA-like rates. Random generators can have
// fast two-state cycles inside one cell, where each Galerkin jump returns to
// the same cell with probability near 1 - 1/(qΔT) and the series decays slowly.
const GENEROUS: Option<usize> = Some(1_000_000);

fn observable(j: &JumpMatrix, values: Vec<f64>) -> SpaceTimeVector {
    SpaceTimeVector::new(j.indexer(), values, VectorKind::Observable)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rows_are_substochastic_and_conserve_mass(seq in arb_sequence()) {
        let j = assemble(&seq);
        for k in 0..j.num_blocks() {
            for i in 0..j.num_states() {
                let rm = j.row_mass(i, k).unwrap();
                prop_assert!(rm.jump <= 1.0 + 1e-12);
                prop_assert!((rm.jump + rm.survival - 1.0).abs() < 1e-10);
                prop_assert!((j.survival_mass(i, k) - rm.survival).abs() < 1e-10);
                for l in k..j.num_blocks() {
                    prop_assert!((j.block_survival(i, k, l) - j.closed_form_survival(i, k, l)).abs() < 1e-10);
                }
            }
        }
        for (r, c, v) in j.matrix().triplets() {
            prop_assert!(c / j.num_states() >= r / j.num_states());
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn forward_and_adjoint_are_transposes(
        seq in arb_sequence(),
        seed in proptest::collection::vec(-1.0f64..1.0, 40),
    ) {
        let j = assemble(&seq);
        let len = j.indexer().len();
        let f = SpaceTimeVector::new(j.indexer(), seed.iter().cycle().take(len).copied().collect(), VectorKind::Density);
        let g = observable(&j, seed.iter().rev().cycle().take(len).copied().collect());
        let lhs = j.apply_forward(&f).unwrap().dot(&g);
        let rhs = f.dot(&j.apply_adjoint(&g).unwrap());
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn activity_is_linear(seq in arb_sequence(), a in -2.0f64..2.0, b in -2.0f64..2.0, f in arb_unit_vec(4), h in arb_unit_vec(4)) {
        let j = assemble(&seq);
        let n = j.num_states();
        let opts = ActivityOptions { tol: 1e-14, n_max: GENEROUS };
        let fv = SpatialVector(f[..n].to_vec());
        let hv = SpatialVector(h[..n].to_vec());
        let mix = SpatialVector(fv.0.iter().zip(&hv.0).map(|(x, y)| a * x + b * y).collect());
        let act = |v: &SpatialVector| {
            let e = SpaceTimeVector::spacelike(j.indexer(), v, 0).unwrap();
            jump_activity(&j, &e, &opts).unwrap().activity.into_values()
        };
        let (af, ah, am) = (act(&fv), act(&hv), act(&mix));
        for r in 0..am.len() {
            prop_assert!((am[r] - a * af[r] - b * ah[r]).abs() < 1e-10);
        }
    }

    #[test]
    fn koopman_is_a_bounded_fixed_point(seq in arb_sequence(), g in arb_unit_vec(4), last in 0usize..4) {
        let j = assemble(&seq);
        let n = j.num_states();
        let l = last.min(j.num_blocks() - 1);
        let g = SpatialVector(g[..n].to_vec());
        let k = koopman_solve(&j, &g, l).unwrap();
        let jk = j.apply_adjoint(&k).unwrap();
        let s = j.block_survival_slice(l);
        let idx = j.indexer();
        for (r, s_r) in s.iter().enumerate() {
            let (i, b) = idx.cell(r);
            let v = k.values()[r];
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
            if b <= l {
                let resid = v - jk.values()[r] - s_r * g.0[i];
                prop_assert!(resid.abs() <= 1e-10);
            } else {
                prop_assert_eq!(v, 0.0);
            }
        }
        let ones = koopman_solve(&j, &SpatialVector::constant(n, 1.0), l).unwrap();
        for r in idx.block_range(0).start..idx.block_range(l).end {
            prop_assert!((ones.values()[r] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn propagation_and_koopman_are_dual(seq in arb_sequence(), f in arb_unit_vec(4), g in arb_unit_vec(4), last in 0usize..4) {
        let j = assemble(&seq);
        let n = j.num_states();
        let l = last.min(j.num_blocks() - 1);
        let (f, g) = (SpatialVector(f[..n].to_vec()), SpatialVector(g[..n].to_vec()));
        let opts = ActivityOptions { tol: 1e-13, n_max: GENEROUS };
        let pushed = reconstruct_propagator(&j, &f, l, &opts).unwrap();
        let pulled = koopman_solve(&j, &g, l).unwrap();
        let back = SpatialVector(pulled.block(0).to_vec());
        prop_assert!((pushed.dot(&g) - f.dot(&back)).abs() <= 1e-8);
        // Mass is conserved up to the series truncation.
        prop_assert!((pushed.sum() - f.sum()).abs() <= 1e-10);
    }

    #[test]
    fn committor_is_monotone_in_the_target(
        seq in arb_sequence(),
        a_cells in proptest::collection::vec((0usize..4, 0usize..4), 1..4),
        extra in (0usize..4, 0usize..4),
        b_cells in proptest::collection::vec((0usize..4, 0usize..4), 0..3),
        tail in 0.0f64..1.0,
    ) {
        let j = assemble(&seq);
        let (n, m) = (j.num_states(), j.num_blocks());
        let clip = |c: &(usize, usize)| (c.0 % n, c.1 % m);
        let idx = j.indexer();
        let b = SpaceTimeSet::from_cells(idx, b_cells.iter().map(clip)).unwrap();
        let a_cells: Vec<_> = a_cells.iter().map(clip).filter(|&(s, k)| !b.contains(s, k)).collect();
        prop_assume!(!a_cells.is_empty());
        let a = SpaceTimeSet::from_cells(idx, a_cells.iter().copied()).unwrap();
        let tail = TailPolicy::Value(tail);
        let c = committor_solve(&j, &a, &b, tail).unwrap();

        let jc = j.apply_adjoint(&c).unwrap();
        for r in 0..idx.len() {
            let v = c.values()[r];
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
            let (s, k) = idx.cell(r);
            if a.contains(s, k) {
                prop_assert_eq!(v, 1.0);
            } else if b.contains(s, k) {
                prop_assert_eq!(v, 0.0);
            } else {
                let resid = v - jc.values()[r] - j.survival_masses()[r] * tail.value().unwrap();
                prop_assert!(resid.abs() <= 1e-10);
            }
        }

        let e = clip(&extra);
        prop_assume!(!b.contains(e.0, e.1));
        let mut bigger = a.clone();
        bigger.insert(e.0, e.1).unwrap();
        let c2 = committor_solve(&j, &bigger, &b, tail).unwrap();
        for (x, y) in c.values().iter().zip(c2.values()) {
            prop_assert!(*y >= x - 1e-12);
        }

        let swapped = committor_solve(&j, &b.clone(), &a, tail.complement());
        if !b.is_empty() {
            let d = swapped.unwrap();
            for r in 0..idx.len() {
                if !a.contains_flat(r) && !b.contains_flat(r) {
                    prop_assert!((c.values()[r] + d.values()[r] - 1.0).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn coherence_slack_and_violation_agree(seq in arb_sequence(), cells in proptest::collection::vec((0usize..4, 0usize..4), 1..6), count in any::<bool>()) {
        let j = assemble(&seq);
        let (n, m) = (j.num_states(), j.num_blocks());
        let c = SpaceTimeSet::from_cells(j.indexer(), cells.iter().map(|x| (x.0 % n, x.1 % m))).unwrap();
        let counting = if count { SurvivalCounting::Count } else { SurvivalCounting::Ignore };
        let d = coherence_defect(&j, &c, counting).unwrap();
        prop_assert_eq!(d.min_slack >= 0.0, d.violation_mass == 0.0);
        let h = forward_coherence(&j, &c, counting).unwrap();
        let direct: f64 = c.cells().map(|(s, k)| (1.0 - h.get(s, k)).max(0.0)).sum();
        prop_assert!((direct - d.violation_mass).abs() < 1e-9);
    }

    #[test]
    fn sqra_satisfies_detailed_balance(
        (nx, ny, values) in (1usize..5, 1usize..5).prop_flat_map(|(nx, ny)| (Just(nx), Just(ny), proptest::collection::vec(-3.0f64..3.0, nx * ny))),
        beta in 0.1f64..5.0,
    ) {
        let p = GridPotential::new(nx, ny, 0.5, values.clone()).unwrap();
        let q = sqra_generator(&p, beta).unwrap();
        for (i, j, v) in q.off_diagonal_entries() {
            let lhs = (-beta * values[i]).exp() * v;
            let rhs = (-beta * values[j]).exp() * q.rate(j, i);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
        }
        for i in 0..p.len() {
            prop_assert!(q.row(i).count() <= 4);
        }
    }

    #[test]
    fn expm_matches_nalgebra(seq in arb_sequence(), t in 0.0f64..3.0) {
        let q = seq.matrix(0);
        let n = q.dim();
        let ours = expm(&DenseMatrix::from_sparse(q), t).unwrap();
        let theirs = DMatrix::from_fn(n, n, |r, c| q.rate(r, c) * t).exp();
        for r in 0..n {
            for c in 0..n {
                prop_assert!((ours.get(r, c) - theirs[(r, c)]).abs() < 1e-12);
            }
        }
        prop_assert!(ours.row_sums().iter().all(|s| (s - 1.0).abs() < 1e-10));
    }

    #[test]
    fn exact_propagator_is_chapman_kolmogorov(seq in arb_sequence(), x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let (a, b) = (seq.grid().start(), seq.grid().end());
        let (s, t) = (a + (b - a) * x.min(y), a + (b - a) * x.max(y));
        let u = 0.5 * (s + t);
        let whole = exact_propagator(&seq, s, t).unwrap();
        let split = exact_propagator(&seq, s, u).unwrap().mul(&exact_propagator(&seq, u, t).unwrap());
        prop_assert!(whole.sub(&split).max_abs() < 1e-10);
    }
}

#[test]
fn two_norm_of_difference_matches_svd() {
    let seq = presets::triple_well();
    let j = assemble(&seq);
    let opts = ActivityOptions::default();
    let recon = ajc_core::oracle::reconstructed_propagator_matrix(&j, 5, &opts).unwrap();
    let exact = exact_propagator(&seq, 0.0, 2.0).unwrap();
    let ours = norm_error(&recon, &exact).unwrap();
    let d = recon.sub(&exact);
    let svd = DMatrix::from_row_slice(d.rows(), d.cols(), d.data()).singular_values();
    assert!((ours.two_norm - svd.max()).abs() < 1e-8 * svd.max());
    assert!((ours.frobenius - svd.norm()).abs() < 1e-10);
}

#[test]
fn cold_propagator_matches_eigendecomposition() {
    // Reversible generators are symmetric in the π-weighted inner product,
    // so e^{tQ} follows from a symmetric eigendecomposition with no squaring.
    // Entries are compared as stationary fluxes π_r P_rc; plain entries of
    // the reference lose all accuracy to the e^{βΔV/2} similarity factors.
    // The eigensolver itself carries absolute errors near ‖S‖·ε ≈ 1e-8.
    let seq = presets::triple_well();
    let q = seq.matrix(5);
    let beta = presets::TRIPLE_WELL_BETA_COLD;
    let v = presets::triple_well_grid();
    let n = q.dim();
    let vmin = v.values().iter().copied().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = v.values().iter().map(|x| (-0.5 * beta * (x - vmin)).exp()).collect();
    let z: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    w.iter_mut().for_each(|x| *x /= z);
    let sym = DMatrix::from_fn(n, n, |r, c| w[r] * q.rate(r, c) / w[c]);
    let sym = (&sym + sym.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let exp_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.exp()));
    let es = &eig.eigenvectors * exp_diag * eig.eigenvectors.transpose();
    let ours = expm(&DenseMatrix::from_sparse(q), 1.0).unwrap();
    let worst = (0..n)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .map(|(r, c)| (w[r] * w[r] * ours.get(r, c) - w[r] * w[c] * es[(r, c)]).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-8, "max flux deviation {worst:e}");
}
