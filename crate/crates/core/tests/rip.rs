mod common;

use common::*;
use corrsense_core::cvec::C64;
use corrsense_core::rip::{
    certify_uniqueness, exact_rip, exact_skrip, exact_skrip_detailed, recovery_threshold, rip_split,
    support_extremes_csv, DEFAULT_BUDGET,
};
use corrsense_core::{DenseMatrix, LinearOperator, SensingModel};
use proptest::prelude::*;
use rand::Rng;

const B: u128 = DEFAULT_BUDGET;

#[test]
fn hadamard_pair_closed_form() {
    let (a, h) = (hadamard2(), identity(2));
    let r = exact_skrip(&a, &h, 1, 1, B).unwrap();
    assert!((r.delta - std::f64::consts::FRAC_1_SQRT_2).abs() <= 1e-12);
    assert_eq!(r.supports_enumerated, 4);
    // Every one of the four support pairs has Gram [[1, +-1/sqrt2], [., 1]].
    let (_, rows) = exact_skrip_detailed(&a, &h, 1, 1, B).unwrap();
    for row in &rows {
        assert!((row.eig_min - (1.0 - std::f64::consts::FRAC_1_SQRT_2)).abs() <= 1e-12);
        assert!((row.eig_max - (1.0 + std::f64::consts::FRAC_1_SQRT_2)).abs() <= 1e-12);
    }
    let csv = support_extremes_csv(&rows);
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("signal_support,corruption_support,eig_min,eig_max,delta\n0,0,"));
}

#[test]
fn exhausted_rank_has_unit_constant() {
    let model = SensingModel::custom(
        LinearOperator::dense(hadamard2()).unwrap(),
        LinearOperator::identity(2),
    )
    .unwrap();
    let cert = certify_uniqueness(&model, 1, 1, 1.0, B).unwrap();
    assert!((cert.delta_2s2k.unwrap() - 1.0).abs() <= 1e-12);
    assert!(!cert.satisfied);
    assert_eq!(cert.threshold, recovery_threshold(1, 1, 1.0).unwrap().threshold);
}

#[test]
fn oversampled_orthonormal_columns() {
    let f = LinearOperator::fourier(8).unwrap().materialize().unwrap();
    let a = f.columns(0, 2).into_owned();
    let model = SensingModel::custom(LinearOperator::dense(a.clone()).unwrap(), LinearOperator::identity(8)).unwrap();
    let cert = certify_uniqueness(&model, 1, 1, 1.0, B).unwrap();
    let direct = exact_skrip(&a, &identity(8), 2, 2, B).unwrap();
    assert_eq!(cert.rip.as_ref().unwrap(), &direct);
    assert_eq!(cert.satisfied, direct.delta < cert.threshold);
    assert!(exact_rip(&a, 2, B).unwrap().delta <= 1e-12);
}

fn random_4x6(seed: u64) -> DenseMatrix {
    let mut r = rng(seed);
    let m = rand_matrix(&mut r, 4, 6);
    // Unit-norm columns keep the constants in an interesting range.
    DenseMatrix::from_fn(4, 6, |i, j| m[(i, j)] / m.column(j).norm())
}

#[test]
fn zero_corruption_support_reduces_to_plain_rip() {
    for seed in 0..20 {
        let a = random_4x6(seed);
        for s in 1..=3 {
            let plain = exact_rip(&a, s, B).unwrap();
            let stacked = exact_skrip(&a, &identity(4), s, 0, B).unwrap();
            assert!((plain.delta - stacked.delta).abs() <= 1e-12);
            assert_eq!(plain.signal_support, stacked.signal_support);
            assert!(stacked.corruption_support.is_empty());
        }
    }
}

#[test]
fn constants_grow_with_support_sizes() {
    for seed in 0..10 {
        let a = random_4x6(100 + seed);
        let h = identity(4);
        let d = |s, k| exact_skrip(&a, &h, s, k, B).unwrap().delta;
        let grid: Vec<Vec<f64>> = (0..=2).map(|s| (0..=2).map(|k| d(s, k)).collect()).collect();
        for s in 0..=2 {
            for k in 0..=2 {
                if s < 2 {
                    assert!(grid[s][k] <= grid[s + 1][k] + 1e-12);
                }
                if k < 2 {
                    assert!(grid[s][k] <= grid[s][k + 1] + 1e-12);
                }
            }
        }
    }
}

#[test]
fn split_bound_holds_and_is_tight_for_hadamard() {
    for seed in 0..50 {
        let mut r = rng(1000 + seed);
        let a = rand_matrix(&mut r, 4, 6) * C64::new(0.5, 0.0);
        let h = if seed % 2 == 0 { identity(4) } else { LinearOperator::fourier(4).unwrap().materialize().unwrap() };
        for (s, k) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            let full = exact_skrip(&a, &h, s, k, B).unwrap().delta;
            let split = rip_split(&a, &h, s, k, B).unwrap();
            assert!(full <= split.delta1 + split.delta2 + 1e-12);
        }
    }
    let split = rip_split(&hadamard2(), &identity(2), 1, 1, B).unwrap();
    assert!(split.delta1.abs() <= 1e-12);
    assert!((split.delta2 - std::f64::consts::FRAC_1_SQRT_2).abs() <= 1e-12);
}

#[test]
fn orthogonal_blocks_have_no_cross_term() {
    let mut r = rng(4);
    let mut a = rand_matrix(&mut r, 4, 3);
    a.rows_mut(0, 2).fill(C64::new(0.0, 0.0));
    let h = DenseMatrix::from_fn(4, 4, |i, j| C64::new(if i == j && i < 2 { 1.0 } else { 0.0 }, 0.0));
    for (s, k) in [(1, 1), (2, 2), (3, 1)] {
        assert_eq!(rip_split(&a, &h, s, k, B).unwrap().delta2, 0.0);
    }
}

#[test]
fn random_search_approaches_the_exact_constant_from_below() {
    let mut r = rng(77);
    let a = rand_matrix(&mut r, 3, 4) * C64::new(0.6, 0.0);
    let delta = exact_rip(&a, 2, B).unwrap().delta;
    let supports = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let mut best: f64 = 0.0;
    for t in 0..100_000 {
        let (i, j) = supports[t % supports.len()];
        let (u, v) = (gauss(&mut r), gauss(&mut r));
        let norm = (u.norm_sqr() + v.norm_sqr()).sqrt();
        let (u, v) = (u / norm, v / norm);
        let ax: Vec<C64> = (0..3).map(|row| a[(row, i)] * u + a[(row, j)] * v).collect();
        let energy: f64 = ax.iter().map(|c| c.norm_sqr()).sum();
        best = best.max((energy - 1.0).abs());
    }
    assert!(best <= delta + 1e-12);
    assert!(delta - best <= 1e-3, "delta {delta}, search {best}");
}

#[test]
fn scaling_orthonormal_columns() {
    let a = LinearOperator::fourier(6).unwrap().materialize().unwrap().columns(1, 4).into_owned();
    for c in [0.3, 0.9, 1.0, 1.7] {
        let scaled = &a * C64::new(c, 0.0);
        for s in 1..=4 {
            let d = exact_rip(&scaled, s, B).unwrap().delta;
            assert!((d - (c * c - 1.0).abs()).abs() <= 1e-12);
        }
    }
}

#[test]
fn threshold_shape() {
    let mut r = rng(3);
    for _ in 0..200 {
        let s = r.random_range(1..50usize);
        let k = r.random_range(1..50usize);
        let lambda = r.random_range(0.05..5.0f64);
        let t = recovery_threshold(s, k, lambda).unwrap();
        assert!(t.eta >= 2.0 - 1e-12);
        assert!(t.threshold > 0.0 && t.threshold < 1.0);
        let balanced = recovery_threshold(s, k, (s as f64 / k as f64).sqrt()).unwrap();
        assert!((balanced.eta - 2.0).abs() <= 1e-12);
        assert!(balanced.threshold >= t.threshold - 1e-15);
    }
    let mut prev = f64::INFINITY;
    for k in 1..=100 {
        let t = recovery_threshold(1, k, 1.0).unwrap();
        assert!(t.threshold < prev);
        prev = t.threshold;
    }
    assert!(recovery_threshold(0, 1, 1.0).is_err());
    assert!(recovery_threshold(1, 1, 0.0).is_err());
}

#[test]
fn ties_resolve_identically_across_pool_sizes() {
    // The 8x8 Hadamard with H = I has many support pairs at the same delta.
    let a = LinearOperator::walsh_hadamard(8).unwrap().materialize().unwrap();
    let h = identity(8);
    let reference = exact_skrip(&a, &h, 2, 2, B).unwrap();
    for threads in [1, 3, 4] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let r = pool.install(|| exact_skrip(&a, &h, 2, 2, B).unwrap());
        assert_eq!(r, reference);
        assert_eq!(r.delta.to_bits(), reference.delta.to_bits());
    }
    // Lexicographically first witness among the ties.
    let (_, rows) = exact_skrip_detailed(&a, &h, 2, 2, B).unwrap();
    let ties: Vec<_> = rows.iter().filter(|r| r.delta() >= reference.delta - 1e-14).collect();
    assert!(ties.len() > 1);
    assert_eq!(reference.signal_support, ties[0].signal_support);
    assert_eq!(reference.corruption_support, ties[0].corruption_support);
}

#[test]
fn budget_is_checked_before_enumeration() {
    let a = LinearOperator::fourier(40).unwrap().materialize().unwrap();
    assert!(matches!(
        exact_skrip(&a, &identity(40), 3, 3, B),
        Err(corrsense_core::Error::Budget { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn witness_reproduces_the_reported_constant(seed in any::<u64>(), s in 1usize..=2, k in 0usize..=2) {
        let a = random_4x6(seed);
        let h = identity(4);
        let (report, rows) = exact_skrip_detailed(&a, &h, s, k, B).unwrap();
        let best = rows.iter().map(|r| r.delta()).fold(0.0, f64::max);
        prop_assert!(best - report.delta <= 1e-14 && report.delta <= best);
        prop_assert!((report.delta - (report.eig_max - 1.0).abs().max((1.0 - report.eig_min).abs())).abs() <= 1e-15);
        let first = rows.iter().find(|r| r.delta() >= best - 1e-14).unwrap();
        prop_assert_eq!(&report.signal_support, &first.signal_support);
        prop_assert_eq!(&report.corruption_support, &first.corruption_support);
    }
}
