mod common;

use common::{compound_hurwitz, gaussian, oracle_eigenvalues, oracle_k_sum, orthogonal, planted};
use kcontraction::lin_contraction::{
    build_certificate, eigen_sum_max, k_contractive_lti, shifted_inertia_certificate, variable_counts, verify_certificate,
};
use kcontraction::numkernel::inertia_symmetric;
use kcontraction::{DenseMatrix, Inertia};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn k_sum_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let n = rng.gen_range(1..=8);
        let k = rng.gen_range(1..=n);
        let a = gaussian(&mut rng, n, n);
        let s = eigen_sum_max(&a, k).unwrap();
        assert!((s - oracle_k_sum(&a, k)).abs() <= 1e-9 * (1.0 + a.norm()));
    }
}

#[test]
fn verdict_is_similarity_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let n = rng.gen_range(2..=7);
        let k = rng.gen_range(1..=n);
        let a = gaussian(&mut rng, n, n) - DenseMatrix::identity(n, n) * rng.gen_range(0.0..1.5);
        // well-conditioned similarity: orthogonal times a mild diagonal
        let d = DenseMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| rng.gen_range(0.5..2.0)));
        let t = orthogonal(&mut rng, n) * d;
        let ti = t.clone().try_inverse().unwrap();
        let b = &t * &a * &ti;
        let (sa, sb) = (eigen_sum_max(&a, k).unwrap(), eigen_sum_max(&b, k).unwrap());
        assert!((sa - sb).abs() <= 1e-7 * (1.0 + a.norm()), "{sa} vs {sb}");
        if sa.abs() > 1e-6 {
            assert_eq!(k_contractive_lti(&a, k).unwrap().0, k_contractive_lti(&b, k).unwrap().0);
        }
    }
}

#[test]
fn contraction_is_monotone_in_k() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..300 {
        let n = rng.gen_range(2..=7);
        let a = gaussian(&mut rng, n, n) + DenseMatrix::identity(n, n) * rng.gen_range(-1.0..1.0);
        let verdicts: Vec<bool> = (1..=n).map(|k| k_contractive_lti(&a, k).unwrap().0).collect();
        for w in verdicts.windows(2) {
            assert!(!w[0] || w[1], "{verdicts:?}");
        }
    }
}

#[test]
fn shifted_inertia_counts_eigenvalues_on_each_side() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut checked = 0;
    while checked < 200 {
        let n = rng.gen_range(1..=7);
        let a = gaussian(&mut rng, n, n);
        let mu = rng.gen_range(-2.0..2.0);
        let ev = oracle_eigenvalues(&a);
        if ev.iter().any(|z| (z.re - mu).abs() < 1e-3) {
            continue;
        }
        let right = ev.iter().filter(|z| z.re > mu).count();
        let p = shifted_inertia_certificate(&a, mu).unwrap();
        assert_eq!(inertia_symmetric(&p, 1e-12).unwrap(), Inertia::new(right, 0, n - right));
        checked += 1;
    }
}

#[test]
fn certificates_respect_inertia_and_rate_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut built = 0;
    for trial in 0..300 {
        let n = rng.gen_range(2..=7);
        let a = if trial % 3 == 0 {
            let r = rng.gen_range(-1.0..0.5);
            let mut reals = vec![r; n.min(3)];
            while reals.len() < n {
                reals.push(rng.gen_range(-3.0..0.5));
            }
            planted(&mut rng, &reals, &[])
        } else {
            gaussian(&mut rng, n, n) - DenseMatrix::identity(n, n) * rng.gen_range(0.0..1.5)
        };
        let k = rng.gen_range(1..=n);
        if !compound_hurwitz(&a, k) {
            assert!(build_certificate(&a, k).is_err());
            continue;
        }
        let c = build_certificate(&a, k).unwrap();
        assert!(verify_certificate(&a, k, &c, 0.0).unwrap().accepted());
        for (w, &d) in c.mats.iter().zip(&c.ds) {
            assert_eq!(inertia_symmetric(w, 1e-12).unwrap(), Inertia::new(d, 0, n - d));
        }
        assert!(c.mus.windows(2).all(|m| m[1] < m[0]));
        assert!(eigen_sum_max(&a, k).unwrap() <= c.rate_sum() + 1e-12);
        built += 1;
    }
    assert!(built > 50);
}

#[test]
fn destabilized_system_fails_its_old_certificate() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..50 {
        let n = rng.gen_range(2..=6);
        let k = rng.gen_range(1..=n);
        let a = planted(&mut rng, &(0..n).map(|i| -1.0 - i as f64).collect::<Vec<_>>(), &[]);
        let c = build_certificate(&a, k).unwrap();
        let shifted = &a + DenseMatrix::identity(n, n) * (n as f64 + 1.0);
        assert!(!verify_certificate(&shifted, k, &c, 0.0).unwrap().accepted());
    }
}

#[test]
fn variable_counts_small_cases() {
    // n = 3, k = 2: three 2-subsets, so N1 = 3·4/2 + 1.
    assert_eq!(variable_counts(3, 2).unwrap(), (7, 8));
    assert_eq!(variable_counts(5, 2).unwrap(), (56, 22));
    assert_eq!(variable_counts(10, 3).unwrap(), (7261, 138));
    assert!(variable_counts(3, 4).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn diagonal_systems_follow_the_sorted_sum(diag in prop::collection::vec(-5.0f64..5.0, 1..7), k_frac in 0.0f64..1.0) {
        let n = diag.len();
        let k = 1 + ((n - 1) as f64 * k_frac).round() as usize;
        let a = DenseMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag.clone()));
        let mut sorted = diag.clone();
        sorted.sort_by(|x, y| y.total_cmp(x));
        let expected: f64 = sorted[..k].iter().sum();
        prop_assert!((eigen_sum_max(&a, k).unwrap() - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
    }
}
