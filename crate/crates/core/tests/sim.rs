mod common;

use common::{gaussian, planted};
use kcontraction::nl_verify::{NonlinearModel, StateBox};
use kcontraction::sim::{
    classify_attractor, find_equilibria, fit_decay, flow_grid, integrate, integrate_compound, integrate_with,
    volume_of_immersion, Attractor, EquilibriumKind, ImmersionGrid,
};
use kcontraction::DenseMatrix;
use nalgebra::{DVector, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn linear_field(a: DenseMatrix) -> impl Fn(&[f64]) -> Vec<f64> + Send + Sync {
    move |x: &[f64]| (&a * DVector::from_column_slice(x)).iter().copied().collect()
}

fn cross_norm(u: &[f64], v: &[f64]) -> f64 {
    Vector3::from_column_slice(u).cross(&Vector3::from_column_slice(v)).norm()
}

fn hopf(x: &[f64]) -> Vec<f64> {
    let r2 = x[0] * x[0] + x[1] * x[1];
    vec![x[0] - x[1] - x[0] * r2, x[0] + x[1] - x[1] * r2]
}

fn lorenz(x: &[f64]) -> Vec<f64> {
    vec![10.0 * (x[1] - x[0]), x[0] * (28.0 - x[2]) - x[1], x[0] * x[1] - 8.0 / 3.0 * x[2]]
}

#[test]
fn rk4_is_fourth_order() {
    let rot = |x: &[f64]| vec![x[1], -x[0]];
    let err = |h: f64| {
        let tr = integrate(&rot, &[1.0, 0.0], 2.0, h).unwrap();
        let x = tr.last_state();
        ((x[0] - 2f64.cos()).powi(2) + (x[1] + 2f64.sin()).powi(2)).sqrt()
    };
    let ratio = err(0.02) / err(0.01);
    assert!((ratio - 16.0).abs() < 0.5, "ratio {ratio}");
}

#[test]
fn compound_state_tracks_the_flow_of_a_parallelogram() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..5 {
        let a = planted(&mut rng, &[-0.5, -1.0, -4.0], &[]);
        let model = NonlinearModel::linear("lin", a.clone()).unwrap();
        let v0 = gaussian(&mut rng, 3, 2);
        let tr = integrate_compound(&model, &[0.1, 0.2, 0.3], &v0, 2, 2.0, 1e-3).unwrap();
        let norms = tr.compound_norms.as_ref().unwrap();
        for (t, y) in tr.times.iter().zip(norms).step_by(250) {
            let v = (&a * *t).exp() * &v0;
            let want = cross_norm(v.column(0).as_slice(), v.column(1).as_slice());
            assert!((y - want).abs() <= 1e-9 * want, "t = {t}: {y} vs {want}");
        }
        let x = tr.last_state();
        let want = (&a * 2.0).exp() * DVector::from_column_slice(&[0.1, 0.2, 0.3]);
        assert!(x.iter().zip(want.iter()).all(|(p, q)| (p - q).abs() < 1e-10));
    }
}

#[test]
fn decay_rate_is_the_top_two_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let a = planted(&mut rng, &[-0.5, -1.0, -4.0], &[]);
    let model = NonlinearModel::linear("lin", a).unwrap();
    let v0 = gaussian(&mut rng, 3, 2);
    let tr = integrate_compound(&model, &[0.0; 3], &v0, 2, 12.0, 1e-3).unwrap();
    let fit = fit_decay(&tr).unwrap();
    assert!((fit.a - 1.5).abs() < 1e-3, "a = {}", fit.a);
    assert!(fit.residual < 1e-3);
    assert!(fit.b >= 1.0);
}

#[test]
fn flowed_area_matches_the_linear_map() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..3 {
        let a = planted(&mut rng, &[-0.3, -0.8, -2.0], &[]);
        let e1 = vec![1.0, 0.2, -0.1];
        let e2 = vec![0.0, 0.7, 0.4];
        let grid = ImmersionGrid::parallelotope(&[0.0; 3], &[e1.clone(), e2.clone()], 16).unwrap();
        let id = DenseMatrix::identity(3, 3);
        let v0 = volume_of_immersion(&grid, &id).unwrap().value;
        assert!((v0 - cross_norm(&e1, &e2)).abs() < 1e-12);
        let f = linear_field(a.clone());
        let moved = flow_grid(&f, &grid, 1.5, 1e-3).unwrap();
        let phi = (&a * 1.5).exp();
        let (u, v) = (&phi * DVector::from_vec(e1), &phi * DVector::from_vec(e2));
        let want = cross_norm(u.as_slice(), v.as_slice());
        let got = volume_of_immersion(&moved, &id).unwrap().value;
        assert!((got - want).abs() < 1e-9 * want, "{got} vs {want}");
    }
}

#[test]
fn weighted_volume_uses_the_metric() {
    let grid = ImmersionGrid::parallelotope(&[0.0; 2], &[vec![1.0, 0.0], vec![0.0, 1.0]], 8).unwrap();
    let p = DenseMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]);
    assert!((volume_of_immersion(&grid, &p).unwrap().value - 6.0).abs() < 1e-12);
}

#[test]
fn attractors_are_labelled() {
    let tr = integrate_with(&hopf, &[0.1, 0.0], 60.0, 1e-3, 1).unwrap();
    match classify_attractor(&tr, 1e-3) {
        Attractor::LimitCycle { period } => assert!((period - std::f64::consts::TAU).abs() < 1e-2, "{period}"),
        other => panic!("{other:?}"),
    }
    let damped = |x: &[f64]| vec![x[1], -x[0] - 0.5 * x[1]];
    let tr = integrate_with(&damped, &[1.0, 0.0], 60.0, 1e-3, 1).unwrap();
    assert_eq!(classify_attractor(&tr, 1e-3), Attractor::FixedPoint);
    let tr = integrate_with(&lorenz, &[1.0, 1.0, 1.0], 60.0, 1e-3, 1).unwrap();
    assert_eq!(classify_attractor(&tr, 1e-3), Attractor::Unresolved);
}

#[test]
fn equilibria_of_a_double_well() {
    let f = |x: &[f64]| vec![x[0] - x[0].powi(3), -x[1]];
    let bx = StateBox::new(vec![-2.0, -1.0], vec![2.0, 1.0]).unwrap();
    let eq = find_equilibria(&f, &bx, 200).unwrap();
    let xs: Vec<f64> = eq.iter().map(|e| e.point[0]).collect();
    assert_eq!(eq.len(), 3, "{xs:?}");
    for (e, want) in eq.iter().zip([-1.0, 0.0, 1.0]) {
        assert!((e.point[0] - want).abs() < 1e-8 && e.point[1].abs() < 1e-8);
    }
    assert_eq!(eq[1].kind, EquilibriumKind::Saddle);
    assert!(eq[1].is_unstable());
    assert!(eq[0].kind == EquilibriumKind::Stable && eq[2].kind == EquilibriumKind::Stable);
}

#[test]
fn csv_has_one_row_per_sample() {
    let f = |x: &[f64]| vec![-x[0]];
    let tr = integrate_with(&f, &[1.0], 1.0, 0.25, 1).unwrap();
    let csv = tr.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,x1");
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[1], "0.00000000000e0,1.00000000000e0");
    let last: Vec<f64> = lines[5].split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(last[0], 1.0);
    assert!((last[1] - (-1f64).exp()).abs() < 1e-3);
}

#[test]
fn blow_up_truncates_the_trace() {
    let f = |x: &[f64]| vec![x[0] * x[0]];
    let tr = integrate(&f, &[1.0], 5.0, 1e-2).unwrap();
    assert!(tr.truncated);
    assert_eq!(classify_attractor(&tr, 1e-3), Attractor::Unresolved);
}
