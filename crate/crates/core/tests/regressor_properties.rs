use nalgebra::DMatrix;
use osr_core::regressor::{feature_map, ridge_solve, RegressionOptions, FEATURES};
use osr_core::{ClassId, PropertySample, RegressionModel};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn point() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-50.0..50.0f64)
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn sample() -> impl Strategy<Value = PropertySample> {
    (100.0..3000.0, 1.0..50.0, 0.05..0.95, 0.05..1.5)
        .prop_map(|(k, v, r, f)| PropertySample::new(k, v, r, f).unwrap())
}

fn groups() -> impl Strategy<Value = Vec<(ClassId, Vec<PropertySample>)>> {
    prop::collection::vec(prop::collection::vec(sample(), 3..6), 3..6).prop_map(|gs| {
        gs.into_iter()
            .enumerate()
            .map(|(c, s)| (ClassId(c), s))
            .collect()
    })
}

proptest! {
    #[test]
    fn feature_map_holds_pairwise_products(x in point()) {
        let a = feature_map(&x).0;
        prop_assert_eq!(&a[..4], &x[..]);
        let mut k = 4;
        for i in 0..4 {
            for j in i..4 {
                prop_assert_eq!(a[k], x[i] * x[j]);
                k += 1;
            }
        }
        prop_assert_eq!(k, FEATURES);
    }

    #[test]
    fn normal_equation_residual_is_small(seed in any::<u64>(), m in 20usize..80, log_lambda in -6.0..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, FEATURES, m);
        let t = random_matrix(&mut rng, 4, m);
        let lambda = 10f64.powf(log_lambda);
        let w = ridge_solve(&a, &t, lambda).unwrap();
        let gram = &a * a.transpose() + DMatrix::identity(FEATURES, FEATURES) * lambda;
        let residual = (&w * gram - &t * a.transpose()).norm();
        prop_assert!(residual <= 1e-8 * t.norm() * a.norm(), "residual {residual}");
    }

    #[test]
    fn duplicated_columns_match_doubled_lambda(seed in any::<u64>(), m in 20usize..60, lambda in 1e-4..1.0f64) {
        // [A A], [T T] with 2λ has the same normal equations as A, T with λ
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, FEATURES, m);
        let t = random_matrix(&mut rng, 4, m);
        let aa = DMatrix::from_fn(FEATURES, 2 * m, |i, j| a[(i, j % m)]);
        let tt = DMatrix::from_fn(4, 2 * m, |i, j| t[(i, j % m)]);
        let w = ridge_solve(&a, &t, lambda).unwrap();
        let w2 = ridge_solve(&aa, &tt, 2.0 * lambda).unwrap();
        prop_assert!((&w - &w2).norm() <= 1e-9 * (1.0 + w.norm()));
    }

    #[test]
    fn cluster_params_continuous_in_alpha_and_beta(
        gs in groups(), x in sample(), alpha in 0.0..0.99f64, beta in 0.1..3.0f64,
    ) {
        let model = RegressionModel::fit(&gs, RegressionOptions::default()).unwrap();
        let p = x.to_array();
        let h = 1e-6;
        let (m0, v0) = model.predict_cluster_params(&p, alpha, beta);
        let (m1, _) = model.predict_cluster_params(&p, alpha + h, beta);
        let (_, v1) = model.predict_cluster_params(&p, alpha, beta + h);
        let pred = model.predict_mean(&p);
        let raw = model.predict_variance(&p);
        for f in 0..4 {
            // the centre is affine in α with slope x − W_μ a(x)
            let bound = h * (p[f] - pred[f]).abs() * (1.0 + 1e-6) + 1e-9 * (1.0 + m0[f].abs());
            prop_assert!((m1[f] - m0[f]).abs() <= bound);
            // the spread is β·(W_σ² a(x)) clamped below, so its slope is at most |W_σ² a(x)|
            prop_assert!((v1[f] - v0[f]).abs() <= h * raw[f].abs() * (1.0 + 1e-6) + 1e-12 * (1.0 + v0[f].abs()));
        }
    }

    #[test]
    fn new_cluster_spread_respects_floor(gs in groups(), x in sample(), alpha in 0.0..=1.0f64, beta in 0.0..3.0f64) {
        let model = RegressionModel::fit(&gs, RegressionOptions::default()).unwrap();
        let (_, var) = model.predict_cluster_params(&x.to_array(), alpha, beta);
        let floor = model.variance_floor();
        prop_assert!((0..4).all(|f| var[f] >= floor[f]));
    }
}

#[test]
fn planted_weights_are_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let w = random_matrix(&mut rng, 4, FEATURES);
    let a = random_matrix(&mut rng, FEATURES, 200);
    let t = &w * &a;
    let got = ridge_solve(&a, &t, 1e-12).unwrap();
    assert!((&got - &w).norm() / w.norm() < 1e-6);
}

#[test]
fn identity_mean_map_is_recovered() {
    // each class repeats one point, so its mean target is the point itself and
    // the linear block of the feature map reproduces it exactly
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let groups: Vec<(ClassId, Vec<PropertySample>)> = (0..30)
        .map(|c| {
            let p = PropertySample::new(
                rng.random_range(1.0..5.0),
                rng.random_range(1.0..5.0),
                rng.random_range(0.1..0.9),
                rng.random_range(0.1..1.0),
            )
            .unwrap();
            (ClassId(c), vec![p; 5])
        })
        .collect();
    let options = RegressionOptions {
        lambda_mean: 0.0,
        lambda_variance: 0.0,
        ..Default::default()
    };
    let model = RegressionModel::fit(&groups, options).unwrap();
    assert_eq!(model.observations(), 150);
    for (f, row) in model.mean_weights().iter().enumerate() {
        for (k, &w) in row.iter().enumerate() {
            let expected = if k == f { 1.0 } else { 0.0 };
            assert!((w - expected).abs() < 1e-8, "W[{f}][{k}] = {w}");
        }
    }
    let x = [2.5, 3.0, 0.4, 0.7];
    let pred = model.predict_mean(&x);
    assert!((0..4).all(|f| (pred[f] - x[f]).abs() < 1e-8));
}

#[test]
fn singular_design_without_regularisation_is_reported() {
    let a = DMatrix::<f64>::zeros(FEATURES, 10);
    let t = DMatrix::<f64>::zeros(4, 10);
    assert!(ridge_solve(&a, &t, 0.0).is_err());
    assert!(ridge_solve(&a, &t, 1.0).is_ok());
}
