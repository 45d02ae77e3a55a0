use osr_core::clusterer::{
    mahalanobis, membership_from_distances, verify_trace, RandomParams, TraceOutcome,
};
use osr_core::{
    generate_synthetic, split_open_set, ClassId, ClustererConfig, ClustererState, Label,
    ParamSource, PropertySample, RegressionModel, RngSeed, SyntheticSpec,
};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-10.0..10.0f64)
}

fn variance() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(0.01..10.0f64)
}

/// A fitted clusterer plus the novel samples of one split, in stream order.
fn novel_stream(
    config: ClustererConfig,
    seed: u64,
) -> (ClustererState, Vec<(usize, PropertySample)>) {
    let data = generate_synthetic(&SyntheticSpec::default())
        .unwrap()
        .dataset;
    let split = split_open_set(&data, 0.6, 0.75, RngSeed(seed)).unwrap();
    let groups: Vec<(ClassId, Vec<PropertySample>)> = split
        .known
        .iter()
        .map(|&c| {
            let s = split
                .train
                .iter()
                .map(|&i| &data.rows()[i])
                .filter(|r| r.class == c)
                .map(|r| r.sample)
                .collect();
            (c, s)
        })
        .collect();
    let model = RegressionModel::fit(&groups, Default::default()).unwrap();
    let state =
        ClustererState::with_regression(config, model, split.known.len(), RngSeed(seed)).unwrap();
    let stream = split
        .test
        .iter()
        .filter(|&&i| !split.is_known(data.rows()[i].class))
        .map(|&i| (i, data.rows()[i].sample))
        .collect();
    (state, stream)
}

proptest! {
    #[test]
    fn membership_sums_to_one_and_ignores_shifts(
        d in prop::collection::vec(0.0..500.0f64, 1..12), shift in -1e3..1e3f64,
    ) {
        let p = membership_from_distances(&d);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let shifted: Vec<f64> = d.iter().map(|v| v + shift).collect();
        let q = membership_from_distances(&shifted);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn mahalanobis_ignores_axis_order(x in point(), mu in point(), var in variance(), perm in Just([0usize, 1, 2, 3]).prop_shuffle()) {
        let px: [f64; 4] = std::array::from_fn(|i| x[perm[i]]);
        let pm: [f64; 4] = std::array::from_fn(|i| mu[perm[i]]);
        let pv: [f64; 4] = std::array::from_fn(|i| var[perm[i]]);
        let a = mahalanobis(&x, &mu, &var).unwrap();
        let b = mahalanobis(&px, &pm, &pv).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
    }

    #[test]
    fn mahalanobis_matches_direct_sum(x in point(), mu in point(), var in variance()) {
        let direct = (x[0] - mu[0]).powi(2) / var[0]
            + (x[1] - mu[1]).powi(2) / var[1]
            + (x[2] - mu[2]).powi(2) / var[2]
            + (x[3] - mu[3]).powi(2) / var[3];
        prop_assert!((mahalanobis(&x, &mu, &var).unwrap() - direct).abs() <= 1e-12 * (1.0 + direct));
    }
}

#[test]
fn streaming_invariants_hold_over_many_streams() {
    for seed in 0..20 {
        for tau_update in [1, 5, 15] {
            let config = ClustererConfig {
                tau_update,
                ..Default::default()
            };
            let (mut state, stream) = novel_stream(config, seed);
            let mut count = 0;
            for &(i, x) in &stream {
                if !state.clusters().is_empty() {
                    let p = state.membership_probabilities(&x).unwrap();
                    assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                }
                let label = state.assign(i, &x);
                assert!(matches!(label, Label::NovelCluster(_)));
                assert!(
                    state.clusters().len() >= count,
                    "cluster count fell while streaming"
                );
                count = state.clusters().len();
            }
            verify_trace(state.trace()).unwrap();
            for r in state.trace() {
                if let TraceOutcome::Joined(_) = r.outcome {
                    assert!(r.distance <= r.boundary);
                }
            }
            let members: usize = state.clusters().iter().map(|c| c.members.len()).sum();
            assert_eq!(members, stream.len());
            let done = state.finalize();
            assert!(done.clusters.len() <= count);
            assert_eq!(done.labels.len(), stream.len());
        }
    }
}

#[test]
fn replay_is_identical() {
    let run = || {
        let (mut state, stream) = novel_stream(ClustererConfig::default(), 42);
        for &(i, x) in &stream {
            state.assign(i, &x);
        }
        let trace = state.trace().to_vec();
        let done = state.finalize();
        (trace, done.labels, done.clusters)
    };
    let (t1, l1, c1) = run();
    let (t2, l2, c2) = run();
    assert_eq!(t1, t2);
    assert_eq!(l1, l2);
    assert_eq!(c1, c2);
}

#[test]
fn tau_out_limits() {
    for (tau_out, expect_all_outliers) in [(0, false), (usize::MAX, true)] {
        let config = ClustererConfig {
            tau_out,
            ..Default::default()
        };
        let (mut state, stream) = novel_stream(config, 3);
        for &(i, x) in &stream {
            state.assign(i, &x);
        }
        let before = state.clusters().len();
        let done = state.finalize();
        if expect_all_outliers {
            assert_eq!(done.outliers, stream.len());
            assert!(done.clusters.is_empty());
        } else {
            assert_eq!(done.outliers, 0);
            assert_eq!(done.clusters.len(), before);
        }
    }
}

/// `P(max of n χ²₄ draws ≤ x)`.
fn max_chi2_4_cdf(x: f64, n: usize) -> f64 {
    let single = 1.0 - (-x / 2.0).exp() * (1.0 + x / 2.0);
    single.powi(n as i32)
}

fn max_chi2_4_quantile(p: f64, n: usize) -> f64 {
    let (mut lo, mut hi) = (0.0, 200.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if max_chi2_4_cdf(mid, n) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn boundary_concentrates_like_max_of_chi_square() {
    // a fixed-parameter source centred on the sample: the sample sits at
    // distance 0, so η is the largest χ²₄ value among the drawn points
    let n_gen = 10_000;
    let centre = [5.0, 5.0, 0.5, 0.5];
    let var = [1.0, 4.0, 0.01, 0.04];
    let source = ParamSource::Random(RandomParams {
        mean_low: centre,
        mean_high: centre,
        variance_low: var,
        variance_high: var,
    });
    let config = ClustererConfig {
        n_gen,
        beta: 1.0,
        ..Default::default()
    };
    let x = PropertySample::from_array(centre).unwrap();
    let mut etas = Vec::new();
    for seed in 0..21 {
        let mut state =
            ClustererState::new(config, source.clone(), [1e-12; 4], 12, RngSeed(seed)).unwrap();
        etas.push(state.create_cluster(0, &x).boundary);
    }
    let (lo, hi) = (
        max_chi2_4_quantile(0.001, n_gen),
        max_chi2_4_quantile(0.999, n_gen),
    );
    assert!(lo > 18.0 && hi < 40.0, "oracle quantiles {lo} {hi}");
    for &eta in &etas {
        assert!((lo..=hi).contains(&eta), "η {eta} outside [{lo}, {hi}]");
    }
    etas.sort_by(f64::total_cmp);
    let median = etas[etas.len() / 2];
    assert!((23.0..=33.0).contains(&median), "median η {median}");
}
