use osr_core::experiment::{run_experiment_on, run_trial, sweep};
use osr_core::report::{ExperimentReport, METRICS};
use osr_core::{Arm, Dataset, ExperimentConfig, SweepParam};

fn setup(repetitions: usize) -> (ExperimentConfig, Dataset) {
    let config = ExperimentConfig {
        repetitions,
        ..Default::default()
    };
    let data = config.data.load().unwrap();
    (config, data)
}

fn population_mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[test]
fn aggregates_match_per_trial_rows() {
    let (config, data) = setup(6);
    let report = run_experiment_on(&config, &data, 2).unwrap();
    assert_eq!(report.per_trial.len(), 6);
    for (name, get) in METRICS {
        let values: Vec<f64> = report.per_trial.iter().map(get).collect();
        let (mean, std) = population_mean_std(&values);
        let agg = report.aggregate[name];
        assert!((agg.mean - mean).abs() <= 1e-12, "{name}");
        assert!((agg.std - std).abs() <= 1e-12, "{name}");
    }
}

#[test]
fn sweeps_pair_trial_seeds() {
    let (config, data) = setup(3);
    let result = sweep(&config, &data, SweepParam::Alpha, &[0.0, 0.5, 1.0], 1).unwrap();
    let seeds = &result.reports[0].seeds;
    assert_eq!(seeds.len(), 3);
    assert!(result.reports.iter().all(|r| &r.seeds == seeds));
    let alphas: Vec<f64> = result
        .reports
        .iter()
        .map(|r| r.config.clusterer.alpha)
        .collect();
    assert_eq!(alphas, vec![0.0, 0.5, 1.0]);
}

#[test]
fn training_rows_never_reach_the_stream() {
    let (config, data) = setup(1);
    for arm in Arm::ALL {
        let c = ExperimentConfig {
            arm,
            ..config.clone()
        };
        for seed in 0..5 {
            let o = run_trial(&c, &data, 0, seed.into()).unwrap();
            let train: std::collections::HashSet<usize> = o.split.train.iter().copied().collect();
            assert!(o.labels.iter().all(|(i, _)| !train.contains(i)));
            let streamed: Vec<usize> = o.labels.iter().map(|(i, _)| *i).collect();
            assert_eq!(streamed, o.split.test);
        }
    }
}

#[test]
fn parallelism_does_not_change_results() {
    let (config, data) = setup(5);
    let a = run_experiment_on(&config, &data, 1)
        .unwrap()
        .without_timing();
    let b = run_experiment_on(&config, &data, 5)
        .unwrap()
        .without_timing();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let back = ExperimentReport::from_json(&a.to_json().unwrap()).unwrap();
    assert_eq!(back.to_json().unwrap(), a.to_json().unwrap());
}

#[test]
fn metrics_are_in_range() {
    let (config, data) = setup(4);
    for arm in Arm::ALL {
        let c = ExperimentConfig {
            arm,
            ..config.clone()
        };
        let r = run_experiment_on(&c, &data, 2).unwrap();
        for t in &r.per_trial {
            for v in [
                t.known_accuracy,
                t.novel_accuracy,
                t.overall_accuracy,
                t.recognition_rate,
            ] {
                assert!((0.0..=1.0).contains(&v));
            }
            assert!(t.novel_ari <= 1.0 && t.novel_ari >= -1.0);
            assert!(t.max_probability_error <= 1e-12);
        }
    }
}
