//! Evaluation protocol: seeded repetitions of
//! split → fit → stream → finalize → score, aggregation, and parameter sweeps.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{ClassifierModel, Decision, DEFAULT_NOVELTY_QUANTILE};
use crate::clusterer::{
    ClustererConfig, ClustererState, Finalized, ParamSource, RandomParams, TraceRecord,
};
use crate::dataset::{ClassId, Dataset};
use crate::error::{Error, Result};
use crate::kmeans::kmeans;
use crate::metrics::{adjusted_rand_index, detection_accuracy, recognition_rate};
use crate::regressor::{RegressionModel, RegressionOptions};
use crate::report::{ExperimentReport, TrialResult};
use crate::rng::RngSeed;
use crate::sample::{Label, Point, PropertySample};
use crate::split::{split_open_set, SplitResult};
use crate::stats;
use crate::synthetic::{generate_synthetic, SyntheticSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Csv(PathBuf),
    Synthetic(SyntheticSpec),
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Csv(path) => Dataset::load_csv(path),
            DataSource::Synthetic(spec) => Ok(generate_synthetic(spec)?.dataset),
        }
    }
}

/// Which method clusters the novel-routed samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// Regression-synthesised cluster parameters.
    Full,
    /// Same online clusterer, with uniformly random centre and variance.
    RandomParams,
    /// Offline k-means given the true number of novel classes.
    KmeansBaseline,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::Full, Arm::RandomParams, Arm::KmeansBaseline];

    pub fn name(self) -> &'static str {
        match self {
            Arm::Full => "full",
            Arm::RandomParams => "random_params",
            Arm::KmeansBaseline => "kmeans_baseline",
        }
    }
}

impl std::str::FromStr for Arm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Arm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown arm `{s}` (full | random_params | kmeans_baseline)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub known_fraction: f64,
    pub train_fraction: f64,
    pub repetitions: usize,
    /// Training-likelihood quantile used as `τ_nov`.
    pub novelty_quantile: f64,
    /// Fixed `τ_nov`; overrides the quantile when set.
    pub novelty_threshold: Option<f64>,
    pub clusterer: ClustererConfig,
    pub regression: RegressionOptions,
    pub seed: RngSeed,
    pub arm: Arm,
    /// Score outliers as singleton clusters instead of dropping them from ARI.
    pub count_outliers_as_singletons: bool,
    /// Score detector mistakes in ARI as one extra error group each way.
    pub include_misrouted_in_ari: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataSource::Synthetic(SyntheticSpec::default()),
            known_fraction: 0.6,
            train_fraction: 0.75,
            repetitions: 25,
            novelty_quantile: DEFAULT_NOVELTY_QUANTILE,
            novelty_threshold: None,
            clusterer: ClustererConfig::default(),
            regression: RegressionOptions::default(),
            seed: RngSeed(2024),
            arm: Arm::Full,
            count_outliers_as_singletons: false,
            include_misrouted_in_ari: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::config("repetitions", "must be at least 1"));
        }
        for (key, v) in [
            ("known_fraction", self.known_fraction),
            ("train_fraction", self.train_fraction),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::config(key, format!("{v} outside (0, 1)")));
            }
        }
        if !(0.0..0.5).contains(&self.novelty_quantile) {
            return Err(Error::config(
                "novelty_quantile",
                format!("{} outside [0, 0.5)", self.novelty_quantile),
            ));
        }
        for (key, v) in [
            ("lambda_mu", self.regression.lambda_mean),
            ("lambda_sigma2", self.regression.lambda_variance),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(key, format!("{v} must be finite and >= 0")));
            }
        }
        if let DataSource::Synthetic(spec) = &self.data {
            spec.validate()
                .map_err(|e| Error::config("synthetic", e.to_string()))?;
        }
        self.clusterer.validate()
    }
}

/// Everything a single trial produced.
#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub result: TrialResult,
    pub split: SplitResult,
    /// `(row index, label)` for every streamed sample, in stream order.
    pub labels: Vec<(usize, Label)>,
    pub trace: Vec<TraceRecord>,
}

/// Truth side of an ARI pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum TruthGroup {
    Class(ClassId),
    /// Known-class samples the detector called novel.
    Misrouted,
}

/// Assigned side of an ARI pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum AssignedGroup {
    Cluster(usize),
    Singleton(usize),
    /// Novel samples the detector called known.
    Missed,
}

fn group_rows(
    data: &Dataset,
    rows: &[usize],
    classes: &[ClassId],
) -> Vec<(ClassId, Vec<PropertySample>)> {
    classes
        .iter()
        .map(|&c| {
            let s = rows
                .iter()
                .map(|&i| &data.rows()[i])
                .filter(|r| r.class == c)
                .map(|r| r.sample)
                .collect();
            (c, s)
        })
        .collect()
}

pub fn run_trial(
    config: &ExperimentConfig,
    data: &Dataset,
    trial: usize,
    seed: RngSeed,
) -> Result<TrialOutcome> {
    let split = split_open_set(data, config.known_fraction, config.train_fraction, seed)?;
    let groups = group_rows(data, &split.train, &split.known);

    let classifier = ClassifierModel::fit(&groups)?;
    let tau = match config.novelty_threshold {
        Some(t) => t,
        None => {
            let train: Vec<PropertySample> =
                groups.iter().flat_map(|(_, s)| s.iter().copied()).collect();
            classifier.calibrate_threshold(&train, config.novelty_quantile)?
        }
    };
    let classifier = classifier.with_threshold(tau);

    let mut clusterer = match config.arm {
        Arm::Full => {
            let model = RegressionModel::fit(&groups, config.regression)?;
            Some(ClustererState::with_regression(
                config.clusterer,
                model,
                split.known.len(),
                seed,
            )?)
        }
        Arm::RandomParams => {
            let floor = *classifier.variance_floor();
            let source = ParamSource::Random(RandomParams::from_training(&groups, &floor));
            Some(ClustererState::new(
                config.clusterer,
                source,
                floor,
                split.known.len(),
                seed,
            )?)
        }
        Arm::KmeansBaseline => None,
    };

    let mut decisions = Vec::with_capacity(split.test.len());
    let mut truly_known = Vec::with_capacity(split.test.len());
    let mut prob_error = 0.0f64;
    let mut routed: Vec<usize> = Vec::new();
    let mut labels: Vec<(usize, Label)> = Vec::with_capacity(split.test.len());
    for &i in &split.test {
        let row = &data.rows()[i];
        let post = classifier.posterior(&row.sample);
        prob_error = prob_error.max((post.iter().sum::<f64>() - 1.0).abs());
        let d = classifier.detect_and_classify(&row.sample);
        decisions.push(d);
        truly_known.push(split.is_known(row.class));
        match d {
            Decision::Known(c) => labels.push((i, Label::Known(c))),
            Decision::Novel => {
                routed.push(i);
                if let Some(st) = clusterer.as_mut() {
                    st.assign(i, &row.sample);
                }
            }
        }
    }

    let detection = detection_accuracy(&decisions, &truly_known)?;
    let (pred, truth): (Vec<ClassId>, Vec<ClassId>) = decisions
        .iter()
        .zip(&split.test)
        .filter_map(|(d, &i)| match d {
            Decision::Known(c) if split.is_known(data.rows()[i].class) => {
                Some((*c, data.rows()[i].class))
            }
            _ => None,
        })
        .unzip();
    let recognition = recognition_rate(&pred, &truth)?;

    // cluster label of every routed row
    let (assigned, clusters, outliers, trace) = match clusterer {
        Some(st) => {
            prob_error = prob_error.max(st.max_probability_error());
            let trace = st.trace().to_vec();
            let Finalized {
                labels: fin,
                clusters,
                outliers,
                ..
            } = st.finalize();
            (fin, clusters.len(), outliers, trace)
        }
        None => {
            let k = split.novel.len();
            let pts: Vec<Point> = routed
                .iter()
                .map(|&i| data.rows()[i].sample.to_array())
                .collect();
            let km = kmeans(&pts, k, seed)?;
            let fin = routed
                .iter()
                .zip(km)
                .map(|(&i, l)| (i, Label::NovelCluster(crate::ClusterId(l + 1))))
                .collect();
            (fin, k, 0, Vec::new())
        }
    };

    let mut truth_groups = Vec::new();
    let mut assigned_groups = Vec::new();
    for &(i, label) in &assigned {
        let class = data.rows()[i].class;
        let truth = if split.is_known(class) {
            if !config.include_misrouted_in_ari {
                continue;
            }
            TruthGroup::Misrouted
        } else {
            TruthGroup::Class(class)
        };
        let group = match label {
            Label::NovelCluster(id) => AssignedGroup::Cluster(id.0),
            Label::Outlier if config.count_outliers_as_singletons => AssignedGroup::Singleton(i),
            _ => continue,
        };
        truth_groups.push(truth);
        assigned_groups.push(group);
    }
    if config.include_misrouted_in_ari {
        for (d, &i) in decisions.iter().zip(&split.test) {
            let class = data.rows()[i].class;
            if d.is_known() && !split.is_known(class) {
                truth_groups.push(TruthGroup::Class(class));
                assigned_groups.push(AssignedGroup::Missed);
            }
        }
    }
    let ari_samples = truth_groups.len();
    let novel_ari = if ari_samples >= 2 {
        adjusted_rand_index(&truth_groups, &assigned_groups)?
    } else {
        0.0
    };

    labels.extend(assigned);
    let order: std::collections::HashMap<usize, usize> = split
        .test
        .iter()
        .enumerate()
        .map(|(pos, &i)| (i, pos))
        .collect();
    labels.sort_by_key(|(i, _)| order[i]);

    let result = TrialResult {
        trial,
        seed,
        known_classes: split.known.len(),
        novel_classes: split.novel.len(),
        test_samples: split.test.len(),
        known_accuracy: detection.known,
        novel_accuracy: detection.novel,
        overall_accuracy: detection.overall,
        recognition_rate: recognition,
        novel_ari,
        ari_samples,
        clusters,
        outliers,
        novelty_threshold: tau,
        max_probability_error: prob_error,
    };
    Ok(TrialOutcome {
        result,
        split,
        labels,
        trace,
    })
}

/// Runs `config.repetitions` trials on `data`, `jobs` at a time.
pub fn run_experiment_on(
    config: &ExperimentConfig,
    data: &Dataset,
    jobs: usize,
) -> Result<ExperimentReport> {
    config.validate()?;
    let start = Instant::now();
    let seeds = config.seed.trial_seeds(config.repetitions);
    let run = |(i, s): (usize, &RngSeed)| {
        run_trial(config, data, i, *s)
            .map(|o| o.result)
            .map_err(|e| Error::Trial {
                index: i,
                source: Box::new(e),
            })
    };
    let per_trial: Vec<TrialResult> = if jobs <= 1 {
        seeds.iter().enumerate().map(run).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
        pool.install(|| seeds.par_iter().enumerate().map(run).collect::<Result<_>>())?
    };
    let mut report = ExperimentReport::new(config.clone(), seeds, per_trial);
    report.runtime_seconds = Some(start.elapsed().as_secs_f64());
    Ok(report)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let data = config.data.load()?;
    run_experiment_on(config, &data, 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Alpha,
    Beta,
    NGen,
    TauUpdate,
    NovelFraction,
}

impl SweepParam {
    pub const ALL: [SweepParam; 5] = [
        SweepParam::Alpha,
        SweepParam::Beta,
        SweepParam::NGen,
        SweepParam::TauUpdate,
        SweepParam::NovelFraction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Beta => "beta",
            SweepParam::NGen => "n_gen",
            SweepParam::TauUpdate => "tau_update",
            SweepParam::NovelFraction => "novel_fraction",
        }
    }

    /// Returns `config` with this parameter set to `value`.
    pub fn apply(self, config: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut c = config.clone();
        let as_count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 && v.is_finite() {
                Ok(v as usize)
            } else {
                Err(Error::config(
                    self.name(),
                    format!("{v} is not a non-negative integer"),
                ))
            }
        };
        match self {
            SweepParam::Alpha => c.clusterer.alpha = value,
            SweepParam::Beta => c.clusterer.beta = value,
            SweepParam::NGen => c.clusterer.n_gen = as_count(value)?,
            SweepParam::TauUpdate => c.clusterer.tau_update = as_count(value)?,
            SweepParam::NovelFraction => {
                if !(value > 0.0 && value < 1.0) {
                    return Err(Error::config(
                        "novel_fraction",
                        format!("{value} outside (0, 1)"),
                    ));
                }
                c.known_fraction = 1.0 - value;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepParam::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = SweepParam::ALL.iter().map(|p| p.name()).collect();
                Error::config(
                    s,
                    format!("unknown sweep parameter (valid: {})", names.join(", ")),
                )
            })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurvePoint {
    pub value: f64,
    pub ari: stats::MeanStd,
    pub overall_accuracy: stats::MeanStd,
    pub recognition_rate: stats::MeanStd,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub reports: Vec<ExperimentReport>,
}

impl SweepResult {
    pub fn curve(&self) -> Vec<CurvePoint> {
        self.values
            .iter()
            .zip(&self.reports)
            .map(|(&value, r)| CurvePoint {
                value,
                ari: r.metric(|t| t.novel_ari),
                overall_accuracy: r.metric(|t| t.overall_accuracy),
                recognition_rate: r.metric(|t| t.recognition_rate),
            })
            .collect()
    }
}

/// One experiment per value, all with the same master seed so trial seeds
/// are paired across values.
pub fn sweep(
    config: &ExperimentConfig,
    data: &Dataset,
    param: SweepParam,
    values: &[f64],
    jobs: usize,
) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::config(param.name(), "no sweep values"));
    }
    let reports = values
        .iter()
        .map(|&v| run_experiment_on(&param.apply(config, v)?, data, jobs))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        param,
        values: values.to_vec(),
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (ExperimentConfig, Dataset) {
        let config = ExperimentConfig {
            repetitions: 2,
            ..Default::default()
        };
        let data = config.data.load().unwrap();
        (config, data)
    }

    #[test]
    fn trial_is_deterministic() {
        let (c, d) = small();
        let a = run_trial(&c, &d, 0, RngSeed(11)).unwrap();
        let b = run_trial(&c, &d, 0, RngSeed(11)).unwrap();
        assert_eq!(a.result, b.result);
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn training_rows_never_streamed() {
        let (c, d) = small();
        let o = run_trial(&c, &d, 0, RngSeed(3)).unwrap();
        let train: std::collections::HashSet<_> = o.split.train.iter().collect();
        assert!(o.labels.iter().all(|(i, _)| !train.contains(i)));
        assert_eq!(o.labels.len(), o.split.test.len());
    }

    #[test]
    fn single_repetition_has_zero_std() {
        let (mut c, d) = small();
        c.repetitions = 1;
        let r = run_experiment_on(&c, &d, 1).unwrap();
        let ari = r.aggregate["novel_ari"];
        assert_eq!(ari.std, 0.0);
        assert_eq!(ari.mean, r.per_trial[0].novel_ari);
    }

    #[test]
    fn parallel_matches_sequential() {
        let (mut c, d) = small();
        c.repetitions = 4;
        let a = run_experiment_on(&c, &d, 1).unwrap();
        let b = run_experiment_on(&c, &d, 3).unwrap();
        assert_eq!(a.per_trial, b.per_trial);
        assert_eq!(a.aggregate, b.aggregate);
    }

    #[test]
    fn kmeans_and_random_arms_run() {
        let (mut c, d) = small();
        for arm in [Arm::RandomParams, Arm::KmeansBaseline] {
            c.arm = arm;
            let o = run_trial(&c, &d, 0, RngSeed(5)).unwrap();
            assert!((-1.0..=1.0).contains(&o.result.novel_ari));
        }
    }

    #[test]
    fn sweep_param_parsing_and_limits() {
        assert!("gamma"
            .parse::<SweepParam>()
            .unwrap_err()
            .to_string()
            .contains("novel_fraction"));
        let c = ExperimentConfig::default();
        assert!(SweepParam::NGen.apply(&c, 2.5).is_err());
        assert!(SweepParam::Alpha.apply(&c, 1.5).is_err());
        let c2 = SweepParam::NovelFraction.apply(&c, 0.4).unwrap();
        assert!((c2.known_fraction - 0.6).abs() < 1e-12);
    }
}
