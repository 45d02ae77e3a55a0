//! Open-set object recognition over 4-D mechanical-property features.
//!
//! Samples of known object classes are classified with a Gaussian naive Bayes
//! model, samples with low likelihood under every known class are flagged as
//! novel, and novel samples are clustered online. New clusters get their
//! centre and spread from a ridge regression learned on the known classes.
//!
//! The pipeline for one trial is
//! [`split_open_set`] → [`ClassifierModel::fit`] → [`RegressionModel::fit`] →
//! stream through [`ClassifierModel::detect_and_classify`] and
//! [`ClustererState::assign`] → [`ClustererState::finalize`] → [`metrics`].
//! [`experiment`] runs that loop over seeded repetitions and sweeps.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop, clippy::large_enum_variant)]

pub mod classifier;
pub mod clusterer;
pub mod config;
pub mod dataset;
mod error;
pub mod experiment;
pub mod kmeans;
pub mod metrics;
pub mod regressor;
pub mod report;
pub mod rng;
pub mod sample;
pub mod split;
pub mod stats;
pub mod synthetic;

pub use classifier::{ClassifierModel, Decision};
pub use clusterer::{Cluster, ClusterId, ClustererConfig, ClustererState, ParamSource};
pub use dataset::{ClassId, Dataset, Row};
pub use error::{Error, Result};
pub use experiment::{Arm, ExperimentConfig, SweepParam};
pub use regressor::{FeatureVector14, RegressionModel};
pub use report::{ExperimentReport, ReportFormat, TrialResult};
pub use rng::RngSeed;
pub use sample::{Label, PropertySample, DIM};
pub use split::{split_open_set, SplitResult};
pub use synthetic::{generate_synthetic, SyntheticSpec};
