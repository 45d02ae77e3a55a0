//! Online clustering of samples flagged as novel.
//!
//! Each cluster is a diagonal Gaussian with a boundary `η`: the largest
//! Mahalanobis quadratic form from any of its points to its centre. A sample
//! joins the most probable cluster if it lies inside that cluster's boundary,
//! otherwise it seeds a new cluster whose centre and spread come from a
//! [`ParamSource`]. The boundary of a new cluster is estimated from `n_gen`
//! points drawn from its Gaussian. Parameters are re-estimated from the
//! drawn points plus the real members every `tau_update` accepted members,
//! and clusters with fewer than `tau_out` members are dropped at the end.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::ClassId;
use crate::error::{Error, Result};
use crate::regressor::RegressionModel;
use crate::rng::{RngSeed, Stream};
use crate::sample::{Label, Point, PropertySample, DIM};
use crate::stats;

/// 1-based cluster id, dense in creation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterId(pub usize);

impl ClusterId {
    /// Label in the numbering that continues after the `known` class labels,
    /// i.e. `known + id`.
    pub fn offset_label(self, known: usize) -> usize {
        known + self.0
    }
}

impl std::fmt::Display for ClusterId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `(x − μ)ᵀ diag(σ²)⁻¹ (x − μ)`, no square root.
pub fn mahalanobis(x: &Point, mean: &Point, variance: &Point) -> Result<f64> {
    if let Some(f) = variance.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::ZeroVariance(f));
    }
    Ok(quad_form(x, mean, variance))
}

fn quad_form(x: &Point, mean: &Point, variance: &Point) -> f64 {
    (0..DIM)
        .map(|f| {
            let d = x[f] - mean[f];
            d * d / variance[f]
        })
        .sum()
}

/// Softmax of `−d/2` over the given distances.
pub fn membership_from_distances(distances: &[f64]) -> Vec<f64> {
    let logw: Vec<f64> = distances.iter().map(|d| -0.5 * d).collect();
    stats::normalize_log_weights(&logw)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: ClusterId,
    pub mean: Point,
    pub variance: Point,
    pub boundary: f64,
    pub members: Vec<PropertySample>,
    /// Caller-supplied sample ids, parallel to `members`.
    pub member_ids: Vec<usize>,
    /// Points drawn at creation. Kept for the cluster's lifetime.
    pub generated: Vec<Point>,
    pub updates: usize,
    /// Members accepted since the last parameter update.
    pub pending: usize,
}

impl Cluster {
    /// Drawn points followed by real members.
    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        self.generated
            .iter()
            .copied()
            .chain(self.members.iter().map(PropertySample::to_array))
    }

    pub fn distance(&self, x: &Point) -> f64 {
        quad_form(x, &self.mean, &self.variance)
    }

    /// Largest distance from the current point set to the centre.
    pub fn max_point_distance(&self) -> f64 {
        self.points().map(|p| self.distance(&p)).fold(0.0, f64::max)
    }

    /// Re-estimates centre and variance from all points once `pending`
    /// reaches `tau_update`, then recomputes the boundary under the new
    /// parameters. Returns whether an update happened.
    pub fn maybe_update(&mut self, tau_update: usize, floor: &Point) -> bool {
        if self.pending < tau_update {
            return false;
        }
        let pts: Vec<Point> = self.points().collect();
        self.mean = stats::mean(&pts);
        self.variance = stats::variance(&pts, &self.mean);
        stats::apply_floor(&mut self.variance, floor);
        self.boundary = self.max_point_distance();
        self.pending = 0;
        self.updates += 1;
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClustererConfig {
    /// Centre interpolation: 0 → regression prediction, 1 → the sample.
    pub alpha: f64,
    /// Multiplier on the predicted variance.
    pub beta: f64,
    pub n_gen: usize,
    pub tau_update: usize,
    /// Minimum final member count; `usize::MAX` removes every cluster.
    pub tau_out: usize,
}

impl Default for ClustererConfig {
    fn default() -> Self {
        ClustererConfig {
            alpha: 0.4,
            beta: 1.5,
            n_gen: 40,
            tau_update: 15,
            tau_out: 3,
        }
    }
}

impl ClustererConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config(
                "alpha",
                format!("{} outside [0, 1]", self.alpha),
            ));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::config(
                "beta",
                format!("{} must be finite and >= 0", self.beta),
            ));
        }
        if self.tau_update == 0 {
            return Err(Error::config("tau_update", "must be at least 1"));
        }
        Ok(())
    }
}

/// Uniform ranges for the random-parameter ablation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomParams {
    pub mean_low: Point,
    pub mean_high: Point,
    pub variance_low: Point,
    pub variance_high: Point,
}

impl RandomParams {
    /// Centre range: bounding box of the training samples. Variance range:
    /// smallest to largest per-class variance.
    pub fn from_training(groups: &[(ClassId, Vec<PropertySample>)], floor: &Point) -> Self {
        let mut out = RandomParams {
            mean_low: [f64::INFINITY; DIM],
            mean_high: [f64::NEG_INFINITY; DIM],
            variance_low: [f64::INFINITY; DIM],
            variance_high: [f64::NEG_INFINITY; DIM],
        };
        for (_, samples) in groups {
            let pts: Vec<Point> = samples.iter().map(PropertySample::to_array).collect();
            for p in &pts {
                for f in 0..DIM {
                    out.mean_low[f] = out.mean_low[f].min(p[f]);
                    out.mean_high[f] = out.mean_high[f].max(p[f]);
                }
            }
            let mut var = stats::variance(&pts, &stats::mean(&pts));
            stats::apply_floor(&mut var, floor);
            for f in 0..DIM {
                out.variance_low[f] = out.variance_low[f].min(var[f]);
                out.variance_high[f] = out.variance_high[f].max(var[f]);
            }
        }
        out
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> (Point, Point) {
        let uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
            if lo < hi {
                rng.random_range(lo..hi)
            } else {
                lo
            }
        };
        let mean = std::array::from_fn(|f| uniform(rng, self.mean_low[f], self.mean_high[f]));
        let var =
            std::array::from_fn(|f| uniform(rng, self.variance_low[f], self.variance_high[f]));
        (mean, var)
    }
}

/// Where the parameters of a new cluster come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ParamSource {
    Regression(RegressionModel),
    Random(RandomParams),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceOutcome {
    Joined(ClusterId),
    Created(ClusterId),
}

/// One line of the assignment log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub sample_id: usize,
    /// Distances to every cluster that existed before this sample.
    pub distances: Vec<f64>,
    pub outcome: TraceOutcome,
    /// Distance to the cluster the sample ended up in, and that cluster's
    /// boundary at assignment time.
    pub distance: f64,
    pub boundary: f64,
    pub updated: bool,
}

/// Writes trace records as JSON lines.
pub fn write_trace<W: Write>(records: &[TraceRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Checks the assignment-time invariant `distance ≤ boundary` on every
/// record, and that joins went to the nearest cluster.
pub fn verify_trace(trace: &[TraceRecord]) -> std::result::Result<(), String> {
    for r in trace {
        if !(r.distance <= r.boundary) {
            return Err(format!(
                "step {}: distance {} exceeds boundary {}",
                r.step, r.distance, r.boundary
            ));
        }
        if let TraceOutcome::Joined(id) = r.outcome {
            let nearest = r
                .distances
                .iter()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |b, (i, &d)| if d < b.1 { (i, d) } else { b },
                );
            if nearest.0 + 1 != id.0 {
                return Err(format!(
                    "step {}: joined {id} but nearest is {}",
                    r.step,
                    nearest.0 + 1
                ));
            }
        }
    }
    Ok(())
}

/// Labels after [`ClustererState::finalize`].
#[derive(Clone, Debug, PartialEq)]
pub struct Finalized {
    /// `(sample id, label)` in assignment order.
    pub labels: Vec<(usize, Label)>,
    /// Old id → new id, `None` for removed clusters.
    pub id_map: Vec<(ClusterId, Option<ClusterId>)>,
    /// Surviving clusters, renumbered.
    pub clusters: Vec<Cluster>,
    pub outliers: usize,
}

#[derive(Clone, Debug)]
pub struct ClustererState {
    clusters: Vec<Cluster>,
    config: ClustererConfig,
    source: ParamSource,
    variance_floor: Point,
    known_classes: usize,
    rng: ChaCha8Rng,
    assignments: Vec<(usize, ClusterId)>,
    trace: Vec<TraceRecord>,
    max_probability_error: f64,
}

impl ClustererState {
    pub fn new(
        config: ClustererConfig,
        source: ParamSource,
        variance_floor: Point,
        known_classes: usize,
        seed: RngSeed,
    ) -> Result<Self> {
        config.validate()?;
        if variance_floor.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::invalid("variance floor must be positive"));
        }
        Ok(ClustererState {
            clusters: Vec::new(),
            config,
            source,
            variance_floor,
            known_classes,
            rng: seed.rng(Stream::Clusterer),
            assignments: Vec::new(),
            trace: Vec::new(),
            max_probability_error: 0.0,
        })
    }

    /// Clusterer backed by a fitted regression model.
    pub fn with_regression(
        config: ClustererConfig,
        model: RegressionModel,
        known_classes: usize,
        seed: RngSeed,
    ) -> Result<Self> {
        let floor = *model.variance_floor();
        Self::new(
            config,
            ParamSource::Regression(model),
            floor,
            known_classes,
            seed,
        )
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn config(&self) -> &ClustererConfig {
        &self.config
    }

    pub fn known_classes(&self) -> usize {
        self.known_classes
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    /// Largest `|Σp − 1|` seen over all membership vectors computed so far.
    pub fn max_probability_error(&self) -> f64 {
        self.max_probability_error
    }

    /// Writes the assignment log as JSON lines.
    pub fn write_trace<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_trace(&self.trace, out)
    }

    /// `p(u | x)` over existing clusters.
    pub fn membership_probabilities(&self, x: &PropertySample) -> Result<Vec<f64>> {
        if self.clusters.is_empty() {
            return Err(Error::NoClusters);
        }
        let p = x.to_array();
        let d: Vec<f64> = self.clusters.iter().map(|c| c.distance(&p)).collect();
        Ok(membership_from_distances(&d))
    }

    /// Draws the new cluster's parameters and points, sets its boundary and
    /// appends it with `x` as first member.
    pub fn create_cluster(&mut self, sample_id: usize, x: &PropertySample) -> &Cluster {
        let p = x.to_array();
        let (mean, mut variance) = match &self.source {
            ParamSource::Regression(model) => {
                model.predict_cluster_params(&p, self.config.alpha, self.config.beta)
            }
            ParamSource::Random(r) => r.draw(&mut self.rng),
        };
        stats::apply_floor(&mut variance, &self.variance_floor);
        let sd = variance.map(f64::sqrt);
        let generated: Vec<Point> = (0..self.config.n_gen)
            .map(|_| {
                std::array::from_fn(|f| {
                    let z: f64 = self.rng.sample(StandardNormal);
                    mean[f] + sd[f] * z
                })
            })
            .collect();
        let id = ClusterId(self.clusters.len() + 1);
        let mut cluster = Cluster {
            id,
            mean,
            variance,
            boundary: 0.0,
            members: vec![*x],
            member_ids: vec![sample_id],
            generated,
            updates: 0,
            pending: 0,
        };
        cluster.boundary = cluster.max_point_distance();
        self.clusters.push(cluster);
        self.clusters.last().expect("just pushed")
    }

    /// Routes a novel sample to the nearest cluster if it lies inside that
    /// cluster's boundary, otherwise creates a new cluster. Ties go to the
    /// lowest cluster id.
    pub fn assign(&mut self, sample_id: usize, x: &PropertySample) -> Label {
        let p = x.to_array();
        let distances: Vec<f64> = self.clusters.iter().map(|c| c.distance(&p)).collect();
        let step = self.assignments.len();

        let nearest = if distances.is_empty() {
            None
        } else {
            let probs = membership_from_distances(&distances);
            let err = (probs.iter().sum::<f64>() - 1.0).abs();
            self.max_probability_error = self.max_probability_error.max(err);
            let neg: Vec<f64> = distances.iter().map(|d| -d).collect();
            stats::argmax(&neg)
        };

        let record = match nearest {
            Some(c) if distances[c] <= self.clusters[c].boundary => {
                let tau = self.config.tau_update;
                let floor = self.variance_floor;
                let cluster = &mut self.clusters[c];
                let boundary = cluster.boundary;
                cluster.members.push(*x);
                cluster.member_ids.push(sample_id);
                cluster.pending += 1;
                let updated = cluster.maybe_update(tau, &floor);
                TraceRecord {
                    step,
                    sample_id,
                    distance: distances[c],
                    distances,
                    outcome: TraceOutcome::Joined(cluster.id),
                    boundary,
                    updated,
                }
            }
            _ => {
                let c = self.create_cluster(sample_id, x);
                TraceRecord {
                    step,
                    sample_id,
                    distance: c.distance(&p),
                    boundary: c.boundary,
                    outcome: TraceOutcome::Created(c.id),
                    distances,
                    updated: false,
                }
            }
        };
        let id = match record.outcome {
            TraceOutcome::Joined(id) | TraceOutcome::Created(id) => id,
        };
        self.trace.push(record);
        self.assignments.push((sample_id, id));
        Label::NovelCluster(id)
    }

    /// Drops clusters with fewer than `tau_out` members, relabels their
    /// members as outliers and renumbers the survivors densely.
    pub fn finalize(self) -> Finalized {
        let tau_out = self.config.tau_out;
        let mut id_map = Vec::with_capacity(self.clusters.len());
        let mut clusters = Vec::new();
        for mut c in self.clusters {
            if c.members.len() >= tau_out {
                let new = ClusterId(clusters.len() + 1);
                id_map.push((c.id, Some(new)));
                c.id = new;
                clusters.push(c);
            } else {
                id_map.push((c.id, None));
            }
        }
        let mut outliers = 0;
        let labels = self
            .assignments
            .iter()
            .map(|&(sample, old)| {
                let label = match id_map[old.0 - 1].1 {
                    Some(new) => Label::NovelCluster(new),
                    None => {
                        outliers += 1;
                        Label::Outlier
                    }
                };
                (sample, label)
            })
            .collect();
        Finalized {
            labels,
            id_map,
            clusters,
            outliers,
        }
    }
}
