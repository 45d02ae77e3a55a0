//! Synthetic datasets: one diagonal Gaussian per class in property space.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassId, Dataset, Row};
use crate::error::{Error, Result};
use crate::rng::{RngSeed, Stream};
use crate::sample::{Point, PropertySample, DIM, FEATURE_NAMES};

/// Attempts per class before giving up on the separation constraint.
const MAX_PLACEMENT_ATTEMPTS: usize = 20_000;

/// Fraction of the other latent factor mixed into restitution and friction.
const LATENT_MIXING: f64 = 0.2;

/// How class means are placed inside the mean ranges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanLayout {
    /// Each feature's mean drawn independently and uniformly.
    Independent,
    /// Means driven by two uniform latent factors: stiffness and restitution
    /// follow the first, viscosity and friction the second.
    Latent,
}

impl MeanLayout {
    /// Position of each feature's mean within its range, in `[0, 1]`.
    fn draw<R: Rng>(self, rng: &mut R) -> Point {
        match self {
            MeanLayout::Independent => std::array::from_fn(|_| rng.random()),
            MeanLayout::Latent => {
                let (a, b): (f64, f64) = (rng.random(), rng.random());
                let m = LATENT_MIXING;
                [a, b, (1.0 - m) * a + m * b, m * a + (1.0 - m) * b]
            }
        }
    }
}

impl std::str::FromStr for MeanLayout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "independent" => Ok(MeanLayout::Independent),
            "latent" => Ok(MeanLayout::Latent),
            other => Err(format!(
                "unknown mean layout `{other}` (independent | latent)"
            )),
        }
    }
}

impl std::fmt::Display for MeanLayout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MeanLayout::Independent => "independent",
            MeanLayout::Latent => "latent",
        })
    }
}

/// How the per-class σ range is read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaScale {
    /// σ is drawn directly from the range.
    Absolute,
    /// The range holds a coefficient of variation; σ = cv · class mean.
    Relative,
}

impl std::str::FromStr for SigmaScale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "absolute" => Ok(SigmaScale::Absolute),
            "relative" => Ok(SigmaScale::Relative),
            other => Err(format!(
                "unknown sigma scale `{other}` (absolute | relative)"
            )),
        }
    }
}

impl std::fmt::Display for SigmaScale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SigmaScale::Absolute => "absolute",
            SigmaScale::Relative => "relative",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub samples_per_class: usize,
    /// Uniform range for each feature's class mean.
    pub mean_ranges: [(f64, f64); DIM],
    pub mean_layout: MeanLayout,
    /// Uniform range for each feature's class σ (see `sigma_scale`).
    pub sigma_ranges: [(f64, f64); DIM],
    pub sigma_scale: SigmaScale,
    /// Minimum distance between any two class means, in units of the
    /// larger of the two classes' σ on each feature.
    pub separation: f64,
    pub seed: RngSeed,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            classes: 20,
            samples_per_class: 25,
            mean_ranges: [(1000.0, 3000.0), (10.0, 40.0), (0.3, 0.9), (0.3, 1.2)],
            mean_layout: MeanLayout::Latent,
            sigma_ranges: [(0.035, 0.035); DIM],
            sigma_scale: SigmaScale::Relative,
            separation: 8.0,
            seed: RngSeed(7),
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::invalid(format!(
                "classes = {} (need at least 2)",
                self.classes
            )));
        }
        if self.samples_per_class < 2 {
            return Err(Error::invalid(format!(
                "samples_per_class = {} (need at least 2)",
                self.samples_per_class
            )));
        }
        if !(self.separation >= 0.0) || !self.separation.is_finite() {
            return Err(Error::invalid(format!(
                "separation = {} (need >= 0)",
                self.separation
            )));
        }
        for f in 0..DIM {
            let (lo, hi) = self.mean_ranges[f];
            let upper = if f == 2 { 1.0 } else { f64::INFINITY };
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi && hi <= upper) {
                return Err(Error::invalid(format!(
                    "{} mean range [{lo}, {hi}] is not a valid physical range",
                    FEATURE_NAMES[f]
                )));
            }
            let (lo, hi) = self.sigma_ranges[f];
            if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi) {
                return Err(Error::invalid(format!(
                    "{} sigma range [{lo}, {hi}] must be positive and ordered",
                    FEATURE_NAMES[f]
                )));
            }
        }
        Ok(())
    }
}

/// A generated dataset together with the class parameters it was drawn from.
#[derive(Clone, Debug)]
pub struct SyntheticDataset {
    pub dataset: Dataset,
    pub class_means: Vec<Point>,
    pub class_sigmas: Vec<Point>,
    /// Number of samples with at least one component clipped into range.
    pub clipped: usize,
}

/// Separation between two classes: Euclidean distance of the means after
/// scaling each feature by the larger of the two σ's.
pub fn class_separation(mean_a: &Point, sigma_a: &Point, mean_b: &Point, sigma_b: &Point) -> f64 {
    (0..DIM)
        .map(|f| {
            let s = sigma_a[f].max(sigma_b[f]);
            ((mean_a[f] - mean_b[f]) / s).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let mut rng = spec.seed.rng(Stream::Synthetic);

    let mut means: Vec<Point> = Vec::with_capacity(spec.classes);
    let mut sigmas: Vec<Point> = Vec::with_capacity(spec.classes);
    for _ in 0..spec.classes {
        let mut placed = false;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let position = spec.mean_layout.draw(&mut rng);
            let mut mean = [0.0; DIM];
            let mut sigma = [0.0; DIM];
            for f in 0..DIM {
                let (lo, hi) = spec.mean_ranges[f];
                mean[f] = lo + (hi - lo) * position[f];
                let (lo, hi) = spec.sigma_ranges[f];
                let s = if lo < hi {
                    rng.random_range(lo..hi)
                } else {
                    lo
                };
                sigma[f] = match spec.sigma_scale {
                    SigmaScale::Absolute => s,
                    SigmaScale::Relative => s * mean[f],
                };
            }
            if sigma.iter().any(|&s| !(s > 0.0)) {
                continue;
            }
            let ok = means
                .iter()
                .zip(&sigmas)
                .all(|(m, s)| class_separation(&mean, &sigma, m, s) >= spec.separation);
            if ok {
                means.push(mean);
                sigmas.push(sigma);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::SeparationUnsatisfiable {
                classes: spec.classes,
                separation: spec.separation,
                attempts: MAX_PLACEMENT_ATTEMPTS,
            });
        }
    }

    let mut rows = Vec::with_capacity(spec.classes * spec.samples_per_class);
    let mut clipped = 0;
    for (c, (mean, sigma)) in means.iter().zip(&sigmas).enumerate() {
        for _ in 0..spec.samples_per_class {
            let mut x = [0.0; DIM];
            for f in 0..DIM {
                let z: f64 = rng.sample(StandardNormal);
                x[f] = mean[f] + sigma[f] * z;
            }
            let (sample, moved) = PropertySample::clipped(x)?;
            clipped += usize::from(moved);
            rows.push(Row {
                object_id: format!("object{:02}", c + 1),
                class: ClassId(c),
                sample,
            });
        }
    }
    let names = (1..=spec.classes).map(|c| c.to_string()).collect();
    Ok(SyntheticDataset {
        dataset: Dataset::new(rows, names)?,
        class_means: means,
        class_sigmas: sigmas,
        clipped,
    })
}
