//! Per-class diagonal Gaussians over known classes: naive Bayes posterior and
//! log-likelihood novelty detection.
//!
//! A sample is novel when its log-likelihood under the known-class mixture,
//! `ln Σ_y π_y N(x; μ_y, diag σ_y²)`, falls below the threshold `τ_nov`.
//! Otherwise it gets the class with the largest posterior.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dataset::ClassId;
use crate::error::{Error, Result};
use crate::sample::{Point, PropertySample, DIM};
use crate::stats;

/// Default quantile of training log-likelihoods used as `τ_nov`.
pub const DEFAULT_NOVELTY_QUANTILE: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassGaussian {
    pub class: ClassId,
    pub mean: Point,
    pub variance: Point,
    pub prior: f64,
}

impl ClassGaussian {
    /// `ln π_y + ln N(x; μ_y, diag σ_y²)`.
    fn log_joint(&self, x: &Point) -> f64 {
        let mut acc = self.prior.ln();
        for f in 0..DIM {
            let d = x[f] - self.mean[f];
            acc -= 0.5 * ((2.0 * PI * self.variance[f]).ln() + d * d / self.variance[f]);
        }
        acc
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    Known(ClassId),
    Novel,
}

impl Decision {
    pub fn is_known(&self) -> bool {
        matches!(self, Decision::Known(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    classes: Vec<ClassGaussian>,
    variance_floor: Point,
    threshold: f64,
}

impl ClassifierModel {
    /// Fits one Gaussian per class: sample means, unbiased variances floored
    /// at the variance floor, and class-frequency priors. The novelty
    /// threshold starts at `-∞` (nothing is novel) until calibrated.
    pub fn fit(groups: &[(ClassId, Vec<PropertySample>)]) -> Result<Self> {
        if groups.len() < 2 {
            return Err(Error::invalid(format!(
                "classifier needs at least 2 classes, got {}",
                groups.len()
            )));
        }
        if let Some((c, s)) = groups.iter().find(|(_, s)| s.len() < 2) {
            return Err(Error::invalid(format!(
                "class {c} has {} training samples (need at least 2)",
                s.len()
            )));
        }
        let pooled: Vec<Point> = groups
            .iter()
            .flat_map(|(_, s)| s.iter().map(PropertySample::to_array))
            .collect();
        let floor = stats::variance_floor(&pooled);
        let total = pooled.len() as f64;

        let classes = groups
            .iter()
            .map(|(class, samples)| {
                let pts: Vec<Point> = samples.iter().map(PropertySample::to_array).collect();
                let mean = stats::mean(&pts);
                let mut variance = stats::variance(&pts, &mean);
                stats::apply_floor(&mut variance, &floor);
                ClassGaussian {
                    class: *class,
                    mean,
                    variance,
                    prior: pts.len() as f64 / total,
                }
            })
            .collect();
        Ok(ClassifierModel {
            classes,
            variance_floor: floor,
            threshold: f64::NEG_INFINITY,
        })
    }

    /// Builds a model from explicit parameters. Priors are normalised.
    pub fn from_parts(mut classes: Vec<ClassGaussian>, variance_floor: Point) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::invalid("classifier needs at least 2 classes"));
        }
        if variance_floor.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::invalid("variance floor must be positive"));
        }
        let total: f64 = classes.iter().map(|c| c.prior).sum();
        if !(total > 0.0) || classes.iter().any(|c| !(c.prior >= 0.0)) {
            return Err(Error::invalid(
                "priors must be non-negative with a positive sum",
            ));
        }
        for c in &mut classes {
            c.prior /= total;
            stats::apply_floor(&mut c.variance, &variance_floor);
        }
        Ok(ClassifierModel {
            classes,
            variance_floor,
            threshold: f64::NEG_INFINITY,
        })
    }

    pub fn classes(&self) -> &[ClassGaussian] {
        &self.classes
    }

    pub fn variance_floor(&self) -> &Point {
        &self.variance_floor
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    fn log_joints(&self, x: &Point) -> Vec<f64> {
        self.classes.iter().map(|c| c.log_joint(x)).collect()
    }

    pub fn log_likelihood(&self, x: &PropertySample) -> f64 {
        stats::log_sum_exp(&self.log_joints(&x.to_array()))
    }

    /// `p(y | x)` for every known class, in model class order.
    pub fn posterior(&self, x: &PropertySample) -> Vec<f64> {
        stats::normalize_log_weights(&self.log_joints(&x.to_array()))
    }

    /// `τ_nov` as the `q`-th empirical quantile of training log-likelihoods:
    /// the sorted value at index `floor(q · n)`. At most `floor(q · n)`
    /// calibration samples fall strictly below it.
    pub fn calibrate_threshold(&self, samples: &[PropertySample], q: f64) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::invalid("empty calibration set"));
        }
        if !(0.0..0.5).contains(&q) {
            return Err(Error::invalid(format!(
                "novelty quantile {q} outside [0, 0.5)"
            )));
        }
        let mut ll: Vec<f64> = samples.iter().map(|s| self.log_likelihood(s)).collect();
        ll.sort_by(f64::total_cmp);
        let idx = ((q * ll.len() as f64).floor() as usize).min(ll.len() - 1);
        Ok(ll[idx])
    }

    /// Known (with the posterior argmax) when `ln p(x|Y) ≥ τ_nov`, else novel.
    pub fn detect_and_classify(&self, x: &PropertySample) -> Decision {
        let joints = self.log_joints(&x.to_array());
        if stats::log_sum_exp(&joints) >= self.threshold {
            let best = stats::argmax(&joints).expect("model has classes");
            Decision::Known(self.classes[best].class)
        } else {
            Decision::Novel
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn s(v: [f64; 4]) -> PropertySample {
        PropertySample::from_array(v).unwrap()
    }

    fn two_classes() -> Vec<(ClassId, Vec<PropertySample>)> {
        vec![
            (
                ClassId(0),
                vec![
                    s([10.0, 1.0, 0.2, 0.3]),
                    s([12.0, 1.2, 0.3, 0.5]),
                    s([11.0, 1.4, 0.25, 0.4]),
                ],
            ),
            (
                ClassId(3),
                vec![
                    s([50.0, 5.0, 0.8, 0.9]),
                    s([54.0, 5.5, 0.7, 1.0]),
                    s([52.0, 6.0, 0.75, 1.1]),
                ],
            ),
        ]
    }

    #[test]
    fn fit_uses_arithmetic_means_and_unbiased_variance() {
        let m = ClassifierModel::fit(&two_classes()).unwrap();
        let c0 = &m.classes()[0];
        assert_relative_eq!(c0.mean[0], 11.0);
        assert_relative_eq!(c0.mean[1], 1.2, epsilon = 1e-12);
        assert_relative_eq!(c0.variance[0], 1.0);
        assert_eq!(m.classes()[1].class, ClassId(3));
        assert_relative_eq!(c0.prior, 0.5);
        assert_relative_eq!(m.classes()[1].prior, 0.5);
    }

    #[test]
    fn constant_feature_gets_floor() {
        let mut g = two_classes();
        for x in &mut g[0].1 {
            *x = s([x.stiffness(), x.viscosity(), 0.5, x.friction()]);
        }
        let m = ClassifierModel::fit(&g).unwrap();
        assert_eq!(m.classes()[0].variance[2], m.variance_floor()[2]);
        assert!(m.variance_floor()[2] > 0.0);
    }

    #[test]
    fn fit_preconditions() {
        let g = two_classes();
        assert!(ClassifierModel::fit(&g[..1]).is_err());
        let mut g = two_classes();
        g[1].1.truncate(1);
        assert!(ClassifierModel::fit(&g).is_err());
    }

    #[test]
    fn unbalanced_priors_follow_frequency() {
        let mut g = two_classes();
        g[1].1.push(s([53.0, 5.2, 0.72, 0.95]));
        let m = ClassifierModel::fit(&g).unwrap();
        assert_relative_eq!(m.classes()[0].prior, 3.0 / 7.0);
        let total: f64 = m.classes().iter().map(|c| c.prior).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_classes_split_posterior_evenly() {
        let g = vec![
            (ClassId(0), two_classes()[0].1.clone()),
            (ClassId(1), two_classes()[0].1.clone()),
        ];
        let m = ClassifierModel::fit(&g).unwrap();
        let p = m.posterior(&s([11.0, 1.1, 0.2, 0.4]));
        assert_relative_eq!(p[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(p[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn decisions() {
        let m = ClassifierModel::fit(&two_classes()).unwrap();
        let tau = m.calibrate_threshold(&two_classes()[0].1, 0.0).unwrap();
        let m = m.with_threshold(tau);
        assert_eq!(
            m.detect_and_classify(&s([52.0, 5.5, 0.75, 1.0])),
            Decision::Known(ClassId(3))
        );
        assert_eq!(
            m.detect_and_classify(&s([5000.0, 500.0, 0.0, 90.0])),
            Decision::Novel
        );
        let far = s([1e6 * m.classes()[0].variance[0].sqrt(), 1.0, 0.2, 0.3]);
        let ll = m.log_likelihood(&far);
        assert!(ll.is_finite() && ll < -1e6);
    }

    #[test]
    fn boundary_likelihood_is_known() {
        let m = ClassifierModel::fit(&two_classes()).unwrap();
        let x = s([11.5, 1.3, 0.22, 0.42]);
        let m = m.clone().with_threshold(m.log_likelihood(&x));
        assert!(m.detect_and_classify(&x).is_known());
        let nudged = m.clone().with_threshold(m.threshold() + 1e-9);
        assert_eq!(nudged.detect_and_classify(&x), Decision::Novel);
    }

    #[test]
    fn calibration_quantile_rules() {
        let g = two_classes();
        let m = ClassifierModel::fit(&g).unwrap();
        let all: Vec<_> = g.iter().flat_map(|(_, s)| s.clone()).collect();
        let min = all
            .iter()
            .map(|x| m.log_likelihood(x))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(m.calibrate_threshold(&all, 0.0).unwrap(), min);
        assert!(m.calibrate_threshold(&[], 0.01).is_err());
        assert!(m.calibrate_threshold(&all, 0.5).is_err());
        let lo = m.calibrate_threshold(&all, 0.1).unwrap();
        let hi = m.calibrate_threshold(&all, 0.4).unwrap();
        assert!(lo <= hi);
    }
}
