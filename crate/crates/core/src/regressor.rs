//! Ridge regression from a sample's quadratic feature expansion to the
//! Gaussian parameters of the class it came from. Used to synthesise the
//! initial centre and spread of a new novel-object cluster.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::ClassId;
use crate::error::{Error, Result};
use crate::sample::{Point, PropertySample, DIM};
use crate::stats;

/// Length of the feature expansion: 4 linear terms and 10 quadratic ones.
pub const FEATURES: usize = 14;

pub const DEFAULT_LAMBDA: f64 = 1e-3;

/// `[κ, ν, ψ, υ, κ², κν, κψ, κυ, ν², νψ, νυ, ψ², ψυ, υ²]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureVector14(pub [f64; FEATURES]);

impl FeatureVector14 {
    pub fn linear(&self) -> &[f64] {
        &self.0[..DIM]
    }

    pub fn quadratic(&self) -> &[f64] {
        &self.0[DIM..]
    }
}

/// Linear terms followed by the upper-triangular products `x_i · x_j`, `i ≤ j`.
pub fn feature_map(x: &Point) -> FeatureVector14 {
    let mut out = [0.0; FEATURES];
    out[..DIM].copy_from_slice(x);
    let mut k = DIM;
    for i in 0..DIM {
        for j in i..DIM {
            out[k] = x[i] * x[j];
            k += 1;
        }
    }
    FeatureVector14(out)
}

/// Tikhonov-regularised least squares `W = T Aᵀ (A Aᵀ + λI)⁻¹`.
///
/// `a` is `K × M` (one column per observation), `t` is `D × M`; the result is
/// `D × K`. Solved as the stacked least-squares problem
/// `[Aᵀ; √λ I] Wᵀ ≈ [Tᵀ; 0]` by Householder QR, which avoids forming
/// `A Aᵀ` and its squared condition number.
pub fn ridge_solve(a: &DMatrix<f64>, t: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    let (k, m) = a.shape();
    let d = t.nrows();
    if m == 0 {
        return Err(Error::invalid("ridge_solve needs at least one observation"));
    }
    if t.ncols() != m {
        return Err(Error::invalid(format!(
            "design has {m} columns but targets have {}",
            t.ncols()
        )));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!(
            "regularisation {lambda} must be finite and >= 0"
        )));
    }
    if a.iter().chain(t.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite entry in ridge inputs"));
    }

    let mut b = DMatrix::<f64>::zeros(m + k, k);
    b.view_mut((0, 0), (m, k)).copy_from(&a.transpose());
    let root = lambda.sqrt();
    for i in 0..k {
        b[(m + i, i)] = root;
    }
    let mut c = DMatrix::<f64>::zeros(m + k, d);
    c.view_mut((0, 0), (m, d)).copy_from(&t.transpose());

    let qr = b.qr();
    let r = qr.r();
    let diag_max = r.diagonal().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tol = diag_max * (m + k) as f64 * f64::EPSILON;
    if diag_max == 0.0 || r.diagonal().iter().any(|v| v.abs() <= tol) {
        return Err(Error::SingularSystem);
    }
    let rhs = qr.q().transpose() * c;
    let wt = r
        .solve_upper_triangular(&rhs)
        .ok_or(Error::SingularSystem)?;
    Ok(wt.transpose())
}

/// Per-feature scaling to unit training std before expansion. Features are
/// not centred: the feature map has no intercept, so shifting the origin
/// would remove affine maps from the model's span.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub std: Point,
}

impl Standardizer {
    fn fit(points: &[Point]) -> Self {
        let mean = stats::mean(points);
        let std = stats::variance(points, &mean).map(|v| if v > 0.0 { v.sqrt() } else { 1.0 });
        Standardizer { std }
    }

    fn apply(&self, x: &Point) -> Point {
        std::array::from_fn(|f| x[f] / self.std[f])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionOptions {
    pub lambda_mean: f64,
    pub lambda_variance: f64,
    /// Scale features to unit std before expansion. Off by default.
    pub standardize: bool,
}

impl Default for RegressionOptions {
    fn default() -> Self {
        RegressionOptions {
            lambda_mean: DEFAULT_LAMBDA,
            lambda_variance: DEFAULT_LAMBDA,
            standardize: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    mean_weights: [[f64; FEATURES]; DIM],
    variance_weights: [[f64; FEATURES]; DIM],
    options: RegressionOptions,
    standardizer: Option<Standardizer>,
    variance_floor: Point,
    observations: usize,
}

fn to_rows(w: &DMatrix<f64>) -> [[f64; FEATURES]; DIM] {
    std::array::from_fn(|i| std::array::from_fn(|j| w[(i, j)]))
}

fn apply_rows(w: &[[f64; FEATURES]; DIM], a: &FeatureVector14) -> Point {
    std::array::from_fn(|i| w[i].iter().zip(&a.0).map(|(w, a)| w * a).sum())
}

impl RegressionModel {
    /// One design column per training sample; its targets are the mean and
    /// (floored, unbiased) variance of the sample's class.
    pub fn fit(
        groups: &[(ClassId, Vec<PropertySample>)],
        options: RegressionOptions,
    ) -> Result<Self> {
        if groups.is_empty() || groups.iter().all(|(_, s)| s.is_empty()) {
            return Err(Error::invalid("regression needs training samples"));
        }
        let pooled: Vec<Point> = groups
            .iter()
            .flat_map(|(_, s)| s.iter().map(PropertySample::to_array))
            .collect();
        let floor = stats::variance_floor(&pooled);
        let standardizer = options.standardize.then(|| Standardizer::fit(&pooled));

        let m = pooled.len();
        let mut a = DMatrix::<f64>::zeros(FEATURES, m);
        let mut means = DMatrix::<f64>::zeros(DIM, m);
        let mut vars = DMatrix::<f64>::zeros(DIM, m);
        let mut col = 0;
        for (_, samples) in groups {
            let pts: Vec<Point> = samples.iter().map(PropertySample::to_array).collect();
            if pts.is_empty() {
                continue;
            }
            let mu = stats::mean(&pts);
            let mut var = stats::variance(&pts, &mu);
            stats::apply_floor(&mut var, &floor);
            for p in &pts {
                let z = standardizer.as_ref().map_or(*p, |s| s.apply(p));
                a.column_mut(col).copy_from_slice(&feature_map(&z).0);
                means.column_mut(col).copy_from_slice(&mu);
                vars.column_mut(col).copy_from_slice(&var);
                col += 1;
            }
        }

        let w_mean = ridge_solve(&a, &means, options.lambda_mean)?;
        let w_var = ridge_solve(&a, &vars, options.lambda_variance)?;
        Ok(RegressionModel {
            mean_weights: to_rows(&w_mean),
            variance_weights: to_rows(&w_var),
            options,
            standardizer,
            variance_floor: floor,
            observations: m,
        })
    }

    pub fn options(&self) -> &RegressionOptions {
        &self.options
    }

    /// Number of design columns used in the fit (`N · TN` for balanced data).
    pub fn observations(&self) -> usize {
        self.observations
    }

    pub fn variance_floor(&self) -> &Point {
        &self.variance_floor
    }

    pub fn mean_weights(&self) -> &[[f64; FEATURES]; DIM] {
        &self.mean_weights
    }

    pub fn variance_weights(&self) -> &[[f64; FEATURES]; DIM] {
        &self.variance_weights
    }

    fn features(&self, x: &Point) -> FeatureVector14 {
        let z = self.standardizer.as_ref().map_or(*x, |s| s.apply(x));
        feature_map(&z)
    }

    /// `W_μ a(x)`.
    pub fn predict_mean(&self, x: &Point) -> Point {
        apply_rows(&self.mean_weights, &self.features(x))
    }

    /// `W_σ² a(x)`, unfloored (may be negative).
    pub fn predict_variance(&self, x: &Point) -> Point {
        apply_rows(&self.variance_weights, &self.features(x))
    }

    /// Centre `(1 − α) W_μ a(x) + α x` and spread `β W_σ² a(x)` of a new
    /// cluster seeded by `x`, with the spread floored at the variance floor.
    pub fn predict_cluster_params(&self, x: &Point, alpha: f64, beta: f64) -> (Point, Point) {
        let pred = self.predict_mean(x);
        let mean = std::array::from_fn(|f| (1.0 - alpha) * pred[f] + alpha * x[f]);
        let mut var = self.predict_variance(x).map(|v| beta * v);
        stats::apply_floor(&mut var, &self.variance_floor);
        (mean, var)
    }
}
