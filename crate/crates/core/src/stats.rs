//! Small descriptive-statistics helpers shared by the models.

use serde::{Deserialize, Serialize};

use crate::sample::{Point, DIM};

/// Relative factor applied to the pooled per-feature variance to obtain the
/// variance floor.
pub const VARIANCE_FLOOR_FACTOR: f64 = 1e-9;

pub fn mean(points: &[Point]) -> Point {
    let n = points.len() as f64;
    let mut m = [0.0; DIM];
    for p in points {
        for f in 0..DIM {
            m[f] += p[f];
        }
    }
    m.map(|v| v / n)
}

/// Unbiased per-feature variance (denominator `n - 1`). Returns zeros for
/// fewer than two points.
pub fn variance(points: &[Point], mean: &Point) -> Point {
    if points.len() < 2 {
        return [0.0; DIM];
    }
    let mut v = [0.0; DIM];
    for p in points {
        for f in 0..DIM {
            let d = p[f] - mean[f];
            v[f] += d * d;
        }
    }
    let denom = (points.len() - 1) as f64;
    v.map(|s| s / denom)
}

/// Per-feature variance floor: a tiny fraction of the pooled variance of
/// `points`. Strictly positive even for constant data.
pub fn variance_floor(points: &[Point]) -> Point {
    let m = mean(points);
    variance(points, &m).map(|v| {
        let f = VARIANCE_FLOOR_FACTOR * v;
        if f > 0.0 {
            f
        } else {
            f64::MIN_POSITIVE.sqrt()
        }
    })
}

pub fn apply_floor(var: &mut Point, floor: &Point) {
    for f in 0..DIM {
        if !(var[f] >= floor[f]) {
            var[f] = floor[f];
        }
    }
}

/// Mean and population standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> MeanStd {
        if values.is_empty() {
            return MeanStd {
                mean: 0.0,
                std: 0.0,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        MeanStd {
            mean,
            std: var.sqrt(),
        }
    }
}

/// Numerically stable `ln Σ exp(v)`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Softmax of log-weights.
pub fn normalize_log_weights(log_w: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(log_w);
    let mut p: Vec<f64> = log_w.iter().map(|v| (v - lse).exp()).collect();
    // absorb the last ulp of rounding so the vector sums to one
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}

/// Index of the largest value, ties to the lowest index.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] >= v => {}
            _ => best = Some(i),
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_std() {
        let s = MeanStd::of(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
        assert_eq!(MeanStd::of(&[5.0]).std, 0.0);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), Some(1));
        assert_eq!(argmax(&[]), None);
    }

    #[test]
    fn lse_handles_large_offsets() {
        let v = log_sum_exp(&[-1e6, -1e6]);
        assert!((v - (-1e6 + 2f64.ln())).abs() < 1e-9);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }

    #[test]
    fn floor_is_positive_for_constant_data() {
        let f = variance_floor(&[[1.0, 2.0, 0.5, 0.1]; 3]);
        assert!(f.iter().all(|&v| v > 0.0));
    }
}
