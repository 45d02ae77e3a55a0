//! Lloyd's k-means with k-means++ seeding, used as an offline baseline for
//! clustering the samples routed to the novel branch.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{RngSeed, Stream};
use crate::sample::{Point, DIM};

pub const MAX_ITERATIONS: usize = 300;
/// Stop once no centre moves farther than this (Euclidean).
pub const TOLERANCE: f64 = 1e-9;

fn sq_dist(a: &Point, b: &Point) -> f64 {
    (0..DIM).map(|f| (a[f] - b[f]).powi(2)).sum()
}

fn nearest(p: &Point, centres: &[Point]) -> (usize, f64) {
    centres
        .iter()
        .enumerate()
        .map(|(i, c)| (i, sq_dist(p, c)))
        .fold((0, f64::INFINITY), |b, x| if x.1 < b.1 { x } else { b })
}

fn plus_plus(points: &[Point], k: usize, rng: &mut impl Rng) -> Vec<Point> {
    let mut centres = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centres[0])).collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            d2.iter()
                .position(|&w| {
                    target -= w;
                    target < 0.0
                })
                .unwrap_or(points.len() - 1)
        } else {
            rng.random_range(0..points.len())
        };
        centres.push(points[pick]);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[pick]));
        }
    }
    centres
}

/// Cluster labels in `0..k` for every point.
pub fn kmeans(points: &[Point], k: usize, seed: RngSeed) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::invalid("k-means needs k >= 1"));
    }
    if points.len() < k {
        return Err(Error::invalid(format!(
            "k-means with k = {k} needs at least {k} samples, got {}",
            points.len()
        )));
    }
    let mut rng = seed.rng(Stream::KMeans);
    let mut centres = plus_plus(points, k, &mut rng);
    let mut labels = vec![0; points.len()];

    for _ in 0..MAX_ITERATIONS {
        for (l, p) in labels.iter_mut().zip(points) {
            *l = nearest(p, &centres).0;
        }
        let mut sums = vec![[0.0; DIM]; k];
        let mut counts = vec![0usize; k];
        for (&l, p) in labels.iter().zip(points) {
            counts[l] += 1;
            for f in 0..DIM {
                sums[l][f] += p[f];
            }
        }
        let mut shift = 0.0f64;
        for j in 0..k {
            // empty clusters keep their previous centre
            if counts[j] == 0 {
                continue;
            }
            let c = sums[j].map(|s| s / counts[j] as f64);
            shift = shift.max(sq_dist(&c, &centres[j]).sqrt());
            centres[j] = c;
        }
        if shift < TOLERANCE {
            break;
        }
    }
    for (l, p) in labels.iter_mut().zip(points) {
        *l = nearest(p, &centres).0;
    }
    Ok(labels)
}
