//! Detection accuracy, recognition rate and the Adjusted Rand Index.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classifier::Decision;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionAccuracy {
    /// Fraction of truly-known samples decided known.
    pub known: f64,
    /// Fraction of truly-novel samples decided novel.
    pub novel: f64,
    pub overall: f64,
}

/// `truly_known[i]` is the ground truth for `decisions[i]`. Both groups must
/// be non-empty.
pub fn detection_accuracy(
    decisions: &[Decision],
    truly_known: &[bool],
) -> Result<DetectionAccuracy> {
    if decisions.len() != truly_known.len() {
        return Err(Error::invalid(format!(
            "{} decisions vs {} ground-truth flags",
            decisions.len(),
            truly_known.len()
        )));
    }
    if decisions.is_empty() {
        return Err(Error::invalid("detection accuracy of an empty set"));
    }
    let (mut known_n, mut known_ok, mut novel_n, mut novel_ok) = (0usize, 0usize, 0usize, 0usize);
    for (d, &k) in decisions.iter().zip(truly_known) {
        if k {
            known_n += 1;
            known_ok += usize::from(d.is_known());
        } else {
            novel_n += 1;
            novel_ok += usize::from(!d.is_known());
        }
    }
    if known_n == 0 || novel_n == 0 {
        return Err(Error::invalid(
            "detection accuracy needs both known and novel samples",
        ));
    }
    Ok(DetectionAccuracy {
        known: known_ok as f64 / known_n as f64,
        novel: novel_ok as f64 / novel_n as f64,
        overall: (known_ok + novel_ok) as f64 / decisions.len() as f64,
    })
}

/// Fraction of `predicted[i] == truth[i]`. The caller restricts both slices
/// to samples decided known whose truth is known.
pub fn recognition_rate<T: PartialEq>(predicted: &[T], truth: &[T]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::invalid("recognition rate: length mismatch"));
    }
    if predicted.is_empty() {
        return Err(Error::invalid("recognition rate of an empty set"));
    }
    let ok = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(ok as f64 / predicted.len() as f64)
}

/// Counts `n_ij` of true cluster `i` against assigned cluster `j`. Rows and
/// columns are the distinct labels in sorted order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<u64>>,
    pub row_sums: Vec<u64>,
    pub col_sums: Vec<u64>,
    pub total: u64,
}

impl ContingencyTable {
    pub fn new<A: Ord, B: Ord>(truth: &[A], assigned: &[B]) -> Result<Self> {
        if truth.len() != assigned.len() {
            return Err(Error::invalid(format!(
                "labelings differ in length ({} vs {})",
                truth.len(),
                assigned.len()
            )));
        }
        let rows: BTreeMap<&A, usize> = index_of(truth);
        let cols: BTreeMap<&B, usize> = index_of(assigned);
        let mut counts = vec![vec![0u64; cols.len()]; rows.len()];
        for (a, b) in truth.iter().zip(assigned) {
            counts[rows[a]][cols[b]] += 1;
        }
        let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..cols.len())
            .map(|j| counts.iter().map(|r| r[j]).sum())
            .collect();
        Ok(ContingencyTable {
            counts,
            row_sums,
            col_sums,
            total: truth.len() as u64,
        })
    }
}

fn index_of<T: Ord>(labels: &[T]) -> BTreeMap<&T, usize> {
    let mut m = BTreeMap::new();
    for l in labels {
        m.entry(l).or_insert(0);
    }
    for (i, v) in m.values_mut().enumerate() {
        *v = i;
    }
    m
}

fn pairs(n: u64) -> u128 {
    let n = n as u128;
    n * n.saturating_sub(1) / 2
}

/// Adjusted Rand Index between two labelings of the same samples.
///
/// Evaluated in exact integer arithmetic after clearing the `C(n, 2)`
/// denominator, so the only rounding is the final division. When both
/// partitions are trivial the index is 0/0; it is defined as 1 when the
/// partitions coincide and 0 otherwise.
pub fn adjusted_rand_index<A: Ord, B: Ord>(truth: &[A], assigned: &[B]) -> Result<f64> {
    let table = ContingencyTable::new(truth, assigned)?;
    if table.total < 2 {
        return Err(Error::invalid(format!(
            "ARI needs at least 2 samples, got {}",
            table.total
        )));
    }
    let index: u128 = table.counts.iter().flatten().map(|&c| pairs(c)).sum();
    let sum_a: u128 = table.row_sums.iter().map(|&c| pairs(c)).sum();
    let sum_b: u128 = table.col_sums.iter().map(|&c| pairs(c)).sum();
    let total = pairs(table.total);

    // ARI = (index − a·b/t) / ((a + b)/2 − a·b/t), scaled by 2t
    let num = 2 * total as i128 * index as i128 - 2 * (sum_a * sum_b) as i128;
    let den = total as i128 * (sum_a + sum_b) as i128 - 2 * (sum_a * sum_b) as i128;
    if den == 0 {
        let same = index == sum_a && index == sum_b;
        return Ok(if same { 1.0 } else { 0.0 });
    }
    Ok(num as f64 / den as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ClassId;

    #[test]
    fn detection_hand_count() {
        let k = Decision::Known(ClassId(0));
        let n = Decision::Novel;
        let decisions = [k, k, k, n, n, n, n, k, k, k];
        let truth = [
            true, true, true, true, false, false, false, false, false, false,
        ];
        let acc = detection_accuracy(&decisions, &truth).unwrap();
        assert_eq!((acc.known, acc.novel, acc.overall), (0.75, 0.5, 0.6));
        let perfect = detection_accuracy(&[k, n], &[true, false]).unwrap();
        assert_eq!(
            (perfect.known, perfect.novel, perfect.overall),
            (1.0, 1.0, 1.0)
        );
        assert!(detection_accuracy(&[], &[]).is_err());
        assert!(detection_accuracy(&[k], &[true, false]).is_err());
    }

    #[test]
    fn recognition_counts() {
        assert_eq!(recognition_rate(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        let truth: Vec<u32> = (0..20).collect();
        let mut pred = truth.clone();
        pred[7] = 99;
        assert_eq!(recognition_rate(&pred, &truth).unwrap(), 0.95);
        assert!(recognition_rate::<u32>(&[], &[]).is_err());
    }

    #[test]
    fn ari_basic_cases() {
        assert_eq!(
            adjusted_rand_index(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap(),
            1.0
        );
        assert_eq!(
            adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(),
            1.0
        );
        assert_eq!(
            adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(),
            -0.5
        );
        assert_eq!(
            adjusted_rand_index(&[0, 0, 0, 0], &[0, 1, 2, 3]).unwrap(),
            0.0
        );
        assert_eq!(adjusted_rand_index(&[3, 3, 3], &[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&[1, 2, 3], &[4, 5, 6]).unwrap(), 1.0);
        assert!(adjusted_rand_index(&[0], &[0]).is_err());
        assert!(adjusted_rand_index(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn contingency_sums() {
        let t = ContingencyTable::new(&[0, 0, 1, 1, 1], &['a', 'b', 'b', 'b', 'c']).unwrap();
        assert_eq!(t.counts, vec![vec![1, 1, 0], vec![0, 2, 1]]);
        assert_eq!(t.row_sums, vec![2, 3]);
        assert_eq!(t.col_sums, vec![1, 3, 1]);
        assert_eq!(t.total, 5);
    }
}
