//! Known/novel class split and the shuffled test stream.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassId, Dataset};
use crate::error::{Error, Result};
use crate::rng::{RngSeed, Stream};

/// Rows are referenced by their index in the source [`Dataset`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitResult {
    /// Sorted ascending.
    pub known: Vec<ClassId>,
    /// Sorted ascending.
    pub novel: Vec<ClassId>,
    /// Training rows, known classes only, in dataset order.
    pub train: Vec<usize>,
    /// Held-out known rows and all novel rows, in stream order.
    pub test: Vec<usize>,
}

impl SplitResult {
    pub fn is_known(&self, class: ClassId) -> bool {
        self.known.binary_search(&class).is_ok()
    }
}

/// Number of known classes for `classes` total at `known_fraction`.
pub fn known_class_count(classes: usize, known_fraction: f64) -> usize {
    (known_fraction * classes as f64).round() as usize
}

/// Picks `round(known_fraction · G)` known classes uniformly at random,
/// sends `floor(train_fraction · n_c)` rows of each known class to training
/// and everything else to a shuffled test stream.
pub fn split_open_set(
    data: &Dataset,
    known_fraction: f64,
    train_fraction: f64,
    seed: RngSeed,
) -> Result<SplitResult> {
    if !(known_fraction > 0.0 && known_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "known_fraction = {known_fraction} outside (0, 1)"
        )));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train_fraction = {train_fraction} outside (0, 1)"
        )));
    }
    let g = data.class_count();
    let n = known_class_count(g, known_fraction);
    if n < 2 {
        return Err(Error::invalid(format!(
            "known_fraction = {known_fraction} gives {n} known classes out of {g} (need at least 2)"
        )));
    }
    if n >= g {
        return Err(Error::invalid(format!(
            "known_fraction = {known_fraction} leaves no novel class out of {g}"
        )));
    }

    let mut classes: Vec<ClassId> = (0..g).map(ClassId).collect();
    classes.shuffle(&mut seed.rng(Stream::SplitClasses));
    let mut known = classes[..n].to_vec();
    let mut novel = classes[n..].to_vec();
    known.sort_unstable();
    novel.sort_unstable();

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); g];
    for (i, r) in data.rows().iter().enumerate() {
        by_class[r.class.0].push(i);
    }

    let mut row_rng = seed.rng(Stream::SplitRows);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in &known {
        let mut rows = by_class[class.0].clone();
        rows.shuffle(&mut row_rng);
        let n_train = (train_fraction * rows.len() as f64).floor() as usize;
        train.extend_from_slice(&rows[..n_train]);
        test.extend_from_slice(&rows[n_train..]);
    }
    for class in &novel {
        test.extend_from_slice(&by_class[class.0]);
    }
    train.sort_unstable();
    test.sort_unstable();
    test.shuffle(&mut seed.rng(Stream::Shuffle));

    Ok(SplitResult {
        known,
        novel,
        train,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate_synthetic, SyntheticSpec};

    fn data() -> Dataset {
        generate_synthetic(&SyntheticSpec::default())
            .unwrap()
            .dataset
    }

    #[test]
    fn default_protocol_counts() {
        let d = data();
        let s = split_open_set(&d, 0.6, 0.75, RngSeed(1)).unwrap();
        assert_eq!(s.known.len(), 12);
        assert_eq!(s.novel.len(), 8);
        assert_eq!(s.train.len(), 12 * 18);
        assert_eq!(s.test.len(), 12 * 7 + 8 * 25);
        for c in &s.known {
            let n = s.train.iter().filter(|&&i| d.rows()[i].class == *c).count();
            assert_eq!(n, 18);
        }
    }

    #[test]
    fn too_few_known_classes() {
        assert!(split_open_set(&data(), 0.05, 0.75, RngSeed(1)).is_err());
        assert!(split_open_set(&data(), 0.99, 0.75, RngSeed(1)).is_err());
        assert!(split_open_set(&data(), 0.6, 1.0, RngSeed(1)).is_err());
    }

    #[test]
    fn same_seed_same_split() {
        let d = data();
        assert_eq!(
            split_open_set(&d, 0.6, 0.75, RngSeed(5)).unwrap(),
            split_open_set(&d, 0.6, 0.75, RngSeed(5)).unwrap()
        );
    }
}
