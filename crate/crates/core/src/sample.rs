use serde::{Deserialize, Serialize};

use crate::clusterer::ClusterId;
use crate::dataset::ClassId;
use crate::error::{Error, Result};

/// Dimension of the mechanical-property space.
pub const DIM: usize = 4;

/// Feature names in storage order.
pub const FEATURE_NAMES: [&str; DIM] = ["stiffness", "viscosity", "restitution", "friction"];

/// A raw point in feature space. Used where values need not be physical,
/// e.g. points drawn from a predicted cluster Gaussian.
pub type Point = [f64; DIM];

/// One mechanical-property measurement of an object.
///
/// Stiffness is in N/m, viscosity in N·s/m, restitution and friction are
/// dimensionless. All components are finite, restitution lies in `[0, 1]`
/// and the other three are non-negative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertySample {
    stiffness: f64,
    viscosity: f64,
    restitution: f64,
    friction: f64,
}

impl PropertySample {
    pub fn new(stiffness: f64, viscosity: f64, restitution: f64, friction: f64) -> Result<Self> {
        Self::from_array([stiffness, viscosity, restitution, friction])
    }

    pub fn from_array(values: Point) -> Result<Self> {
        if let Some(i) = check(&values) {
            return Err(Error::InvalidSample(violation(i, values[i])));
        }
        Ok(Self::from_array_unchecked(values))
    }

    pub(crate) fn from_array_unchecked(v: Point) -> Self {
        PropertySample {
            stiffness: v[0],
            viscosity: v[1],
            restitution: v[2],
            friction: v[3],
        }
    }

    /// Clips each component into its physical range. Returns the sample and
    /// whether any component moved. Non-finite input is rejected.
    pub fn clipped(values: Point) -> Result<(Self, bool)> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSample(violation(i, values[i])));
        }
        let mut out = values;
        for (i, v) in out.iter_mut().enumerate() {
            let hi = if i == 2 { 1.0 } else { f64::INFINITY };
            *v = v.clamp(0.0, hi);
        }
        Ok((Self::from_array_unchecked(out), out != values))
    }

    pub fn stiffness(&self) -> f64 {
        self.stiffness
    }

    pub fn viscosity(&self) -> f64 {
        self.viscosity
    }

    pub fn restitution(&self) -> f64 {
        self.restitution
    }

    pub fn friction(&self) -> f64 {
        self.friction
    }

    pub fn to_array(&self) -> Point {
        [
            self.stiffness,
            self.viscosity,
            self.restitution,
            self.friction,
        ]
    }
}

/// Index of the first component that breaks the sample invariants.
pub(crate) fn check(values: &Point) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .position(|(i, &v)| !v.is_finite() || v < 0.0 || (i == 2 && v > 1.0))
}

pub(crate) fn violation(field: usize, value: f64) -> String {
    let name = FEATURE_NAMES[field];
    if !value.is_finite() {
        format!("{name} is not finite ({value})")
    } else if field == 2 {
        format!("{name} = {value} outside [0, 1]")
    } else {
        format!("{name} = {value} is negative")
    }
}

/// Final label of a streamed sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Known(ClassId),
    NovelCluster(ClusterId),
    /// Member of a novel cluster removed for being too small.
    Outlier,
}
