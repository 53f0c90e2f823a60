use serde::{Deserialize, Serialize};

use super::grouping::GroupingScheme;
use crate::domain::Snapshot;
use crate::{HciError, Result};

const SUM_TOL: f64 = 1e-12;

/// Non-negative group weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(HciError::Invalid("weight vector is empty".into()));
        }
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(HciError::Invalid("weights must be finite and non-negative".into()));
        }
        let s: f64 = w.iter().sum();
        if (s - 1.0).abs() > SUM_TOL {
            return Err(HciError::Invalid(format!("weights sum to {s}, expected 1")));
        }
        Ok(WeightVector(w))
    }

    /// Uniform weights over `m` groups.
    pub fn uniform(m: usize) -> Self {
        WeightVector(vec![1.0 / m as f64; m])
    }

    /// Normalizes non-negative masses.
    pub fn from_masses(masses: &[f64]) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0 && total.is_finite()) || masses.iter().any(|&m| m < 0.0) {
            return Err(HciError::InsufficientData("no group has positive value".into()));
        }
        Self::new(masses.iter().map(|m| m / total).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Weights restricted to groups where `keep` holds, rescaled to sum to one.
    /// Returns `None` when no kept group has positive weight.
    pub fn renormalized(&self, keep: impl Fn(usize) -> bool) -> Option<Vec<f64>> {
        let masked: Vec<f64> = self
            .0
            .iter()
            .enumerate()
            .map(|(g, &w)| if keep(g) { w } else { 0.0 })
            .collect();
        let s: f64 = masked.iter().sum();
        (s > 0.0).then(|| masked.iter().map(|w| w / s).collect())
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = HciError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        WeightVector::new(v)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

/// Value shares from exact per-group nano-dollar totals.
pub fn weights_from_totals(totals_nanos: &[u128]) -> Result<WeightVector> {
    let total: u128 = totals_nanos.iter().sum();
    if total == 0 {
        return Err(HciError::InsufficientData("every group is empty".into()));
    }
    let t = total as f64;
    let mut w: Vec<f64> = totals_nanos.iter().map(|&x| x as f64 / t).collect();
    // Put the rounding residue on the largest group so the sum is exact to
    // within one ulp.
    let s: f64 = w.iter().sum();
    if let Some(max) = (0..w.len()).max_by(|&a, &b| w[a].total_cmp(&w[b])) {
        w[max] += 1.0 - s;
    }
    WeightVector::new(w)
}

/// Share of snapshot value held by each group.
pub fn proportional_weights(snapshot: &Snapshot, scheme: GroupingScheme) -> Result<WeightVector> {
    let mut totals = vec![0u128; scheme.n_groups()];
    for r in snapshot.records() {
        totals[scheme.group_of(&r.attributes)] += u128::from(r.price.nanos());
    }
    weights_from_totals(&totals)
}

/// Even blend of value shares with equal weights: `(w_p + 1/M) / 2`.
pub fn final_weights(wp: &WeightVector) -> WeightVector {
    let m = wp.len() as f64;
    WeightVector(wp.0.iter().map(|w| 0.5 * (w + 1.0 / m)).collect())
}
