//! Log-linear hedonic regression fitted by Householder QR.

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encoding::{Layout, Vocabulary};
use crate::domain::{DiamondAttributes, Grade, Snapshot};
use crate::index::CaratClass;
use crate::{HciError, Result};

/// A column is aliased when the part not explained by earlier columns has
/// norm below this fraction of its own norm.
const ALIAS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHedonicModel {
    pub vocabulary: Vocabulary,
    /// One coefficient per design column; aliased columns hold zero.
    pub coefficients: Vec<f64>,
    pub aliased: Vec<usize>,
    pub residual_sd: f64,
    pub r_squared: f64,
    pub t0: NaiveDate,
    pub n_train: usize,
}

/// Least-squares solution of `x b = y` with `x` column-major `n x d`.
/// Returns the coefficients and the indices of dropped columns.
pub fn least_squares(mut cols: Vec<Vec<f64>>, mut y: Vec<f64>) -> (Vec<f64>, Vec<usize>) {
    let d = cols.len();
    let n = y.len();
    let mut r = vec![vec![0.0; d]; d];
    let mut kept: Vec<usize> = Vec::with_capacity(d);
    let mut aliased = Vec::new();
    let orig_norm: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    for j in 0..d {
        let k = kept.len();
        if k >= n {
            aliased.push(j);
            continue;
        }
        let tail = &cols[j][k..];
        let nrm = norm(tail);
        if orig_norm[j] == 0.0 || nrm <= ALIAS_TOL * orig_norm[j] {
            aliased.push(j);
            continue;
        }
        // Householder vector v = x + sign(x0) |x| e0, stored in place.
        let alpha = if tail[0] >= 0.0 { -nrm } else { nrm };
        let mut v = tail.to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        for (i, row) in r.iter_mut().enumerate().take(k) {
            row[j] = cols[j][i];
        }
        r[k][j] = alpha;
        kept.push(j);
        if vnorm2 > 0.0 {
            let apply = |c: &mut [f64]| {
                let s: f64 = c[k..].iter().zip(&v).map(|(a, b)| a * b).sum();
                let f = 2.0 * s / vnorm2;
                for (a, b) in c[k..].iter_mut().zip(&v) {
                    *a -= f * b;
                }
            };
            cols[j + 1..].par_iter_mut().for_each(|c| apply(c));
            apply(&mut y);
        }
    }
    // Back substitution over the kept columns. Row i of R holds the entries
    // of kept column i against every later kept column.
    let mut beta = vec![0.0; d];
    for i in (0..kept.len()).rev() {
        let ci = kept[i];
        let mut s = y[i];
        for &cj in &kept[i + 1..] {
            s -= r[i][cj] * beta[cj];
        }
        beta[ci] = s / r[i][ci];
    }
    (beta, aliased)
}

fn norm(x: &[f64]) -> f64 {
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * x.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt()
}

impl LinearHedonicModel {
    pub fn fit(baseline: &Snapshot) -> Result<Self> {
        let vocabulary = Vocabulary::from_snapshot(baseline);
        let layout = Layout::new(&vocabulary);
        let n = baseline.len();
        if n < 10 * layout.dim {
            return Err(HciError::InsufficientData(format!(
                "linear fit needs at least {} records for {} columns, got {n}",
                10 * layout.dim,
                layout.dim
            )));
        }
        let mut cols = vec![vec![0.0; n]; layout.dim];
        let mut y = Vec::with_capacity(n);
        for (i, r) in baseline.records().iter().enumerate() {
            layout.for_each_entry(&vocabulary, &r.attributes, |j, x| cols[j][i] = x);
            y.push(r.price.to_f64().ln());
        }
        let (coefficients, aliased) = least_squares(cols, y.clone());
        let reserved = layout.other_location_column();
        for &j in aliased.iter().filter(|&&j| j != reserved) {
            log::warn!("design column {j} is aliased and was dropped");
        }
        let mut model = LinearHedonicModel {
            vocabulary,
            coefficients,
            aliased,
            residual_sd: 0.0,
            r_squared: 0.0,
            t0: baseline.date(),
            n_train: n,
        };
        let resid: Vec<f64> = baseline
            .records()
            .par_iter()
            .zip(&y)
            .map(|(r, yi)| yi - model.log_predict(&r.attributes))
            .collect();
        let ssr = crate::index::deterministic_sum(&resid.iter().map(|e| e * e).collect::<Vec<_>>());
        let ybar = crate::index::deterministic_sum(&y) / n as f64;
        let sst = crate::index::deterministic_sum(&y.iter().map(|v| (v - ybar).powi(2)).collect::<Vec<_>>());
        let rank = layout.dim - model.aliased.len();
        model.residual_sd = (ssr / (n - rank) as f64).sqrt();
        model.r_squared = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };
        Ok(model)
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&self.vocabulary)
    }

    /// Log-scale prediction by direct coefficient lookup.
    pub fn log_predict(&self, a: &DiamondAttributes) -> f64 {
        let l = self.layout();
        let b = &self.coefficients;
        let class = CaratClass::of(a.carat).expect("validated carat");
        let c = class.index();
        let pick = |offset: usize, ord: usize| if ord > 0 { b[offset + ord - 1] } else { 0.0 };
        let loc = self.vocabulary.location_code(&a.location);
        let loc_term = if loc == self.vocabulary.other_code() {
            b[l.other_location_column()]
        } else {
            pick(l.location, loc)
        };
        b[0] + pick(l.class, c)
            + b[l.slope + c] * (a.carat - class.lower())
            + pick(l.colour, a.colour.ordinal())
            + pick(l.clarity, a.clarity.ordinal())
            + pick(l.cut, a.cut.ordinal())
            + pick(l.polish, a.polish.ordinal())
            + pick(l.symmetry, a.symmetry.ordinal())
            + pick(l.fluorescence, a.fluorescence.ordinal())
            + pick(l.shape, a.shape.ordinal())
            + loc_term
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_system_is_solved() {
        // y = 1 + 2 x
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let cols = vec![vec![1.0; 20], x.clone()];
        let y: Vec<f64> = x.iter().map(|v| 1.0 + 2.0 * v).collect();
        let (b, al) = least_squares(cols, y);
        assert!(al.is_empty());
        assert!((b[0] - 1.0).abs() < 1e-12 && (b[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_column_is_dropped() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let cols = vec![vec![1.0; 30], x.clone(), x.iter().map(|v| 2.0 * v).collect(), vec![0.0; 30]];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - v).collect();
        let (b, al) = least_squares(cols, y);
        assert_eq!(al, vec![2, 3]);
        assert!((b[0] - 3.0).abs() < 1e-12 && (b[1] + 1.0).abs() < 1e-12);
        assert_eq!(b[2], 0.0);
    }

    #[test]
    fn matches_normal_equations() {
        let n = 200;
        let x1: Vec<f64> = (0..n).map(|i| ((i * 7919) % 101) as f64 / 10.0).collect();
        let x2: Vec<f64> = (0..n).map(|i| ((i * 104729) % 37) as f64).collect();
        let y: Vec<f64> = (0..n).map(|i| 0.5 * x1[i] - 0.2 * x2[i] + ((i % 5) as f64 - 2.0) * 0.1).collect();
        let (b, _) = least_squares(vec![vec![1.0; n], x1.clone(), x2.clone()], y.clone());
        // Residuals are orthogonal to every column.
        let e: Vec<f64> = (0..n).map(|i| y[i] - b[0] - b[1] * x1[i] - b[2] * x2[i]).collect();
        for col in [vec![1.0; n], x1, x2] {
            let dot: f64 = col.iter().zip(&e).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-9, "{dot}");
        }
    }
}
