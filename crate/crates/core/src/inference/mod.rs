//! Standard errors and confidence intervals for one headline value.
//!
//! Everything conditions on the baseline model and the weights: only the
//! sampling of stones within each group is treated as random.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::index::{GroupStats, GroupingScheme, RatioRecord, Statistic, WeightVector};
use crate::numeric::{normal_quantile, quantile_sorted};
use crate::{HciError, Result};

pub const DEFAULT_REPLICATES: usize = 1000;
const MIN_REPLICATES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub total: f64,
    /// `scale² w_g² s_g² / n_g` per group; zero for excluded groups.
    pub contributions: Vec<f64>,
    /// Groups with fewer than two records are left out.
    pub included: Vec<bool>,
}

impl VarianceEstimate {
    pub fn se(&self) -> f64 {
        self.total.sqrt()
    }
}

/// Weights renormalized over groups where `keep` holds.
fn effective_weights(weights: &WeightVector, keep: &[bool]) -> Result<Vec<f64>> {
    if keep.iter().all(|&k| k) {
        return Ok(weights.values().to_vec());
    }
    weights
        .renormalized(|g| keep[g])
        .ok_or_else(|| HciError::InsufficientData("no group has two or more records".into()))
}

/// Analytic variance of the weighted mean-ratio index,
/// `scale² Σ w_g² s_g² / n_g`.
pub fn hci_variance(stats: &GroupStats, weights: &WeightVector, scale: f64) -> Result<VarianceEstimate> {
    if weights.len() != stats.groups.len() {
        return Err(HciError::Invalid("weights and groups differ in length".into()));
    }
    let included: Vec<bool> = stats.groups.iter().map(|g| g.count >= 2).collect();
    if included.iter().any(|k| !k) {
        let skipped: Vec<usize> = (0..included.len()).filter(|&g| !included[g]).map(|g| g + 1).collect();
        log::warn!("groups {skipped:?} have fewer than two records and are left out of the variance");
    }
    let w = effective_weights(weights, &included)?;
    let contributions: Vec<f64> = stats
        .groups
        .iter()
        .zip(&w)
        .zip(&included)
        .map(|((g, &wg), &inc)| {
            if inc {
                scale * scale * wg * wg * g.variance.unwrap_or(0.0) / g.count as f64
            } else {
                0.0
            }
        })
        .collect();
    Ok(VarianceEstimate {
        total: contributions.iter().sum(),
        contributions,
        included,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Normal,
    BootstrapPercentile,
    PercentileT,
}

impl std::str::FromStr for CiMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "normal" => Ok(CiMethod::Normal),
            "bootstrap" | "percentile" | "bootstrap_percentile" => Ok(CiMethod::BootstrapPercentile),
            "percentile_t" | "t" => Ok(CiMethod::PercentileT),
            other => Err(format!("unknown interval method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub method: CiMethod,
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    pub se: f64,
    #[serde(rename = "B")]
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
}

impl ConfidenceInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(HciError::Config(format!("confidence level must lie in (0, 1), got {level}")))
    }
}

/// `headline ± z sqrt(variance)`.
pub fn normal_ci(headline: f64, variance: &VarianceEstimate, level: f64) -> Result<ConfidenceInterval> {
    check_level(level)?;
    let se = variance.total.max(0.0).sqrt();
    let z = normal_quantile(0.5 * (1.0 + level));
    Ok(ConfidenceInterval {
        method: CiMethod::Normal,
        level,
        lower: headline - z * se,
        upper: headline + z * se,
        se,
        replicates: None,
        seed: None,
    })
}

/// Ratios split by group, plus the fixed weights and scale of the headline.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedRatios {
    pub groups: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub scale: f64,
}

impl GroupedRatios {
    /// Groups ratios by `scheme`; weights are renormalized over non-empty
    /// groups.
    pub fn new(ratios: &[RatioRecord], scheme: GroupingScheme, weights: &WeightVector, scale: f64) -> Result<Self> {
        let mut groups = vec![Vec::new(); scheme.n_groups()];
        for r in ratios {
            groups[r.group(scheme)].push(r.ratio);
        }
        Self::from_groups(groups, weights, scale)
    }

    pub fn from_groups(groups: Vec<Vec<f64>>, weights: &WeightVector, scale: f64) -> Result<Self> {
        if groups.len() != weights.len() {
            return Err(HciError::Invalid("weights and groups differ in length".into()));
        }
        let keep: Vec<bool> = groups.iter().map(|g| !g.is_empty()).collect();
        let weights = effective_weights(weights, &keep)?;
        Ok(GroupedRatios { groups, weights, scale })
    }

    /// Headline and its analytic standard error.
    pub fn estimate(&self) -> (f64, f64) {
        estimate(&self.groups, &self.weights, self.scale, |g, i| self.groups[g][i], |g| self.groups[g].len())
    }
}

/// Weighted mean-ratio headline and analytic se over an indexed sample.
fn estimate(
    groups: &[Vec<f64>],
    weights: &[f64],
    scale: f64,
    value: impl Fn(usize, usize) -> f64,
    size: impl Fn(usize) -> usize,
) -> (f64, f64) {
    let mut head = 0.0;
    let mut var = 0.0;
    for (g, (_, &w)) in groups.iter().zip(weights).enumerate() {
        let n = size(g);
        if n == 0 {
            continue;
        }
        let mean = (0..n).map(|i| value(g, i)).sum::<f64>() / n as f64;
        head += w * mean;
        if n >= 2 {
            let ss: f64 = (0..n).map(|i| (value(g, i) - mean).powi(2)).sum();
            var += w * w * ss / ((n - 1) as f64 * n as f64);
        }
    }
    (scale * head, scale * var.sqrt())
}

/// Stratified bootstrap replicates: `(headline*, se*)` per replicate.
/// Replicate `b` draws from ChaCha stream `b` of `seed`, so results are
/// independent of scheduling.
pub fn bootstrap_replicates(data: &GroupedRatios, replicates: usize, seed: u64) -> Vec<(f64, f64)> {
    (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let mut draw: Vec<Vec<f64>> = Vec::with_capacity(data.groups.len());
            for g in &data.groups {
                let n = g.len();
                draw.push((0..n).map(|_| g[rng.random_range(0..n)]).collect());
            }
            estimate(&draw, &data.weights, data.scale, |g, i| draw[g][i], |g| draw[g].len())
        })
        .collect()
}

fn check_replicates(replicates: usize) -> Result<()> {
    if replicates < MIN_REPLICATES {
        return Err(HciError::Config(format!(
            "bootstrap needs at least {MIN_REPLICATES} replicates, got {replicates}"
        )));
    }
    Ok(())
}

fn percentile_from(reps: &[(f64, f64)], se: f64, level: f64, replicates: usize, seed: u64) -> ConfidenceInterval {
    let mut h: Vec<f64> = reps.iter().map(|r| r.0).collect();
    h.sort_by(f64::total_cmp);
    ConfidenceInterval {
        method: CiMethod::BootstrapPercentile,
        level,
        lower: quantile_sorted(&h, 0.5 * (1.0 - level)),
        upper: quantile_sorted(&h, 0.5 * (1.0 + level)),
        se,
        replicates: Some(replicates),
        seed: Some(seed),
    }
}

fn percentile_t_from(
    reps: &[(f64, f64)],
    headline: f64,
    se: f64,
    level: f64,
    replicates: usize,
    seed: u64,
) -> ConfidenceInterval {
    let mut t: Vec<f64> = reps
        .iter()
        .filter(|r| r.1 > 0.0)
        .map(|&(h, s)| (h - headline) / s)
        .collect();
    let dropped = reps.len() - t.len();
    if dropped > 0 {
        log::warn!("{dropped} bootstrap replicates with zero standard error dropped");
    }
    t.sort_by(f64::total_cmp);
    let (lower, upper) = if t.is_empty() {
        (headline, headline)
    } else {
        (
            headline - quantile_sorted(&t, 0.5 * (1.0 + level)) * se,
            headline - quantile_sorted(&t, 0.5 * (1.0 - level)) * se,
        )
    };
    ConfidenceInterval {
        method: CiMethod::PercentileT,
        level,
        lower,
        upper,
        se,
        replicates: Some(replicates),
        seed: Some(seed),
    }
}

/// Percentile interval from the stratified bootstrap.
pub fn bootstrap_ci(data: &GroupedRatios, level: f64, replicates: usize, seed: u64) -> Result<ConfidenceInterval> {
    check_level(level)?;
    check_replicates(replicates)?;
    let (_, se) = data.estimate();
    let reps = bootstrap_replicates(data, replicates, seed);
    Ok(percentile_from(&reps, se, level, replicates, seed))
}

/// Studentized (percentile-t) interval from the stratified bootstrap.
pub fn percentile_t_ci(data: &GroupedRatios, level: f64, replicates: usize, seed: u64) -> Result<ConfidenceInterval> {
    check_level(level)?;
    check_replicates(replicates)?;
    let (headline, se) = data.estimate();
    let reps = bootstrap_replicates(data, replicates, seed);
    Ok(percentile_t_from(&reps, headline, se, level, replicates, seed))
}

/// Both bootstrap intervals from one shared set of replicates.
pub fn bootstrap_intervals(
    data: &GroupedRatios,
    level: f64,
    replicates: usize,
    seed: u64,
) -> Result<(ConfidenceInterval, ConfidenceInterval)> {
    check_level(level)?;
    check_replicates(replicates)?;
    let (headline, se) = data.estimate();
    let reps = bootstrap_replicates(data, replicates, seed);
    Ok((
        percentile_from(&reps, se, level, replicates, seed),
        percentile_t_from(&reps, headline, se, level, replicates, seed),
    ))
}

/// All three intervals for a mean-ratio headline.
pub fn all_intervals(
    data: &GroupedRatios,
    stats: &GroupStats,
    weights: &WeightVector,
    level: f64,
    replicates: usize,
    seed: u64,
) -> Result<[ConfidenceInterval; 3]> {
    if stats.statistic != Statistic::Mean {
        return Err(HciError::Config("intervals are defined for the mean statistic".into()));
    }
    let (headline, _) = data.estimate();
    let var = hci_variance(stats, weights, data.scale)?;
    let normal = normal_ci(headline, &var, level)?;
    let (pct, t) = bootstrap_intervals(data, level, replicates, seed)?;
    Ok([normal, pct, t])
}
