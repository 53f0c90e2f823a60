//! Headline index, base-date calibration and sub-indices.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::grouping::GroupingScheme;
use super::ratios::{compute_ratios, score_records, RatioRecord};
use super::stats::{group_stats, GroupStats, Statistic, StatsAccumulator, CHUNK};
use super::weights::{final_weights, weights_from_totals, WeightVector};
use crate::domain::{nanos_to_usd, PricedDiamond, Snapshot};
use crate::predictor::{BaselinePredictor, PricePredictor};
use crate::{HciError, Result};

pub const BASE_LEVEL: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightingPolicy {
    /// Recompute final weights from each snapshot's group values.
    #[default]
    PerSnapshot,
    /// Keep the base-date final weights.
    Frozen,
}

impl WeightingPolicy {
    pub fn name(self) -> &'static str {
        match self {
            WeightingPolicy::PerSnapshot => "per_snapshot",
            WeightingPolicy::Frozen => "frozen",
        }
    }
}

impl std::str::FromStr for WeightingPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "per_snapshot" | "snapshot" => Ok(WeightingPolicy::PerSnapshot),
            "frozen" => Ok(WeightingPolicy::Frozen),
            other => Err(format!("unknown weighting policy {other:?}")),
        }
    }
}

/// Base-date constants for one statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Weighted centre of the base-date carat-class ratios.
    pub c0: f64,
    /// Base-date final weights over carat classes.
    pub weights: Vec<f64>,
    pub carat: Vec<Option<f64>>,
    pub shape: Vec<Option<f64>>,
    pub colour: Vec<Option<f64>>,
}

impl Calibration {
    pub fn group_c0(&self, scheme: GroupingScheme) -> &[Option<f64>] {
        match scheme {
            GroupingScheme::CaratClass => &self.carat,
            GroupingScheme::Shape => &self.shape,
            GroupingScheme::Colour => &self.colour,
        }
    }

    pub fn frozen_weights(&self) -> WeightVector {
        WeightVector::new(self.weights.clone()).expect("calibration weights are normalized")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineCalibration {
    pub base_date: NaiveDate,
    pub mean: Calibration,
    pub median: Calibration,
}

impl BaselineCalibration {
    pub fn for_statistic(&self, statistic: Statistic) -> &Calibration {
        match statistic {
            Statistic::Mean => &self.mean,
            Statistic::Median => &self.median,
        }
    }
}

fn with_statistic(stats: &GroupStats, statistic: Statistic) -> GroupStats {
    GroupStats {
        statistic,
        ..stats.clone()
    }
}

/// `Σ w_g stat_g` over groups with a statistic, weights renormalized over
/// those groups. Returns the sum and the weights actually used.
pub fn weighted_centre(stats: &GroupStats, weights: &WeightVector) -> Result<(f64, Vec<f64>)> {
    if weights.len() != stats.groups.len() {
        return Err(HciError::Invalid(format!(
            "{} weights for {} groups",
            weights.len(),
            stats.groups.len()
        )));
    }
    let present: Vec<bool> = (0..stats.groups.len()).map(|g| stats.stat(g).is_some()).collect();
    let used = if present.iter().all(|&p| p) {
        weights.values().to_vec()
    } else {
        let missing: Vec<usize> = (0..present.len()).filter(|&g| !present[g]).map(|g| g + 1).collect();
        log::warn!("groups {missing:?} are empty; weights renormalized over the rest");
        weights
            .renormalized(|g| present[g])
            .ok_or_else(|| HciError::InsufficientData("no non-empty group carries weight".into()))?
    };
    let sum = used
        .iter()
        .enumerate()
        .filter(|&(g, _)| present[g])
        .map(|(g, w)| w * stats.stat(g).unwrap())
        .sum();
    Ok((sum, used))
}

/// Calibration constants from the base-date snapshot scored by its own model.
pub fn calibrate(predictor: &(impl PricePredictor + ?Sized), baseline: &Snapshot) -> Result<BaselineCalibration> {
    let ratios = compute_ratios(baseline, predictor);
    let carat = group_stats(&ratios, GroupingScheme::CaratClass, Statistic::Median);
    let shape = group_stats(&ratios, GroupingScheme::Shape, Statistic::Median);
    let colour = group_stats(&ratios, GroupingScheme::Colour, Statistic::Median);
    let weights = final_weights(&weights_from_totals(&carat.totals_nanos())?);
    let one = |statistic: Statistic| -> Result<Calibration> {
        let c = with_statistic(&carat, statistic);
        let (c0, _) = weighted_centre(&c, &weights)?;
        Ok(Calibration {
            c0,
            weights: weights.values().to_vec(),
            carat: c.stats(),
            shape: with_statistic(&shape, statistic).stats(),
            colour: with_statistic(&colour, statistic).stats(),
        })
    };
    Ok(BaselineCalibration {
        base_date: baseline.date(),
        mean: one(Statistic::Mean)?,
        median: one(Statistic::Median)?,
    })
}

/// One published index value with its ingredients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexPoint {
    pub date: NaiveDate,
    pub headline: f64,
    pub group_stats: Vec<Option<f64>>,
    pub counts: Vec<usize>,
    pub total_values: Vec<f64>,
    pub weights: Vec<f64>,
    /// Carat-class sub-indices.
    pub subindices: Vec<Option<f64>>,
}

/// `1000 × Σ w_g stat_g / c0`.
pub fn compute_hci(date: NaiveDate, stats: &GroupStats, weights: &WeightVector, c0: f64) -> Result<IndexPoint> {
    let (sum, used) = weighted_centre(stats, weights)?;
    Ok(IndexPoint {
        date,
        headline: BASE_LEVEL * sum / c0,
        group_stats: stats.stats(),
        counts: stats.counts(),
        total_values: stats.groups.iter().map(|g| g.total_value).collect(),
        weights: used,
        subindices: Vec::new(),
    })
}

/// `1000 × stat_g / c0_g`; missing where either side is missing.
pub fn subindices_from_stats(stats: &GroupStats, c0: &[Option<f64>]) -> Vec<Option<f64>> {
    (0..stats.groups.len())
        .map(|g| match (stats.stat(g), c0.get(g).copied().flatten()) {
            (Some(s), Some(c)) if c > 0.0 => Some(BASE_LEVEL * s / c),
            _ => None,
        })
        .collect()
}

pub fn compute_subindices(
    ratios: &[RatioRecord],
    scheme: GroupingScheme,
    statistic: Statistic,
    calibration: &BaselineCalibration,
) -> Vec<Option<f64>> {
    let stats = group_stats(ratios, scheme, statistic);
    subindices_from_stats(&stats, calibration.for_statistic(statistic).group_c0(scheme))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct IndexOptions {
    pub statistic: Statistic,
    pub weighting: WeightingPolicy,
}

/// Weights for a snapshot under a policy, given its carat-class stats.
pub fn policy_weights(stats: &GroupStats, calibration: &Calibration, policy: WeightingPolicy) -> Result<WeightVector> {
    match policy {
        WeightingPolicy::PerSnapshot => Ok(final_weights(&weights_from_totals(&stats.totals_nanos())?)),
        WeightingPolicy::Frozen => Ok(calibration.frozen_weights()),
    }
}

fn point_from_stats(
    date: NaiveDate,
    stats: &GroupStats,
    predictor: &BaselinePredictor,
    opts: IndexOptions,
) -> Result<IndexPoint> {
    let cal = predictor.calibration.for_statistic(opts.statistic);
    let weights = policy_weights(stats, cal, opts.weighting)?;
    let mut point = compute_hci(date, stats, &weights, cal.c0)?;
    point.subindices = subindices_from_stats(stats, &cal.carat);
    Ok(point)
}

/// Headline and carat-class sub-indices for one snapshot.
pub fn index_point(predictor: &BaselinePredictor, snapshot: &Snapshot, opts: IndexOptions) -> Result<IndexPoint> {
    let ratios = compute_ratios(snapshot, predictor);
    let stats = group_stats(&ratios, GroupingScheme::CaratClass, opts.statistic);
    point_from_stats(snapshot.date(), &stats, predictor, opts)
}

/// Incremental version of [`index_point`] for inputs too large to hold.
/// Records are scored in batches that are whole multiples of the reduction
/// block, so the result is bit-identical to the in-memory path.
pub struct StreamingIndex<'a> {
    predictor: &'a BaselinePredictor,
    opts: IndexOptions,
    acc: StatsAccumulator,
    buffer: Vec<PricedDiamond>,
    seen: usize,
}

const BATCH: usize = 64 * CHUNK;

impl<'a> StreamingIndex<'a> {
    pub fn new(predictor: &'a BaselinePredictor, opts: IndexOptions) -> Self {
        StreamingIndex {
            predictor,
            opts,
            acc: StatsAccumulator::new(GroupingScheme::CaratClass, opts.statistic == Statistic::Median),
            buffer: Vec::with_capacity(BATCH),
            seen: 0,
        }
    }

    pub fn push(&mut self, record: PricedDiamond) {
        self.buffer.push(record);
        if self.buffer.len() == BATCH {
            self.flush();
        }
    }

    fn flush(&mut self) {
        let ratios = score_records(self.predictor, &self.buffer, self.seen);
        self.seen += self.buffer.len();
        self.acc.extend(&ratios);
        self.buffer.clear();
    }

    pub fn len(&self) -> usize {
        self.seen + self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn finish(mut self, date: NaiveDate) -> Result<IndexPoint> {
        if !self.buffer.is_empty() {
            self.flush();
        }
        if self.seen == 0 {
            return Err(HciError::InsufficientData("no records to index".into()));
        }
        let stats = self.acc.finish(self.opts.statistic);
        point_from_stats(date, &stats, self.predictor, self.opts)
    }
}

/// Total snapshot value in USD, summed exactly.
pub fn snapshot_value(snapshot: &Snapshot) -> f64 {
    nanos_to_usd(snapshot.records().iter().map(|r| u128::from(r.price.nanos())).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::stats::GroupSummary;

    fn stats_of(values: &[Option<f64>]) -> GroupStats {
        GroupStats {
            scheme: GroupingScheme::CaratClass,
            statistic: Statistic::Mean,
            groups: values
                .iter()
                .map(|v| GroupSummary {
                    count: usize::from(v.is_some()) * 10,
                    mean: *v,
                    median: *v,
                    variance: v.map(|_| 0.0),
                    total_value: 1.0,
                    total_value_nanos: 1_000_000_000,
                })
                .collect(),
        }
    }

    fn table3() -> WeightVector {
        let w = [0.087, 0.141, 0.222, 0.150, 0.127, 0.092, 0.180];
        let s: f64 = w.iter().sum();
        WeightVector::new(w.iter().map(|x| x / s).collect()).unwrap()
    }

    #[test]
    fn unit_stats_give_base_level() {
        let d = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
        let p = compute_hci(d, &stats_of(&[Some(1.0); 7]), &WeightVector::uniform(7), 1.0).unwrap();
        assert!((p.headline - 1000.0).abs() < 1e-12);
    }

    #[test]
    fn one_class_up_ten_percent() {
        let d = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
        let w = [0.087, 0.141, 0.222, 0.150, 0.127, 0.092, 0.181];
        let w = WeightVector::new(w.to_vec()).unwrap();
        let mut s = [Some(1.0); 7];
        s[2] = Some(1.1);
        let p = compute_hci(d, &stats_of(&s), &w, 1.0).unwrap();
        assert!((p.headline - 1022.2).abs() < 1e-9, "{}", p.headline);
    }

    #[test]
    fn empty_group_renormalizes() {
        let d = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
        let mut s = [Some(1.2); 7];
        s[5] = None;
        let p = compute_hci(d, &stats_of(&s), &table3(), 1.0).unwrap();
        assert!((p.headline - 1200.0).abs() < 1e-9);
        assert_eq!(p.weights[5], 0.0);
        assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn headline_recombines_subindices_with_shared_c0() {
        let d = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
        let s = [Some(0.95), Some(1.02), Some(1.1), Some(0.99), Some(1.0), Some(1.07), Some(0.9)];
        let st = stats_of(&s);
        let c0 = 1.03;
        let w = table3();
        let p = compute_hci(d, &st, &w, c0).unwrap();
        let sub = subindices_from_stats(&st, &[Some(c0); 7]);
        let recombined: f64 = w.values().iter().zip(&sub).map(|(w, s)| w * s.unwrap()).sum();
        assert!((recombined - p.headline).abs() < 1e-9 * p.headline);
    }

    #[test]
    fn missing_baseline_group_leaves_subindex_missing() {
        let st = stats_of(&[Some(1.0); 7]);
        let mut c0 = vec![Some(1.0); 7];
        c0[6] = None;
        let sub = subindices_from_stats(&st, &c0);
        assert_eq!(sub[6], None);
        assert_eq!(sub[0], Some(1000.0));
    }
}
