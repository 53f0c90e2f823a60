//! Per-group ratio statistics with an order-fixed, thread-count independent
//! reduction.
//!
//! Records are cut into fixed blocks of [`CHUNK`] in input order. Each block
//! is reduced on its own (possibly on another thread) and the block partials
//! are merged strictly left to right, so the floating-point result depends
//! only on the record order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grouping::GroupingScheme;
use super::ratios::RatioRecord;
use crate::domain::nanos_to_usd;

pub const CHUNK: usize = 4096;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Sum of `xs` reduced block-wise in fixed order.
pub fn deterministic_sum(xs: &[f64]) -> f64 {
    let partials: Vec<CompensatedSum> = xs
        .par_chunks(CHUNK)
        .map(|c| c.iter().copied().collect())
        .collect();
    let mut total = CompensatedSum::default();
    for p in &partials {
        total.merge(p);
    }
    total.value()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    #[default]
    Mean,
    Median,
}

impl Statistic {
    pub fn name(self) -> &'static str {
        match self {
            Statistic::Mean => "mean",
            Statistic::Median => "median",
        }
    }
}

impl std::str::FromStr for Statistic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mean" => Ok(Statistic::Mean),
            "median" => Ok(Statistic::Median),
            other => Err(format!("unknown statistic {other:?}")),
        }
    }
}

/// Ratios are centred on one before accumulation; the shift is exact and
/// keeps the second moment well conditioned.
const SHIFT: f64 = 1.0;

#[derive(Debug, Clone, Default)]
pub struct GroupAccumulator {
    count: usize,
    s1: CompensatedSum,
    s2: CompensatedSum,
    value_nanos: u128,
    ratios: Option<Vec<f64>>,
}

impl GroupAccumulator {
    fn push(&mut self, ratio: f64, price_nanos: u64) {
        let d = ratio - SHIFT;
        self.count += 1;
        self.s1.add(d);
        self.s2.add(d * d);
        self.value_nanos += u128::from(price_nanos);
        if let Some(r) = &mut self.ratios {
            r.push(ratio);
        }
    }

    fn merge(&mut self, other: GroupAccumulator) {
        self.count += other.count;
        self.s1.merge(&other.s1);
        self.s2.merge(&other.s2);
        self.value_nanos += other.value_nanos;
        if let (Some(a), Some(b)) = (&mut self.ratios, other.ratios) {
            a.extend(b);
        }
    }

    fn finish(self) -> GroupSummary {
        let n = self.count;
        let mean = (n > 0).then(|| SHIFT + self.s1.value() / n as f64);
        let variance = (n > 1).then(|| {
            let s1 = self.s1.value();
            ((self.s2.value() - s1 * s1 / n as f64) / (n - 1) as f64).max(0.0)
        });
        let median = self.ratios.filter(|r| !r.is_empty()).map(|mut r| median_in_place(&mut r));
        GroupSummary {
            count: n,
            mean,
            median,
            variance,
            total_value: nanos_to_usd(self.value_nanos),
            total_value_nanos: self.value_nanos,
        }
    }
}

pub fn median_in_place(xs: &mut [f64]) -> f64 {
    let n = xs.len();
    let mid = n / 2;
    let (_, upper, _) = xs.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = xs[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Accumulates ratios into the groups of one scheme.
#[derive(Debug, Clone)]
pub struct StatsAccumulator {
    scheme: GroupingScheme,
    groups: Vec<GroupAccumulator>,
}

impl StatsAccumulator {
    pub fn new(scheme: GroupingScheme, keep_ratios: bool) -> Self {
        let groups = (0..scheme.n_groups())
            .map(|_| GroupAccumulator {
                ratios: keep_ratios.then(Vec::new),
                ..Default::default()
            })
            .collect();
        StatsAccumulator { scheme, groups }
    }

    pub fn push(&mut self, r: &RatioRecord) {
        self.groups[r.group(self.scheme)].push(r.ratio, r.price.nanos());
    }

    pub fn merge(&mut self, other: StatsAccumulator) {
        for (a, b) in self.groups.iter_mut().zip(other.groups) {
            a.merge(b);
        }
    }

    /// Adds a block of records using the fixed-chunk reduction.
    pub fn extend(&mut self, records: &[RatioRecord]) {
        let keep = self.groups.first().is_some_and(|g| g.ratios.is_some());
        let scheme = self.scheme;
        let partials: Vec<StatsAccumulator> = records
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = StatsAccumulator::new(scheme, keep);
                for r in chunk {
                    acc.push(r);
                }
                acc
            })
            .collect();
        for p in partials {
            self.merge(p);
        }
    }

    pub fn finish(self, statistic: Statistic) -> GroupStats {
        GroupStats {
            scheme: self.scheme,
            statistic,
            groups: self.groups.into_iter().map(GroupAccumulator::finish).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub count: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    /// Unbiased sample variance of the ratios; needs two or more records.
    pub variance: Option<f64>,
    pub total_value: f64,
    pub total_value_nanos: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub scheme: GroupingScheme,
    pub statistic: Statistic,
    pub groups: Vec<GroupSummary>,
}

impl GroupStats {
    /// Selected centre of group `g`; `None` for an empty group.
    pub fn stat(&self, g: usize) -> Option<f64> {
        let s = &self.groups[g];
        match self.statistic {
            Statistic::Mean => s.mean,
            Statistic::Median => s.median,
        }
    }

    pub fn stats(&self) -> Vec<Option<f64>> {
        (0..self.groups.len()).map(|g| self.stat(g)).collect()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.count).collect()
    }

    pub fn totals_nanos(&self) -> Vec<u128> {
        self.groups.iter().map(|g| g.total_value_nanos).collect()
    }
}

/// Per-group centre, count, variance and value for one scheme.
pub fn group_stats(ratios: &[RatioRecord], scheme: GroupingScheme, statistic: Statistic) -> GroupStats {
    let mut acc = StatsAccumulator::new(scheme, statistic == Statistic::Median);
    acc.extend(ratios);
    acc.finish(statistic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Colour, Price, Shape};
    use crate::index::CaratClass;
    use rand::SeedableRng;
    use rand_distr_free::lognormal;

    mod rand_distr_free {
        use rand::Rng;
        pub fn lognormal(rng: &mut impl Rng, sigma: f64) -> f64 {
            let u1: f64 = rng.random();
            let u2: f64 = rng.random();
            let z = (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            (sigma * z).exp()
        }
    }

    fn rec(class: usize, ratio: f64) -> RatioRecord {
        RatioRecord {
            record: 0,
            class: CaratClass::from_index(class).unwrap(),
            shape: Shape::Round,
            colour: Colour::D,
            ratio,
            price: Price::from_nanos(1_000_000_000),
        }
    }

    #[test]
    fn equal_ratios_give_zero_variance() {
        let rs: Vec<_> = (0..50).map(|i| rec(i % 7, 1.3)).collect();
        let st = group_stats(&rs, GroupingScheme::CaratClass, Statistic::Mean);
        for g in &st.groups {
            assert!((g.mean.unwrap() - 1.3).abs() < 1e-15);
            assert!(g.variance.unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn two_point_group() {
        let rs = vec![rec(0, 0.9), rec(0, 1.1)];
        let st = group_stats(&rs, GroupingScheme::CaratClass, Statistic::Median);
        let g = &st.groups[0];
        assert!((g.mean.unwrap() - 1.0).abs() < 1e-15);
        assert!((g.variance.unwrap() - 0.02).abs() < 1e-15);
        assert!((g.median.unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(st.groups[1].count, 0);
        assert_eq!(st.stat(1), None);
        assert_eq!(g.total_value, 2.0);
    }

    #[test]
    fn right_skew_puts_median_below_mean() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let rs: Vec<_> = (0..20_000).map(|_| rec(2, lognormal(&mut rng, 0.6))).collect();
        let st = group_stats(&rs, GroupingScheme::CaratClass, Statistic::Median);
        let g = &st.groups[2];
        assert!(g.median.unwrap() < g.mean.unwrap());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median_in_place(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median_in_place(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn reduction_is_identical_across_thread_counts() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let rs: Vec<_> = (0..100_003).map(|i| rec(i % 7, lognormal(&mut rng, 0.1))).collect();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| group_stats(&rs, GroupingScheme::CaratClass, Statistic::Mean))
        };
        let a = run(1);
        let b = run(4);
        for (x, y) in a.groups.iter().zip(&b.groups) {
            assert_eq!(x.mean.unwrap().to_bits(), y.mean.unwrap().to_bits());
            assert_eq!(x.variance.unwrap().to_bits(), y.variance.unwrap().to_bits());
        }
    }

    #[test]
    fn variance_matches_two_pass_formula() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<f64> = (0..10_000).map(|_| lognormal(&mut rng, 0.2)).collect();
        let rs: Vec<_> = xs.iter().map(|&x| rec(3, x)).collect();
        let st = group_stats(&rs, GroupingScheme::CaratClass, Statistic::Mean);
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((st.groups[3].mean.unwrap() - m).abs() < 1e-13);
        assert!((st.groups[3].variance.unwrap() / v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(xs.iter().copied().collect::<CompensatedSum>().value(), 2.0);
        assert_eq!(deterministic_sum(&xs), 2.0);
    }
}
