//! Bagged CART regression trees on log price.
//!
//! Numeric features are split on histogram bins (exact distinct values when
//! there are few enough, else quantile bins); categorical features are split
//! by ordering categories on their mean response. Each tree draws from its
//! own ChaCha stream, so the ensemble does not depend on thread count.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encoding::Vocabulary;
use crate::domain::{DiamondAttributes, Grade, Snapshot};
use crate::{HciError, Result};

/// carat, colour, clarity, cut, polish, symmetry, fluorescence, shape, location
pub const N_TREE_FEATURES: usize = 9;
const CATEGORICAL: [bool; N_TREE_FEATURES] = [false, false, false, false, false, false, false, true, true];
const FEATURE_NAMES: [&str; N_TREE_FEATURES] =
    ["carat", "colour", "clarity", "cut", "polish", "symmetry", "fluorescence", "shape", "location"];
const MAX_BINS: usize = 4096;
const MIN_TRAIN: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Share of training rows drawn without replacement for each tree.
    pub bag_fraction: f64,
    /// Features tried per split; `None` means `ceil(sqrt(9))`.
    pub mtry: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 12,
            min_leaf: 20,
            bag_fraction: 0.7,
            mtry: None,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(HciError::Config("n_trees must be positive".into()));
        }
        if self.min_leaf == 0 {
            return Err(HciError::Config("min_leaf must be positive".into()));
        }
        if !(self.bag_fraction > 0.0 && self.bag_fraction <= 1.0) {
            return Err(HciError::Config("bag_fraction must lie in (0, 1]".into()));
        }
        if matches!(self.mtry, Some(m) if m == 0 || m > N_TREE_FEATURES) {
            return Err(HciError::Config(format!("mtry must lie in 1..={N_TREE_FEATURES}")));
        }
        Ok(())
    }

    pub fn features_per_split(&self) -> usize {
        self.mtry
            .unwrap_or_else(|| (N_TREE_FEATURES as f64).sqrt().ceil() as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    /// Go left when the value is at most the threshold.
    LessEqual(f64),
    /// Go left when the category code is in the (sorted) set.
    InSet(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, rule: SplitRule, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64; N_TREE_FEATURES]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, rule, left, right } => {
                    let v = x[*feature];
                    let go_left = match rule {
                        SplitRule::LessEqual(t) => v <= *t,
                        SplitRule::InSet(set) => set.binary_search(&(v as u32)).is_ok(),
                    };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

pub fn tree_features(vocab: &Vocabulary, a: &DiamondAttributes) -> [f64; N_TREE_FEATURES] {
    [
        a.carat,
        a.colour.ordinal() as f64,
        a.clarity.ordinal() as f64,
        a.cut.ordinal() as f64,
        a.polish.ordinal() as f64,
        a.symmetry.ordinal() as f64,
        a.fluorescence.ordinal() as f64,
        a.shape.ordinal() as f64,
        vocab.location_code(&a.location) as f64,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub vocabulary: Vocabulary,
    pub params: ForestParams,
    pub trees: Vec<Tree>,
    pub residual_sd: f64,
    pub t0: NaiveDate,
    pub n_train: usize,
}

/// Training rows with every feature reduced to a bin code.
struct Binned {
    codes: Vec<Vec<u16>>,
    /// Numeric: bin upper bounds. Categorical: unused.
    upper: Vec<Vec<f64>>,
    n_bins: Vec<usize>,
    exact: Vec<bool>,
}

impl Binned {
    fn new(rows: &[[f64; N_TREE_FEATURES]], n_categories: [usize; N_TREE_FEATURES]) -> Self {
        let mut codes = Vec::with_capacity(N_TREE_FEATURES);
        let mut upper = Vec::with_capacity(N_TREE_FEATURES);
        let mut n_bins = Vec::with_capacity(N_TREE_FEATURES);
        let mut exact = Vec::with_capacity(N_TREE_FEATURES);
        for f in 0..N_TREE_FEATURES {
            if CATEGORICAL[f] {
                codes.push(rows.iter().map(|r| r[f] as u16).collect());
                upper.push(Vec::new());
                n_bins.push(n_categories[f]);
                exact.push(true);
                continue;
            }
            let mut sorted: Vec<f64> = rows.iter().map(|r| r[f]).collect();
            sorted.sort_by(f64::total_cmp);
            let mut distinct = sorted.clone();
            distinct.dedup();
            let (ub, is_exact) = if distinct.len() <= MAX_BINS {
                (distinct, true)
            } else {
                let n = sorted.len();
                let mut ub: Vec<f64> = (1..=MAX_BINS).map(|b| sorted[b * n / MAX_BINS - 1]).collect();
                ub.dedup();
                (ub, false)
            };
            let last = ub.len() - 1;
            codes.push(
                rows.iter()
                    .map(|r| ub.partition_point(|&u| u < r[f]).min(last) as u16)
                    .collect(),
            );
            n_bins.push(ub.len());
            upper.push(ub);
            exact.push(is_exact);
        }
        Binned {
            codes,
            upper,
            n_bins,
            exact,
        }
    }

    fn threshold(&self, f: usize, bin: usize) -> f64 {
        let ub = &self.upper[f];
        if self.exact[f] && bin + 1 < ub.len() {
            0.5 * (ub[bin] + ub[bin + 1])
        } else {
            ub[bin]
        }
    }
}

struct Candidate {
    gain: f64,
    feature: usize,
    /// Numeric: last bin going left. Categorical: categories going left.
    bin: usize,
    left_set: Vec<u32>,
}

struct Builder<'a> {
    data: &'a Binned,
    y: &'a [f64],
    params: &'a ForestParams,
    mtry: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn grow(&mut self, idx: &mut [u32], depth: usize) -> usize {
        let id = self.nodes.len();
        let n = idx.len();
        let mean = idx.iter().map(|&i| self.y[i as usize]).sum::<f64>() / n as f64;
        self.nodes.push(Node::Leaf { value: mean });
        if depth >= self.params.max_depth || n < 2 * self.params.min_leaf {
            return id;
        }
        let Some(best) = self.best_split(idx, mean) else {
            return id;
        };
        let goes_left = |i: u32| {
            let code = self.data.codes[best.feature][i as usize];
            if CATEGORICAL[best.feature] {
                best.left_set.binary_search(&u32::from(code)).is_ok()
            } else {
                usize::from(code) <= best.bin
            }
        };
        let mut left: Vec<u32> = Vec::with_capacity(n);
        let mut right: Vec<u32> = Vec::with_capacity(n);
        for &i in idx.iter() {
            if goes_left(i) {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        let n_left = left.len();
        idx[..n_left].copy_from_slice(&left);
        idx[n_left..].copy_from_slice(&right);
        drop((left, right));
        let rule = if CATEGORICAL[best.feature] {
            SplitRule::InSet(best.left_set)
        } else {
            SplitRule::LessEqual(self.data.threshold(best.feature, best.bin))
        };
        let (l_idx, r_idx) = idx.split_at_mut(n_left);
        let left = self.grow(l_idx, depth + 1);
        let right = self.grow(r_idx, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            rule,
            left,
            right,
        };
        id
    }

    fn sample_features(&mut self) -> Vec<usize> {
        let mut all: Vec<usize> = (0..N_TREE_FEATURES).collect();
        for k in 0..self.mtry {
            let j = self.rng.random_range(k..N_TREE_FEATURES);
            all.swap(k, j);
        }
        let mut chosen = all[..self.mtry].to_vec();
        chosen.sort_unstable();
        chosen
    }

    fn best_split(&mut self, idx: &[u32], mean: f64) -> Option<Candidate> {
        let min_leaf = self.params.min_leaf;
        let n = idx.len();
        let mut best: Option<Candidate> = None;
        for f in self.sample_features() {
            let nb = self.data.n_bins[f];
            let mut count = vec![0usize; nb];
            let mut sum = vec![0.0f64; nb];
            let codes = &self.data.codes[f];
            for &i in idx {
                let b = usize::from(codes[i as usize]);
                count[b] += 1;
                sum[b] += self.y[i as usize] - mean;
            }
            let order: Vec<usize> = if CATEGORICAL[f] {
                let mut present: Vec<usize> = (0..nb).filter(|&b| count[b] > 0).collect();
                present.sort_by(|&a, &b| {
                    (sum[a] / count[a] as f64)
                        .total_cmp(&(sum[b] / count[b] as f64))
                        .then(a.cmp(&b))
                });
                present
            } else {
                (0..nb).collect()
            };
            let (mut nl, mut sl) = (0usize, 0.0f64);
            let total: f64 = sum.iter().sum();
            for (k, &b) in order.iter().enumerate().take(order.len().saturating_sub(1)) {
                nl += count[b];
                sl += sum[b];
                if count[b] == 0 {
                    continue;
                }
                let nr = n - nl;
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let sr = total - sl;
                let gain = sl * sl / nl as f64 + sr * sr / nr as f64 - total * total / n as f64;
                if gain > 0.0 && best.as_ref().is_none_or(|c| gain > c.gain) {
                    let left_set = if CATEGORICAL[f] {
                        let mut s: Vec<u32> = order[..=k].iter().map(|&c| c as u32).collect();
                        s.sort_unstable();
                        s
                    } else {
                        Vec::new()
                    };
                    best = Some(Candidate {
                        gain,
                        feature: f,
                        bin: b,
                        left_set,
                    });
                }
            }
        }
        best
    }
}

impl ForestModel {
    pub fn fit(baseline: &Snapshot, params: &ForestParams) -> Result<Self> {
        params.validate()?;
        let n = baseline.len();
        if n < MIN_TRAIN {
            return Err(HciError::InsufficientData(format!(
                "forest fit needs at least {MIN_TRAIN} records, got {n}"
            )));
        }
        let vocabulary = Vocabulary::from_snapshot(baseline);
        let rows: Vec<[f64; N_TREE_FEATURES]> = baseline
            .records()
            .iter()
            .map(|r| tree_features(&vocabulary, &r.attributes))
            .collect();
        let y: Vec<f64> = baseline.records().iter().map(|r| r.price.to_f64().ln()).collect();
        let mut n_categories = [0usize; N_TREE_FEATURES];
        n_categories[7] = crate::domain::Shape::count();
        n_categories[8] = vocabulary.locations.len() + 1;
        let data = Binned::new(&rows, n_categories);
        let bag = ((params.bag_fraction * n as f64).round() as usize).clamp(1, n);
        let mtry = params.features_per_split();

        let trees: Vec<Tree> = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                rng.set_stream(t as u64);
                let mut idx: Vec<u32> = (0..n as u32).collect();
                if bag < n {
                    for k in 0..bag {
                        let j = rng.random_range(k..n);
                        idx.swap(k, j);
                    }
                    idx.truncate(bag);
                    idx.sort_unstable();
                }
                let mut b = Builder {
                    data: &data,
                    y: &y,
                    params,
                    mtry,
                    rng,
                    nodes: Vec::new(),
                };
                b.grow(&mut idx, 0);
                Tree { nodes: b.nodes }
            })
            .collect();

        let mut model = ForestModel {
            vocabulary,
            params: params.clone(),
            trees,
            residual_sd: 0.0,
            t0: baseline.date(),
            n_train: n,
        };
        let sq: Vec<f64> = rows
            .par_iter()
            .zip(&y)
            .map(|(x, yi)| (yi - model.log_predict_features(x)).powi(2))
            .collect();
        model.residual_sd = (crate::index::deterministic_sum(&sq) / n as f64).sqrt();
        Ok(model)
    }

    fn log_predict_features(&self, x: &[f64; N_TREE_FEATURES]) -> f64 {
        let s: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        s / self.trees.len() as f64
    }

    pub fn log_predict(&self, a: &DiamondAttributes) -> f64 {
        self.log_predict_features(&tree_features(&self.vocabulary, a))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(HciError::Schema("forest has no trees".into()));
        }
        for (t, tree) in self.trees.iter().enumerate() {
            let len = tree.nodes.len();
            if len == 0 {
                return Err(HciError::Schema(format!("tree {t} is empty")));
            }
            let mut seen = vec![false; len];
            let mut stack = vec![0usize];
            while let Some(i) = stack.pop() {
                if i >= len || seen[i] {
                    return Err(HciError::Schema(format!("tree {t} has a bad child link")));
                }
                seen[i] = true;
                if let Node::Split { feature, left, right, .. } = &tree.nodes[i] {
                    if *feature >= N_TREE_FEATURES {
                        return Err(HciError::Schema(format!("tree {t} splits on unknown feature {feature}")));
                    }
                    stack.push(*left);
                    stack.push(*right);
                }
            }
            if seen.iter().any(|s| !s) {
                return Err(HciError::Schema(format!("tree {t} has unreachable nodes")));
            }
        }
        Ok(())
    }

    pub fn feature_names() -> [&'static str; N_TREE_FEATURES] {
        FEATURE_NAMES
    }
}
