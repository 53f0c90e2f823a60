//! Generator configuration: attribute frequencies and the ground-truth price law.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{Clarity, Colour, Finish, Fluorescence, Grade, Shape};
use crate::index::N_CARAT_CLASSES;
use crate::{HciError, Result};

/// Class sizes of a full wholesale snapshot, smallest class first.
pub const REFERENCE_CLASS_COUNTS: [f64; N_CARAT_CLASSES] =
    [329506.0, 281696.0, 134001.0, 24661.0, 8710.0, 2333.0, 4937.0];

fn reference_class_mix() -> [f64; N_CARAT_CLASSES] {
    let total: f64 = REFERENCE_CLASS_COUNTS.iter().sum();
    REFERENCE_CLASS_COUNTS.map(|c| c / total)
}

fn grade_map<T: Grade>(values: &[f64]) -> BTreeMap<T, f64> {
    T::ALL.iter().copied().zip(values.iter().copied()).collect()
}

/// Categorical frequencies for every characteristic except carat class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttributeLaw {
    pub colour: BTreeMap<Colour, f64>,
    pub clarity: BTreeMap<Clarity, f64>,
    pub cut: BTreeMap<Finish, f64>,
    pub polish: BTreeMap<Finish, f64>,
    pub symmetry: BTreeMap<Finish, f64>,
    pub fluorescence: BTreeMap<Fluorescence, f64>,
    pub shape: BTreeMap<Shape, f64>,
    /// Market-city code to share of listings.
    pub location: BTreeMap<String, f64>,
    /// Mean excess weight above 5 ct for the open top class.
    pub tail_mean_carat: f64,
}

impl Default for AttributeLaw {
    fn default() -> Self {
        AttributeLaw {
            colour: grade_map(&[0.06, 0.09, 0.14, 0.16, 0.15, 0.13, 0.10, 0.08, 0.05, 0.04]),
            clarity: grade_map(&[0.01, 0.04, 0.08, 0.11, 0.16, 0.18, 0.19, 0.15, 0.08]),
            cut: grade_map(&[0.55, 0.27, 0.12, 0.04, 0.02]),
            polish: grade_map(&[0.60, 0.30, 0.08, 0.015, 0.005]),
            symmetry: grade_map(&[0.60, 0.30, 0.08, 0.015, 0.005]),
            fluorescence: grade_map(&[0.65, 0.15, 0.12, 0.06, 0.02]),
            shape: grade_map(&[0.55, 0.08, 0.07, 0.08, 0.05, 0.05, 0.03, 0.04, 0.02, 0.03]),
            location: [("NY", 0.35), ("ANTWERP", 0.25), ("MUMBAI", 0.20), ("HONGKONG", 0.10), ("TELAVIV", 0.10)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            tail_mean_carat: 1.5,
        }
    }
}

/// Coefficients of the true log-price function.
///
/// `log p = base + step(class) + slope(class) * (carat - class lower bound)
///          + grade terms + shape + location - interaction * colour ordinal * class index`
///
/// `step` accumulates the within-class rise of every lower class plus the
/// jump premium at each boundary, so with positive jumps the price is
/// discontinuous upward at 0.5, 1, 2, 3, 4 and 5 ct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriceLaw {
    /// Log USD of a reference stone at 0.25 ct.
    pub base: f64,
    /// Log premium at each of the six class boundaries.
    pub class_jump: [f64; N_CARAT_CLASSES - 1],
    /// Log-price increase per carat within each class.
    pub class_slope: [f64; N_CARAT_CLASSES],
    pub colour: BTreeMap<Colour, f64>,
    pub clarity: BTreeMap<Clarity, f64>,
    pub cut: BTreeMap<Finish, f64>,
    pub polish: BTreeMap<Finish, f64>,
    pub symmetry: BTreeMap<Finish, f64>,
    pub fluorescence: BTreeMap<Fluorescence, f64>,
    pub shape: BTreeMap<Shape, f64>,
    pub location: BTreeMap<String, f64>,
    /// Extra colour decrement per colour step per class step; zero keeps the
    /// law log-additive.
    pub colour_class_interaction: f64,
}

impl Default for PriceLaw {
    /// Calibrated so the expected class values under the default attribute
    /// law match the reference class totals ($120M, $526M, $1136M, $591M,
    /// $419M, $157M, $813M at the reference class sizes).
    fn default() -> Self {
        PriceLaw {
            base: 6.2144,
            class_jump: [0.6245, 0.5079, 0.3176, 0.2764, 0.0118, 0.5493],
            class_slope: [4.0, 2.0, 1.0, 0.5, 0.35, 0.3, 0.12],
            colour: grade_map(&[0.0, -0.08, -0.15, -0.22, -0.30, -0.38, -0.46, -0.55, -0.63, -0.72]),
            clarity: grade_map(&[0.0, -0.06, -0.12, -0.18, -0.25, -0.32, -0.42, -0.55, -0.85]),
            cut: grade_map(&[0.0, -0.05, -0.12, -0.20, -0.30]),
            polish: grade_map(&[0.0, -0.03, -0.07, -0.12, -0.18]),
            symmetry: grade_map(&[0.0, -0.03, -0.07, -0.12, -0.18]),
            fluorescence: grade_map(&[0.0, -0.02, -0.06, -0.10, -0.14]),
            shape: grade_map(&[0.0, -0.25, -0.30, -0.15, -0.25, -0.20, -0.30, -0.30, -0.30, -0.35]),
            location: [("NY", 0.0), ("ANTWERP", -0.01), ("MUMBAI", -0.03), ("HONGKONG", 0.01), ("TELAVIV", -0.02)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            colour_class_interaction: 0.0,
        }
    }
}

impl PriceLaw {
    /// Every premium zero and `base` as given: a flat price law.
    pub fn flat(base: f64) -> Self {
        PriceLaw {
            base,
            class_jump: [0.0; N_CARAT_CLASSES - 1],
            class_slope: [0.0; N_CARAT_CLASSES],
            colour: BTreeMap::new(),
            clarity: BTreeMap::new(),
            cut: BTreeMap::new(),
            polish: BTreeMap::new(),
            symmetry: BTreeMap::new(),
            fluorescence: BTreeMap::new(),
            shape: BTreeMap::new(),
            location: BTreeMap::new(),
            colour_class_interaction: 0.0,
        }
    }
}

/// Full synthetic-market configuration, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_per_snapshot: usize,
    /// Share of listings in each carat class; must sum to 1.
    pub class_mix: [f64; N_CARAT_CLASSES],
    pub attribute_law: AttributeLaw,
    pub price_law: PriceLaw,
    /// Standard deviation of the Gaussian log-price noise.
    pub noise_sd: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            n_per_snapshot: 50_000,
            class_mix: reference_class_mix(),
            attribute_law: AttributeLaw::default(),
            price_law: PriceLaw::default(),
            noise_sd: 0.1,
        }
    }
}

pub(crate) fn dense<T: Grade>(m: &BTreeMap<T, f64>) -> Vec<f64> {
    T::ALL.iter().map(|g| m.get(g).copied().unwrap_or(0.0)).collect()
}

fn check_distribution(name: &str, p: &[f64], tol: f64) -> Result<()> {
    if p.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(HciError::Config(format!("{name}: proportions must be finite and non-negative")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > tol {
        return Err(HciError::Config(format!("{name}: proportions sum to {s}, expected 1")));
    }
    Ok(())
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_snapshot == 0 {
            return Err(HciError::Config("n_per_snapshot must be positive".into()));
        }
        check_distribution("class_mix", &self.class_mix, 1e-12)?;
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(HciError::Config("noise_sd must be finite and >= 0".into()));
        }
        let a = &self.attribute_law;
        check_distribution("colour", &dense(&a.colour), 1e-9)?;
        check_distribution("clarity", &dense(&a.clarity), 1e-9)?;
        check_distribution("cut", &dense(&a.cut), 1e-9)?;
        check_distribution("polish", &dense(&a.polish), 1e-9)?;
        check_distribution("symmetry", &dense(&a.symmetry), 1e-9)?;
        check_distribution("fluorescence", &dense(&a.fluorescence), 1e-9)?;
        check_distribution("shape", &dense(&a.shape), 1e-9)?;
        let loc: Vec<f64> = a.location.values().copied().collect();
        check_distribution("location", &loc, 1e-9)?;
        if a.location.keys().any(|k| k.trim().is_empty()) {
            return Err(HciError::Config("location codes must be non-empty".into()));
        }
        if !(a.tail_mean_carat > 0.0 && a.tail_mean_carat.is_finite()) {
            return Err(HciError::Config("tail_mean_carat must be positive".into()));
        }
        let law = &self.price_law;
        let all_finite = std::iter::once(law.base)
            .chain(law.class_jump)
            .chain(law.class_slope)
            .chain(std::iter::once(law.colour_class_interaction))
            .all(f64::is_finite);
        if !all_finite {
            return Err(HciError::Config("price_law coefficients must be finite".into()));
        }
        if law.class_slope.iter().any(|&s| s < 0.0) {
            return Err(HciError::Config("class_slope must be non-negative".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: GeneratorConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
