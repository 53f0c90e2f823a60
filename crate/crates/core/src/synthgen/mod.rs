//! Synthetic wholesale market with a known price law.
//!
//! Every record draws from its own position in a ChaCha8 stream keyed by
//! `(seed, date)`, at word offset `index * WORDS_PER_RECORD`. A record's
//! draws therefore never depend on other records or on thread count, and
//! two runs that differ only in market factors see the same stones and the
//! same noise (common random numbers).

mod config;
mod scenario;

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{AttributeLaw, GeneratorConfig, PriceLaw, REFERENCE_CLASS_COUNTS};
pub use scenario::{
    apply_scenario, neutral_states, MarketState, Phase, ScenarioKind, ScenarioSpec, SlumpStep,
    VolumeShift,
};

use crate::domain::{
    Clarity, Colour, DiamondAttributes, Finish, Fluorescence, Grade, Location, Price,
    PricedDiamond, Shape, Snapshot,
};
use crate::index::{final_weights, CaratClass, WeightVector, CARAT_CLASS_BOUNDS, N_CARAT_CLASSES};
use crate::{HciError, Result};
use config::dense;

const WORDS_PER_RECORD: u128 = 64;
const TAIL_STEPS: usize = 9500;
const TOP: usize = N_CARAT_CLASSES - 1;

/// Cumulative distribution over category ordinals.
#[derive(Debug, Clone)]
struct Categorical {
    cum: Vec<f64>,
    last_positive: usize,
}

impl Categorical {
    fn new(p: &[f64]) -> Self {
        let mut acc = 0.0;
        let cum = p
            .iter()
            .map(|&x| {
                acc += x;
                acc
            })
            .collect();
        let last_positive = p.iter().rposition(|&x| x > 0.0).unwrap_or(0);
        Categorical { cum, last_positive }
    }

    fn sample(&self, u: f64) -> usize {
        self.cum.partition_point(|&c| c <= u).min(self.last_positive)
    }
}

/// Hundredth-carat range `[lo, hi)` of the bounded classes.
fn class_hundredths(class: usize) -> (u32, u32) {
    let lo = (CARAT_CLASS_BOUNDS[class] * 100.0).round() as u32;
    let hi = (CARAT_CLASS_BOUNDS[class + 1] * 100.0).round() as u32;
    (lo, hi)
}

/// A validated configuration with precomputed tables.
#[derive(Debug, Clone)]
pub struct Generator {
    config: GeneratorConfig,
    class_dist: Categorical,
    colour_dist: Categorical,
    clarity_dist: Categorical,
    cut_dist: Categorical,
    polish_dist: Categorical,
    symmetry_dist: Categorical,
    fluor_dist: Categorical,
    shape_mix: Vec<f64>,
    locations: Vec<Location>,
    location_dist: Categorical,
    law: CompiledLaw,
    tail_q: f64,
}

#[derive(Debug, Clone)]
struct CompiledLaw {
    base: f64,
    step: [f64; N_CARAT_CLASSES],
    slope: [f64; N_CARAT_CLASSES],
    colour: Vec<f64>,
    clarity: Vec<f64>,
    cut: Vec<f64>,
    polish: Vec<f64>,
    symmetry: Vec<f64>,
    fluorescence: Vec<f64>,
    shape: Vec<f64>,
    location: Vec<(Location, f64)>,
    interaction: f64,
}

impl CompiledLaw {
    fn new(law: &PriceLaw) -> Self {
        let mut step = [0.0; N_CARAT_CLASSES];
        for c in 1..N_CARAT_CLASSES {
            let width = CARAT_CLASS_BOUNDS[c] - CARAT_CLASS_BOUNDS[c - 1];
            step[c] = step[c - 1] + law.class_slope[c - 1] * width + law.class_jump[c - 1];
        }
        let mut location: Vec<(Location, f64)> = law
            .location
            .iter()
            .filter_map(|(k, v)| Location::new(k).map(|l| (l, *v)))
            .collect();
        location.sort_by(|a, b| a.0.cmp(&b.0));
        CompiledLaw {
            base: law.base,
            step,
            slope: law.class_slope,
            colour: dense(&law.colour),
            clarity: dense(&law.clarity),
            cut: dense(&law.cut),
            polish: dense(&law.polish),
            symmetry: dense(&law.symmetry),
            fluorescence: dense(&law.fluorescence),
            shape: dense(&law.shape),
            location,
            interaction: law.colour_class_interaction,
        }
    }

    fn location_offset(&self, loc: &Location) -> f64 {
        self.location
            .binary_search_by(|(l, _)| l.cmp(loc))
            .map(|i| self.location[i].1)
            .unwrap_or(0.0)
    }

    fn carat_term(&self, class: usize, carat: f64) -> f64 {
        self.step[class] + self.slope[class] * (carat - CARAT_CLASS_BOUNDS[class])
    }

    fn colour_term(&self, class: usize, colour: usize) -> f64 {
        self.colour[colour] - self.interaction * colour as f64 * class as f64
    }

    fn log_price(&self, a: &DiamondAttributes) -> f64 {
        let class = CaratClass::of(a.carat).map(|c| c.index()).unwrap_or(0);
        self.base
            + self.carat_term(class, a.carat)
            + self.colour_term(class, a.colour.ordinal())
            + self.clarity[a.clarity.ordinal()]
            + self.cut[a.cut.ordinal()]
            + self.polish[a.polish.ordinal()]
            + self.symmetry[a.symmetry.ordinal()]
            + self.fluorescence[a.fluorescence.ordinal()]
            + self.shape[a.shape.ordinal()]
            + self.location_offset(&a.location)
    }
}

fn expect_exp(p: &[f64], terms: impl Iterator<Item = f64>) -> f64 {
    p.iter().zip(terms).map(|(&pi, t)| pi * t.exp()).sum()
}

impl Generator {
    pub fn new(config: GeneratorConfig) -> Result<Self> {
        config.validate()?;
        let a = &config.attribute_law;
        let mut locs: Vec<(Location, f64)> = a
            .location
            .iter()
            .filter_map(|(k, v)| Location::new(k).map(|l| (l, *v)))
            .collect();
        locs.sort_by(|x, y| x.0.cmp(&y.0));
        let loc_p: Vec<f64> = locs.iter().map(|l| l.1).collect();
        Ok(Generator {
            class_dist: Categorical::new(&config.class_mix),
            colour_dist: Categorical::new(&dense(&a.colour)),
            clarity_dist: Categorical::new(&dense(&a.clarity)),
            cut_dist: Categorical::new(&dense(&a.cut)),
            polish_dist: Categorical::new(&dense(&a.polish)),
            symmetry_dist: Categorical::new(&dense(&a.symmetry)),
            fluor_dist: Categorical::new(&dense(&a.fluorescence)),
            shape_mix: dense(&a.shape),
            locations: locs.into_iter().map(|l| l.0).collect(),
            location_dist: Categorical::new(&loc_p),
            law: CompiledLaw::new(&config.price_law),
            tail_q: (-0.01 / a.tail_mean_carat).exp(),
            config,
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    /// Natural log of the law price with all market factors at one.
    pub fn log_price(&self, a: &DiamondAttributes) -> f64 {
        self.law.log_price(a)
    }

    /// Noise-free USD price under a market state.
    pub fn true_price(&self, a: &DiamondAttributes, state: &MarketState) -> f64 {
        let class = CaratClass::of(a.carat).map(|c| c.index()).unwrap_or(0);
        self.law.log_price(a).exp() * state.group_factor[class] * state.shape_factor[a.shape.ordinal()]
    }

    /// Support and probabilities of the carat weight within a class.
    pub fn carat_pmf(&self, class: CaratClass) -> Vec<(f64, f64)> {
        let (lo, hi) = class_hundredths(class.index());
        if class.index() < TOP {
            let k = (hi - lo) as f64;
            (lo..hi).map(|h| (h as f64 / 100.0, 1.0 / k)).collect()
        } else {
            let q = self.tail_q;
            let z = (1.0 - q.powi(TAIL_STEPS as i32)) / (1.0 - q);
            (0..TAIL_STEPS)
                .map(|k| ((lo as f64 + k as f64) / 100.0, q.powi(k as i32) / z))
                .collect()
        }
    }

    pub fn shape_mix(&self, state: &MarketState) -> Vec<f64> {
        state.shifted_mix(&self.shape_mix)
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    fn draw_carat(&self, class: usize, u: f64) -> f64 {
        let (lo, hi) = class_hundredths(class);
        let k = if class < TOP {
            ((u * (hi - lo) as f64) as u32).min(hi - lo - 1)
        } else {
            let q = self.tail_q;
            let mass = 1.0 - q.powi(TAIL_STEPS as i32);
            let k = ((1.0 - u * mass).ln() / q.ln()).floor();
            (k.max(0.0) as u32).min(TAIL_STEPS as u32 - 1)
        };
        (lo + k) as f64 / 100.0
    }

    fn record(&self, rng: &mut ChaCha8Rng, index: usize, state: &MarketState, shapes: &Categorical) -> PricedDiamond {
        rng.set_word_pos(index as u128 * WORDS_PER_RECORD);
        let mut u = || rng.random::<f64>();
        let class = self.class_dist.sample(u());
        let carat = self.draw_carat(class, u());
        let colour = Colour::from_ordinal(self.colour_dist.sample(u())).unwrap();
        let clarity = Clarity::from_ordinal(self.clarity_dist.sample(u())).unwrap();
        let cut = Finish::from_ordinal(self.cut_dist.sample(u())).unwrap();
        let polish = Finish::from_ordinal(self.polish_dist.sample(u())).unwrap();
        let symmetry = Finish::from_ordinal(self.symmetry_dist.sample(u())).unwrap();
        let fluorescence = Fluorescence::from_ordinal(self.fluor_dist.sample(u())).unwrap();
        let shape = Shape::from_ordinal(shapes.sample(u())).unwrap();
        let location = self.locations[self.location_dist.sample(u())].clone();
        let (u1, u2) = (u(), u());
        let z = (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos();

        let attributes = DiamondAttributes {
            carat,
            colour,
            clarity,
            cut,
            polish,
            symmetry,
            fluorescence,
            shape,
            location,
        };
        let log_p = self.law.log_price(&attributes) + self.config.noise_sd * z;
        let usd = log_p.exp() * state.group_factor[class] * state.shape_factor[shape.ordinal()];
        let price = Price::from_f64(usd)
            .filter(|p| p.is_positive())
            .unwrap_or(Price::from_nanos(1));
        PricedDiamond::new(attributes, price)
    }

    fn stream(&self, date: NaiveDate) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(date.num_days_from_ce() as u64);
        rng
    }

    /// One snapshot under `state`; deterministic in `(seed, state.date)`.
    pub fn snapshot(&self, state: &MarketState) -> Result<Snapshot> {
        state.validate()?;
        let shapes = Categorical::new(&self.shape_mix(state));
        let base = self.stream(state.date);
        let records: Vec<PricedDiamond> = (0..self.config.n_per_snapshot)
            .into_par_iter()
            .with_min_len(2048)
            .map_init(|| base.clone(), |rng, i| self.record(rng, i, state, &shapes))
            .collect();
        Snapshot::new(state.date, records)
    }

    /// Expected listing value per carat class (count share times mean price).
    pub fn expected_class_values(&self, state: &MarketState) -> [f64; N_CARAT_CLASSES] {
        let a = &self.config.attribute_law;
        let law = &self.law;
        let others = expect_exp(&dense(&a.clarity), law.clarity.iter().copied())
            * expect_exp(&dense(&a.cut), law.cut.iter().copied())
            * expect_exp(&dense(&a.polish), law.polish.iter().copied())
            * expect_exp(&dense(&a.symmetry), law.symmetry.iter().copied())
            * expect_exp(&dense(&a.fluorescence), law.fluorescence.iter().copied());
        let mix = self.shape_mix(state);
        let shape: f64 = mix
            .iter()
            .enumerate()
            .map(|(s, p)| p * law.shape[s].exp() * state.shape_factor[s])
            .sum();
        let locs: f64 = self
            .locations
            .iter()
            .zip(self.location_dist_probs())
            .map(|(l, p)| p * law.location_offset(l).exp())
            .sum();
        let noise = (0.5 * self.config.noise_sd * self.config.noise_sd).exp();
        let colour_p = dense(&a.colour);
        let mut out = [0.0; N_CARAT_CLASSES];
        for class in CaratClass::ALL {
            let c = class.index();
            let carat: f64 = self
                .carat_pmf(class)
                .iter()
                .map(|&(ct, p)| p * law.carat_term(c, ct).exp())
                .sum();
            let colour = expect_exp(&colour_p, (0..colour_p.len()).map(|i| law.colour_term(c, i)));
            out[c] = self.config.class_mix[c]
                * law.base.exp()
                * carat
                * colour
                * others
                * shape
                * locs
                * noise
                * state.group_factor[c];
        }
        out
    }

    fn location_dist_probs(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.location_dist
            .cum
            .iter()
            .map(|&c| {
                let p = c - prev;
                prev = c;
                p
            })
            .collect()
    }

    /// Final (blended) weights implied by the expected class values.
    pub fn expected_weights(&self, state: &MarketState) -> WeightVector {
        let v = self.expected_class_values(state);
        let total: f64 = v.iter().sum();
        let wp = WeightVector::new(v.iter().map(|x| x / total).collect())
            .expect("expected class values are positive");
        final_weights(&wp)
    }

    /// Ground-truth index level before scaling: expected mean price ratio per
    /// class, combined with the expected final weights.
    pub fn true_level(&self, state: &MarketState) -> f64 {
        let w = self.expected_weights(state);
        let shape: f64 = self
            .shape_mix(state)
            .iter()
            .zip(state.shape_factor)
            .map(|(p, f)| p * f)
            .sum();
        w.values()
            .iter()
            .zip(state.group_factor)
            .map(|(w, g)| w * g * shape)
            .sum()
    }
}

/// Per-date ground truth, scaled to 1000 at the first date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueIndexPath {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
}

impl TrueIndexPath {
    pub fn from_states(generator: &Generator, states: &[MarketState]) -> Self {
        let levels: Vec<f64> = states.iter().map(|s| generator.true_level(s)).collect();
        let first = levels.first().copied().unwrap_or(1.0);
        TrueIndexPath {
            dates: states.iter().map(|s| s.date).collect(),
            values: levels.iter().map(|l| 1000.0 * l / first).collect(),
            weights: states
                .iter()
                .map(|s| generator.expected_weights(s).values().to_vec())
                .collect(),
        }
    }

    pub fn value_at(&self, date: NaiveDate) -> Option<f64> {
        self.dates.iter().position(|&d| d == date).map(|i| self.values[i])
    }
}

pub fn true_price(config: &GeneratorConfig, attributes: &DiamondAttributes, state: &MarketState) -> Result<f64> {
    Ok(Generator::new(config.clone())?.true_price(attributes, state))
}

pub fn generate_snapshot(config: &GeneratorConfig, state: &MarketState) -> Result<Snapshot> {
    Generator::new(config.clone())?.snapshot(state)
}

/// Market states for `dates` with an optional scenario applied.
pub fn scenario_states(dates: &[NaiveDate], spec: Option<&ScenarioSpec>) -> Result<Vec<MarketState>> {
    if dates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HciError::Config("dates must be strictly increasing".into()));
    }
    let states = neutral_states(dates);
    match spec {
        Some(s) => apply_scenario(&states, s),
        None => Ok(states),
    }
}

pub fn generate_series(
    config: &GeneratorConfig,
    dates: &[NaiveDate],
    spec: Option<&ScenarioSpec>,
) -> Result<(Vec<Snapshot>, TrueIndexPath)> {
    let generator = Generator::new(config.clone())?;
    let states = scenario_states(dates, spec)?;
    let snapshots = states
        .iter()
        .map(|s| generator.snapshot(s))
        .collect::<Result<Vec<_>>>()?;
    Ok((snapshots, TrueIndexPath::from_states(&generator, &states)))
}

/// `count` dates starting at `start`, `interval_days` apart.
pub fn date_grid(start: NaiveDate, count: usize, interval_days: i64) -> Vec<NaiveDate> {
    (0..count)
        .map(|i| start + chrono::Duration::days(interval_days * i as i64))
        .collect()
}
