//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use chrono::NaiveDate;
use hci_core::domain::{Clarity, Colour, Finish, Fluorescence, Grade, Shape};
use hci_core::index::CaratClass;
use hci_core::synthgen::{Generator, GeneratorConfig, MarketState};
use hci_core::{BaselinePredictor, DiamondAttributes, PredictorSpec, PricePredictor, Snapshot};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn base_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2015, 1, 5).unwrap()
}

pub fn week(i: i64) -> NaiveDate {
    base_date() + chrono::Duration::weeks(i)
}

pub fn config(n: usize, seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        seed,
        n_per_snapshot: n,
        ..GeneratorConfig::default()
    }
}

pub fn generator(n: usize, seed: u64) -> Generator {
    Generator::new(config(n, seed)).unwrap()
}

pub fn snapshot_at(n: usize, seed: u64, date: NaiveDate) -> Snapshot {
    generator(n, seed).snapshot(&MarketState::neutral(date)).unwrap()
}

pub fn linear(baseline: &Snapshot) -> BaselinePredictor {
    BaselinePredictor::fit(baseline, &PredictorSpec::Linear).unwrap()
}

/// A reference stone in the given class: best grades, Round, first location.
pub fn reference_stone(g: &Generator, class: CaratClass) -> DiamondAttributes {
    DiamondAttributes {
        carat: class.lower(),
        colour: Colour::ALL[0],
        clarity: Clarity::ALL[0],
        cut: Finish::ALL[0],
        polish: Finish::ALL[0],
        symmetry: Finish::ALL[0],
        fluorescence: Fluorescence::ALL[0],
        shape: Shape::Round,
        location: g.locations()[0].clone(),
    }
}

fn probs<T: Grade>(m: &std::collections::BTreeMap<T, f64>) -> Vec<f64> {
    T::ALL.iter().map(|v| m.get(v).copied().unwrap_or(0.0)).collect()
}

/// Exact `E[R | class]` for an additive predictor under a neutral market.
///
/// With a log-additive law and an additive predictor the log ratio is a sum
/// of one term per characteristic, and characteristics are drawn
/// independently, so the expectation factorizes: a carat sum over the class
/// PMF, one sum per other characteristic, and `exp(σ²/2)` for the noise.
pub fn population_class_means(g: &Generator, model: &impl PricePredictor) -> [f64; 7] {
    let cfg = g.config();
    let law = &cfg.attribute_law;
    let state = MarketState::neutral(base_date());
    let d = |a: &DiamondAttributes| g.log_price(a) - model.predict(a).ln();
    let noise = (0.5 * cfg.noise_sd * cfg.noise_sd).exp();
    let mut out = [0.0; 7];
    for class in CaratClass::ALL {
        let a0 = reference_stone(g, class);
        let d0 = d(&a0);
        let carat: f64 = g
            .carat_pmf(class)
            .iter()
            .map(|&(ct, p)| p * d(&DiamondAttributes { carat: ct, ..a0.clone() }).exp())
            .sum();
        let factor = |vary: &dyn Fn(&mut DiamondAttributes, usize), ps: &[f64]| -> f64 {
            ps.iter()
                .enumerate()
                .map(|(i, &p)| {
                    let mut a = a0.clone();
                    vary(&mut a, i);
                    p * (d(&a) - d0).exp()
                })
                .sum()
        };
        let colour = factor(&|a, i| a.colour = Colour::ALL[i], &probs(&law.colour));
        let clarity = factor(&|a, i| a.clarity = Clarity::ALL[i], &probs(&law.clarity));
        let cut = factor(&|a, i| a.cut = Finish::ALL[i], &probs(&law.cut));
        let polish = factor(&|a, i| a.polish = Finish::ALL[i], &probs(&law.polish));
        let symmetry = factor(&|a, i| a.symmetry = Finish::ALL[i], &probs(&law.symmetry));
        let fluor = factor(&|a, i| a.fluorescence = Fluorescence::ALL[i], &probs(&law.fluorescence));
        let shape = factor(&|a, i| a.shape = Shape::ALL[i], &g.shape_mix(&state));
        let locs = g.locations().to_vec();
        let loc_p: Vec<f64> = locs.iter().map(|l| law.location[l.as_str()]).collect();
        let location = factor(&|a, i| a.location = locs[i].clone(), &loc_p);
        out[class.index()] = noise * carat * colour * clarity * cut * polish * symmetry * fluor * shape * location;
    }
    out
}

/// Simulates Holt's linear method in error-correction form.
pub fn simulate_holt(n: usize, alpha: f64, beta: f64, sd: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sd).unwrap();
    let (mut level, mut trend) = (1000.0, 1.0);
    (0..n)
        .map(|_| {
            let e = noise.sample(&mut rng);
            let x = level + trend + e;
            level += trend + alpha * e;
            trend += alpha * beta * e;
            x
        })
        .collect()
}

/// One-step SSE of Holt's method with `l_1 = x_1`, `b_1 = x_2 - x_1`,
/// summed from the third observation.
pub fn holt_sse(x: &[f64], alpha: f64, beta: f64) -> f64 {
    holt_sse_from(x, alpha, beta, 2)
}

/// As [`holt_sse`], summing squared errors from zero-based index `from`.
pub fn holt_sse_from(x: &[f64], alpha: f64, beta: f64, from: usize) -> f64 {
    let (mut l, mut b) = (x[0], x[1] - x[0]);
    let mut sse = 0.0;
    for t in 1..x.len() {
        let f = l + b;
        if t >= from {
            sse += (x[t] - f) * (x[t] - f);
        }
        let nl = alpha * x[t] + (1.0 - alpha) * f;
        b = beta * (nl - l) + (1.0 - beta) * b;
        l = nl;
    }
    sse
}

/// Minimum of [`holt_sse`] over a grid of step `step` on `(0, 1]²`.
pub fn holt_grid_min(x: &[f64], step: f64) -> (f64, f64, f64) {
    holt_grid_min_from(x, step, 2)
}

pub fn holt_grid_min_from(x: &[f64], step: f64, from: usize) -> (f64, f64, f64) {
    let k = (1.0 / step).round() as usize;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 1..=k {
        for j in 1..=k {
            let (a, b) = (i as f64 * step, j as f64 * step);
            let s = holt_sse_from(x, a, b, from);
            if s < best.0 {
                best = (s, a, b);
            }
        }
    }
    best
}

pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}
