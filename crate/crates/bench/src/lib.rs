//! Shared fixtures for the benchmarks.

use chrono::NaiveDate;
use hci_core::synthgen::{Generator, GeneratorConfig, MarketState};
use hci_core::{BaselinePredictor, PredictorSpec, Snapshot};

pub fn base_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2015, 1, 5).expect("valid date")
}

/// A default-market snapshot of `n` listings.
pub fn snapshot(n: usize, seed: u64) -> Snapshot {
    let gen = Generator::new(GeneratorConfig {
        n_per_snapshot: n,
        seed,
        ..Default::default()
    })
    .expect("default generator config is valid");
    gen.snapshot(&MarketState::neutral(base_date()))
        .expect("neutral state is valid")
}

/// Linear predictor fitted to a default-market baseline of `n` listings.
pub fn linear_predictor(n: usize, seed: u64) -> (Snapshot, BaselinePredictor) {
    let base = snapshot(n, seed);
    let model = BaselinePredictor::fit(&base, &PredictorSpec::Linear).expect("baseline fit");
    (base, model)
}
