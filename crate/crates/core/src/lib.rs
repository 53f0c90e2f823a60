//! Hedonic collectable price index.
//!
//! A baseline model is fitted to one dated snapshot of priced items and
//! frozen. Every later snapshot is scored against it; the ratios of actual
//! to predicted price are averaged within carat classes and combined with
//! blended value weights into a headline index based at 1000.

pub mod domain;
pub mod error;
pub mod forecast;
pub mod index;
pub mod inference;
pub mod numeric;
pub mod predictor;
pub mod scenario;
pub mod synthgen;

pub use domain::{DiamondAttributes, ExternalSeries, Location, Price, PricedDiamond, Snapshot};
pub use error::{HciError, Result};
pub use index::{GroupingScheme, IndexPoint, IndexSeries, Statistic, WeightVector, WeightingPolicy};
pub use predictor::{BaselinePredictor, PricePredictor, PredictorSpec};

/// Versions of the on-disk formats written by this build.
pub const SNAPSHOT_SCHEMA_VERSION: u32 = 1;
pub const INDEX_SCHEMA_VERSION: u32 = 1;
pub use predictor::MODEL_SCHEMA_VERSION;
