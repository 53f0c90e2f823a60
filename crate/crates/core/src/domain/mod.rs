//! Core value types, snapshot CSV ingestion and validation.

mod external;
mod grades;
mod ingest;
mod price;

use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use external::{import_external_series, read_external_series, ExternalSeries};
pub use grades::{Clarity, Colour, Finish, Fluorescence, Grade, Shape};
pub use ingest::{
    parse_snapshot_csv, read_raw_snapshot, read_snapshot, validate_row, validate_snapshot,
    write_snapshot, IngestOptions, ParsedSnapshot, RawRow, RawSnapshot, RejectReason, Rejection, SnapshotRows,
    ValidationReport, SNAPSHOT_HEADER,
};
pub use price::{nanos_to_usd, Price, PriceParseError};

/// Smallest admissible carat weight (inclusive).
pub const MIN_CARAT: f64 = 0.25;
/// Upper carat bound (exclusive).
pub const MAX_CARAT: f64 = 100.0;

/// Market-city code, canonicalized to trimmed upper case.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Location(String);

impl Location {
    pub fn new(code: &str) -> Option<Self> {
        let c = code.trim();
        if c.is_empty() {
            None
        } else {
            Some(Location(c.to_ascii_uppercase()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The priced characteristics of one stone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiamondAttributes {
    pub carat: f64,
    pub colour: Colour,
    pub clarity: Clarity,
    pub cut: Finish,
    pub polish: Finish,
    pub symmetry: Finish,
    pub fluorescence: Fluorescence,
    pub shape: Shape,
    pub location: Location,
}

impl DiamondAttributes {
    pub fn carat_in_range(&self) -> bool {
        carat_in_range(self.carat)
    }
}

pub fn carat_in_range(carat: f64) -> bool {
    (MIN_CARAT..MAX_CARAT).contains(&carat)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricedDiamond {
    pub attributes: DiamondAttributes,
    pub price: Price,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

impl PricedDiamond {
    pub fn new(attributes: DiamondAttributes, price: Price) -> Self {
        PricedDiamond {
            attributes,
            price,
            id: None,
        }
    }

    pub fn check(&self) -> Result<(), RejectReason> {
        if self.attributes.carat < MIN_CARAT || self.attributes.carat.is_nan() {
            return Err(RejectReason::CaratBelowMin);
        }
        if self.attributes.carat >= MAX_CARAT {
            return Err(RejectReason::CaratAboveMax);
        }
        if !self.price.is_positive() {
            return Err(RejectReason::NonPositivePrice);
        }
        Ok(())
    }
}

/// A dated batch of priced stones; one index point is computed per snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    date: NaiveDate,
    records: Vec<PricedDiamond>,
}

impl Snapshot {
    /// Builds a snapshot, enforcing non-emptiness and per-record invariants.
    pub fn new(date: NaiveDate, records: Vec<PricedDiamond>) -> crate::Result<Self> {
        if records.is_empty() {
            return Err(crate::HciError::EmptySnapshot { rejected: 0 });
        }
        if let Some((i, reason)) = records
            .iter()
            .enumerate()
            .find_map(|(i, r)| r.check().err().map(|e| (i, e)))
        {
            return Err(crate::HciError::Invalid(format!("record {i}: {reason}")));
        }
        Ok(Snapshot { date, records })
    }

    pub fn date(&self) -> NaiveDate {
        self.date
    }

    pub fn records(&self) -> &[PricedDiamond] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn into_records(self) -> Vec<PricedDiamond> {
        self.records
    }

    /// Same stones with every price multiplied by `factor` (rounded to the
    /// nearest nano-dollar).
    pub fn scaled_prices(&self, factor: f64) -> crate::Result<Snapshot> {
        let records = self
            .records
            .iter()
            .map(|r| {
                let p = Price::from_f64(r.price.to_f64() * factor)
                    .ok_or_else(|| crate::HciError::Invalid("scaled price overflow".into()))?;
                Ok(PricedDiamond {
                    price: p,
                    ..r.clone()
                })
            })
            .collect::<crate::Result<Vec<_>>>()?;
        Snapshot::new(self.date, records)
    }
}
