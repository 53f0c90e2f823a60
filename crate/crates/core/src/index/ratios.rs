use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grouping::{CaratClass, GroupingScheme};
use crate::domain::{Colour, Grade, Price, PricedDiamond, Shape, Snapshot};
use crate::predictor::PricePredictor;

/// Observed over predicted price for one record, with its group keys.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioRecord {
    /// Position of the record in its snapshot.
    pub record: usize,
    pub class: CaratClass,
    pub shape: Shape,
    pub colour: Colour,
    pub ratio: f64,
    pub price: Price,
}

impl RatioRecord {
    pub fn group(&self, scheme: GroupingScheme) -> usize {
        match scheme {
            GroupingScheme::CaratClass => self.class.index(),
            GroupingScheme::Shape => self.shape.ordinal(),
            GroupingScheme::Colour => self.colour.ordinal(),
        }
    }
}

/// Ratio of one record, or `None` when the prediction is unusable.
pub fn ratio_of(predictor: &(impl PricePredictor + ?Sized), index: usize, r: &PricedDiamond) -> Option<RatioRecord> {
    let predicted = predictor.predict(&r.attributes);
    if !(predicted > 0.0 && predicted.is_finite()) {
        return None;
    }
    let ratio = r.price.to_f64() / predicted;
    Some(RatioRecord {
        record: index,
        class: CaratClass::of(r.attributes.carat).ok()?,
        shape: r.attributes.shape,
        colour: r.attributes.colour,
        ratio,
        price: r.price,
    })
}

/// Ratios for a slice of records numbered from `offset`; unusable
/// predictions are dropped with a warning.
pub fn score_records(
    predictor: &(impl PricePredictor + ?Sized),
    records: &[PricedDiamond],
    offset: usize,
) -> Vec<RatioRecord> {
    let scored: Vec<Option<RatioRecord>> = records
        .par_iter()
        .enumerate()
        .map(|(i, r)| ratio_of(predictor, offset + i, r))
        .collect();
    let dropped = scored.iter().filter(|r| r.is_none()).count();
    if dropped > 0 {
        log::warn!("{dropped} records rejected: predicted price not positive");
    }
    scored.into_iter().flatten().collect()
}

/// One ratio per record of the snapshot.
pub fn compute_ratios(snapshot: &Snapshot, predictor: &(impl PricePredictor + ?Sized)) -> Vec<RatioRecord> {
    score_records(predictor, snapshot.records(), 0)
}
