//! Partitions of the stone universe used for weighting and sub-indices.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{Colour, DiamondAttributes, Grade, Shape, MAX_CARAT, MIN_CARAT};
use crate::{HciError, Result};

/// Lower bounds of the seven carat classes, followed by the exclusive upper bound.
pub const CARAT_CLASS_BOUNDS: [f64; 8] = [MIN_CARAT, 0.50, 1.00, 2.00, 3.00, 4.00, 5.00, MAX_CARAT];
pub const N_CARAT_CLASSES: usize = 7;

/// One of the seven half-open carat intervals; a boundary weight belongs to
/// the upper class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CaratClass(u8);

impl CaratClass {
    pub const ALL: [CaratClass; N_CARAT_CLASSES] = [
        CaratClass(0),
        CaratClass(1),
        CaratClass(2),
        CaratClass(3),
        CaratClass(4),
        CaratClass(5),
        CaratClass(6),
    ];

    pub fn from_index(i: usize) -> Option<Self> {
        (i < N_CARAT_CLASSES).then_some(CaratClass(i as u8))
    }

    /// Zero-based position.
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// One-based class number as used in published tables.
    pub fn number(self) -> usize {
        self.0 as usize + 1
    }

    pub fn lower(self) -> f64 {
        CARAT_CLASS_BOUNDS[self.index()]
    }

    pub fn upper(self) -> f64 {
        CARAT_CLASS_BOUNDS[self.index() + 1]
    }

    pub fn label(self) -> &'static str {
        ["0.25-0.49", "0.50-0.99", "1.00-1.99", "2.00-2.99", "3.00-3.99", "4.00-4.99", "5+"][self.index()]
    }

    /// Class of a valid carat weight.
    pub fn of(carat: f64) -> Result<Self> {
        if !(MIN_CARAT..MAX_CARAT).contains(&carat) {
            return Err(HciError::Invalid(format!(
                "carat {carat} outside [{MIN_CARAT}, {MAX_CARAT})"
            )));
        }
        let i = CARAT_CLASS_BOUNDS[1..N_CARAT_CLASSES]
            .iter()
            .take_while(|&&b| carat >= b)
            .count();
        Ok(CaratClass(i as u8))
    }
}

impl fmt::Display for CaratClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "class {}", self.number())
    }
}

/// Carat-class assignment for the default grouping.
pub fn assign_group(carat: f64) -> Result<CaratClass> {
    CaratClass::of(carat)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GroupingScheme {
    #[default]
    CaratClass,
    Shape,
    Colour,
}

impl GroupingScheme {
    pub fn n_groups(self) -> usize {
        match self {
            GroupingScheme::CaratClass => N_CARAT_CLASSES,
            GroupingScheme::Shape => Shape::count(),
            GroupingScheme::Colour => Colour::count(),
        }
    }

    pub fn labels(self) -> Vec<String> {
        match self {
            GroupingScheme::CaratClass => CaratClass::ALL.iter().map(|c| c.label().to_string()).collect(),
            GroupingScheme::Shape => Shape::ALL.iter().map(|s| s.code().to_string()).collect(),
            GroupingScheme::Colour => Colour::ALL.iter().map(|s| s.code().to_string()).collect(),
        }
    }

    /// Group of a validated stone. Panics on an out-of-range carat under the
    /// carat scheme; validated snapshots never contain one.
    pub fn group_of(self, a: &DiamondAttributes) -> usize {
        match self {
            GroupingScheme::CaratClass => CaratClass::of(a.carat)
                .expect("validated carat lies in the class partition")
                .index(),
            GroupingScheme::Shape => a.shape.ordinal(),
            GroupingScheme::Colour => a.colour.ordinal(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GroupingScheme::CaratClass => "carat",
            GroupingScheme::Shape => "shape",
            GroupingScheme::Colour => "colour",
        }
    }
}

impl std::str::FromStr for GroupingScheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "carat" | "carat_class" => Ok(GroupingScheme::CaratClass),
            "shape" => Ok(GroupingScheme::Shape),
            "colour" | "color" => Ok(GroupingScheme::Colour),
            other => Err(format!("unknown grouping scheme {other:?}")),
        }
    }
}
