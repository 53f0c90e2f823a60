//! Design-matrix encoding of stone attributes.
//!
//! Columns: intercept, class dummies for classes 2-7, one within-class carat
//! slope per class (`(carat - class lower bound)` on that class's rows), then
//! drop-first one-hot blocks for colour, clarity, cut, polish, symmetry,
//! fluorescence, shape and location. The location block has one extra column
//! for locations not seen at fit time.

use serde::{Deserialize, Serialize};

use crate::domain::{
    Clarity, Colour, DiamondAttributes, Finish, Fluorescence, Grade, Location, Snapshot,
};
use crate::index::{CaratClass, N_CARAT_CLASSES};

/// Locations seen in the training snapshot, sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub locations: Vec<Location>,
}

impl Vocabulary {
    pub fn from_snapshot(snapshot: &Snapshot) -> Self {
        let mut locations: Vec<Location> = snapshot
            .records()
            .iter()
            .map(|r| r.attributes.location.clone())
            .collect();
        locations.sort();
        locations.dedup();
        Vocabulary { locations }
    }

    /// Code of a location; unseen locations share the reserved code `len`.
    pub fn location_code(&self, loc: &Location) -> usize {
        self.locations.binary_search(loc).unwrap_or(self.locations.len())
    }

    pub fn other_code(&self) -> usize {
        self.locations.len()
    }
}

/// Column offsets of each block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub class: usize,
    pub slope: usize,
    pub colour: usize,
    pub clarity: usize,
    pub cut: usize,
    pub polish: usize,
    pub symmetry: usize,
    pub fluorescence: usize,
    pub shape: usize,
    pub location: usize,
    pub dim: usize,
}

impl Layout {
    pub fn new(vocab: &Vocabulary) -> Self {
        let class = 1;
        let slope = class + N_CARAT_CLASSES - 1;
        let colour = slope + N_CARAT_CLASSES;
        let clarity = colour + Colour::count() - 1;
        let cut = clarity + Clarity::count() - 1;
        let polish = cut + Finish::count() - 1;
        let symmetry = polish + Finish::count() - 1;
        let fluorescence = symmetry + Finish::count() - 1;
        let shape = fluorescence + Fluorescence::count() - 1;
        let location = shape + crate::domain::Shape::count() - 1;
        // Seen locations minus the reference, plus the reserved bucket.
        let dim = location + vocab.locations.len().saturating_sub(1) + 1;
        Layout {
            class,
            slope,
            colour,
            clarity,
            cut,
            polish,
            symmetry,
            fluorescence,
            shape,
            location,
            dim,
        }
    }

    /// Column of the reserved location bucket.
    pub fn other_location_column(&self) -> usize {
        self.dim - 1
    }

    /// Visits the non-zero entries of a row as `(column, value)`.
    pub fn for_each_entry(&self, vocab: &Vocabulary, a: &DiamondAttributes, mut f: impl FnMut(usize, f64)) {
        let class = CaratClass::of(a.carat).expect("validated carat").index();
        f(0, 1.0);
        if class > 0 {
            f(self.class + class - 1, 1.0);
        }
        f(self.slope + class, a.carat - CaratClass::ALL[class].lower());
        let mut one_hot = |offset: usize, ord: usize| {
            if ord > 0 {
                f(offset + ord - 1, 1.0);
            }
        };
        one_hot(self.colour, a.colour.ordinal());
        one_hot(self.clarity, a.clarity.ordinal());
        one_hot(self.cut, a.cut.ordinal());
        one_hot(self.polish, a.polish.ordinal());
        one_hot(self.symmetry, a.symmetry.ordinal());
        one_hot(self.fluorescence, a.fluorescence.ordinal());
        one_hot(self.shape, a.shape.ordinal());
        let code = vocab.location_code(&a.location);
        if code == vocab.other_code() {
            f(self.other_location_column(), 1.0);
        } else {
            one_hot(self.location, code);
        }
    }
}

/// Dense encoded row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

pub fn encode(vocab: &Vocabulary, attributes: &DiamondAttributes) -> FeatureVector {
    let layout = Layout::new(vocab);
    let mut v = vec![0.0; layout.dim];
    layout.for_each_entry(vocab, attributes, |j, x| v[j] = x);
    FeatureVector(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Shape;

    fn vocab() -> Vocabulary {
        Vocabulary {
            locations: ["ANTWERP", "NY"].iter().map(|s| Location::new(s).unwrap()).collect(),
        }
    }

    fn stone(carat: f64, colour: Colour) -> DiamondAttributes {
        DiamondAttributes {
            carat,
            colour,
            clarity: Clarity::VS1,
            cut: Finish::EX,
            polish: Finish::VG,
            symmetry: Finish::EX,
            fluorescence: Fluorescence::NON,
            shape: Shape::Oval,
            location: Location::new("NY").unwrap(),
        }
    }

    #[test]
    fn one_carat_is_a_knot() {
        let v = vocab();
        let l = Layout::new(&v);
        let f = encode(&v, &stone(1.0, Colour::G));
        assert_eq!(f.0[l.class + 1], 1.0);
        assert_eq!(f.0[l.slope + 2], 0.0);
        assert_eq!(f.0[l.class], 0.0);
        assert_eq!(f.0.len(), l.dim);
    }

    #[test]
    fn colour_change_is_local() {
        let v = vocab();
        let l = Layout::new(&v);
        let d = encode(&v, &stone(1.3, Colour::D)).0;
        let e = encode(&v, &stone(1.3, Colour::E)).0;
        for j in 0..l.dim {
            if (l.colour..l.clarity).contains(&j) {
                continue;
            }
            assert_eq!(d[j], e[j], "column {j}");
        }
        assert_ne!(d, e);
        assert_eq!(encode(&v, &stone(1.3, Colour::D)), encode(&v, &stone(1.3, Colour::D)));
    }

    #[test]
    fn unseen_location_uses_reserved_column() {
        let v = vocab();
        let l = Layout::new(&v);
        let mut s = stone(0.4, Colour::H);
        s.location = Location::new("DUBAI").unwrap();
        let f = encode(&v, &s).0;
        assert_eq!(f[l.other_location_column()], 1.0);
        s.location = Location::new("ANTWERP").unwrap();
        let f = encode(&v, &s).0;
        assert!(f[l.location..].iter().all(|&x| x == 0.0));
    }
}
