//! Grade vocabularies for the eight quality characteristics.
//!
//! Every enumeration is ordered best to worst; the discriminant order is the
//! ordinal used by the tree features and by the generator's cumulative draws.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Common surface of the grade enumerations.
pub trait Grade: Copy + Eq + Ord + fmt::Debug + 'static {
    const ALL: &'static [Self];
    /// Human name of the characteristic, used in rejection messages.
    const NAME: &'static str;

    fn ordinal(self) -> usize;
    fn code(self) -> &'static str;

    fn from_ordinal(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    fn count() -> usize {
        Self::ALL.len()
    }
}

macro_rules! grade_enum {
    ($(#[$meta:meta])* $name:ident, $label:literal, [$($variant:ident => $code:literal),+ $(,)?]) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl Grade for $name {
            const ALL: &'static [Self] = &[$($name::$variant),+];
            const NAME: &'static str = $label;

            fn ordinal(self) -> usize {
                self as usize
            }

            fn code(self) -> &'static str {
                match self {
                    $($name::$variant => $code),+
                }
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let t = s.trim();
                $(
                    if t.eq_ignore_ascii_case($code) {
                        return Ok($name::$variant);
                    }
                )+
                Err(format!("unknown {} grade {:?}", $label, s))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.code())
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.code())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

grade_enum!(
    /// Colour grade, D (colourless) to M.
    Colour, "colour", [D => "D", E => "E", F => "F", G => "G", H => "H", I => "I", J => "J", K => "K", L => "L", M => "M"]
);

grade_enum!(
    Clarity, "clarity", [
        FL => "FL", IF => "IF", VVS1 => "VVS1", VVS2 => "VVS2", VS1 => "VS1",
        VS2 => "VS2", SI1 => "SI1", SI2 => "SI2", I1 => "I1",
    ]
);

grade_enum!(
    /// Shared scale for cut, polish and symmetry.
    Finish, "finish", [EX => "EX", VG => "VG", G => "G", F => "F", P => "P"]
);

grade_enum!(
    Fluorescence, "fluorescence", [NON => "NON", FNT => "FNT", MED => "MED", STG => "STG", VST => "VST"]
);

grade_enum!(
    Shape, "shape", [
        Round => "Round", Cushion => "Cushion", Princess => "Princess", Oval => "Oval",
        Emerald => "Emerald", Pear => "Pear", Marquise => "Marquise", Radiant => "Radiant",
        Asscher => "Asscher", Heart => "Heart",
    ]
);
