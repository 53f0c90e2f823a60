use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

const FRACTION_DIGITS: usize = 9;
const NANOS_PER_USD: u64 = 1_000_000_000;

/// An exact USD amount held as an integer count of nano-dollars.
///
/// Totals over a snapshot are summed in `u128` so group values are exact and
/// independent of summation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Price(u64);

impl Price {
    pub const fn from_nanos(nanos: u64) -> Self {
        Price(nanos)
    }

    pub const fn nanos(self) -> u64 {
        self.0
    }

    /// Nearest representable amount to `usd`; `None` for non-finite,
    /// negative or overflowing input.
    pub fn from_f64(usd: f64) -> Option<Self> {
        if !usd.is_finite() || usd < 0.0 {
            return None;
        }
        let nanos = (usd * NANOS_PER_USD as f64).round();
        if nanos >= u64::MAX as f64 {
            return None;
        }
        Some(Price(nanos as u64))
    }

    pub fn to_f64(self) -> f64 {
        let whole = (self.0 / NANOS_PER_USD) as f64;
        let frac = (self.0 % NANOS_PER_USD) as f64 / NANOS_PER_USD as f64;
        whole + frac
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }
}

/// Converts an exact nano-dollar total to USD.
pub fn nanos_to_usd(total: u128) -> f64 {
    let whole = (total / NANOS_PER_USD as u128) as f64;
    let frac = (total % NANOS_PER_USD as u128) as f64 / NANOS_PER_USD as f64;
    whole + frac
}

/// Parse failure for a decimal price field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PriceParseError {
    Negative,
    Malformed,
}

impl FromStr for Price {
    type Err = PriceParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let s = match s.strip_prefix('-') {
            Some(rest) if !rest.is_empty() && rest.bytes().any(|b| b != b'0' && b != b'.') => {
                return Err(PriceParseError::Negative)
            }
            Some(rest) => rest,
            None => s.strip_prefix('+').unwrap_or(s),
        };
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(PriceParseError::Malformed);
        }
        if frac_part.len() > FRACTION_DIGITS
            || !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(PriceParseError::Malformed);
        }
        let whole: u64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| PriceParseError::Malformed)?
        };
        let mut frac: u64 = 0;
        for (i, b) in frac_part.bytes().enumerate() {
            frac += u64::from(b - b'0') * 10u64.pow((FRACTION_DIGITS - 1 - i) as u32);
        }
        whole
            .checked_mul(NANOS_PER_USD)
            .and_then(|w| w.checked_add(frac))
            .map(Price)
            .ok_or(PriceParseError::Malformed)
    }
}

impl fmt::Display for Price {
    /// Writes at least two and at most nine fractional digits, with no
    /// trailing zeros beyond the second.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let whole = self.0 / NANOS_PER_USD;
        let frac = self.0 % NANOS_PER_USD;
        let digits = format!("{frac:09}");
        let trimmed = digits.trim_end_matches('0');
        let shown = if trimmed.len() < 2 { &digits[..2] } else { trimmed };
        write!(f, "{whole}.{shown}")
    }
}
