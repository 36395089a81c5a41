//! Exact fixed-point time arithmetic.
//!
//! All schedule arithmetic runs on integer counts of a configurable unit
//! (default 0.001 ms). Values enter and leave the system as decimal
//! millisecond strings so no floating-point drift can accumulate.

use std::fmt;

use num_integer::Integer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TimeError {
    #[error("malformed time literal `{0}`")]
    Malformed(String),
    #[error("time `{0}` is negative")]
    Negative(String),
    #[error("time `{0}` is not a multiple of the configured resolution")]
    NotRepresentable(String),
    #[error("resolution `{0}` must evenly divide 1 ms")]
    BadResolution(String),
    #[error("time arithmetic overflow")]
    Overflow,
}

/// Conversion factor between milliseconds and integer time units.
///
/// Invariant: `units_per_ms >= 1`, so the resolution `1 / units_per_ms` ms
/// always divides one millisecond exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeScale {
    units_per_ms: i64,
}

impl Default for TimeScale {
    fn default() -> Self {
        TimeScale { units_per_ms: 1000 }
    }
}

impl TimeScale {
    pub fn from_units_per_ms(units_per_ms: i64) -> Result<Self, TimeError> {
        if units_per_ms < 1 {
            return Err(TimeError::BadResolution(units_per_ms.to_string()));
        }
        Ok(TimeScale { units_per_ms })
    }

    /// Builds a scale from a decimal resolution in ms, e.g. "0.001" or "1".
    pub fn from_resolution_ms(text: &str) -> Result<Self, TimeError> {
        let (num, den) = parse_decimal(text)?;
        if num <= 0 {
            return Err(TimeError::BadResolution(text.to_string()));
        }
        // resolution = num/den ms per unit; units per ms = den/num.
        let (q, r) = den.div_rem(&num);
        if r != 0 {
            return Err(TimeError::BadResolution(text.to_string()));
        }
        TimeScale::from_units_per_ms(q)
    }

    pub fn units_per_ms(&self) -> i64 {
        self.units_per_ms
    }

    pub fn resolution_ms_string(&self) -> String {
        self.format_units(1)
    }

    /// Parses a non-negative decimal millisecond literal into units.
    pub fn parse_ms(&self, text: &str) -> Result<TimeValue, TimeError> {
        let (num, den) = parse_decimal(text)?;
        if num < 0 {
            return Err(TimeError::Negative(text.to_string()));
        }
        // units = num/den * units_per_ms, required exact.
        let scaled = num
            .checked_mul(self.units_per_ms)
            .ok_or(TimeError::Overflow)?;
        let (q, r) = scaled.div_rem(&den);
        if r != 0 {
            return Err(TimeError::NotRepresentable(text.to_string()));
        }
        Ok(TimeValue(q))
    }

    /// Formats units as a decimal millisecond string without trailing zeros.
    pub fn format(&self, t: TimeValue) -> String {
        self.format_units(t.0)
    }

    fn format_units(&self, units: i64) -> String {
        let sign = if units < 0 { "-" } else { "" };
        let abs = units.unsigned_abs();
        let upm = self.units_per_ms as u64;
        let whole = abs / upm;
        let frac = abs % upm;
        if frac == 0 {
            return format!("{sign}{whole}");
        }
        // Scale the fractional part to decimal digits: frac/upm in lowest terms.
        let mut digits = String::new();
        let mut rem = frac;
        while rem != 0 {
            rem *= 10;
            digits.push(char::from(b'0' + (rem / upm) as u8));
            rem %= upm;
            if digits.len() > 18 {
                break;
            }
        }
        format!("{sign}{whole}.{digits}")
    }

    pub fn to_ms_f64(&self, t: TimeValue) -> f64 {
        t.0 as f64 / self.units_per_ms as f64
    }

    pub fn delta_ms_f64(&self, units: i64) -> f64 {
        units as f64 / self.units_per_ms as f64
    }

    /// Rounds a (ms) float to the nearest representable value, clamping at 0.
    pub fn quantize_ms(&self, ms: f64) -> TimeValue {
        let units = (ms * self.units_per_ms as f64).round();
        TimeValue((units.max(0.0)) as i64)
    }
}

/// A non-negative instant or duration in integer time units.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub struct TimeValue(i64);

pub const ZERO: TimeValue = TimeValue(0);

impl TimeValue {
    pub fn from_units(units: i64) -> Self {
        debug_assert!(units >= 0);
        TimeValue(units)
    }

    pub fn units(&self) -> i64 {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0 == 0
    }

    pub fn checked_add(self, rhs: TimeValue) -> Result<TimeValue, TimeError> {
        self.0
            .checked_add(rhs.0)
            .map(TimeValue)
            .ok_or(TimeError::Overflow)
    }

    /// Saturating difference; use `signed_diff` when the sign matters.
    pub fn saturating_sub(self, rhs: TimeValue) -> TimeValue {
        TimeValue((self.0 - rhs.0).max(0))
    }

    /// `self - rhs` in units, possibly negative.
    pub fn signed_diff(self, rhs: TimeValue) -> i64 {
        self.0 - rhs.0
    }

    pub fn scale_by(self, factor: i64) -> Result<TimeValue, TimeError> {
        self.0
            .checked_mul(factor)
            .map(TimeValue)
            .ok_or(TimeError::Overflow)
    }

    pub fn lcm_with(self, rhs: TimeValue) -> Result<TimeValue, TimeError> {
        if self.0 == 0 || rhs.0 == 0 {
            return Ok(TimeValue(self.0.max(rhs.0)));
        }
        let g = self.0.gcd(&rhs.0);
        (self.0 / g).checked_mul(rhs.0).map(TimeValue).ok_or(TimeError::Overflow)
    }
}

impl std::ops::Add for TimeValue {
    type Output = TimeValue;
    fn add(self, rhs: TimeValue) -> TimeValue {
        TimeValue(self.0 + rhs.0)
    }
}

impl fmt::Display for TimeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}u", self.0)
    }
}

/// Parses a decimal literal into an exact fraction (numerator, denominator).
fn parse_decimal(text: &str) -> Result<(i64, i64), TimeError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(TimeError::Malformed(text.to_string()));
    }
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1i64, rest),
        None => (1i64, s),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(TimeError::Malformed(text.to_string()));
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(TimeError::Malformed(text.to_string()));
    }
    let mut num: i64 = 0;
    for c in int_part.chars().chain(frac_part.chars()) {
        num = num
            .checked_mul(10)
            .and_then(|n| n.checked_add((c as u8 - b'0') as i64))
            .ok_or(TimeError::Overflow)?;
    }
    let mut den: i64 = 1;
    for _ in 0..frac_part.len() {
        den = den.checked_mul(10).ok_or(TimeError::Overflow)?;
    }
    Ok((sign * num, den))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_formats_round_trip() {
        let scale = TimeScale::default();
        for text in ["0", "2", "42.05", "44.075", "0.001", "100"] {
            let t = scale.parse_ms(text).unwrap();
            assert_eq!(scale.format(t), text.trim_start_matches('+'));
        }
    }

    #[test]
    fn rejects_unrepresentable_and_negative() {
        let scale = TimeScale::from_resolution_ms("0.1").unwrap();
        assert_eq!(scale.units_per_ms(), 10);
        assert!(matches!(
            scale.parse_ms("0.25"),
            Err(TimeError::NotRepresentable(_))
        ));
        assert!(matches!(scale.parse_ms("-1"), Err(TimeError::Negative(_))));
        assert!(matches!(scale.parse_ms("x"), Err(TimeError::Malformed(_))));
    }

    #[test]
    fn resolution_must_divide_one_ms() {
        assert!(TimeScale::from_resolution_ms("0.3").is_err());
        assert!(TimeScale::from_resolution_ms("0").is_err());
        assert_eq!(TimeScale::from_resolution_ms("1").unwrap().units_per_ms(), 1);
    }

    #[test]
    fn lcm_matches_arithmetic() {
        let scale = TimeScale::default();
        let a = scale.parse_ms("10").unwrap();
        let b = scale.parse_ms("4").unwrap();
        assert_eq!(a.lcm_with(b).unwrap(), scale.parse_ms("20").unwrap());
    }
}
