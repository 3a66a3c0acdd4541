//! Exact rational arithmetic helpers.
//!
//! Every non-integral quantity in the engine (BES usage, social cost, PUE,
//! the BES unit price, the FPTAS accuracy) is an exact rational. Text
//! encodings use a terminating decimal when one exists and `p/q` otherwise,
//! so values survive a serialize/parse cycle unchanged.

use std::fmt::Write as _;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::Zero;
use serde::{Deserialize, Deserializer, Serializer};

pub type Rational = Ratio<i128>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid number {input:?}: {reason}")]
pub struct ParseRationalError {
    pub input: String,
    pub reason: &'static str,
}

fn bad(input: &str, reason: &'static str) -> ParseRationalError {
    ParseRationalError {
        input: input.to_string(),
        reason,
    }
}

/// Parses `"180"`, `"1.6"`, `"-0.25"`, `"3/2"` or `"1e-1"` into an exact rational.
pub fn parse_rational(input: &str) -> Result<Rational, ParseRationalError> {
    let s = input.trim();
    if s.is_empty() {
        return Err(bad(input, "empty"));
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: i128 = num
            .trim()
            .parse()
            .map_err(|_| bad(input, "bad numerator"))?;
        let den: i128 = den
            .trim()
            .parse()
            .map_err(|_| bad(input, "bad denominator"))?;
        if den == 0 {
            return Err(bad(input, "zero denominator"));
        }
        return Ok(Rational::new(num, den));
    }

    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i32 = s[pos + 1..]
                .parse()
                .map_err(|_| bad(input, "bad exponent"))?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad(input, "no digits"));
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return Err(bad(input, "not a decimal number"));
    }
    if int_part.len() + frac_part.len() > 30 || exponent.abs() > 30 {
        return Err(bad(input, "too many digits"));
    }

    let mut numer: i128 = 0;
    for c in int_part.chars().chain(frac_part.chars()) {
        numer = numer * 10 + i128::from(c as u8 - b'0');
    }
    let scale = exponent - frac_part.len() as i32;
    let value = if scale >= 0 {
        Rational::from_integer(numer * 10i128.pow(scale as u32))
    } else {
        Rational::new(numer, 10i128.pow((-scale) as u32))
    };
    Ok(if negative { -value } else { value })
}

/// Formats a rational as an exact decimal when its expansion terminates,
/// otherwise as `p/q` in lowest terms.
pub fn format_rational(value: &Rational) -> String {
    let numer = *value.numer();
    let denom = *value.denom();
    if denom == 1 {
        return numer.to_string();
    }

    let mut rest = denom;
    let mut twos = 0u32;
    let mut fives = 0u32;
    while rest % 2 == 0 {
        rest /= 2;
        twos += 1;
    }
    while rest % 5 == 0 {
        rest /= 5;
        fives += 1;
    }
    if rest != 1 {
        return format!("{numer}/{denom}");
    }

    let places = twos.max(fives);
    let scaled = numer.abs() * (10i128.pow(places) / denom);
    let (whole, frac) = scaled.div_rem(&10i128.pow(places));
    let mut out = String::new();
    if numer.is_negative() {
        out.push('-');
    }
    let _ = write!(out, "{whole}.{frac:0width$}", width = places as usize);
    out
}

/// Largest integer not exceeding `value`.
pub fn floor_int(value: &Rational) -> i128 {
    value.numer().div_floor(value.denom())
}

pub fn is_integral(value: &Rational) -> bool {
    (value - value.trunc()).is_zero()
}

/// Serde adapter writing rationals as strings in the [`format_rational`] encoding
/// and reading strings or JSON numbers.
pub mod serde_text {
    use super::*;

    pub fn serialize<S: Serializer>(value: &Rational, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Rational, D::Error> {
        let raw = serde_json::Value::deserialize(deserializer)?;
        let text = match &raw {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Number(n) => n.to_string(),
            other => {
                return Err(serde::de::Error::custom(format!(
                    "expected a number or numeric string, got {other}"
                )))
            }
        };
        parse_rational(&text).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn parses_decimals_and_fractions() {
        assert_eq!(parse_rational("1.6").unwrap(), r(8, 5));
        assert_eq!(parse_rational("180").unwrap(), r(180, 1));
        assert_eq!(parse_rational("-0.25").unwrap(), r(-1, 4));
        assert_eq!(parse_rational("3/2").unwrap(), r(3, 2));
        assert_eq!(parse_rational(".5").unwrap(), r(1, 2));
        assert_eq!(parse_rational("1e-1").unwrap(), r(1, 10));
        assert_eq!(parse_rational("2.5E2").unwrap(), r(250, 1));
    }

    #[test]
    fn rejects_garbage() {
        for s in ["", "abc", "1.2.3", "1/0", "--1", ".", "1e"] {
            assert!(parse_rational(s).is_err(), "{s}");
        }
    }

    #[test]
    fn formats_terminating_and_repeating() {
        assert_eq!(format_rational(&r(4, 5)), "0.8");
        assert_eq!(format_rational(&r(4484, 1)), "4484");
        assert_eq!(format_rational(&r(-1, 8)), "-0.125");
        assert_eq!(format_rational(&r(1024, 5)), "204.8");
        assert_eq!(format_rational(&r(4484, 3569)), "4484/3569");
        assert_eq!(format_rational(&r(1, 3)), "1/3");
    }

    #[test]
    fn floor_handles_negatives() {
        assert_eq!(floor_int(&r(-1, 2)), -1);
        assert_eq!(floor_int(&r(12240 * 5, 1024)), 59);
        assert_eq!(floor_int(&r(7, 1)), 7);
    }

    proptest! {
        #[test]
        fn text_encoding_round_trips(n in -1_000_000i128..1_000_000, d in 1i128..5000) {
            let value = r(n, d);
            prop_assert_eq!(parse_rational(&format_rational(&value)).unwrap(), value);
        }
    }
}
