//! Exact rational helpers: construction, text formatting, and the few
//! float conversions the reports need.
//!
//! Values are written as plain decimal strings whenever the denominator is a
//! product of 2s and 5s (`"0.25"`, `"-3"`), and as `"p/q"` otherwise
//! (`"1/3"`). Parsing accepts integers, decimals, and fractions, so the
//! round-trip is bit-exact in both directions.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Rational from an integer.
pub fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Rational `n/d`.
pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseRationalError {
    #[error("empty rational literal")]
    Empty,
    #[error("malformed rational literal `{0}`")]
    Malformed(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

/// Parse `"3"`, `"-0.25"`, or `"7/12"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational, ParseRationalError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(ParseRationalError::Empty);
    }
    let malformed = || ParseRationalError::Malformed(text.to_string());
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| malformed())?;
        let den: BigInt = den.trim().parse().map_err(|_| malformed())?;
        if den.is_zero() {
            return Err(ParseRationalError::ZeroDenominator(text.to_string()));
        }
        return Ok(BigRational::new(num, den));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(malformed());
        }
        let negative = int_part.starts_with('-');
        let int_digits = int_part.trim_start_matches(['-', '+']);
        if !int_digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(malformed());
        }
        let scale = BigInt::from(10u8).pow(frac_part.len() as u32);
        let int_val: BigInt = if int_digits.is_empty() {
            BigInt::zero()
        } else {
            int_digits.parse().map_err(|_| malformed())?
        };
        let frac_val: BigInt = frac_part.parse().map_err(|_| malformed())?;
        let mut numer = int_val * &scale + frac_val;
        if negative {
            numer = -numer;
        }
        return Ok(BigRational::new(numer, scale));
    }
    let n: BigInt = s.parse().map_err(|_| malformed())?;
    Ok(BigRational::from_integer(n))
}

/// Format exactly: decimal when the denominator divides a power of ten,
/// `"p/q"` otherwise.
pub fn format_rational(r: &BigRational) -> String {
    let denom = r.denom();
    if denom.is_one() {
        return r.numer().to_string();
    }
    // Count factors of 2 and 5; anything left over forces fraction form.
    let mut rest = denom.to_biguint().expect("reduced denominator is positive");
    let two = BigUint::from(2u8);
    let five = BigUint::from(5u8);
    let mut twos = 0u32;
    let mut fives = 0u32;
    while (&rest % &two).is_zero() {
        rest /= &two;
        twos += 1;
    }
    while (&rest % &five).is_zero() {
        rest /= &five;
        fives += 1;
    }
    if !rest.is_one() {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let digits = twos.max(fives);
    let scale = BigInt::from(10u8).pow(digits);
    let scaled = (r.numer() * &scale / denom).abs();
    let sign = if r.numer().is_negative() { "-" } else { "" };
    let whole = &scaled / &scale;
    let frac = &scaled % &scale;
    let mut frac_str = frac.to_string();
    while frac_str.len() < digits as usize {
        frac_str.insert(0, '0');
    }
    format!("{sign}{whole}.{frac_str}")
}

/// `"p/q"` form regardless of denominator, for probability fields.
pub fn format_fraction(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Natural logarithm of a positive rational, robust to numerators and
/// denominators far outside f64 range.
pub fn ln_rational(r: &BigRational) -> f64 {
    assert!(r.is_positive(), "ln of non-positive rational");
    ln_bigint(r.numer()) - ln_bigint(r.denom())
}

fn ln_bigint(n: &BigInt) -> f64 {
    let n = n.to_biguint().expect("positive");
    let bits = n.bits();
    if bits <= 52 {
        return n.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 52;
    let mantissa = (&n >> shift).to_f64().expect("52-bit mantissa");
    mantissa.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Round to the nearest integer, halves away from zero.
pub fn round_half_away(r: &BigRational) -> BigInt {
    let half = ratio(1, 2);
    let shifted = r.abs() + half;
    let k = shifted.floor().to_integer();
    if r.is_negative() {
        -k
    } else {
        k
    }
}

/// Serde adapter storing rationals as exact strings.
pub mod serde_rational {
    use super::{format_rational, parse_rational};
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &BigRational, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(de)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for `Option<BigRational>`.
pub mod serde_rational_opt {
    use super::{format_rational, parse_rational};
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Option<BigRational>, ser: S) -> Result<S::Ok, S::Error> {
        match r {
            Some(r) => ser.serialize_some(&format_rational(r)),
            None => ser.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        de: D,
    ) -> Result<Option<BigRational>, D::Error> {
        let s = Option::<String>::deserialize(de)?;
        s.map(|s| parse_rational(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}
