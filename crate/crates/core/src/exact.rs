//! Exact rational arithmetic for privacy accounting.
//!
//! User-facing parameters arrive as `f64`. They are read as the shortest
//! decimal that round-trips to the same float (so `0.1` means one tenth),
//! and every linear constant and budget ledger is kept as a `BigRational`.
//! Floats only come back out at the edges (noise sampling, reporting).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// The decimal the user most plausibly meant by `x`.
pub fn from_decimal(x: f64) -> Result<Rational> {
    if !x.is_finite() {
        return Err(Error::InvalidLoss(format!("{x} is not finite")));
    }
    // `Display` for f64 is the shortest round-trip form and never uses an exponent.
    parse_decimal(&format!("{x}")).ok_or_else(|| Error::InvalidLoss(format!("cannot read {x}")))
}

/// The exact binary value of `x`.
pub fn from_binary(x: f64) -> Result<Rational> {
    Rational::from_float(x).ok_or_else(|| Error::InvalidLoss(format!("{x} is not finite")))
}

/// Parses `[-]digits[.digits]`.
pub fn parse_decimal(s: &str) -> Option<Rational> {
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    let denom = num_traits::pow(BigInt::from(10u32), frac_part.len());
    let r = Rational::new(numer, denom);
    Some(if negative { -r } else { r })
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| if r.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

/// Renders `r` with exactly `places` digits after the point, rounding half away from zero.
pub fn render_fixed(r: &Rational, places: usize) -> String {
    let scale = num_traits::pow(BigInt::from(10u32), places);
    let scaled = (r * Rational::from_integer(scale.clone())).round().to_integer();
    let negative = scaled.is_negative();
    let digits = scaled.abs().to_string();
    let digits =
        if digits.len() <= places { format!("{}{}", "0".repeat(places + 1 - digits.len()), digits) } else { digits };
    let (int_part, frac_part) = digits.split_at(digits.len() - places);
    let sign = if negative { "-" } else { "" };
    if places == 0 {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac_part}")
    }
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

pub fn max(a: &Rational, b: &Rational) -> Rational {
    if a >= b {
        a.clone()
    } else {
        b.clone()
    }
}
