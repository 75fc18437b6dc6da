//! Exact rational scalars.
//!
//! Every coordinate, weight and bound in the crate is a [`Rational`]. The
//! underlying `BigRational` keeps values in lowest terms with a positive
//! denominator, so structural equality is value equality.

use num::bigint::BigInt;
use num::{BigRational, One, Signed, Zero};
use rand::Rng;

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// `n / d` as a rational. Panics when `d == 0`.
pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Integer `n` as a rational.
pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn relu(v: &Rational) -> Rational {
    if v.is_positive() {
        v.clone()
    } else {
        Rational::zero()
    }
}

pub fn min_q<'a>(a: &'a Rational, b: &'a Rational) -> &'a Rational {
    if a <= b {
        a
    } else {
        b
    }
}

pub fn max_q<'a>(a: &'a Rational, b: &'a Rational) -> &'a Rational {
    if a >= b {
        a
    } else {
        b
    }
}

/// Parses `p/q`, a plain integer, or a finite decimal such as `-0.125`.
///
/// Decimals are converted exactly: `0.1` is `1/10`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let err = || Error::ParseRational(s.to_string());
    let t = s.trim();
    if t.is_empty() {
        return Err(err());
    }
    if let Some((num, den)) = t.split_once('/') {
        let n: BigInt = num.trim().parse().map_err(|_| err())?;
        let d: BigInt = den.trim().parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((whole, frac)) = t.split_once('.') {
        let (neg, whole) = match whole.strip_prefix('-') {
            Some(w) => (true, w),
            None => (false, whole.strip_prefix('+').unwrap_or(whole)),
        };
        if frac.is_empty() && whole.is_empty() {
            return Err(err());
        }
        if !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(err());
        }
        let digits = format!("{whole}{frac}");
        let n: BigInt = if digits.is_empty() {
            BigInt::zero()
        } else {
            digits.parse().map_err(|_| err())?
        };
        let d = num::pow(BigInt::from(10), frac.len());
        let v = Rational::new(n, d);
        return Ok(if neg { -v } else { v });
    }
    let n: BigInt = t.parse().map_err(|_| err())?;
    Ok(Rational::from_integer(n))
}

/// Renders as `p/q`, or `p` when the denominator is one.
pub fn render(v: &Rational) -> String {
    if v.denom().is_one() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

/// Lossy conversion for CSV/plot output only.
pub fn to_f64(v: &Rational) -> f64 {
    use num::ToPrimitive;
    v.to_f64().unwrap_or(f64::NAN)
}

/// Uniform draw from the grid `{lo + k / den}` inside `[lo, hi]`.
pub fn random_on_grid<R: Rng + ?Sized>(rng: &mut R, lo: &Rational, hi: &Rational, den: i64) -> Rational {
    if lo >= hi {
        return lo.clone();
    }
    let width = (hi - lo) * int(den);
    let steps = width.floor().to_integer();
    use num::ToPrimitive;
    let steps = steps.to_i64().unwrap_or(i64::MAX).max(0);
    if steps == 0 {
        return lo.clone();
    }
    let k = rng.gen_range(0..=steps);
    lo + q(k, den)
}

/// Random rational in `[lo, hi]` with a denominator drawn from `1..=max_den`.
pub fn random_in<R: Rng + ?Sized>(rng: &mut R, lo: &Rational, hi: &Rational, max_den: i64) -> Rational {
    let den = rng.gen_range(1..=max_den.max(1));
    random_on_grid(rng, lo, hi, den)
}

/// Serde adapter storing a rational as its `p/q` string.
pub mod as_string {
    use super::{parse_rational, render, Rational};
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&render(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(D::Error::custom)
    }
}

/// Serde adapter for `Vec<Rational>`.
pub mod vec_as_string {
    use super::{parse_rational, render, Rational};
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(render))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| parse_rational(s).map_err(D::Error::custom))
            .collect()
    }
}
