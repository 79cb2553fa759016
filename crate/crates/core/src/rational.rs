//! Exact rational helpers.
//!
//! Every measure identity in the crate is evaluated over [`Q`]; floating point
//! only appears in the few empirical fits (growth exponent, John–Nirenberg
//! constants, `L^p` ratios).

use num::bigint::BigInt;
use num::{BigRational, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational number used throughout.
pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn zero() -> Q {
    Q::zero()
}

pub fn one() -> Q {
    Q::one()
}

pub fn abs(x: &Q) -> Q {
    x.abs()
}

pub fn pow(x: &Q, p: u32) -> Q {
    num::pow(x.clone(), p as usize)
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Smallest integer `>= x`.
pub fn ceil(x: &Q) -> BigInt {
    x.ceil().to_integer()
}

/// Parse `"num/den"` or a bare integer. Decimal points are rejected so that
/// every value round-trips bit-exactly.
pub fn parse(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || Error::Parse(format!("invalid rational {s:?}; expected \"num/den\""));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(Q::new(n, d))
}

/// Canonical `"num/den"` form (denominator always present, reduced, positive).
pub fn format(x: &Q) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Positive integer exponent from a rational; anything else is rejected.
pub fn integer_exponent(p: &Q, min: u32) -> Result<u32> {
    if !p.is_integer() {
        return Err(Error::NonIntegerExponent(format(p)));
    }
    match p.to_integer().to_u32() {
        Some(v) if v >= min => Ok(v),
        _ => Err(Error::NonIntegerExponent(format(p))),
    }
}
