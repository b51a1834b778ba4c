//! Exact rational helpers: locations, phase reduction modulo one and rigorous
//! rational enclosures of the irrational constants the certificates need.

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// `2^e` for any sign of `e`.
pub fn pow2(e: i64) -> Rational {
    let p = BigInt::one() << e.unsigned_abs();
    if e >= 0 {
        Rational::from_integer(p)
    } else {
        Rational::new(BigInt::one(), p)
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Fractional part in `[0, 1)`.
pub fn frac(r: &Rational) -> Rational {
    r - r.floor()
}

/// Parses `"p/q"`, `"p"` or a finite decimal such as `"0.125"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p = BigInt::from_str(p.trim()).map_err(|e| Error::Parse(format!("{s:?}: {e}")))?;
        let q = BigInt::from_str(q.trim()).map_err(|e| Error::Parse(format!("{s:?}: {e}")))?;
        if q.is_zero() {
            return Err(Error::Parse(format!("{s:?}: zero denominator")));
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((ip, fp)) = s.split_once('.') {
        let neg = ip.starts_with('-');
        let digits = format!("{}{}", ip.trim_start_matches(['-', '+']), fp);
        let n = BigInt::from_str(if digits.is_empty() { "0" } else { &digits })
            .map_err(|e| Error::Parse(format!("{s:?}: {e}")))?;
        let d = num_traits::pow(BigInt::from(10), fp.len());
        let r = Rational::new(n, d);
        return Ok(if neg { -r } else { r });
    }
    BigInt::from_str(s)
        .map(Rational::from_integer)
        .map_err(|e| Error::Parse(format!("{s:?}: {e}")))
}

pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// `e^{-2 pi i theta}` for an exact `theta`, reduced modulo one before any rounding.
/// Quarter turns are returned exactly.
pub fn cis_neg_turns(theta: &Rational) -> Complex64 {
    let f = frac(theta);
    let four = &f * int(4);
    if four.is_integer() {
        return match four.to_integer().to_i64().unwrap_or(0) {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, -1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, 1.0),
        };
    }
    // centre the reduced phase on zero for the best float accuracy
    let centred = if f > rat(1, 2) { f - int(1) } else { f };
    let x = -2.0 * std::f64::consts::PI * to_f64(&centred);
    Complex64::new(x.cos(), x.sin())
}

/// Rational enclosure `lo <= pi <= hi`.
pub fn pi_bounds() -> (Rational, Rational) {
    (
        parse_rational("3.14159265358979323846").unwrap(),
        parse_rational("3.14159265358979323847").unwrap(),
    )
}

/// Rational enclosure of `2^(k/3)` with relative width about `2^-64`, certified by cubing.
pub fn pow2_third_bounds(k: i64) -> (Rational, Rational) {
    let (q, r) = k.div_mod_floor(&3);
    // 2^(k/3) = 2^q * 2^(r/3), r in {0,1,2}
    let scale = 64u32;
    let radicand: BigUint = BigUint::one() << (r as u32 + 3 * scale);
    let root = radicand.cbrt();
    let lo_int = root.clone();
    let hi_int = if &lo_int * &lo_int * &lo_int == radicand {
        root
    } else {
        root + 1u32
    };
    let den = pow2(scale as i64);
    let lo = Rational::from_integer(BigInt::from(lo_int)) / &den * pow2(q);
    let hi = Rational::from_integer(BigInt::from(hi_int)) / &den * pow2(q);
    (lo, hi)
}

/// A coordinate that is either an exact rational or a float.
#[derive(Debug, Clone, PartialEq)]
pub enum Real {
    Exact(Rational),
    Float(f64),
}

impl Real {
    pub fn to_f64(&self) -> f64 {
        match self {
            Real::Exact(r) => to_f64(r),
            Real::Float(x) => *x,
        }
    }

    pub fn as_exact(&self) -> Option<&Rational> {
        match self {
            Real::Exact(r) => Some(r),
            Real::Float(_) => None,
        }
    }

    /// Exact rational value; floats are converted exactly from their binary value.
    pub fn to_rational(&self) -> Rational {
        match self {
            Real::Exact(r) => r.clone(),
            Real::Float(x) => Rational::from_float(*x).unwrap_or_else(Rational::zero),
        }
    }

    pub fn abs_f64(&self) -> f64 {
        self.to_f64().abs()
    }

    /// `|self - other|`, computed exactly when both sides are rational.
    pub fn distance(&self, other: &Real) -> f64 {
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => to_f64(&(a - b).abs()),
            _ => (self.to_f64() - other.to_f64()).abs(),
        }
    }

    pub fn add_rational(&self, t: &Rational) -> Real {
        match self {
            Real::Exact(r) => Real::Exact(r + t),
            Real::Float(x) => Real::Float(x + to_f64(t)),
        }
    }

    pub fn cmp_value(&self, other: &Real) -> Ordering {
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => a.cmp(b),
            _ => self
                .to_f64()
                .partial_cmp(&other.to_f64())
                .unwrap_or(Ordering::Equal),
        }
    }

    /// Ordering by absolute value, ties broken by signed value.
    pub fn cmp_abs(&self, other: &Real) -> Ordering {
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => a.abs().cmp(&b.abs()).then(a.cmp(b)),
            _ => self
                .abs_f64()
                .partial_cmp(&other.abs_f64())
                .unwrap_or(Ordering::Equal)
                .then(self.cmp_value(other)),
        }
    }
}

impl From<f64> for Real {
    fn from(x: f64) -> Self {
        Real::Float(x)
    }
}

impl From<Rational> for Real {
    fn from(r: Rational) -> Self {
        Real::Exact(r)
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Real::Exact(r) => write!(f, "{}", format_rational(r)),
            Real::Float(x) => write!(f, "{x:.17e}"),
        }
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Real::Exact(r) => s.serialize_str(&format_rational(r)),
            Real::Float(x) => s.serialize_f64(*x),
        }
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct RealVisitor;
        impl Visitor<'_> for RealVisitor {
            type Value = Real;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or a \"p/q\" rational string")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Real, E> {
                Ok(Real::Float(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Real, E> {
                Ok(Real::Exact(int(v)))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Real, E> {
                Ok(Real::Exact(Rational::from_integer(BigInt::from(v))))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Real, E> {
                parse_rational(v).map(Real::Exact).map_err(E::custom)
            }
        }
        d.deserialize_any(RealVisitor)
    }
}

/// Serde adapter for fields holding a bare [`Rational`] as a `"p/q"` string.
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        match Real::deserialize(d)? {
            Real::Exact(r) => Ok(r),
            Real::Float(x) => Rational::from_float(x).ok_or_else(|| de::Error::custom("non-finite")),
        }
    }
}
