//! Working-precision scalars: MPFR reals, a minimal complex type over them,
//! and decimal-string (de)serialization that never passes through `f64`.

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Float, Rational};
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{MuntzError, Result};

pub const DEFAULT_PRECISION_BITS: u32 = 256;
pub const MIN_PRECISION_BITS: u32 = 64;

/// Environment variable overriding [`DEFAULT_PRECISION_BITS`].
pub const PRECISION_ENV: &str = "MUNTZ_PRECISION_BITS";

pub fn check_precision(bits: u32) -> Result<()> {
    if bits < MIN_PRECISION_BITS {
        return Err(MuntzError::Parameter(format!(
            "precision_bits must be at least {MIN_PRECISION_BITS}, got {bits}"
        )));
    }
    Ok(())
}

/// Precision taken from `MUNTZ_PRECISION_BITS`, falling back to the default.
pub fn default_precision() -> u32 {
    std::env::var(PRECISION_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<u32>().ok())
        .filter(|&b| b >= MIN_PRECISION_BITS)
        .unwrap_or(DEFAULT_PRECISION_BITS)
}

/// `10^(-bits/divisor)` as an `f64` tolerance.
pub fn scaled_tolerance(bits: u32, divisor: u32) -> f64 {
    10f64.powf(-(bits as f64) / divisor as f64)
}

pub fn zero(prec: u32) -> Float {
    Float::new(prec)
}

pub fn one(prec: u32) -> Float {
    Float::with_val(prec, 1)
}

pub fn pi(prec: u32) -> Float {
    Float::with_val(prec, Constant::Pi)
}

/// `t^lambda` for `t >= 0`, with the integer fast path.
pub fn pow_real(t: &Float, lambda: f64) -> Float {
    let prec = t.prec();
    if t.is_zero() {
        return if lambda == 0.0 { one(prec) } else { zero(prec) };
    }
    if lambda >= 0.0 && lambda.fract() == 0.0 && lambda <= u32::MAX as f64 {
        return t.clone().pow(lambda as u32);
    }
    let exponent = Float::with_val(prec, lambda);
    t.clone().pow(&exponent)
}

/// Exact rational value of a finite float.
pub fn to_rational(x: &Float) -> Rational {
    x.to_rational().unwrap_or_default()
}

/// Parse a decimal string at the given precision.
pub fn parse_float(s: &str, prec: u32) -> Result<Float> {
    let parsed = Float::parse(s.trim())
        .map_err(|e| MuntzError::Format(format!("cannot parse '{s}' as a real: {e}")))?;
    Ok(Float::with_val(prec, parsed))
}

/// Full-precision decimal representation.
pub fn to_decimal(x: &Float) -> String {
    x.to_string_radix(10, None)
}

/// Precision needed to hold every digit of a decimal mantissa.
fn precision_for_digits(s: &str) -> u32 {
    let mantissa = s.split(['e', 'E', '@']).next().unwrap_or(s);
    let digits = mantissa.chars().filter(|c| c.is_ascii_digit()).count() as f64;
    let bits = (digits * std::f64::consts::LOG2_10).ceil() as u32 + 4;
    bits.max(MIN_PRECISION_BITS)
}

/// Complex number over MPFR reals (the system MPFR has no MPC companion).
#[derive(Clone, Debug, PartialEq)]
pub struct CFloat {
    pub re: Float,
    pub im: Float,
}

impl CFloat {
    pub fn new(re: Float, im: Float) -> Self {
        CFloat { re, im }
    }

    pub fn zero(prec: u32) -> Self {
        CFloat { re: zero(prec), im: zero(prec) }
    }

    pub fn real(re: Float) -> Self {
        let prec = re.prec();
        CFloat { re, im: zero(prec) }
    }

    pub fn from_f64(prec: u32, re: f64, im: f64) -> Self {
        CFloat {
            re: Float::with_val(prec, re),
            im: Float::with_val(prec, im),
        }
    }

    /// `r * e^{i theta}`.
    pub fn from_polar(r: &Float, theta: &Float) -> Self {
        let prec = r.prec();
        let c = Float::with_val(prec, theta.cos_ref());
        let s = Float::with_val(prec, theta.sin_ref());
        CFloat {
            re: Float::with_val(prec, r * &c),
            im: Float::with_val(prec, r * &s),
        }
    }

    pub fn prec(&self) -> u32 {
        self.re.prec()
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn add(&self, other: &CFloat) -> CFloat {
        let p = self.prec();
        CFloat {
            re: Float::with_val(p, &self.re + &other.re),
            im: Float::with_val(p, &self.im + &other.im),
        }
    }

    pub fn sub(&self, other: &CFloat) -> CFloat {
        let p = self.prec();
        CFloat {
            re: Float::with_val(p, &self.re - &other.re),
            im: Float::with_val(p, &self.im - &other.im),
        }
    }

    pub fn mul(&self, other: &CFloat) -> CFloat {
        let p = self.prec();
        let rr = Float::with_val(p, &self.re * &other.re);
        let ii = Float::with_val(p, &self.im * &other.im);
        let ri = Float::with_val(p, &self.re * &other.im);
        let ir = Float::with_val(p, &self.im * &other.re);
        CFloat {
            re: rr - ii,
            im: ri + ir,
        }
    }

    pub fn scale(&self, k: &Float) -> CFloat {
        let p = self.prec();
        CFloat {
            re: Float::with_val(p, &self.re * k),
            im: Float::with_val(p, &self.im * k),
        }
    }

    pub fn add_scaled(&mut self, z: &CFloat, k: &Float) {
        let p = self.prec();
        self.re += Float::with_val(p, &z.re * k);
        self.im += Float::with_val(p, &z.im * k);
    }

    pub fn conj(&self) -> CFloat {
        CFloat {
            re: self.re.clone(),
            im: Float::with_val(self.prec(), -&self.im),
        }
    }

    pub fn norm_sqr(&self) -> Float {
        let p = self.prec();
        Float::with_val(p, self.re.square_ref()) + Float::with_val(p, self.im.square_ref())
    }

    pub fn abs(&self) -> Float {
        Float::with_val(self.prec(), self.re.hypot_ref(&self.im))
    }

    /// Real part of `self * conj(other)`.
    pub fn re_mul_conj(&self, other: &CFloat) -> Float {
        let p = self.prec();
        Float::with_val(p, &self.re * &other.re) + Float::with_val(p, &self.im * &other.im)
    }

    pub fn with_prec(&self, prec: u32) -> CFloat {
        CFloat {
            re: Float::with_val(prec, &self.re),
            im: Float::with_val(prec, &self.im),
        }
    }

    pub fn to_f64_pair(&self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }

    /// Parse `a+bi`, `a-bi`, `a`, `bi` or `a,b`.
    pub fn parse(s: &str, prec: u32) -> Result<CFloat> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if let Some((a, b)) = t.split_once(',') {
            return Ok(CFloat::new(parse_float(a, prec)?, parse_float(b, prec)?));
        }
        if let Some(body) = t.strip_suffix(['i', 'j']) {
            // split at the last sign that is not part of an exponent
            let bytes = body.as_bytes();
            let mut split = None;
            for k in (1..bytes.len()).rev() {
                if (bytes[k] == b'+' || bytes[k] == b'-')
                    && !matches!(bytes[k - 1], b'e' | b'E')
                {
                    split = Some(k);
                    break;
                }
            }
            let (re, im) = match split {
                Some(k) => (&body[..k], &body[k..]),
                None => ("0", body),
            };
            let im = match im {
                "" | "+" => "1",
                "-" => "-1",
                other => other,
            };
            return Ok(CFloat::new(parse_float(re, prec)?, parse_float(im, prec)?));
        }
        Ok(CFloat::real(parse_float(&t, prec)?))
    }
}

impl fmt::Display for CFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}i", to_decimal(&self.re), if self.im.is_sign_negative() { "" } else { "+" }, to_decimal(&self.im))
    }
}

impl Serialize for CFloat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(2))?;
        seq.serialize_element(&to_decimal(&self.re))?;
        seq.serialize_element(&to_decimal(&self.im))?;
        seq.end()
    }
}

/// JSON scalar that may arrive as a number or as a decimal string.
#[derive(Deserialize)]
#[serde(untagged)]
enum NumOrString {
    Num(f64),
    Str(String),
}

impl NumOrString {
    fn into_float<E: de::Error>(self) -> std::result::Result<Float, E> {
        match self {
            NumOrString::Num(x) => Ok(Float::with_val(MIN_PRECISION_BITS, x)),
            NumOrString::Str(s) => {
                let prec = precision_for_digits(&s);
                parse_float(&s, prec).map_err(E::custom)
            }
        }
    }
}

impl<'de> Deserialize<'de> for CFloat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = CFloat;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a [re, im] pair of numbers or decimal strings")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut a: A) -> std::result::Result<CFloat, A::Error> {
                let re: NumOrString = a
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let im: NumOrString = a
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(1, &self))?;
                let re = re.into_float::<A::Error>()?;
                let im = im.into_float::<A::Error>()?;
                let prec = re.prec().max(im.prec());
                Ok(CFloat::new(Float::with_val(prec, re), Float::with_val(prec, im)))
            }
        }
        d.deserialize_seq(V)
    }
}

/// `#[serde(with = "serde_float")]` for a single `Float`.
pub mod serde_float {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Float, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&to_decimal(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Float, D::Error> {
        NumOrString::deserialize(d)?.into_float()
    }
}

/// `#[serde(with = "serde_float_vec")]` for `Vec<Float>`.
pub mod serde_float_vec {
    use super::*;

    pub fn serialize<S: Serializer>(xs: &[Float], s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&to_decimal(x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Float>, D::Error> {
        let raw: Vec<NumOrString> = Vec::deserialize(d)?;
        raw.into_iter().map(|x| x.into_float()).collect()
    }
}

/// `#[serde(with = "serde_float_opt")]` for `Option<Float>`.
pub mod serde_float_opt {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Option<Float>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match x {
            Some(v) => s.serialize_some(&to_decimal(v)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Float>, D::Error> {
        let raw: Option<NumOrString> = Option::deserialize(d)?;
        raw.map(|x| x.into_float()).transpose()
    }
}
