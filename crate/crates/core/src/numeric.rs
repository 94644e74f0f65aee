//! Exact rational scalars and the decimal text forms they come from.
//!
//! Every quantity that affects a verdict is a [`Rational`]. Floats appear
//! only at the presentation boundary, via the correctly-rounded
//! [`Rational::to_f64`].

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NumericError {
    #[error("malformed number `{0}`")]
    MalformedNumber(String),
    #[error("`{0}` carries a truncation marker, which is not allowed here")]
    TruncatedNotAllowed(String),
}

/// Arbitrary-precision rational in canonical form: denominator > 0 and
/// gcd(|numerator|, denominator) = 1. Canonicality is maintained by every
/// constructor and operation, so `==` is value equality.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(BigRational);

impl Rational {
    /// Builds `num/den`, normalizing sign and reducing.
    ///
    /// Panics if `den == 0`; fallible construction from text goes through
    /// [`parse_decimal`] or [`FromStr`], which reject zero denominators.
    pub fn new(num: i64, den: i64) -> Rational {
        assert!(den != 0, "rational denominator must be nonzero");
        Rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_bigint(num: BigInt, den: BigInt) -> Rational {
        assert!(!den.is_zero(), "rational denominator must be nonzero");
        Rational(BigRational::new(num, den))
    }

    pub fn from_int(n: i64) -> Rational {
        Rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn zero() -> Rational {
        Rational(BigRational::zero())
    }

    pub fn one() -> Rational {
        Rational(BigRational::one())
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn abs(&self) -> Rational {
        Rational(self.0.abs())
    }

    /// Largest integer `<= self`.
    pub fn floor(&self) -> BigInt {
        self.0.floor().to_integer()
    }

    /// Smallest integer `>= self`.
    pub fn ceil(&self) -> BigInt {
        self.0.ceil().to_integer()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    /// True when the denominator is of the form 2^a * 5^b, i.e. the value
    /// has a finite decimal expansion.
    pub fn has_finite_decimal(&self) -> bool {
        decimal_exponents(self.denom()).is_some()
    }

    /// Canonical text form: a finite decimal when one exists (`0.95`, `-3`,
    /// `1.25`), otherwise a fraction (`1/3`). [`FromStr`] accepts both, so
    /// `render` round-trips.
    pub fn render(&self) -> String {
        match decimal_exponents(self.denom()) {
            None => format!("{}/{}", self.numer(), self.denom()),
            Some((twos, fives)) => {
                let k = twos.max(fives);
                if k == 0 {
                    return self.numer().to_string();
                }
                // value = numer/denom with denom | 10^k, so numer*10^k/denom
                // is an integer whose last k digits are the fraction part.
                let scaled: BigInt =
                    self.numer() * BigInt::from(10u32).pow(k) / self.denom();
                let digits = scaled.magnitude().to_string();
                let digits = if digits.len() <= k as usize {
                    format!("{}{}", "0".repeat(k as usize + 1 - digits.len()), digits)
                } else {
                    digits
                };
                let split = digits.len() - k as usize;
                let (int_part, frac_part) = digits.split_at(split);
                let frac_part = frac_part.trim_end_matches('0');
                let sign = if self.is_negative() { "-" } else { "" };
                if frac_part.is_empty() {
                    format!("{sign}{int_part}")
                } else {
                    format!("{sign}{int_part}.{frac_part}")
                }
            }
        }
    }

    /// Nearest binary64 value (ties to even). Overflow saturates to
    /// `±INFINITY`; values below half the minimum subnormal round to zero.
    pub fn to_f64(&self) -> f64 {
        self.to_f64_checked().0
    }

    /// Like [`to_f64`](Self::to_f64), also reporting whether the value was
    /// out of binary64 range and saturated to an infinity.
    pub fn to_f64_checked(&self) -> (f64, bool) {
        if self.is_zero() {
            return (0.0, false);
        }
        let negative = self.is_negative();
        let a = self.numer().magnitude().clone();
        let b = self.denom().magnitude().clone();
        let (value, saturated) = round_ratio_to_f64(&a, &b);
        if negative {
            (-value, saturated)
        } else {
            (value, saturated)
        }
    }
}

/// Nearest binary64 for the positive ratio a/b, with an overflow flag.
fn round_ratio_to_f64(a: &BigUint, b: &BigUint) -> (f64, bool) {
    // Exact binary exponent: 2^e <= a/b < 2^(e+1).
    let mut e = a.bits() as i64 - b.bits() as i64;
    let ge = if e >= 0 {
        *a >= (b << e as u64)
    } else {
        (a << (-e) as u64) >= *b
    };
    if !ge {
        e -= 1;
    }
    if e >= 1024 {
        return (f64::INFINITY, true);
    }
    if e < -1075 {
        return (0.0, false);
    }
    // Significand precision: 53 bits for normals, fewer approaching the
    // subnormal floor (prec = 0 exactly at the half-minimum boundary).
    let mut prec: i64 = if e >= -1022 { 53 } else { e + 1075 };
    let shift = prec - 1 - e;
    let (num, den) = if shift >= 0 {
        (a << shift as u64, b.clone())
    } else {
        (a.clone(), b << (-shift) as u64)
    };
    let (mut q, rem) = num.div_rem(&den);
    let round_up = match (&rem << 1u32).cmp(&den) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => q.is_odd(),
    };
    if round_up {
        q += 1u32;
    }
    if q.bits() as i64 > prec {
        // Rounded up to the next power of two; renormalize.
        e += 1;
        if e >= 1024 {
            return (f64::INFINITY, true);
        }
        prec = if e >= -1022 { 53 } else { e + 1075 };
        q = BigUint::one() << (prec - 1) as u64;
    }
    if q.is_zero() {
        return (0.0, false);
    }
    let q = q.to_u64().expect("rounded significand fits in 64 bits");
    let bits = if e >= -1022 {
        debug_assert!(prec == 53 && ((1u64 << 52)..(1u64 << 53)).contains(&q));
        (((e + 1023) as u64) << 52) | (q & ((1u64 << 52) - 1))
    } else {
        debug_assert!(q < (1u64 << 52));
        q
    };
    (f64::from_bits(bits), false)
}

/// True denominator factorization check: returns (a, b) with den = 2^a 5^b,
/// or None if another prime divides it.
fn decimal_exponents(den: &BigInt) -> Option<(u32, u32)> {
    let mut d = den.magnitude().clone();
    let two = BigUint::from(2u32);
    let five = BigUint::from(5u32);
    let mut twos = 0u32;
    let mut fives = 0u32;
    while (&d % &two).is_zero() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if d.is_one() {
        Some((twos, fives))
    } else {
        None
    }
}

/// A decimal (or SMT rational) that may carry a trailing `?`, the marker
/// some solver front ends append when a printed decimal was truncated.
/// The digits parse exactly either way; `inexact` records that the true
/// value may have had more digits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedDecimal {
    pub value: Rational,
    pub inexact: bool,
}

/// Parses the decimal forms produced by humans and solvers:
///
/// * plain decimals with optional sign and fraction: `1`, `-0.95`, `+2.5`
/// * a trailing `?` marking a truncated rendering: `0.9500000000?`
/// * SMT rational terms, possibly negated: `(/ 7 10)`, `(- (/ 7 10))`,
///   `(- 1.5)`; components may themselves be decimals (`(/ 7.0 10.0)`)
///
/// The digits are always converted exactly (no float round trip).
pub fn parse_decimal(text: &str) -> Result<ParsedDecimal, NumericError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(NumericError::MalformedNumber(text.to_string()));
    }
    let tokens = lex_number_tokens(trimmed);
    let mut pos = 0;
    let parsed = parse_number_expr(&tokens, &mut pos)
        .ok_or_else(|| NumericError::MalformedNumber(text.to_string()))?;
    if pos != tokens.len() {
        return Err(NumericError::MalformedNumber(text.to_string()));
    }
    Ok(parsed)
}

fn lex_number_tokens(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        match ch {
            '(' | ')' => {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(ch.to_string());
            }
            c if c.is_whitespace() => {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
            }
            c => current.push(c),
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

fn parse_number_expr(tokens: &[String], pos: &mut usize) -> Option<ParsedDecimal> {
    let tok = tokens.get(*pos)?;
    if tok == "(" {
        *pos += 1;
        let op = tokens.get(*pos)?.clone();
        *pos += 1;
        let result = match op.as_str() {
            "-" => {
                let inner = parse_number_expr(tokens, pos)?;
                ParsedDecimal { value: -&inner.value, inexact: inner.inexact }
            }
            "/" => {
                let numer = parse_number_expr(tokens, pos)?;
                let denom = parse_number_expr(tokens, pos)?;
                if denom.value.is_zero() {
                    return None;
                }
                ParsedDecimal {
                    value: &numer.value / &denom.value,
                    inexact: numer.inexact || denom.inexact,
                }
            }
            _ => return None,
        };
        if tokens.get(*pos)? != ")" {
            return None;
        }
        *pos += 1;
        Some(result)
    } else {
        *pos += 1;
        parse_decimal_atom(tok)
    }
}

/// `[+-]? digits ('.' digits)? '?'?` converted exactly.
fn parse_decimal_atom(atom: &str) -> Option<ParsedDecimal> {
    let (inexact, body) = match atom.strip_suffix('?') {
        Some(rest) => (true, rest),
        None => (false, atom),
    };
    let (negative, body) = match body.as_bytes().first()? {
        b'-' => (true, &body[1..]),
        b'+' => (false, &body[1..]),
        _ => (false, body),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if body.contains('.') && (frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit())) {
        return None;
    }
    let digits: BigInt = format!("{int_part}{frac_part}").parse().ok()?;
    let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
    let signed = if negative { -digits } else { digits };
    Some(ParsedDecimal { value: Rational::from_bigint(signed, scale), inexact: false || inexact })
}

impl FromStr for Rational {
    type Err = NumericError;

    /// Accepts a plain decimal (`-0.9`) or a fraction (`a/b`). Truncation
    /// markers are rejected: exact contexts (model files, query specs)
    /// must not launder approximate values.
    fn from_str(s: &str) -> Result<Rational, NumericError> {
        let t = s.trim();
        if let Some((num, den)) = t.split_once('/') {
            let parse_int = |part: &str| -> Result<BigInt, NumericError> {
                let (neg, digits) = match part.as_bytes().first() {
                    Some(b'-') => (true, &part[1..]),
                    Some(b'+') => (false, &part[1..]),
                    _ => (false, part),
                };
                if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(NumericError::MalformedNumber(s.to_string()));
                }
                let v: BigInt = digits
                    .parse()
                    .map_err(|_| NumericError::MalformedNumber(s.to_string()))?;
                Ok(if neg { -v } else { v })
            };
            let n = parse_int(num.trim())?;
            let d = parse_int(den.trim())?;
            if d.is_zero() {
                return Err(NumericError::MalformedNumber(s.to_string()));
            }
            return Ok(Rational::from_bigint(n, d));
        }
        let parsed = parse_decimal(t)?;
        if parsed.inexact {
            return Err(NumericError::TruncatedNotAllowed(s.to_string()));
        }
        Ok(parsed.value)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Rational({}/{})", self.numer(), self.denom())
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident) => {
        impl $trait for &Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
        impl $trait for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }
    };
}

binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);

impl Div for &Rational {
    type Output = Rational;
    fn div(self, rhs: &Rational) -> Rational {
        assert!(!rhs.is_zero(), "division by zero rational");
        Rational(&self.0 / &rhs.0)
    }
}

impl Div for Rational {
    type Output = Rational;
    fn div(self, rhs: Rational) -> Rational {
        (&self).div(&rhs)
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}
