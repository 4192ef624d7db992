//! Exact rational arithmetic.
//!
//! Every valuation and utility in the crate is a [`Rational`]. Quantities such
//! as `⌈k·v⌉` feed strict inequalities, so nothing here ever touches a float.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("invalid rational literal {0:?}")]
    InvalidLiteral(String),
}

/// An exact rational number in canonical form (`gcd(|num|, den) = 1`, `den > 0`).
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Rational(BigRational);

impl Rational {
    pub fn new(numer: impl Into<BigInt>, denom: impl Into<BigInt>) -> Result<Self, ArithError> {
        let denom = denom.into();
        if denom.is_zero() {
            return Err(ArithError::DivisionByZero);
        }
        Ok(Rational(BigRational::new(numer.into(), denom)))
    }

    pub fn from_integer(value: impl Into<BigInt>) -> Self {
        Rational(BigRational::from_integer(value.into()))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
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

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn checked_div(&self, rhs: &Rational) -> Result<Rational, ArithError> {
        if rhs.is_zero() {
            return Err(ArithError::DivisionByZero);
        }
        if let (Some((a, b)), Some((c, d))) = (self.small_parts(), rhs.small_parts()) {
            return Ok(Rational::from_small_fraction(a * d, b * c));
        }
        Ok(Rational(&self.0 / &rhs.0))
    }

    /// Canonical `n/d` for `d ≠ 0`, reduced in machine integers.
    fn from_small_fraction(n: i128, d: i128) -> Rational {
        let g = match (u64::try_from(n.unsigned_abs()), u64::try_from(d.unsigned_abs())) {
            (Ok(x), Ok(y)) => i128::from(x.gcd(&y)),
            _ => n.gcd(&d),
        };
        let (n, d) = if d < 0 { (-n / g, -d / g) } else { (n / g, d / g) };
        Rational(BigRational::new_raw(BigInt::from(n), BigInt::from(d)))
    }

    pub fn recip(&self) -> Result<Rational, ArithError> {
        Rational::one().checked_div(self)
    }

    pub fn floor(&self) -> BigInt {
        self.numer().div_floor(self.denom())
    }

    pub fn ceil(&self) -> BigInt {
        self.numer().div_ceil(self.denom())
    }

    /// `⌈k·self⌉`, computed as `(k·a + b − 1) div b` for `self = a/b`.
    ///
    /// Only meaningful for `self > 0` and `k ≥ 0`; for other signs the result
    /// is still the mathematical ceiling.
    pub fn ceil_mul(&self, k: u64) -> BigInt {
        let scaled = self.numer() * BigInt::from(k);
        scaled.div_ceil(self.denom())
    }

    /// `self · k` for a count `k`.
    pub fn mul_count(&self, k: u64) -> Rational {
        Rational(&self.0 * BigRational::from_integer(BigInt::from(k)))
    }

    /// Numerator and denominator as `i128` when both fit in 63 bits.
    ///
    /// Used by hot loops that compare utilities with machine integers.
    pub fn small_parts(&self) -> Option<(i128, i128)> {
        let n = self.numer().to_i64()?;
        let d = self.denom().to_i64()?;
        Some((n as i128, d as i128))
    }

    /// Parses an integer (`"7"`), a fraction (`"7/3"`), or a finite decimal
    /// (`"0.25"`, `"-1.5"`). Exponents and floats are rejected.
    pub fn parse(text: &str) -> Result<Self, ArithError> {
        let invalid = || ArithError::InvalidLiteral(text.to_string());
        let s = text.trim();
        if s.is_empty() {
            return Err(invalid());
        }
        if let Some((num, den)) = s.split_once('/') {
            let num = parse_int(num.trim()).ok_or_else(invalid)?;
            let den = parse_int(den.trim()).ok_or_else(invalid)?;
            return Rational::new(num, den).map_err(|_| invalid());
        }
        if let Some((int_part, frac_part)) = s.split_once('.') {
            if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
                return Err(invalid());
            }
            let (negative, digits) = match int_part.strip_prefix('-') {
                Some(rest) => (true, rest),
                None => (false, int_part.strip_prefix('+').unwrap_or(int_part)),
            };
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return Err(invalid());
            }
            let mantissa: BigInt = format!("{digits}{frac_part}").parse().map_err(|_| invalid())?;
            let scale = num_traits::pow(BigInt::from(10), frac_part.len());
            let mantissa = if negative { -mantissa } else { mantissa };
            return Rational::new(mantissa, scale);
        }
        parse_int(s).map(Rational::from_integer).ok_or_else(invalid)
    }

    fn cmp_fast(&self, other: &Rational) -> Option<Ordering> {
        let (a, b) = self.small_parts()?;
        let (c, d) = other.small_parts()?;
        Some((a * d).cmp(&(c * b)))
    }
}

fn parse_int(s: &str) -> Option<BigInt> {
    let digits = s.strip_prefix(['-', '+']).unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cmp_fast(other).unwrap_or_else(|| {
            (self.numer() * other.denom()).cmp(&(other.numer() * self.denom()))
        })
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<&Rational> for &Rational {
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

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);

impl std::ops::Div<&Rational> for &Rational {
    type Output = Rational;
    /// Panics on a zero divisor; see [`Rational::checked_div`].
    fn div(self, rhs: &Rational) -> Rational {
        self.checked_div(rhs).expect("division by zero")
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl From<u64> for Rational {
    fn from(v: u64) -> Self {
        Rational::from_integer(v)
    }
}

impl From<i64> for Rational {
    fn from(v: i64) -> Self {
        Rational::from_integer(v)
    }
}

impl FromStr for Rational {
    type Err = ArithError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Rational::parse(s)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct Visitor;
        impl serde::de::Visitor<'_> for Visitor {
            type Value = Rational;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an integer or a string holding an integer, fraction, or decimal")
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Rational, E> {
                Ok(Rational::from(v))
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Rational, E> {
                Ok(Rational::from(v))
            }
            fn visit_f64<E: serde::de::Error>(self, v: f64) -> Result<Rational, E> {
                Err(E::custom(format!(
                    "floating-point value {v} rejected; write it as a string such as \"{v}\""
                )))
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Rational, E> {
                Rational::parse(v).map_err(E::custom)
            }
        }
        deserializer.deserialize_any(Visitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d).unwrap()
    }

    #[test]
    fn field_operations() {
        assert_eq!(&r(1, 2) + &r(1, 3), r(5, 6));
        assert_eq!(&r(3, 2) * &Rational::from(4u64), r(6, 1));
        let zero = &r(7, 3) - &r(7, 3);
        assert_eq!(zero, Rational::zero());
        assert_eq!(zero.numer(), &BigInt::from(0));
        assert_eq!(zero.denom(), &BigInt::from(1));
        assert_eq!(r(1, 2).checked_div(&r(1, 4)).unwrap(), r(2, 1));
    }

    #[test]
    fn division_by_zero_is_an_error() {
        assert_eq!(r(1, 2).checked_div(&Rational::zero()), Err(ArithError::DivisionByZero));
        assert_eq!(Rational::new(1, 0), Err(ArithError::DivisionByZero));
    }

    #[test]
    fn ceil_mul_examples() {
        assert_eq!(r(10, 1).ceil_mul(3), BigInt::from(30));
        assert_eq!(r(7, 3).ceil_mul(2), BigInt::from(5));
        assert_eq!(r(5, 2).ceil_mul(0), BigInt::from(0));
    }

    #[test]
    fn compare_examples() {
        assert_eq!(r(1, 3).cmp(&r(2, 6)), Ordering::Equal);
        assert_eq!(r(9, 1).cmp(&r(10, 1)), Ordering::Less);
        assert_eq!(r(-1, 2).cmp(&Rational::zero()), Ordering::Less);
    }

    #[test]
    fn compare_falls_back_to_big_integers() {
        let huge: BigInt = "123456789012345678901234567890".parse().unwrap();
        let a = Rational::new(huge.clone(), 3).unwrap();
        let b = Rational::new(huge + 1, 3).unwrap();
        assert!(a < b);
        assert!(b > a);
    }

    #[test]
    fn parses_literals() {
        assert_eq!(Rational::parse("7").unwrap(), r(7, 1));
        assert_eq!(Rational::parse("14/6").unwrap(), r(7, 3));
        assert_eq!(Rational::parse("0.25").unwrap(), r(1, 4));
        assert_eq!(Rational::parse("-1.5").unwrap(), r(-3, 2));
        assert_eq!(Rational::parse(" 3 / 4 ").unwrap(), r(3, 4));
        for bad in ["3/0", "", "1e5", "abc", "1.", ".5", "1/2/3", "--1", "0x10"] {
            assert!(Rational::parse(bad).is_err(), "{bad:?} should be rejected");
        }
    }

    #[test]
    fn serde_rejects_floats() {
        assert_eq!(serde_json::from_str::<Rational>("4").unwrap(), r(4, 1));
        assert_eq!(serde_json::from_str::<Rational>("\"1/3\"").unwrap(), r(1, 3));
        assert!(serde_json::from_str::<Rational>("0.5").is_err());
        assert_eq!(serde_json::to_string(&r(2, 6)).unwrap(), "\"1/3\"");
        assert_eq!(serde_json::to_string(&r(4, 2)).unwrap(), "\"2\"");
    }

    proptest! {
        #[test]
        fn ceil_mul_brackets_product(k in 0u64..1_000_000, a in 1i64..10_000, b in 1i64..10_000) {
            let v = r(a, b);
            let exact = v.mul_count(k);
            let c = Rational::from_integer(v.ceil_mul(k));
            prop_assert!(exact <= c);
            prop_assert!(c < &exact + &Rational::one());
            prop_assert_eq!(c == exact, exact.is_integer());
        }

        #[test]
        fn compare_agrees_with_sign_of_difference(a in -500i64..500, b in 1i64..500, c in -500i64..500, d in 1i64..500) {
            let (x, y) = (r(a, b), r(c, d));
            let diff = &x - &y;
            let expected = if diff.is_zero() { Ordering::Equal } else if diff.is_positive() { Ordering::Greater } else { Ordering::Less };
            prop_assert_eq!(x.cmp(&y), expected);
        }

        #[test]
        fn display_parse_round_trip(a in -10_000i64..10_000, b in 1i64..10_000) {
            let x = r(a, b);
            let again: Rational = x.to_string().parse().unwrap();
            prop_assert_eq!(again.to_string(), x.to_string());
            prop_assert_eq!(again, x);
        }
    }
}
