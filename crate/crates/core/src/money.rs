//! Exact non-negative rational amounts.
//!
//! Welfare identities in this crate are equalities of rationals, so values,
//! prices and payments never touch floating point. [`Money`] is a checked
//! non-negative wrapper; signed intermediate quantities (utilities, welfare
//! differences) use the raw [`Rational`] alias.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Signed exact rational, used for utilities and differences.
pub type Rational = Ratio<i128>;

/// An exact non-negative rational amount (value, price, payment, welfare).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Money(Rational);

impl Money {
    pub const ZERO: Money = Money(Ratio::new_raw(0, 1));
    pub const ONE: Money = Money(Ratio::new_raw(1, 1));

    /// Builds `num/den`, rejecting zero denominators and negative values.
    pub fn new(num: i128, den: i128) -> Result<Money, Error> {
        if den == 0 {
            return Err(Error::param(format!("rational {num}/0 has zero denominator")));
        }
        let r = Ratio::new(num, den);
        if r.is_negative() {
            return Err(Error::param(format!("money {num}/{den} is negative")));
        }
        Ok(Money(r))
    }

    pub fn from_int(v: u64) -> Money {
        Money(Ratio::from_integer(v as i128))
    }

    /// Exact conversion from a signed rational; errors when negative.
    pub fn from_rational(r: Rational) -> Result<Money, Error> {
        if r.is_negative() {
            return Err(Error::param(format!("money {r} is negative")));
        }
        Ok(Money(r))
    }

    pub fn as_rational(self) -> Rational {
        self.0
    }

    pub fn numer(self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(self) -> i128 {
        *self.0.denom()
    }

    pub fn is_zero(self) -> bool {
        self.0.is_zero()
    }

    pub fn to_f64(self) -> f64 {
        self.0.to_f64().expect("rational within f64 range")
    }

    /// Saturating subtraction is deliberately absent: callers that can go
    /// negative must work in `Rational` and convert back explicitly.
    pub fn checked_sub(self, rhs: Money) -> Option<Money> {
        let d = self.0 - rhs.0;
        if d.is_negative() {
            None
        } else {
            Some(Money(d))
        }
    }

    /// `self * n` for a set-size multiplier.
    pub fn scale(self, n: usize) -> Money {
        Money(self.0 * Ratio::from_integer(n as i128))
    }

    /// Largest integer `k` with `k <= self`.
    pub fn floor_int(self) -> i128 {
        self.0.floor().to_integer()
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl Mul for Money {
    type Output = Money;
    fn mul(self, rhs: Money) -> Money {
        Money(self.0 * rhs.0)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom() == &1 {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Money {
    type Err = Error;

    /// Accepts `"a"` or `"a/b"`.
    fn from_str(s: &str) -> Result<Money, Error> {
        let parse_int = |part: &str| {
            part.trim()
                .parse::<i128>()
                .map_err(|e| Error::parse("money", format!("bad integer {part:?}: {e}")))
        };
        match s.split_once('/') {
            None => Money::new(parse_int(s)?, 1),
            Some((a, b)) => Money::new(parse_int(a)?, parse_int(b)?),
        }
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0.denom() == &1 && *self.0.numer() <= i64::MAX as i128 {
            serializer.serialize_i64(*self.0.numer() as i64)
        } else {
            serializer.serialize_str(&self.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Money, D::Error> {
        struct V;
        impl de::Visitor<'_> for V {
            type Value = Money;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative integer or a \"num/den\" string")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Money, E> {
                Ok(Money::from_int(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Money, E> {
                Money::new(v as i128, 1).map_err(E::custom)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Money, E> {
                v.parse().map_err(E::custom)
            }
        }
        deserializer.deserialize_any(V)
    }
}

/// A per-item price threshold with an inclusive/exclusive flag.
///
/// `(v, exclusive)` stands for a price "just above v": a bidder facing it
/// buys exactly the items it would buy at every price strictly greater than
/// `v` but at most the next distinct value. The flag makes the complete
/// single-price search grid finite without epsilon arithmetic; the payment
/// charged is always the carried `value`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct ThresholdPrice {
    pub value: Money,
    pub inclusive: bool,
}

impl ThresholdPrice {
    pub fn inclusive(value: Money) -> Self {
        ThresholdPrice { value, inclusive: true }
    }

    pub fn exclusive(value: Money) -> Self {
        ThresholdPrice { value, inclusive: false }
    }

    /// Whether a bidder buys an item it values at `v` when offered this
    /// per-item price (utility-tie resolved toward buying, per the demand
    /// tie-break rule).
    pub fn buys_at(&self, v: Money) -> bool {
        v > self.value || (v == self.value && self.inclusive)
    }
}

impl fmt::Display for ThresholdPrice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.inclusive {
            write!(f, "{}", self.value)
        } else {
            write!(f, "{}+", self.value)
        }
    }
}

/// Lossy conversion for statistics and learning payoffs.
pub fn rational_to_f64(r: Rational) -> f64 {
    r.to_f64().expect("rational within f64 range")
}

/// A possibly infinite worst-case ratio (OPT over achieved welfare).
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum RatioBound {
    Finite(Money),
    Infinite,
}

impl RatioBound {
    pub fn finite(self) -> Option<Money> {
        match self {
            RatioBound::Finite(m) => Some(m),
            RatioBound::Infinite => None,
        }
    }

    pub fn max(self, other: RatioBound) -> RatioBound {
        match (self, other) {
            (RatioBound::Infinite, _) | (_, RatioBound::Infinite) => RatioBound::Infinite,
            (RatioBound::Finite(a), RatioBound::Finite(b)) => RatioBound::Finite(a.max(b)),
        }
    }
}

impl PartialOrd for RatioBound {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RatioBound {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use RatioBound::*;
        match (self, other) {
            (Infinite, Infinite) => std::cmp::Ordering::Equal,
            (Infinite, Finite(_)) => std::cmp::Ordering::Greater,
            (Finite(_), Infinite) => std::cmp::Ordering::Less,
            (Finite(a), Finite(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for RatioBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RatioBound::Finite(m) => write!(f, "{m}"),
            RatioBound::Infinite => f.write_str("inf"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_rejects_bad_rationals() {
        assert!(Money::new(1, 0).is_err());
        assert!(Money::new(-1, 2).is_err());
        assert!(Money::new(1, -2).is_err()); // normalizes to -1/2
        assert_eq!(Money::new(-2, -4).unwrap(), Money::new(1, 2).unwrap());
    }

    #[test]
    fn parse_and_display_round_trip() {
        let m: Money = "3/2".parse().unwrap();
        assert_eq!(m.to_string(), "3/2");
        let n: Money = "7".parse().unwrap();
        assert_eq!(n.to_string(), "7");
        assert!("1/0".parse::<Money>().is_err());
        assert!("-1/2".parse::<Money>().is_err());
    }

    #[test]
    fn threshold_semantics() {
        let two = Money::from_int(2);
        assert!(ThresholdPrice::inclusive(two).buys_at(two));
        assert!(!ThresholdPrice::exclusive(two).buys_at(two));
        assert!(ThresholdPrice::exclusive(two).buys_at(Money::from_int(3)));
        assert!(!ThresholdPrice::inclusive(two).buys_at(Money::from_int(1)));
    }

    #[test]
    fn ratio_bound_ordering() {
        let a = RatioBound::Finite(Money::new(8, 7).unwrap());
        assert!(RatioBound::Infinite > a);
        assert_eq!(a.max(RatioBound::Finite(Money::ONE)), a);
    }
}
