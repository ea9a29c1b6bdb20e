//! Exact dyadic rationals `num / 2^exp`.
//!
//! Every probability handled by the lab has a power-of-two denominator, so
//! sums and products of them stay dyadic and can be compared exactly.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::de::Error as _;
use serde::ser::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// `num / 2^exp`, kept normalized (odd numerator or zero with `exp == 0`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: i128,
    exp: u32,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { num: 0, exp: 0 };
    pub const ONE: Dyadic = Dyadic { num: 1, exp: 0 };

    pub fn new(num: i128, exp: u32) -> Self {
        Dyadic { num, exp }.normalized()
    }

    pub fn from_int(v: i64) -> Self {
        Dyadic::new(v as i128, 0)
    }

    /// Exact conversion when `v` is a multiple of `2^-max_exp`.
    pub fn from_f64(v: f64, max_exp: u32) -> Option<Self> {
        if !v.is_finite() || max_exp > 100 {
            return None;
        }
        let scaled = v * (2f64).powi(max_exp as i32);
        if scaled.fract() != 0.0 || scaled.abs() >= 2f64.powi(120) {
            return None;
        }
        Some(Dyadic::new(scaled as i128, max_exp))
    }

    pub fn numerator(&self) -> i128 {
        self.num
    }

    pub fn exponent(&self) -> u32 {
        self.exp
    }

    fn normalized(mut self) -> Self {
        if self.num == 0 {
            self.exp = 0;
            return self;
        }
        let tz = self.num.trailing_zeros().min(self.exp);
        self.num >>= tz;
        self.exp -= tz;
        self
    }

    /// Numerator of `self` when rescaled to denominator `2^exp`.
    fn scaled_to(&self, exp: u32) -> i128 {
        debug_assert!(exp >= self.exp);
        self.num
            .checked_shl(exp - self.exp)
            .filter(|v| v >> (exp - self.exp) == self.num)
            .expect("dyadic overflow")
    }

    pub fn abs(self) -> Self {
        Dyadic {
            num: self.num.abs(),
            exp: self.exp,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn signum(&self) -> i32 {
        self.num.signum() as i32
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / 2f64.powi(self.exp as i32)
    }

    /// `self <= 1/d` for a positive integer `d`.
    pub fn le_reciprocal(&self, d: u64) -> bool {
        assert!(d > 0);
        // num * d <= 2^exp
        let lhs = self.num.checked_mul(d as i128).expect("dyadic overflow");
        lhs <= 1i128 << self.exp
    }

    pub fn sum<I: IntoIterator<Item = Dyadic>>(it: I) -> Dyadic {
        it.into_iter().fold(Dyadic::ZERO, |a, b| a + b)
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        let exp = self.exp.max(rhs.exp);
        let num = self
            .scaled_to(exp)
            .checked_add(rhs.scaled_to(exp))
            .expect("dyadic overflow");
        Dyadic::new(num, exp)
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: Dyadic) -> Dyadic {
        self + (-rhs)
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic {
            num: -self.num,
            exp: self.exp,
        }
    }
}

impl Mul for Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: Dyadic) -> Dyadic {
        let num = self.num.checked_mul(rhs.num).expect("dyadic overflow");
        Dyadic::new(num, self.exp + rhs.exp)
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let exp = self.exp.max(other.exp);
        self.scaled_to(exp).cmp(&other.scaled_to(exp))
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/2^{}", self.num, self.exp)
        }
    }
}

// Serialized as the integer pair [numerator, exponent].
impl Serialize for Dyadic {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let num = i64::try_from(self.num)
            .map_err(|_| S::Error::custom("dyadic numerator exceeds i64"))?;
        (num, self.exp).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Dyadic {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (num, exp) = <(i64, u32)>::deserialize(d)?;
        if exp > 120 {
            return Err(D::Error::custom("dyadic exponent too large"));
        }
        Ok(Dyadic::new(num as i128, exp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_is_exact() {
        let a = Dyadic::new(3, 2); // 3/4
        let b = Dyadic::new(1, 3); // 1/8
        assert_eq!(a + b, Dyadic::new(7, 3));
        assert_eq!(a - b, Dyadic::new(5, 3));
        assert_eq!(a * b, Dyadic::new(3, 5));
        assert_eq!(Dyadic::new(4, 3), Dyadic::new(1, 1));
        assert!(a > b);
    }

    #[test]
    fn reciprocal_comparison() {
        assert!(Dyadic::new(1, 2).le_reciprocal(4));
        assert!(!Dyadic::new(1, 2).le_reciprocal(5));
        assert!(Dyadic::from_int(-1).le_reciprocal(1000));
        assert!(Dyadic::ONE.le_reciprocal(1));
    }

    #[test]
    fn from_f64_checks_scale() {
        assert_eq!(Dyadic::from_f64(0.625, 3), Some(Dyadic::new(5, 3)));
        assert_eq!(Dyadic::from_f64(0.1, 16), None);
    }

    #[test]
    fn serde_pair() {
        let d = Dyadic::new(-5, 7);
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, "[-5,7]");
        assert_eq!(serde_json::from_str::<Dyadic>(&s).unwrap(), d);
    }
}
