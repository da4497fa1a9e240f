//! Exact rational numbers, always reduced with a positive denominator.
//!
//! Joint-distribution threading performs tens of millions of rational
//! multiply-adds; a machine-word fast path keeps that affordable while the
//! big-integer representation preserves exactness for arbitrary weights.
//! The representation is canonical: any value that fits the small form is
//! stored in it, so derived structural equality is value equality.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Clone, PartialEq, Eq, Debug)]
enum Repr {
    Small(i64, i64),
    Big(Box<BigRational>),
}

/// Exact rational number: reduced, denominator strictly positive.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Rat(Repr);

fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn from_i128(num: i128, den: i128) -> Rat {
    debug_assert!(den != 0, "zero denominator");
    let (num, den) = if den < 0 { (-num, -den) } else { (num, den) };
    if num == 0 {
        return Rat(Repr::Small(0, 1));
    }
    let g = gcd_u128(num.unsigned_abs(), den.unsigned_abs()) as i128;
    let (num, den) = (num / g, den / g);
    if let (Ok(n), Ok(d)) = (i64::try_from(num), i64::try_from(den)) {
        Rat(Repr::Small(n, d))
    } else {
        Rat(Repr::Big(Box::new(BigRational::new(num.into(), den.into()))))
    }
}

fn from_big(r: BigRational) -> Rat {
    if let (Some(n), Some(d)) = (r.numer().to_i64(), r.denom().to_i64()) {
        Rat(Repr::Small(n, d))
    } else {
        Rat(Repr::Big(Box::new(r)))
    }
}

impl Rat {
    /// Build from an integer pair; reduces and normalizes the sign.
    pub fn new(num: BigInt, den: BigInt) -> Rat {
        assert!(!den.is_zero(), "zero denominator");
        if let (Some(n), Some(d)) = (num.to_i128(), den.to_i128()) {
            from_i128(n, d)
        } else {
            from_big(BigRational::new(num, den))
        }
    }

    pub fn from_integer(n: BigInt) -> Rat {
        Rat::new(n, BigInt::one())
    }

    fn to_big(&self) -> BigRational {
        match &self.0 {
            Repr::Small(n, d) => BigRational::new((*n).into(), (*d).into()),
            Repr::Big(r) => (**r).clone(),
        }
    }

    pub fn numer(&self) -> BigInt {
        match &self.0 {
            Repr::Small(n, _) => (*n).into(),
            Repr::Big(r) => r.numer().clone(),
        }
    }

    pub fn denom(&self) -> BigInt {
        match &self.0 {
            Repr::Small(_, d) => (*d).into(),
            Repr::Big(r) => r.denom().clone(),
        }
    }

    /// The integer value; truncates like `BigRational::to_integer`.
    pub fn to_integer(&self) -> BigInt {
        match &self.0 {
            Repr::Small(n, d) => BigInt::from(n / d),
            Repr::Big(r) => r.to_integer(),
        }
    }

    pub fn is_negative(&self) -> bool {
        match &self.0 {
            Repr::Small(n, _) => *n < 0,
            Repr::Big(r) => r.is_negative(),
        }
    }
}

impl Zero for Rat {
    fn zero() -> Rat {
        Rat(Repr::Small(0, 1))
    }

    fn is_zero(&self) -> bool {
        matches!(self.0, Repr::Small(0, _))
    }
}

impl One for Rat {
    fn one() -> Rat {
        Rat(Repr::Small(1, 1))
    }

    fn is_one(&self) -> bool {
        matches!(self.0, Repr::Small(1, 1))
    }
}

impl Add for Rat {
    type Output = Rat;
    fn add(self, rhs: Rat) -> Rat {
        match (&self.0, &rhs.0) {
            (Repr::Small(an, ad), Repr::Small(bn, bd)) => {
                let (an, ad, bn, bd) =
                    (*an as i128, *ad as i128, *bn as i128, *bd as i128);
                // Products of i64 values fit in i128; only the sum can
                // overflow, in which case we fall back to big integers.
                match (an * bd).checked_add(bn * ad) {
                    Some(num) => from_i128(num, ad * bd),
                    None => from_big(self.to_big() + rhs.to_big()),
                }
            }
            _ => from_big(self.to_big() + rhs.to_big()),
        }
    }
}

impl AddAssign for Rat {
    fn add_assign(&mut self, rhs: Rat) {
        let lhs = std::mem::replace(self, Rat::zero());
        *self = lhs + rhs;
    }
}

impl Sub for Rat {
    type Output = Rat;
    fn sub(self, rhs: Rat) -> Rat {
        self + (-rhs)
    }
}

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        match self.0 {
            Repr::Small(n, d) => Rat(Repr::Small(-n, d)),
            Repr::Big(r) => from_big(-*r),
        }
    }
}

impl Mul for Rat {
    type Output = Rat;
    fn mul(self, rhs: Rat) -> Rat {
        match (&self.0, &rhs.0) {
            (Repr::Small(an, ad), Repr::Small(bn, bd)) => {
                from_i128(*an as i128 * *bn as i128, *ad as i128 * *bd as i128)
            }
            _ => from_big(self.to_big() * rhs.to_big()),
        }
    }
}

impl Div for Rat {
    type Output = Rat;
    fn div(self, rhs: Rat) -> Rat {
        assert!(!rhs.is_zero(), "division by zero");
        match (&self.0, &rhs.0) {
            (Repr::Small(an, ad), Repr::Small(bn, bd)) => {
                from_i128(*an as i128 * *bd as i128, *ad as i128 * *bn as i128)
            }
            _ => from_big(self.to_big() / rhs.to_big()),
        }
    }
}

impl<'a> Mul<&'a Rat> for &'a Rat {
    type Output = Rat;
    fn mul(self, rhs: &'a Rat) -> Rat {
        self.clone() * rhs.clone()
    }
}

impl Sum for Rat {
    fn sum<I: Iterator<Item = Rat>>(iter: I) -> Rat {
        iter.fold(Rat::zero(), |a, b| a + b)
    }
}

impl PartialOrd for Rat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rat {
    fn cmp(&self, other: &Self) -> Ordering {
        match (&self.0, &other.0) {
            (Repr::Small(an, ad), Repr::Small(bn, bd)) => {
                (*an as i128 * *bd as i128).cmp(&(*bn as i128 * *ad as i128))
            }
            _ => self.to_big().cmp(&other.to_big()),
        }
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small(n, d) => write!(f, "{n}/{d}"),
            Repr::Big(r) => write!(f, "{}/{}", r.numer(), r.denom()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rat {
        Rat::new(n.into(), d.into())
    }

    #[test]
    fn reduction_and_sign_normalization() {
        assert_eq!(r(2, 4), r(1, 2));
        assert_eq!(r(-1, -2), r(1, 2));
        assert_eq!(r(1, -2), r(-1, 2));
        assert_eq!(r(0, 5), Rat::zero());
        assert!(r(-1, 3).is_negative());
    }

    #[test]
    fn arithmetic() {
        assert_eq!(r(1, 2) + r(1, 3), r(5, 6));
        assert_eq!(r(1, 2) * r(2, 3), r(1, 3));
        assert_eq!(r(1, 2) - r(1, 2), Rat::zero());
        assert_eq!(r(1, 2) / r(3, 4), r(2, 3));
        assert!(r(1, 3) < r(1, 2));
        let total: Rat = [r(1, 4), r(1, 4), r(1, 2)].into_iter().sum();
        assert!(total.is_one());
    }

    #[test]
    fn promotion_and_demotion_keep_equality_canonical() {
        // i64 overflow promotes; operations that shrink demote.
        let big = Rat::new(BigInt::from(i64::MAX), BigInt::one());
        let sum = big.clone() + Rat::one();
        assert_eq!(sum.clone() - Rat::one(), big);
        let back = sum.clone() + (-Rat::one()) + (-big.clone());
        assert!(back.is_zero());
        // A product of two large halves reduces back into small range.
        let a = Rat::new(BigInt::from(1i64 << 62), BigInt::from(3));
        let b = Rat::new(BigInt::from(3), BigInt::from(1i64 << 62));
        assert!((a * b).is_one());
    }

    #[test]
    fn display_always_includes_denominator() {
        assert_eq!(r(1, 1).to_string(), "1/1");
        assert_eq!(r(-3, 7).to_string(), "-3/7");
    }
}
