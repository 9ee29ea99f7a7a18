//! Exact rationals, guarded floats and the conversions between them.

use std::cmp::Ordering;
use std::f64::consts::LN_2;

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Arbitrary-precision rational in lowest terms with a positive denominator.
pub type ExactScalar = BigRational;

/// Mantissa bits carried by [`ApproxScalar`].
pub const PRECISION_BITS: u32 = 53;

/// A float tagged with the number of mantissa bits it carries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxScalar {
    pub value: f64,
    pub precision_bits: u32,
}

impl ApproxScalar {
    pub fn new(value: f64) -> Self {
        ApproxScalar { value, precision_bits: PRECISION_BITS }
    }

    pub fn tolerance(&self) -> Tolerance {
        Tolerance::for_bits(self.precision_bits)
    }
}

/// Relative tolerance policy for approximate comparisons.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
}

impl Tolerance {
    /// `2^-(bits - 16)`.
    pub fn for_bits(bits: u32) -> Self {
        assert!(bits >= 53, "precision below double is not supported");
        Tolerance { rel: (-((bits - 16) as f64)).exp2() }
    }

    pub fn default_policy() -> Self {
        Self::for_bits(PRECISION_BITS)
    }

    /// Compare two logarithms; differences within `rel` count as equal.
    pub fn cmp_ln(&self, a: f64, b: f64) -> Ordering {
        let diff = a - b;
        if diff.abs() <= self.rel {
            Ordering::Equal
        } else if diff < 0.0 {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    }
}

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> BigInt {
    BigInt::from(n)
}

/// `"num/den"`, always with an explicit denominator.
pub fn fraction_string(x: &BigRational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Accepts `p/q` or a bare integer `p`.
pub fn parse_fraction(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a fraction: {s:?}"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(Error::Parse(format!("zero denominator in {s:?}")));
            }
            Ok(BigRational::new(p, q))
        }
        None => {
            let p: BigInt = s.parse().map_err(|_| bad())?;
            Ok(BigRational::from_integer(p))
        }
    }
}

/// Flow times and densities: 30 significant digits in scientific form.
pub fn format_time(t: f64) -> String {
    format!("{t:.29e}")
}

/// Exact rational value of a finite float.
pub fn rational_from_f64(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::InvalidArgument(format!("non-finite value {x}")))
}

pub fn rational_to_f64(x: &BigRational) -> f64 {
    match x.to_f64() {
        Some(v) if v.is_finite() && (v != 0.0 || x.is_zero()) => v,
        _ => {
            let sign = if x.is_negative() { -1.0 } else { 1.0 };
            sign * ln_ratio(&x.abs()).exp()
        }
    }
}

/// `log2 |n|`, accurate for integers far outside the f64 range.
pub fn log2_bigint(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    let shift = bits.saturating_sub(63);
    let top = (n.magnitude() >> shift).to_f64().unwrap_or(f64::NAN);
    top.log2() + shift as f64
}

pub fn ln_bigint(n: &BigInt) -> f64 {
    log2_bigint(n) * LN_2
}

/// `ln x` for positive rationals; `-inf` at zero.
pub fn ln_ratio(x: &BigRational) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    ln_bigint(x.numer()) - ln_bigint(x.denom())
}

/// `n · 2^e` as a float without materializing either factor.
pub fn scaled_to_f64(n: &BigInt, e: f64) -> f64 {
    let bits = n.bits();
    if bits == 0 {
        return 0.0;
    }
    let shift = bits.saturating_sub(62);
    let top = (n.magnitude() >> shift).to_f64().unwrap_or(f64::NAN);
    let v = top * (e + shift as f64).exp2();
    if n.sign() == Sign::Minus {
        -v
    } else {
        v
    }
}

pub fn norm_sq(v: &[BigInt]) -> BigInt {
    v.iter().map(|x| x * x).sum()
}

pub fn rational_norm_sq(v: &[BigRational]) -> BigRational {
    v.iter().fold(BigRational::zero(), |acc, x| acc + x * x)
}

/// Certified rational bounds `lo ≤ √x ≤ hi` with `hi - lo ≤ 2^-bits` (for `x ≥ 0`).
pub fn sqrt_bounds(x: &BigRational, bits: u32) -> (BigRational, BigRational) {
    assert!(!x.is_negative(), "square root of a negative rational");
    if x.is_zero() {
        return (BigRational::zero(), BigRational::zero());
    }
    // √(a/b) = √(a·b·4^k) / (b·2^k)
    let k = bits as usize + 2;
    let scaled: BigInt = (x.numer() * x.denom()) << (2 * k);
    let root = scaled.sqrt();
    let den: BigInt = x.denom() << k;
    let lo = BigRational::new(root.clone(), den.clone());
    let exact = &root * &root == scaled;
    let hi = if exact { lo.clone() } else { BigRational::new(root + 1, den) };
    (lo, hi)
}

pub fn floor_rational(x: &BigRational) -> BigInt {
    x.floor().to_integer()
}

pub fn ceil_rational(x: &BigRational) -> BigInt {
    x.ceil().to_integer()
}

/// Fractional part in `[0, 1)`.
pub fn frac_rational(x: &BigRational) -> BigRational {
    x - BigRational::from_integer(floor_rational(x))
}

/// Nearest integer, ties going to the smaller one.
pub fn round_half_down(num: &BigInt, den: &BigInt) -> BigInt {
    use num_integer::Integer;
    let two = BigInt::from(2);
    (two * num + den - BigInt::one()).div_floor(&(BigInt::from(2) * den))
}

pub fn sign_of(x: &BigInt) -> i32 {
    match x.sign() {
        Sign::Minus => -1,
        Sign::NoSign => 0,
        Sign::Plus => 1,
    }
}

/// Rational enclosures of π, good to 50 decimal places.
pub fn pi_bounds() -> (BigRational, BigRational) {
    let digits = "314159265358979323846264338327950288419716939937510";
    let lo_num: BigInt = digits.parse().unwrap();
    let den = BigInt::from(10).pow(50);
    let lo = BigRational::new(lo_num.clone(), den.clone());
    let hi = BigRational::new(lo_num + 1, den);
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fraction_round_trip() {
        let x = ratio(-6, 4);
        assert_eq!(fraction_string(&x), "-3/2");
        assert_eq!(parse_fraction("-3/2").unwrap(), x);
        assert_eq!(parse_fraction("7").unwrap(), ratio(7, 1));
        assert!(parse_fraction("1/0").is_err());
        assert!(parse_fraction("x").is_err());
    }

    #[test]
    fn sqrt_bounds_enclose() {
        for (p, q) in [(2, 1), (1, 3), (9, 4), (12345, 7)] {
            let x = ratio(p, q);
            let (lo, hi) = sqrt_bounds(&x, 80);
            assert!(&lo * &lo <= x);
            assert!(&hi * &hi >= x);
            assert!(&hi - &lo <= BigRational::new(BigInt::one(), BigInt::one() << 80));
        }
        let (lo, hi) = sqrt_bounds(&ratio(9, 4), 10);
        assert_eq!(lo, ratio(3, 2));
        assert_eq!(hi, ratio(3, 2));
    }

    #[test]
    fn round_half_down_ties() {
        assert_eq!(round_half_down(&int(1), &int(2)), int(0));
        assert_eq!(round_half_down(&int(3), &int(2)), int(1));
        assert_eq!(round_half_down(&int(-1), &int(2)), int(-1));
        assert_eq!(round_half_down(&int(2), &int(3)), int(1));
        assert_eq!(round_half_down(&int(-2), &int(3)), int(-1));
    }

    #[test]
    fn scaled_conversion_handles_huge_integers() {
        let n: BigInt = BigInt::from(3) << 5000usize;
        let v = scaled_to_f64(&n, -5000.0);
        assert!((v - 3.0).abs() < 1e-15);
        assert!((log2_bigint(&n) - (5000.0 + 3f64.log2())).abs() < 1e-9);
        assert_eq!(scaled_to_f64(&int(-5), 1.0), -10.0);
    }

    #[test]
    fn pi_bounds_bracket_float_pi() {
        let (lo, hi) = pi_bounds();
        assert!(lo < hi);
        assert!((rational_to_f64(&lo) - std::f64::consts::PI).abs() < 1e-15);
    }
}
