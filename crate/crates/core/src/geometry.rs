//! The split ambient space `R^d × R^c`, its norms, cylinders and the Minkowski constant.

use num_bigint::BigInt;
use num_integer::Roots;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{ln_ratio, pi_bounds, rational_norm_sq};

/// Dimensions `(d, c)`: `d` horizontal coordinates, `c` vertical ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Split {
    pub d: usize,
    pub c: usize,
}

impl Split {
    pub fn new(d: usize, c: usize) -> Result<Self> {
        if d == 0 || c == 0 {
            return Err(Error::InvalidArgument(format!("d and c must be positive, got ({d},{c})")));
        }
        if d + c > 4 {
            return Err(Error::InvalidArgument(format!("d + c ≤ 4 required, got ({d},{c})")));
        }
        Ok(Split { d, c })
    }

    pub fn n(&self) -> usize {
        self.d + self.c
    }
}

/// A vector `X = (X₊, X₋)` with exact coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AmbientVector {
    pub plus: Vec<BigRational>,
    pub minus: Vec<BigRational>,
}

impl AmbientVector {
    pub fn new(plus: Vec<BigRational>, minus: Vec<BigRational>) -> Self {
        AmbientVector { plus, minus }
    }

    pub fn from_ints(plus: &[i64], minus: &[i64]) -> Self {
        let conv = |v: &[i64]| v.iter().map(|&x| BigRational::from_integer(BigInt::from(x))).collect();
        AmbientVector { plus: conv(plus), minus: conv(minus) }
    }

    pub fn split(&self) -> Split {
        Split { d: self.plus.len(), c: self.minus.len() }
    }

    pub fn check_split(&self, split: Split) -> Result<()> {
        if self.plus.len() != split.d || self.minus.len() != split.c {
            return Err(Error::DimensionMismatch {
                expected: format!("({},{})", split.d, split.c),
                got: format!("({},{})", self.plus.len(), self.minus.len()),
            });
        }
        Ok(())
    }

    /// `|X|₊²`
    pub fn plus_sq(&self) -> BigRational {
        rational_norm_sq(&self.plus)
    }

    /// `|X|₋²`
    pub fn minus_sq(&self) -> BigRational {
        rational_norm_sq(&self.minus)
    }

    pub fn is_zero(&self) -> bool {
        self.plus.iter().chain(&self.minus).all(|x| x.is_zero())
    }
}

/// Squared mixed norm `max(|X|₊, |X|₋)²`, exact.
pub fn mixed_norm_sq(x: &AmbientVector, split: Split) -> Result<BigRational> {
    x.check_split(split)?;
    Ok(x.plus_sq().max(x.minus_sq()))
}

/// Mixed norm `max(|X|₊, |X|₋)` as a float.
pub fn mixed_norm(x: &AmbientVector, split: Split) -> Result<f64> {
    let sq = mixed_norm_sq(x, split)?;
    Ok((0.5 * ln_ratio(&sq)).exp())
}

/// Exact mixed norm when it is rational.
pub fn mixed_norm_exact(x: &AmbientVector, split: Split) -> Result<Option<BigRational>> {
    let sq = mixed_norm_sq(x, split)?;
    Ok(exact_sqrt(&sq))
}

pub fn exact_sqrt(x: &BigRational) -> Option<BigRational> {
    if x.is_negative() {
        return None;
    }
    let n = x.numer().sqrt();
    let d = x.denom().sqrt();
    (&n * &n == *x.numer() && &d * &d == *x.denom()).then(|| BigRational::new(n, d))
}

/// Closed cylinder `B_d(0, r₊) × B_c(0, r₋)`; radii are held as exact squares.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cylinder {
    pub r_plus_sq: BigRational,
    pub r_minus_sq: BigRational,
}

impl Cylinder {
    pub fn from_squares(r_plus_sq: BigRational, r_minus_sq: BigRational) -> Result<Self> {
        if r_plus_sq.is_negative() || r_minus_sq.is_negative() {
            return Err(Error::InvalidArgument("cylinder radii must be nonnegative".into()));
        }
        Ok(Cylinder { r_plus_sq, r_minus_sq })
    }

    pub fn new(r_plus: BigRational, r_minus: BigRational) -> Result<Self> {
        if r_plus.is_negative() || r_minus.is_negative() {
            return Err(Error::InvalidArgument("cylinder radii must be nonnegative".into()));
        }
        Ok(Cylinder { r_plus_sq: &r_plus * &r_plus, r_minus_sq: &r_minus * &r_minus })
    }

    pub fn contains(&self, x: &AmbientVector) -> bool {
        x.plus_sq() <= self.r_plus_sq && x.minus_sq() <= self.r_minus_sq
    }

    pub fn ln_radii(&self) -> (f64, f64) {
        (0.5 * ln_ratio(&self.r_plus_sq), 0.5 * ln_ratio(&self.r_minus_sq))
    }
}

/// `C_{d,c} = 2^{d+c} / (V_d V_c)`, stored as `coefficient · π^{-pi_power}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinkowskiBound {
    pub coefficient: BigRational,
    pub pi_power: u32,
}

/// Unit-ball volume `V_k = coef · π^pow`.
fn unit_ball_volume(k: usize) -> (BigRational, u32) {
    match k {
        0 => (BigRational::one(), 0),
        1 => (BigRational::from_integer(BigInt::from(2)), 0),
        _ => {
            let (coef, pow) = unit_ball_volume(k - 2);
            (coef * BigRational::new(BigInt::from(2), BigInt::from(k)), pow + 1)
        }
    }
}

pub fn minkowski_bound(d: usize, c: usize) -> MinkowskiBound {
    let (vd, pd) = unit_ball_volume(d);
    let (vc, pc) = unit_ball_volume(c);
    let two_n = BigRational::from_integer(BigInt::one() << (d + c));
    MinkowskiBound { coefficient: two_n / (vd * vc), pi_power: pd + pc }
}

impl MinkowskiBound {
    pub fn ln_value(&self) -> f64 {
        ln_ratio(&self.coefficient) - self.pi_power as f64 * std::f64::consts::PI.ln()
    }

    pub fn value(&self) -> f64 {
        self.ln_value().exp()
    }

    /// Exact rational value when no power of π is involved.
    pub fn exact(&self) -> Option<BigRational> {
        (self.pi_power == 0).then(|| self.coefficient.clone())
    }

    /// Decide `β² ≤ C²` with certified enclosures of π.
    /// `None` only if the rational enclosure cannot separate the two sides.
    pub fn certify_le_sq(&self, beta_sq: &BigRational) -> Option<bool> {
        let c_sq = &self.coefficient * &self.coefficient;
        if self.pi_power == 0 {
            return Some(*beta_sq <= c_sq);
        }
        let (lo, hi) = pi_bounds();
        let p = 2 * self.pi_power as i32;
        let hi_p = num_traits::pow(hi, p as usize);
        let lo_p = num_traits::pow(lo, p as usize);
        if beta_sq * &hi_p <= c_sq {
            Some(true)
        } else if beta_sq * &lo_p > c_sq {
            Some(false)
        } else {
            None
        }
    }
}

/// Grid-covering count `(4⌈√k⌉ + 1)^k`.
fn grid_cover(k: usize) -> u64 {
    let mut s = (k as u64).sqrt();
    if s * s < k as u64 {
        s += 1;
    }
    (4 * s + 1).pow(k as u32)
}

/// Pigeonhole constant `N_d · N_c + 1` for the doubling property.
pub fn a_safe(d: usize, c: usize) -> u64 {
    grid_cover(d) * grid_cover(c) + 1
}
