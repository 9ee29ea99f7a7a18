//! Lattice bases with exact integer blocks and symbolic flow/scale factors.
//!
//! A basis is stored as two integer blocks `h` (d × n) and `v` (c × n) with
//! common denominators, so that for `Y ∈ Z^n`
//!
//! ```text
//! X₊ = e^{log_plus}  · h·Y / h_den
//! X₋ = e^{log_minus} · v·Y / v_den
//! ```
//!
//! The diagonal flow and uniform rescaling only touch the two log factors;
//! integer coordinates of lattice points never change under them.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::geometry::{AmbientVector, Split};
use crate::scalar::{ln_bigint, log2_bigint, norm_sq, rational_from_f64, scaled_to_f64};

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeBasis {
    split: Split,
    h: Vec<Vec<BigInt>>,
    v: Vec<Vec<BigInt>>,
    h_den: BigInt,
    v_den: BigInt,
    log_plus: f64,
    log_minus: f64,
}

/// A lattice point by its integer coordinates, with exact squared block norms
/// of the base (unflowed) image, before division by the block denominators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeVector {
    pub y: Vec<BigInt>,
    pub plus_num_sq: BigInt,
    pub minus_num_sq: BigInt,
}

impl LatticeVector {
    pub fn is_zero(&self) -> bool {
        self.y.iter().all(|x| x.is_zero())
    }

    pub fn negated(&self) -> LatticeVector {
        LatticeVector {
            y: self.y.iter().map(|x| -x).collect(),
            plus_num_sq: self.plus_num_sq.clone(),
            minus_num_sq: self.minus_num_sq.clone(),
        }
    }
}

fn lcm_of_denominators<'a>(xs: impl Iterator<Item = &'a BigRational>) -> BigInt {
    xs.fold(BigInt::one(), |acc, x| acc.lcm(x.denom()))
}

fn block_from_rationals(rows: usize, cols: &[Vec<BigRational>]) -> (Vec<Vec<BigInt>>, BigInt) {
    let den = lcm_of_denominators(cols.iter().flatten());
    let mut block = vec![vec![BigInt::zero(); cols.len()]; rows];
    for (j, col) in cols.iter().enumerate() {
        for (i, x) in col.iter().enumerate() {
            block[i][j] = (x * BigRational::from_integer(den.clone())).to_integer();
        }
    }
    (block, den)
}

/// Determinant of a square integer matrix by fraction-free elimination.
pub fn integer_det(m: &[Vec<BigInt>]) -> BigInt {
    let n = m.len();
    let mut a: Vec<Vec<BigInt>> = m.to_vec();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if a[k][k].is_zero() {
            let Some(p) = (k + 1..n).find(|&i| !a[i][k].is_zero()) else {
                return BigInt::zero();
            };
            a.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let t = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                a[i][j] = t / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    sign * &a[n - 1][n - 1]
}

impl LatticeBasis {
    fn from_blocks(split: Split, h: Vec<Vec<BigInt>>, v: Vec<Vec<BigInt>>, h_den: BigInt, v_den: BigInt) -> Result<Self> {
        let b = LatticeBasis { split, h, v, h_den, v_den, log_plus: 0.0, log_minus: 0.0 };
        if b.det_base().is_zero() {
            return Err(Error::Singular("columns are linearly dependent".into()));
        }
        Ok(b)
    }

    /// Basis from exact columns.
    pub fn from_columns(split: Split, cols: &[AmbientVector]) -> Result<Self> {
        if cols.len() != split.n() {
            return Err(Error::DimensionMismatch { expected: format!("{} columns", split.n()), got: format!("{}", cols.len()) });
        }
        for c in cols {
            c.check_split(split)?;
        }
        let plus: Vec<Vec<BigRational>> = cols.iter().map(|c| c.plus.clone()).collect();
        let minus: Vec<Vec<BigRational>> = cols.iter().map(|c| c.minus.clone()).collect();
        let (h, h_den) = block_from_rationals(split.d, &plus);
        let (v, v_den) = block_from_rationals(split.c, &minus);
        Self::from_blocks(split, h, v, h_den, v_den)
    }

    /// Basis from float columns, taken as exact dyadic rationals.
    pub fn from_f64_columns(split: Split, cols: &[Vec<f64>]) -> Result<Self> {
        let cols: Result<Vec<AmbientVector>> = cols
            .iter()
            .map(|col| {
                if col.len() != split.n() {
                    return Err(Error::DimensionMismatch { expected: format!("{}", split.n()), got: format!("{}", col.len()) });
                }
                let exact: Result<Vec<BigRational>> = col.iter().map(|&x| rational_from_f64(x)).collect();
                let exact = exact?;
                Ok(AmbientVector::new(exact[..split.d].to_vec(), exact[split.d..].to_vec()))
            })
            .collect();
        Self::from_columns(split, &cols?)
    }

    /// Basis from integer columns.
    pub fn from_int_columns(split: Split, cols: &[Vec<i64>]) -> Result<Self> {
        let cols: Vec<AmbientVector> = cols.iter().map(|c| AmbientVector::from_ints(&c[..split.d], &c[split.d..])).collect();
        Self::from_columns(split, &cols)
    }

    pub fn identity(split: Split) -> Self {
        let n = split.n();
        let unit = |i: usize| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect::<Vec<_>>();
        let h = (0..split.d).map(unit).collect();
        let v = (split.d..n).map(unit).collect();
        LatticeBasis { split, h, v, h_den: BigInt::one(), v_den: BigInt::one(), log_plus: 0.0, log_minus: 0.0 }
    }

    /// `M_θ = [[I_d, -θ], [0, I_c]]` for `θ = num / den` (a d × c integer matrix over a common denominator),
    /// acting on `Y = (P, Q)`.
    pub fn theta_lattice(split: Split, num: &[Vec<BigInt>], den: &BigInt) -> Result<Self> {
        let (d, c) = (split.d, split.c);
        if num.len() != d || num.iter().any(|r| r.len() != c) {
            return Err(Error::DimensionMismatch { expected: format!("{d}×{c} theta"), got: format!("{} rows", num.len()) });
        }
        let n = d + c;
        let mut h = vec![vec![BigInt::zero(); n]; d];
        for i in 0..d {
            h[i][i] = den.clone();
            for j in 0..c {
                h[i][d + j] = -&num[i][j];
            }
        }
        let mut v = vec![vec![BigInt::zero(); n]; c];
        for j in 0..c {
            v[j][d + j] = BigInt::one();
        }
        Self::from_blocks(split, h, v, den.clone(), BigInt::one())
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn dim(&self) -> usize {
        self.split.n()
    }

    pub fn log_factors(&self) -> (f64, f64) {
        (self.log_plus, self.log_minus)
    }

    /// True when no flow or rescaling has been applied, so every norm is an exact rational.
    pub fn is_exact(&self) -> bool {
        self.log_plus == 0.0 && self.log_minus == 0.0
    }

    /// True when horizontal and vertical factors agree, so cross-block comparisons are exact.
    pub fn blocks_comparable(&self) -> bool {
        self.log_plus == self.log_minus
    }

    pub fn h_den(&self) -> &BigInt {
        &self.h_den
    }

    pub fn v_den(&self) -> &BigInt {
        &self.v_den
    }

    /// Determinant of the unflowed, unscaled base matrix.
    pub fn det_base(&self) -> BigRational {
        let rows: Vec<Vec<BigInt>> = self.h.iter().chain(self.v.iter()).cloned().collect();
        let num = integer_det(&rows);
        let den = num_traits::pow(self.h_den.clone(), self.split.d) * num_traits::pow(self.v_den.clone(), self.split.c);
        BigRational::new(num, den)
    }

    /// Exact determinant, available when no log factor is in effect.
    pub fn det_exact(&self) -> Option<BigRational> {
        self.is_exact().then(|| self.det_base())
    }

    pub fn ln_abs_det(&self) -> f64 {
        let det = self.det_base().abs();
        ln_bigint(det.numer()) - ln_bigint(det.denom())
            + self.split.d as f64 * self.log_plus
            + self.split.c as f64 * self.log_minus
    }

    /// `g_t` applied: horizontal block by `e^{ct}`, vertical by `e^{-dt}`.
    pub fn flowed(&self, t: f64) -> Self {
        let mut b = self.clone();
        b.log_plus += self.split.c as f64 * t;
        b.log_minus -= self.split.d as f64 * t;
        b
    }

    /// Uniform scaling by `e^s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut b = self.clone();
        b.log_plus += s;
        b.log_minus += s;
        b
    }

    /// Rescaled to covolume one.
    pub fn normalized(&self) -> Self {
        self.scaled(-self.ln_abs_det() / self.dim() as f64)
    }

    pub fn plus_num(&self, y: &[BigInt]) -> Vec<BigInt> {
        self.h.iter().map(|row| row.iter().zip(y).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn minus_num(&self, y: &[BigInt]) -> Vec<BigInt> {
        self.v.iter().map(|row| row.iter().zip(y).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn vector(&self, y: Vec<BigInt>) -> LatticeVector {
        let plus_num_sq = norm_sq(&self.plus_num(&y));
        let minus_num_sq = norm_sq(&self.minus_num(&y));
        LatticeVector { y, plus_num_sq, minus_num_sq }
    }

    /// Base (unflowed) image as an exact ambient vector.
    pub fn image_base(&self, y: &[BigInt]) -> AmbientVector {
        let hd = BigRational::from_integer(self.h_den.clone());
        let vd = BigRational::from_integer(self.v_den.clone());
        AmbientVector::new(
            self.plus_num(y).into_iter().map(|x| BigRational::from_integer(x) / &hd).collect(),
            self.minus_num(y).into_iter().map(|x| BigRational::from_integer(x) / &vd).collect(),
        )
    }

    /// Exact image; only defined while no log factor is in effect.
    pub fn image_exact(&self, y: &[BigInt]) -> Option<AmbientVector> {
        self.is_exact().then(|| self.image_base(y))
    }

    /// Image as floats after applying extra log scalings per block.
    pub fn approx_image(&self, y: &[BigInt], extra_plus: f64, extra_minus: f64) -> Vec<f64> {
        let ln2 = std::f64::consts::LN_2;
        let ep = (self.log_plus + extra_plus) / ln2 - log2_bigint(&self.h_den);
        let em = (self.log_minus + extra_minus) / ln2 - log2_bigint(&self.v_den);
        let mut out: Vec<f64> = self.plus_num(y).iter().map(|x| scaled_to_f64(x, ep)).collect();
        out.extend(self.minus_num(y).iter().map(|x| scaled_to_f64(x, em)));
        out
    }

    pub fn image_f64(&self, y: &[BigInt]) -> Vec<f64> {
        self.approx_image(y, 0.0, 0.0)
    }

    pub fn columns_f64(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|j| self.image_f64(&unit_vector(self.dim(), j))).collect()
    }

    /// Base `|X|₊²` as an exact rational.
    pub fn plus_sq_base(&self, v: &LatticeVector) -> BigRational {
        BigRational::new(v.plus_num_sq.clone(), &self.h_den * &self.h_den)
    }

    /// Base `|X|₋²` as an exact rational.
    pub fn minus_sq_base(&self, v: &LatticeVector) -> BigRational {
        BigRational::new(v.minus_num_sq.clone(), &self.v_den * &self.v_den)
    }

    /// `ln |X|₊` including the flow factor; `-inf` for a zero block.
    pub fn ln_plus(&self, v: &LatticeVector) -> f64 {
        if v.plus_num_sq.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.log_plus + 0.5 * ln_bigint(&v.plus_num_sq) - ln_bigint(&self.h_den)
    }

    /// `ln |X|₋` including the flow factor; `-inf` for a zero block.
    pub fn ln_minus(&self, v: &LatticeVector) -> f64 {
        if v.minus_num_sq.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.log_minus + 0.5 * ln_bigint(&v.minus_num_sq) - ln_bigint(&self.v_den)
    }

    /// Basis `B·U` for an integer change of basis given by its columns.
    pub fn transformed(&self, u_cols: &[Vec<BigInt>]) -> Result<Self> {
        let n = self.dim();
        if u_cols.len() != n || u_cols.iter().any(|c| c.len() != n) {
            return Err(Error::DimensionMismatch { expected: format!("{n}×{n}"), got: format!("{}", u_cols.len()) });
        }
        let mut h = vec![vec![BigInt::zero(); n]; self.split.d];
        let mut v = vec![vec![BigInt::zero(); n]; self.split.c];
        for (j, col) in u_cols.iter().enumerate() {
            for (i, x) in self.plus_num(col).into_iter().enumerate() {
                h[i][j] = x;
            }
            for (i, x) in self.minus_num(col).into_iter().enumerate() {
                v[i][j] = x;
            }
        }
        let mut b = Self::from_blocks(self.split, h, v, self.h_den.clone(), self.v_den.clone())?;
        b.log_plus = self.log_plus;
        b.log_minus = self.log_minus;
        Ok(b)
    }
}

pub fn unit_vector(n: usize, j: usize) -> Vec<BigInt> {
    (0..n).map(|i| if i == j { BigInt::one() } else { BigInt::zero() }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, ratio};

    #[test]
    fn integer_det_small() {
        let m = vec![vec![int(2), int(1)], vec![int(7), int(4)]];
        assert_eq!(integer_det(&m), int(1));
        let m = vec![vec![int(0), int(1), int(0)], vec![int(1), int(0), int(0)], vec![int(0), int(0), int(3)]];
        assert_eq!(integer_det(&m), int(-3));
        let m = vec![vec![int(1), int(2)], vec![int(2), int(4)]];
        assert_eq!(integer_det(&m), int(0));
    }

    #[test]
    fn theta_lattice_is_unimodular() {
        let s = Split::new(2, 1).unwrap();
        let b = LatticeBasis::theta_lattice(s, &[vec![int(1)], vec![int(2)]], &int(6)).unwrap();
        assert_eq!(b.det_exact(), Some(ratio(1, 1)));
        // Y = (P, Q) = (0, 1, 2): X₊ = P - θQ = (-1/3, 1/3), X₋ = 2
        let x = b.image_exact(&[int(0), int(1), int(2)]).unwrap();
        assert_eq!(x.plus, vec![ratio(-1, 3), ratio(1, 3)]);
        assert_eq!(x.minus, vec![ratio(2, 1)]);
    }

    #[test]
    fn flow_scales_blocks() {
        let s = Split::new(1, 1).unwrap();
        let b = LatticeBasis::identity(s).flowed(std::f64::consts::LN_2);
        let img = b.image_f64(&[int(1), int(1)]);
        assert!((img[0] - 2.0).abs() < 1e-15 && (img[1] - 0.5).abs() < 1e-15);
        assert!(b.ln_abs_det().abs() < 1e-15);
    }

    #[test]
    fn singular_columns_rejected() {
        let s = Split::new(1, 1).unwrap();
        assert!(LatticeBasis::from_int_columns(s, &[vec![1, 2], vec![2, 4]]).is_err());
    }
}
