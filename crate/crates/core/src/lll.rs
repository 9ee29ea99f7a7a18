//! LLL reduction in floating point with an exact integer transform.
//!
//! Float columns are always recomputed from the exact lattice through the
//! accumulated transform, so rounding never leaks into the lattice itself.

use num_bigint::BigInt;
use num_traits::{FromPrimitive, Zero};

use crate::error::{Error, Result};
use crate::lattice::{unit_vector, LatticeBasis};

pub const LLL_DELTA: f64 = 0.99;

const MAX_SWEEPS: usize = 200_000;

/// Gram–Schmidt data: `mu[i][j]` for `j < i` and squared lengths `b*_i`.
pub fn gram_schmidt(cols: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = cols.len();
    let dim = cols.first().map_or(0, |c| c.len());
    let mut star: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut bsq = vec![0.0; n];
    let mut mu = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut s = cols[i].clone();
        for j in 0..i {
            let m = if bsq[j] > 0.0 { dot(&cols[i], &star[j]) / bsq[j] } else { 0.0 };
            mu[i][j] = m;
            for k in 0..dim {
                s[k] -= m * star[j][k];
            }
        }
        bsq[i] = dot(&s, &s);
        star.push(s);
    }
    (mu, bsq)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_finite(cols: &[Vec<f64>]) -> Result<()> {
    if cols.iter().flatten().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Singular("basis images overflow the float range".into()))
    }
}

/// Reduce in place. `u` holds the transform as columns; `image` maps integer
/// coordinates to float images. Returns the float images of the reduced basis.
pub fn lll_in_place<F>(u: &mut [Vec<BigInt>], image: F, delta: f64) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[BigInt]) -> Vec<f64>,
{
    let n = u.len();
    let mut cols: Vec<Vec<f64>> = u.iter().map(|y| image(y)).collect();
    check_finite(&cols)?;
    if n < 2 {
        return Ok(cols);
    }
    let mut k = 1;
    let mut sweeps = 0;
    while k < n {
        sweeps += 1;
        if sweeps > MAX_SWEEPS {
            return Err(Error::Singular("LLL failed to converge".into()));
        }
        // size reduction of column k, repeated while large multipliers remain
        for _ in 0..64 {
            let (mu, _) = gram_schmidt(&cols);
            let mut changed = false;
            let mut row = mu[k].clone();
            for j in (0..k).rev() {
                let r = row[j].round();
                if r != 0.0 && row[j].abs() > 0.5 {
                    let rb = BigInt::from_f64(r).ok_or_else(|| Error::Singular("non-finite multiplier".into()))?;
                    let (head, tail) = u.split_at_mut(k);
                    for (a, b) in tail[0].iter_mut().zip(&head[j]) {
                        *a -= &rb * b;
                    }
                    for (l, m) in mu[j].iter().enumerate().take(j) {
                        row[l] -= r * m;
                    }
                    row[j] -= r;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            cols[k] = image(&u[k]);
            check_finite(&cols[k..=k])?;
        }
        let (mu, bsq) = gram_schmidt(&cols);
        if !(bsq[k] > 0.0) || !(bsq[k - 1] > 0.0) {
            return Err(Error::Singular("vanishing Gram–Schmidt length".into()));
        }
        if bsq[k] >= (delta - mu[k][k - 1] * mu[k][k - 1]) * bsq[k - 1] {
            k += 1;
        } else {
            u.swap(k, k - 1);
            cols.swap(k, k - 1);
            k = (k - 1).max(1);
        }
    }
    Ok(cols)
}

/// Largest change of the block log-ratio taken in one stage of [`lll_basis_in_place`].
const STAGE_LN: f64 = 8.0;

/// Reduce `b` with extra block scalings applied, warm-started from `u`.
///
/// If the float Gram–Schmidt data degenerate (block scales too far apart),
/// restart from the identity and move the block ratio to its target in stages,
/// reducing after each one.
pub fn lll_basis_in_place(u: &mut Vec<Vec<BigInt>>, b: &LatticeBasis, extra_plus: f64, extra_minus: f64) -> Result<Vec<Vec<f64>>> {
    let mut trial = u.clone();
    match lll_in_place(&mut trial, |y| b.approx_image(y, extra_plus, extra_minus), LLL_DELTA) {
        Ok(cols) => {
            *u = trial;
            return Ok(cols);
        }
        Err(Error::Singular(_)) => {}
        Err(e) => return Err(e),
    }
    let (lp, lm) = b.log_factors();
    let (a, c) = (lp + extra_plus, lm + extra_minus);
    let (mid, half) = (0.5 * (a + c), 0.5 * (a - c));
    let stages = ((a - c).abs() / STAGE_LN).ceil().max(1.0) as usize;
    let n = u.len();
    let mut w: Vec<Vec<BigInt>> = (0..n).map(|j| unit_vector(n, j)).collect();
    let mut cols = Vec::new();
    for s in 0..=stages {
        let lambda = s as f64 / stages as f64;
        let (ep, em) = (mid + lambda * half - lp, mid - lambda * half - lm);
        cols = lll_in_place(&mut w, |y| b.approx_image(y, ep, em), LLL_DELTA)?;
    }
    *u = w;
    Ok(cols)
}

/// LLL reduction (δ = 0.99) under the Euclidean norm of the actual lattice.
pub fn lll_reduce(b: &LatticeBasis) -> Result<LatticeBasis> {
    let (basis, _) = lll_reduce_with_transform(b)?;
    Ok(basis)
}

/// Reduced basis together with the integer transform `U` (as columns) such that reduced = B·U.
pub fn lll_reduce_with_transform(b: &LatticeBasis) -> Result<(LatticeBasis, Vec<Vec<BigInt>>)> {
    let n = b.dim();
    let mut u: Vec<Vec<BigInt>> = (0..n).map(|j| unit_vector(n, j)).collect();
    lll_in_place(&mut u, |y| b.image_f64(y), LLL_DELTA)?;
    if u.iter().flatten().all(|x| x.is_zero()) {
        return Err(Error::Singular("degenerate transform".into()));
    }
    Ok((b.transformed(&u)?, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Split;
    use crate::lattice::integer_det;
    use num_traits::Signed;

    #[test]
    fn identity_is_fixed() {
        let s = Split::new(2, 1).unwrap();
        let b = LatticeBasis::identity(s);
        let (r, u) = lll_reduce_with_transform(&b).unwrap();
        assert_eq!(r, b);
        assert_eq!(integer_det(&u).abs(), BigInt::from(1));
    }

    #[test]
    fn skewed_basis_of_z2() {
        let s = Split::new(1, 1).unwrap();
        let b = LatticeBasis::from_int_columns(s, &[vec![1, 0], vec![10, 1]]).unwrap();
        let r = lll_reduce(&b).unwrap();
        for col in r.columns_f64() {
            assert!(dot(&col, &col) <= 2.0 + 1e-12);
        }
        assert_eq!(r.det_base().abs(), num_rational::BigRational::from_integer(1.into()));
    }
}
