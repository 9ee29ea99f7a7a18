//! Complete enumeration of lattice points in a cylinder.
//!
//! The cylinder is rescaled to `B_d(0,1) × B_c(0,1)`, which sits inside the
//! Euclidean ball of radius √2; the lattice is LLL-reduced in that scaling and
//! a Fincke–Pohst depth-first search lists every point of the ball (with a
//! small relative slack). Callers then filter the superset exactly.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::geometry::Cylinder;
use crate::lattice::{unit_vector, LatticeBasis, LatticeVector};
use crate::lll::{gram_schmidt, lll_basis_in_place};
use crate::scalar::{ln_ratio, Tolerance};

pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// Relative slack on the squared search radius.
const RADIUS_SLACK: f64 = 1e-6;

/// Stand-in for a zero radius, relative to the other one.
const DEGENERATE_LN_RATIO: f64 = -20.0 * std::f64::consts::LN_2;

/// A reusable search over one lattice. The LLL transform is kept between
/// calls, so successive searches with slowly changing radii start warm.
pub struct CylinderSearch<'a> {
    basis: &'a LatticeBasis,
    u: Vec<Vec<BigInt>>,
    budget: u64,
    nodes: u64,
}

impl<'a> CylinderSearch<'a> {
    pub fn new(basis: &'a LatticeBasis) -> Self {
        let n = basis.dim();
        CylinderSearch { basis, u: (0..n).map(|j| unit_vector(n, j)).collect(), budget: DEFAULT_BUDGET, nodes: 0 }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn basis(&self) -> &LatticeBasis {
        self.basis
    }

    /// Search nodes visited by the last call.
    pub fn nodes(&self) -> u64 {
        self.nodes
    }

    /// Superset of the nonzero lattice points (one per ± pair) with
    /// `|X|₊ ≤ e^{ln_a}` and `|X|₋ ≤ e^{ln_b}`, radii taken on the actual lattice.
    pub fn candidates(&mut self, ln_a: f64, ln_b: f64) -> Result<Vec<LatticeVector>> {
        self.nodes = 0;
        if ln_a.is_nan() || ln_b.is_nan() || ln_a == f64::INFINITY || ln_b == f64::INFINITY {
            return Err(Error::InvalidArgument("cylinder radii must be finite".into()));
        }
        if ln_a == f64::NEG_INFINITY && ln_b == f64::NEG_INFINITY {
            return Ok(Vec::new());
        }
        let ln_a = if ln_a == f64::NEG_INFINITY { ln_b + DEGENERATE_LN_RATIO } else { ln_a };
        let ln_b = if ln_b == f64::NEG_INFINITY { ln_a + DEGENERATE_LN_RATIO } else { ln_b };
        let basis = self.basis;
        let cols = lll_basis_in_place(&mut self.u, basis, -ln_a, -ln_b)?;

        let r2 = 2.0 * (1.0 + RADIUS_SLACK);
        let coeffs = fincke_pohst(&cols, r2, self.budget, &mut self.nodes)?;
        let n = basis.dim();
        Ok(coeffs
            .into_iter()
            .map(|z| {
                let mut y = vec![BigInt::zero(); n];
                for (zj, uj) in z.iter().zip(&self.u) {
                    if *zj != 0 {
                        let zj = BigInt::from(*zj);
                        for (a, b) in y.iter_mut().zip(uj) {
                            *a += &zj * b;
                        }
                    }
                }
                basis.vector(y)
            })
            .collect())
    }

    /// As [`candidates`](Self::candidates) with radii given on the unflowed base lattice.
    pub fn candidates_base(&mut self, ln_a_base: f64, ln_b_base: f64) -> Result<Vec<LatticeVector>> {
        let (lp, lm) = self.basis.log_factors();
        self.candidates(ln_a_base + lp, ln_b_base + lm)
    }
}

/// All integer vectors `z ≠ 0` (one per ± pair, last nonzero entry positive) with
/// `‖Σ zᵢ colᵢ‖² ≤ r2`, by depth-first search over the Gram–Schmidt data.
pub fn fincke_pohst(cols: &[Vec<f64>], r2: f64, budget: u64, nodes: &mut u64) -> Result<Vec<Vec<i64>>> {
    let n = cols.len();
    let (mu, bsq) = gram_schmidt(cols);
    if bsq.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
        return Err(Error::Singular("degenerate Gram–Schmidt data in enumeration".into()));
    }
    let mut out = Vec::new();
    let mut z = vec![0i64; n];
    let mut state = Search { mu: &mu, bsq: &bsq, r2, budget, nodes, out: &mut out };
    state.descend(n - 1, 0.0, true, &mut z)?;
    Ok(out)
}

struct Search<'s> {
    mu: &'s [Vec<f64>],
    bsq: &'s [f64],
    r2: f64,
    budget: u64,
    nodes: &'s mut u64,
    out: &'s mut Vec<Vec<i64>>,
}

impl Search<'_> {
    fn descend(&mut self, i: usize, partial: f64, higher_zero: bool, z: &mut [i64]) -> Result<()> {
        let n = z.len();
        let center: f64 = -(i + 1..n).map(|j| z[j] as f64 * self.mu[j][i]).sum::<f64>();
        let room = (self.r2 - partial).max(0.0) / self.bsq[i];
        let w = room.sqrt() * (1.0 + 1e-12) + 1e-12;
        let lo = (center - w).ceil();
        let hi = (center + w).floor();
        if lo.abs() > 9.0e15 || hi.abs() > 9.0e15 {
            return Err(Error::Singular("enumeration range exceeds integer precision".into()));
        }
        let (mut lo, hi) = (lo as i64, hi as i64);
        if higher_zero {
            lo = lo.max(if i == 0 { 1 } else { 0 });
        }
        for zi in lo..=hi {
            *self.nodes += 1;
            if *self.nodes > self.budget {
                return Err(Error::BudgetExceeded { budget: self.budget });
            }
            let diff = zi as f64 - center;
            let p = partial + diff * diff * self.bsq[i];
            if p > self.r2 {
                continue;
            }
            z[i] = zi;
            if i == 0 {
                self.out.push(z.to_vec());
            } else {
                self.descend(i - 1, p, higher_zero && zi == 0, z)?;
            }
        }
        z[i] = 0;
        Ok(())
    }
}

/// Every nonzero lattice vector in the closed cylinder, one per ± pair.
///
/// On an unflowed basis membership is decided exactly. On a flowed basis it is
/// decided in the log domain; a point within tolerance of the boundary is
/// reported as non-generic rather than guessed.
pub fn enumerate_in_cylinder(b: &LatticeBasis, cyl: &Cylinder) -> Result<Vec<LatticeVector>> {
    enumerate_in_cylinder_with_budget(b, cyl, DEFAULT_BUDGET)
}

pub fn enumerate_in_cylinder_with_budget(b: &LatticeBasis, cyl: &Cylinder, budget: u64) -> Result<Vec<LatticeVector>> {
    let (ln_a, ln_b) = cyl.ln_radii();
    let mut search = CylinderSearch::new(b).with_budget(budget);
    let cands = search.candidates(ln_a, ln_b)?;
    let tol = Tolerance::default_policy();
    let mut out = Vec::new();
    for v in cands {
        let inside = if b.is_exact() {
            b.plus_sq_base(&v) <= cyl.r_plus_sq && b.minus_sq_base(&v) <= cyl.r_minus_sq
        } else {
            let plus = block_inside(b.ln_plus(&v), &cyl.r_plus_sq, tol)?;
            let minus = block_inside(b.ln_minus(&v), &cyl.r_minus_sq, tol)?;
            plus && minus
        };
        if inside && !v.is_zero() {
            out.push(v);
        }
    }
    Ok(out)
}

fn block_inside(ln_norm: f64, r_sq: &num_rational::BigRational, tol: Tolerance) -> Result<bool> {
    if ln_norm == f64::NEG_INFINITY {
        return Ok(true);
    }
    if r_sq.is_zero() {
        return Ok(false);
    }
    match tol.cmp_ln(ln_norm, 0.5 * ln_ratio(r_sq)) {
        Ordering::Less => Ok(true),
        Ordering::Greater => Ok(false),
        Ordering::Equal => Err(Error::NonGeneric("lattice point on the cylinder boundary".into())),
    }
}
