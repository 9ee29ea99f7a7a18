//! The diagonal flow, minimal-vector chains, the transversals S and S′,
//! visiting times and the first-return map.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::enumerate::CylinderSearch;
use crate::error::{Error, Result};
use crate::geometry::{minkowski_bound, Split};
use crate::lattice::{LatticeBasis, LatticeVector};
use crate::scalar::{floor_rational, ln_bigint, rational_from_f64, rational_to_f64, sign_of, Tolerance};

/// `g_t B`.
pub fn apply_flow(b: &LatticeBasis, t: f64) -> LatticeBasis {
    b.flowed(t)
}

/// `g_t X` for a float vector split as `(X₊, X₋)`.
pub fn flow_vector(split: Split, x: &[f64], t: f64) -> Vec<f64> {
    let (ep, em) = ((split.c as f64 * t).exp(), (-(split.d as f64) * t).exp());
    x.iter().enumerate().map(|(i, v)| if i < split.d { v * ep } else { v * em }).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainEntry {
    /// Index under the numbering convention: 0 is the smallest `n` with `|X_{n+1}|₋ ≥ |Xₙ|₊`.
    pub index: i64,
    pub vector: LatticeVector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimalVectorChain {
    pub base: LatticeBasis,
    pub entries: Vec<ChainEntry>,
    /// The chain has no element before the first entry.
    pub finite_start: bool,
    /// The chain has no element after the last entry.
    pub finite_end: bool,
}

impl MinimalVectorChain {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `ln qₖ = ln |Xₖ|₋` for the entry at position `k`.
    pub fn ln_q(&self, k: usize) -> f64 {
        self.base.ln_minus(&self.entries[k].vector)
    }

    /// `ln rₖ = ln |Xₖ|₊` for the entry at position `k`.
    pub fn ln_r(&self, k: usize) -> f64 {
        self.base.ln_plus(&self.entries[k].vector)
    }

    pub fn ys(&self) -> Vec<Vec<BigInt>> {
        self.entries.iter().map(|e| e.vector.y.clone()).collect()
    }

    /// Position of the entry equal to `±y`.
    pub fn position_of(&self, y: &[BigInt]) -> Option<usize> {
        self.entries.iter().position(|e| same_up_to_sign(&e.vector.y, y))
    }
}

pub fn same_up_to_sign(a: &[BigInt], b: &[BigInt]) -> bool {
    a == b || a.iter().zip(b).all(|(x, y)| *x == -y)
}

/// Constrained searches for minimal vectors of one lattice, sharing a warm LLL transform.
pub struct ChainWalker<'a> {
    basis: &'a LatticeBasis,
    search: CylinderSearch<'a>,
    ln_c_covol: f64,
    shrink: f64,
    tol: Tolerance,
}

impl<'a> ChainWalker<'a> {
    pub fn new(basis: &'a LatticeBasis) -> Self {
        let split = basis.split();
        let det = basis.det_base().abs();
        let ln_covol = ln_bigint(det.numer()) - ln_bigint(det.denom());
        ChainWalker {
            basis,
            search: CylinderSearch::new(basis),
            ln_c_covol: minkowski_bound(split.d, split.c).ln_value() + ln_covol,
            shrink: (-(2f64).powi(-40)).ln_1p(),
            tol: Tolerance::default_policy(),
        }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.search = CylinderSearch::new(self.basis).with_budget(budget);
        self
    }

    fn ln_plus_base(&self, v: &LatticeVector) -> f64 {
        0.5 * ln_bigint(&v.plus_num_sq) - ln_bigint(self.basis.h_den())
    }

    fn ln_minus_base(&self, v: &LatticeVector) -> f64 {
        0.5 * ln_bigint(&v.minus_num_sq) - ln_bigint(self.basis.v_den())
    }

    /// Pick the minimum of `key` among `cands`; a tie between distinct ± classes is non-generic.
    fn unique_min<K: Ord>(cands: Vec<LatticeVector>, key: impl Fn(&LatticeVector) -> K) -> Result<Option<LatticeVector>> {
        let mut best: Option<(K, LatticeVector)> = None;
        let mut tied = false;
        for v in cands {
            let k = key(&v);
            match &best {
                None => best = Some((k, v)),
                Some((bk, bv)) => match k.cmp(bk) {
                    Ordering::Less => {
                        best = Some((k, v));
                        tied = false;
                    }
                    Ordering::Equal if !same_up_to_sign(&v.y, &bv.y) => tied = true,
                    _ => {}
                },
            }
        }
        if tied {
            return Err(Error::NonGeneric("two minimal vectors define the same cylinder".into()));
        }
        Ok(best.map(|(_, v)| v))
    }

    /// A minimal vector among the shortest ones: the lowest point of the
    /// cylinder spanned by a short reduced basis vector.
    pub fn shortest_minimal(&mut self) -> Result<LatticeVector> {
        let n = self.basis.dim();
        let mut u: Vec<Vec<BigInt>> = (0..n).map(|j| crate::lattice::unit_vector(n, j)).collect();
        let basis = self.basis;
        crate::lll::lll_basis_in_place(&mut u, basis, 0.0, 0.0)?;
        let seed = u
            .into_iter()
            .map(|y| basis.vector(y))
            .min_by(|a, b| {
                let ma = basis.ln_plus(a).max(basis.ln_minus(a));
                let mb = basis.ln_plus(b).max(basis.ln_minus(b));
                ma.total_cmp(&mb)
            })
            .expect("nonempty basis");
        let cands = self.search.candidates_base(self.ln_plus_base(&seed), self.ln_minus_base(&seed))?;
        let inside: Vec<LatticeVector> = cands
            .into_iter()
            .filter(|v| !v.is_zero() && v.plus_num_sq <= seed.plus_num_sq && v.minus_num_sq <= seed.minus_num_sq)
            .collect();
        Self::unique_min(inside, |v| (v.minus_num_sq.clone(), v.plus_num_sq.clone()))?
            .ok_or_else(|| Error::InconsistentSuccessor("seed cylinder lost its own vector".into()))
    }

    /// Next minimal vector: the lowest point strictly narrower than `x`.
    pub fn successor(&mut self, x: &LatticeVector) -> Result<Option<LatticeVector>> {
        if x.plus_num_sq.is_zero() {
            return Ok(None);
        }
        let (d, c) = (self.basis.split().d as f64, self.basis.split().c as f64);
        let ln_a = self.ln_plus_base(x);
        let ln_b = (self.ln_c_covol - d * (ln_a + self.shrink)) / c;
        let cands = self.search.candidates_base(ln_a, ln_b)?;
        let narrower: Vec<LatticeVector> = cands.into_iter().filter(|v| !v.is_zero() && v.plus_num_sq < x.plus_num_sq).collect();
        match Self::unique_min(narrower, |v| (v.minus_num_sq.clone(), v.plus_num_sq.clone()))? {
            Some(v) => Ok(Some(v)),
            None => Err(Error::InconsistentSuccessor("empty successor cylinder".into())),
        }
    }

    /// Previous minimal vector: the narrowest point strictly lower than `x`.
    pub fn predecessor(&mut self, x: &LatticeVector) -> Result<Option<LatticeVector>> {
        if x.minus_num_sq.is_zero() {
            return Ok(None);
        }
        let (d, c) = (self.basis.split().d as f64, self.basis.split().c as f64);
        let ln_b = self.ln_minus_base(x);
        let ln_a = (self.ln_c_covol - c * (ln_b + self.shrink)) / d;
        let cands = self.search.candidates_base(ln_a, ln_b)?;
        let lower: Vec<LatticeVector> = cands.into_iter().filter(|v| !v.is_zero() && v.minus_num_sq < x.minus_num_sq).collect();
        match Self::unique_min(lower, |v| (v.plus_num_sq.clone(), v.minus_num_sq.clone()))? {
            Some(v) => Ok(Some(v)),
            None => Err(Error::InconsistentSuccessor("empty predecessor cylinder".into())),
        }
    }

    /// Checks that `C(x)` holds no lattice point besides `±x`.
    pub fn certify_minimal(&mut self, x: &LatticeVector) -> Result<()> {
        let cands = self.search.candidates_base(self.ln_plus_base(x), self.ln_minus_base(x))?;
        for v in cands {
            if v.is_zero() || same_up_to_sign(&v.y, &x.y) {
                continue;
            }
            if v.plus_num_sq <= x.plus_num_sq && v.minus_num_sq <= x.minus_num_sq {
                if v.plus_num_sq == x.plus_num_sq && v.minus_num_sq == x.minus_num_sq {
                    return Err(Error::NonGeneric("distinct vectors share a cylinder".into()));
                }
                return Err(Error::InconsistentSuccessor("chain entry is not minimal".into()));
            }
        }
        Ok(())
    }

    /// `|u|₊` versus `|w|₋`, exact when the two blocks carry the same factor.
    pub fn cmp_plus_minus(&self, u: &LatticeVector, w: &LatticeVector) -> Ordering {
        cmp_plus_minus(self.basis, u, w, self.tol)
    }
}

pub fn cmp_plus_minus(b: &LatticeBasis, u: &LatticeVector, w: &LatticeVector, tol: Tolerance) -> Ordering {
    if b.blocks_comparable() {
        let lhs = &u.plus_num_sq * b.v_den() * b.v_den();
        let rhs = &w.minus_num_sq * b.h_den() * b.h_den();
        return lhs.cmp(&rhs);
    }
    let (a, c) = (b.ln_plus(u), b.ln_minus(w));
    match (a == f64::NEG_INFINITY, c == f64::NEG_INFINITY) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        _ => tol.cmp_ln(a, c),
    }
}

/// Minimal vectors with indices `0..count`.
pub fn minimal_vectors(b: &LatticeBasis, count: usize) -> Result<MinimalVectorChain> {
    minimal_vectors_range(b, 0, count)
}

/// Minimal vectors with indices `start..start+count` (fewer if the chain is finite).
pub fn minimal_vectors_range(b: &LatticeBasis, start: i64, count: usize) -> Result<MinimalVectorChain> {
    let mut walker = ChainWalker::new(b);
    // `list[pos]` has index `pos - zero`
    let mut list: Vec<LatticeVector> = vec![walker.shortest_minimal()?];
    let mut zero: usize = 0;
    let mut finite_start = false;
    let mut finite_end = false;

    let extend_forward = |walker: &mut ChainWalker, list: &mut Vec<LatticeVector>, finite_end: &mut bool| -> Result<bool> {
        if *finite_end {
            return Ok(false);
        }
        match walker.successor(list.last().unwrap())? {
            Some(v) => {
                list.push(v);
                Ok(true)
            }
            None => {
                *finite_end = true;
                Ok(false)
            }
        }
    };
    let extend_backward = |walker: &mut ChainWalker, list: &mut Vec<LatticeVector>, zero: &mut usize, finite_start: &mut bool| -> Result<bool> {
        if *finite_start {
            return Ok(false);
        }
        match walker.predecessor(&list[0])? {
            Some(v) => {
                list.insert(0, v);
                *zero += 1;
                Ok(true)
            }
            None => {
                *finite_start = true;
                Ok(false)
            }
        }
    };
    // satisfied(pos): |X_{pos+1}|₋ ≥ |X_pos|₊ (vacuous at the end of a finite chain)
    let satisfied = |walker: &ChainWalker, list: &[LatticeVector], pos: usize| -> bool {
        match list.get(pos + 1) {
            Some(next) => walker.cmp_plus_minus(&list[pos], next) != Ordering::Greater,
            None => true,
        }
    };

    let mut guard = 0usize;
    loop {
        guard += 1;
        if guard > 100_000 {
            return Err(Error::InconsistentSuccessor("index alignment did not settle".into()));
        }
        if zero + 1 >= list.len() {
            extend_forward(&mut walker, &mut list, &mut finite_end)?;
        }
        if satisfied(&walker, &list, zero) {
            if zero == 0 && !extend_backward(&mut walker, &mut list, &mut zero, &mut finite_start)? {
                break;
            }
            if satisfied(&walker, &list, zero - 1) {
                zero -= 1;
            } else {
                break;
            }
        } else {
            zero += 1;
        }
    }

    // cover the requested index window
    while (zero as i64) + start < 0 {
        if !extend_backward(&mut walker, &mut list, &mut zero, &mut finite_start)? {
            break;
        }
    }
    let end = start + count as i64;
    while (list.len() as i64) < zero as i64 + end {
        if !extend_forward(&mut walker, &mut list, &mut finite_end)? {
            break;
        }
    }
    let lo = (zero as i64 + start).max(0) as usize;
    let hi = ((zero as i64 + end).max(0) as usize).min(list.len());
    let first_kept_is_first = lo == 0 && finite_start;
    let last_kept_is_last = hi == list.len() && finite_end;
    let mut entries = Vec::with_capacity(hi.saturating_sub(lo));
    for (pos, v) in list.into_iter().enumerate().take(hi).skip(lo) {
        walker.certify_minimal(&v)?;
        entries.push(ChainEntry { index: pos as i64 - zero as i64, vector: v });
    }
    Ok(MinimalVectorChain { base: b.clone(), entries, finite_start: first_kept_is_first, finite_end: last_kept_is_last })
}

/// `tₖ = ln(qₖ₊₁/rₖ)/(d+c)` for consecutive entries and `t′ₖ = ln(qₖ/rₖ)/(d+c)` per entry.
pub fn visiting_times(chain: &MinimalVectorChain) -> Result<(Vec<f64>, Vec<f64>)> {
    if chain.len() < 2 {
        return Err(Error::InvalidArgument("visiting times need at least two chain entries".into()));
    }
    let n = chain.base.dim() as f64;
    let t = (0..chain.len() - 1).map(|k| (chain.ln_q(k + 1) - chain.ln_r(k)) / n).collect();
    let t_prime = (0..chain.len()).map(|k| (chain.ln_q(k) - chain.ln_r(k)) / n).collect();
    Ok((t, t_prime))
}

/// Result of testing a lattice for membership in S.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceMembership {
    pub on_surface: bool,
    /// `v₀`: attains `λ₁` horizontally; first nonzero horizontal coordinate positive.
    pub v0: Option<LatticeVector>,
    /// `v₁`: attains `λ₁` vertically; first nonzero vertical coordinate positive.
    pub v1: Option<LatticeVector>,
}

/// Result of testing a lattice for membership in S′.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceMembershipPrime {
    pub on_surface: bool,
    pub w0: Option<LatticeVector>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Dominance {
    Plus,
    Minus,
    Corner,
}

fn dominance(b: &LatticeBasis, v: &LatticeVector, tol: Tolerance) -> Dominance {
    match cmp_plus_minus(b, v, v, tol) {
        Ordering::Greater => Dominance::Plus,
        Ordering::Less => Dominance::Minus,
        Ordering::Equal => Dominance::Corner,
    }
}

/// Compare mixed norms of two vectors of the same lattice.
fn cmp_mixed(b: &LatticeBasis, u: &LatticeVector, w: &LatticeVector, tol: Tolerance) -> Ordering {
    let du = dominance(b, u, tol);
    let dw = dominance(b, w, tol);
    match (du, dw) {
        (Dominance::Minus, Dominance::Minus) => u.minus_num_sq.cmp(&w.minus_num_sq),
        (Dominance::Plus | Dominance::Corner, Dominance::Plus | Dominance::Corner) => u.plus_num_sq.cmp(&w.plus_num_sq),
        (Dominance::Plus | Dominance::Corner, Dominance::Minus) => cmp_plus_minus(b, u, w, tol),
        (Dominance::Minus, Dominance::Plus | Dominance::Corner) => cmp_plus_minus(b, w, u, tol).reverse(),
    }
}

/// All shortest vectors in mixed norm (one per ± pair).
fn shortest_set(b: &LatticeBasis, tol: Tolerance) -> Result<Vec<LatticeVector>> {
    let n = b.dim();
    let mut u: Vec<Vec<BigInt>> = (0..n).map(|j| crate::lattice::unit_vector(n, j)).collect();
    crate::lll::lll_basis_in_place(&mut u, b, 0.0, 0.0)?;
    let ln_rho = u
        .into_iter()
        .map(|y| {
            let v = b.vector(y);
            b.ln_plus(&v).max(b.ln_minus(&v))
        })
        .fold(f64::INFINITY, f64::min);
    let mut search = CylinderSearch::new(b);
    let pad = 1e-9;
    let cands: Vec<LatticeVector> = search.candidates(ln_rho + pad, ln_rho + pad)?.into_iter().filter(|v| !v.is_zero()).collect();
    let Some(first) = cands.first().cloned() else {
        return Err(Error::InconsistentSuccessor("no lattice point in the ball of a basis vector".into()));
    };
    let mut best = first;
    for v in &cands {
        if cmp_mixed(b, v, &best, tol) == Ordering::Less {
            best = v.clone();
        }
    }
    Ok(cands.into_iter().filter(|v| cmp_mixed(b, v, &best, tol) == Ordering::Equal).collect())
}

fn orient(b: &LatticeBasis, v: LatticeVector, horizontal: bool) -> LatticeVector {
    let coords = if horizontal { b.plus_num(&v.y) } else { b.minus_num(&v.y) };
    match coords.iter().find(|x| !x.is_zero()) {
        Some(x) if x.is_negative() => v.negated(),
        _ => v,
    }
}

/// Membership in S: exactly two shortest pairs, one attaining `λ₁` only
/// horizontally and one only vertically.
pub fn surface_membership_s(b: &LatticeBasis) -> Result<SurfaceMembership> {
    let tol = Tolerance::default_policy();
    let set = shortest_set(b, tol)?;
    let no = SurfaceMembership { on_surface: false, v0: None, v1: None };
    if set.len() != 2 {
        return Ok(no);
    }
    let (a, c) = (&set[0], &set[1]);
    let (v0, v1) = match (dominance(b, a, tol), dominance(b, c, tol)) {
        (Dominance::Plus, Dominance::Minus) => (a.clone(), c.clone()),
        (Dominance::Minus, Dominance::Plus) => (c.clone(), a.clone()),
        _ => return Ok(no),
    };
    Ok(SurfaceMembership { on_surface: true, v0: Some(orient(b, v0, true)), v1: Some(orient(b, v1, false)) })
}

/// Membership in S′: a single shortest pair sitting on the corner `|w₀|₊ = |w₀|₋ = λ₁`.
pub fn surface_membership_sprime(b: &LatticeBasis) -> Result<SurfaceMembershipPrime> {
    let tol = Tolerance::default_policy();
    let set = shortest_set(b, tol)?;
    if set.len() == 1 && dominance(b, &set[0], tol) == Dominance::Corner {
        let w0 = orient(b, set[0].clone(), true);
        return Ok(SurfaceMembershipPrime { on_surface: true, w0: Some(w0) });
    }
    Ok(SurfaceMembershipPrime { on_surface: false, w0: None })
}

/// `ρ = ln(|v₁|₋/|v₀|₋)`, `ρ* = ln(|v₀|₊/|v₁|₊)`; same-block ratios, so flow-invariant.
pub fn rho_pair(v0: &LatticeVector, v1: &LatticeVector) -> (f64, f64) {
    let rho = 0.5 * (ln_bigint(&v1.minus_num_sq) - ln_bigint(&v0.minus_num_sq));
    let rho_star = 0.5 * (ln_bigint(&v0.plus_num_sq) - ln_bigint(&v1.plus_num_sq));
    (rho, rho_star)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FirstReturn {
    pub tau: f64,
    pub lattice: LatticeBasis,
    /// `X₀ = v₀(Λ)`, `X₁ = v₁(Λ)` and `X₂`, which become `v₀, v₁` of the image.
    pub x0: LatticeVector,
    pub x1: LatticeVector,
    pub x2: LatticeVector,
    /// `ρ*(Λ)`
    pub rho_star: f64,
}

/// First return to S along the flow: `τ = ln(|X₂|₋/|X₁|₊)/(d+c)` and `g_τ B`.
pub fn first_return(b: &LatticeBasis) -> Result<FirstReturn> {
    let m = surface_membership_s(b)?;
    if !m.on_surface {
        return Err(Error::NotOnSurface("first return needs a lattice in S".into()));
    }
    let (x0, x1) = (m.v0.unwrap(), m.v1.unwrap());
    let mut walker = ChainWalker::new(b);
    let x2 = walker.successor(&x1)?.ok_or_else(|| Error::InconsistentSuccessor("chain ends at v₁".into()))?;
    let n = b.dim() as f64;
    let tau = (b.ln_minus(&x2) - b.ln_plus(&x1)) / n;
    if !(tau > 0.0) {
        return Err(Error::NonGeneric(format!("non-positive return time {tau}")));
    }
    let lattice = b.flowed(tau);
    let after = surface_membership_s(&lattice)?;
    let ok = after.on_surface
        && after.v0.as_ref().is_some_and(|v| same_up_to_sign(&v.y, &x1.y))
        && after.v1.as_ref().is_some_and(|v| same_up_to_sign(&v.y, &x2.y));
    if !ok {
        return Err(Error::NonGeneric("flowed lattice left the transversal".into()));
    }
    let (_, rho_star) = rho_pair(&x0, &x1);
    Ok(FirstReturn { tau, lattice, x0, x1, x2, rho_star })
}

/// A point of S for `d = c = 1` in the chart `F(x, y, ε)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint1D {
    pub x: f64,
    pub y: f64,
    pub eps: i8,
}

impl SurfacePoint1D {
    pub fn new(x: f64, y: f64, eps: i8) -> Result<Self> {
        if !(x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0) || (eps != 1 && eps != -1) {
            return Err(Error::InvalidArgument(format!("({x}, {y}, {eps}) is outside the chart")));
        }
        Ok(SurfacePoint1D { x, y, eps })
    }

    /// `(1+xy)^{-1/2} [[1, -εx], [εy, 1]]`, with the entries taken exactly.
    pub fn lattice(&self) -> Result<LatticeBasis> {
        let e = self.eps as f64;
        let split = Split { d: 1, c: 1 };
        let b = LatticeBasis::from_f64_columns(split, &[vec![1.0, e * self.y], vec![-e * self.x, 1.0]])?;
        Ok(b.normalized())
    }

    /// Chart coordinates of a lattice in S (`d = c = 1`).
    pub fn from_lattice(b: &LatticeBasis) -> Result<Self> {
        if b.split() != (Split { d: 1, c: 1 }) {
            return Err(Error::InvalidArgument("the explicit chart exists for d = c = 1 only".into()));
        }
        let m = surface_membership_s(b)?;
        if !m.on_surface {
            return Err(Error::NotOnSurface("lattice is not in S".into()));
        }
        let (v0, v1) = (m.v0.unwrap(), m.v1.unwrap());
        let x_sq = BigRational::new(v1.plus_num_sq.clone(), v0.plus_num_sq.clone());
        let y_sq = BigRational::new(v0.minus_num_sq.clone(), v1.minus_num_sq.clone());
        let eps = sign_of(&b.minus_num(&v0.y)[0]);
        let other = sign_of(&b.plus_num(&v1.y)[0]);
        if eps == 0 || other != -eps {
            return Err(Error::NonGeneric("off-diagonal signs are not opposite".into()));
        }
        Self::new(rational_to_f64(&x_sq).sqrt(), rational_to_f64(&y_sq).sqrt(), eps as i8)
    }
}

/// `x′ = {1/x}`, `y′ = 1/(y + ⌊1/x⌋)`, `ε′ = −ε`, evaluated exactly on the float inputs.
pub fn return_map_explicit_1d(p: SurfacePoint1D) -> Result<SurfacePoint1D> {
    let x = rational_from_f64(p.x)?;
    let y = rational_from_f64(p.y)?;
    if !x.is_positive() {
        return Err(Error::InvalidArgument("x must be positive".into()));
    }
    let inv = x.recip();
    let a = BigRational::from_integer(floor_rational(&inv));
    let x_next = &inv - &a;
    if x_next.is_zero() {
        return Err(Error::Resonance("1/x is an integer; the orbit leaves the chart".into()));
    }
    let y_next = (y + a).recip();
    Ok(SurfacePoint1D { x: rational_to_f64(&x_next), y: rational_to_f64(&y_next), eps: -p.eps })
}

/// `X₂ = εX₀ + ⌊1/x⌋X₁` in integer coordinates of the chart basis.
pub fn third_vector_1d(p: SurfacePoint1D) -> Result<Vec<BigInt>> {
    let x = rational_from_f64(p.x)?;
    let a = floor_rational(&x.recip());
    Ok(vec![BigInt::from(p.eps), a])
}

/// One first return compared against the explicit map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnComparison {
    pub start: SurfacePoint1D,
    pub enumerated: SurfacePoint1D,
    pub explicit: SurfacePoint1D,
    pub tau: f64,
    pub rho_star: f64,
    /// `ρ` of the image.
    pub rho_next: f64,
    /// Largest relative coordinate difference between the two images.
    pub delta: f64,
    pub eps_agree: bool,
    /// `|τ − (ρ∘R + ρ*)/2|`
    pub visit_residual: f64,
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// First return of `p` by enumeration and by the explicit formula.
pub fn compare_return_1d(p: SurfacePoint1D) -> Result<ReturnComparison> {
    let ret = first_return(&p.lattice()?)?;
    let enumerated = SurfacePoint1D::from_lattice(&ret.lattice)?;
    let explicit = return_map_explicit_1d(p)?;
    let (rho_next, _) = rho_pair(&ret.x1, &ret.x2);
    Ok(ReturnComparison {
        start: p,
        enumerated,
        explicit,
        tau: ret.tau,
        rho_star: ret.rho_star,
        rho_next,
        delta: rel_diff(enumerated.x, explicit.x).max(rel_diff(enumerated.y, explicit.y)),
        eps_agree: enumerated.eps == explicit.eps,
        visit_residual: (ret.tau - 0.5 * (rho_next + ret.rho_star)).abs(),
    })
}

fn random_point(rng: &mut ChaCha20Rng) -> SurfacePoint1D {
    loop {
        let (x, y): (f64, f64) = (rng.gen(), rng.gen());
        let eps = if rng.gen::<bool>() { 1 } else { -1 };
        if let Ok(p) = SurfacePoint1D::new(x, y, eps) {
            return p;
        }
    }
}

/// `n` independent uniform chart points, each compared once.
pub fn return_map_samples_1d(n: usize, seed: u64) -> Result<Vec<ReturnComparison>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..n).map(|_| compare_return_1d(random_point(&mut rng))).collect()
}

/// An orbit of `n` returns from a random start, continuing from the enumerated image.
/// Returns the comparisons and the number of restarts from a fresh point, which
/// happen only when an image leaves the open chart.
pub fn return_map_orbit_1d(n: usize, seed: u64) -> Result<(Vec<ReturnComparison>, usize)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut p = random_point(&mut rng);
    let mut rows = Vec::with_capacity(n);
    let mut restarts = 0;
    while rows.len() < n {
        match compare_return_1d(p) {
            Ok(row) => {
                p = row.enumerated;
                rows.push(row);
            }
            Err(Error::Resonance(_) | Error::InvalidArgument(_) | Error::NonGeneric(_)) => {
                restarts += 1;
                p = random_point(&mut rng);
            }
            Err(e) => return Err(e),
        }
    }
    Ok((rows, restarts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::int;

    #[test]
    fn z2_chain_is_finite() {
        let b = LatticeBasis::identity(Split::new(1, 1).unwrap());
        let ch = minimal_vectors_range(&b, -3, 10).unwrap();
        assert_eq!(ch.ys(), vec![vec![int(1), int(0)], vec![int(0), int(1)]]);
        assert_eq!(ch.entries[0].index, 0);
        assert!(ch.finite_start && ch.finite_end);
    }

    #[test]
    fn z2_is_not_on_s() {
        let b = LatticeBasis::identity(Split::new(1, 1).unwrap());
        assert!(!surface_membership_s(&b).unwrap().on_surface);
        let b3 = LatticeBasis::identity(Split::new(2, 1).unwrap());
        assert!(!surface_membership_s(&b3).unwrap().on_surface);
    }

    #[test]
    fn chart_point_is_on_s() {
        let p = SurfacePoint1D::new(0.3, 0.5, 1).unwrap();
        let b = p.lattice().unwrap();
        let m = surface_membership_s(&b).unwrap();
        assert!(m.on_surface);
        assert_eq!(m.v0.unwrap().y, vec![int(1), int(0)]);
        assert_eq!(m.v1.unwrap().y, vec![int(0), int(1)]);
        assert!(!surface_membership_sprime(&b).unwrap().on_surface);
        let back = SurfacePoint1D::from_lattice(&b).unwrap();
        assert!((back.x - 0.3).abs() < 1e-15 && (back.y - 0.5).abs() < 1e-15 && back.eps == 1);
    }

    #[test]
    fn explicit_map_examples() {
        let q = return_map_explicit_1d(SurfacePoint1D::new(0.7, 0.3, 1).unwrap()).unwrap();
        assert!((q.x - 3.0 / 7.0).abs() < 1e-15);
        assert!((q.y - 1.0 / 1.3).abs() < 1e-15);
        assert_eq!(q.eps, -1);
    }

    #[test]
    fn flow_formula() {
        let s = Split::new(1, 1).unwrap();
        let v = flow_vector(s, &[1.0, 1.0], std::f64::consts::LN_2);
        assert!((v[0] - 2.0).abs() < 1e-15 && (v[1] - 0.5).abs() < 1e-15);
    }
}
