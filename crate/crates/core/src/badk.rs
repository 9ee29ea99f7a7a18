//! Inductive construction of a vector θ ∈ R² with `inf q_{n+1} r_n² > 0` but
//! `inf q_n r_n² = 0`, carried out in exact rational arithmetic.
//!
//! Each `θ_n` is rational with least common denominator `Q_n`, and
//! `Λ_n = Z² + Z θ_n` has determinant `1/Q_n`. A step picks a primitive point
//! `α_n` of `Λ_n`, an integer `p_n`, and sets `ε_n = Q_n α_n / Q_{n+1}`,
//! `θ_{n+1} = θ_n + ε_n / Q_n`, `Q_{n+1} = Q_n p_n − k_n`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::bestapprox::{chain_engine, direct_scan, ThetaMatrix};
use crate::enumerate::enumerate_in_cylinder;
use crate::error::{Error, Result};
use crate::geometry::{Cylinder, Split};
use crate::scalar::{ceil_rational, fraction_string, rational_norm_sq, ratio};

/// Condition 1 is also checked by a plain scan while `Q_n` stays below this.
pub const DIRECT_SCAN_LIMIT: u64 = 1_000_000;

pub const DEFAULT_X_SEARCH_BOUND: u64 = 1 << 20;

/// `√hi − √lo` kept as its two squares.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap {
    pub i: usize,
    pub j: usize,
    #[serde(with = "crate::bestapprox::rational_str")]
    pub hi_sq: BigRational,
    #[serde(with = "crate::bestapprox::rational_str")]
    pub lo_sq: BigRational,
}

impl Gap {
    pub fn is_positive(&self) -> bool {
        self.hi_sq > self.lo_sq
    }

    /// `√x ≤ √hi − √lo`, exactly.
    pub fn dominates(&self, x_sq: &BigRational) -> bool {
        let rhs = &self.hi_sq - x_sq - &self.lo_sq;
        if rhs.is_negative() {
            return false;
        }
        BigRational::from_integer(4.into()) * x_sq * &self.lo_sq <= &rhs * &rhs
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub n: usize,
    #[serde(with = "rational_pair")]
    pub alpha: [BigRational; 2],
    /// Position of `α_n` in the scan by increasing norm.
    pub rank: u64,
    #[serde(with = "crate::bestapprox::bigint_str")]
    pub k: BigInt,
    #[serde(with = "crate::bestapprox::bigint_str")]
    pub p: BigInt,
    /// `Q_{n+1}` had `p + 1` been chosen instead.
    #[serde(with = "crate::bestapprox::bigint_str")]
    pub q_alternative: BigInt,
    #[serde(with = "rational_pair")]
    pub eps: [BigRational; 2],
    #[serde(with = "crate::bestapprox::rational_str")]
    pub l_sq: BigRational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BadConstructionState {
    pub n: usize,
    #[serde(with = "rational_pairs")]
    pub thetas: Vec<[BigRational; 2]>,
    #[serde(with = "crate::bestapprox::bigint_vec")]
    pub q: Vec<BigInt>,
    pub history: Vec<StepRecord>,
    /// `M_{i,j}` for `1 ≤ i < j ≤ n`.
    pub big_m: Vec<Gap>,
    /// `m_{i,j}` for `1 ≤ i ≤ j ≤ n`.
    pub small_m: Vec<Gap>,
    /// Bit `k − 1` set once condition `k` has been certified at the current `n`.
    pub certified: u8,
}

impl BadConstructionState {
    pub fn theta(&self) -> &[BigRational; 2] {
        &self.thetas[self.n]
    }

    pub fn q_n(&self) -> &BigInt {
        &self.q[self.n]
    }

    /// `ε_{n−1} = Q_{n−1}(θ_n − θ_{n−1})`.
    pub fn eps_prev(&self) -> [BigRational; 2] {
        let q = BigRational::from_integer(self.q[self.n - 1].clone());
        let (a, b) = (&self.thetas[self.n], &self.thetas[self.n - 1]);
        [&q * (&a[0] - &b[0]), &q * (&a[1] - &b[1])]
    }
}

mod rational_pair {
    use num_rational::BigRational;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &[BigRational; 2], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(x.iter().map(crate::scalar::fraction_string))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[BigRational; 2], D::Error> {
        let v: Vec<String> = Vec::deserialize(d)?;
        if v.len() != 2 {
            return Err(D::Error::custom("expected two fractions"));
        }
        let a = crate::scalar::parse_fraction(&v[0]).map_err(D::Error::custom)?;
        let b = crate::scalar::parse_fraction(&v[1]).map_err(D::Error::custom)?;
        Ok([a, b])
    }
}

mod rational_pairs {
    use num_rational::BigRational;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &[[BigRational; 2]], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(x.iter().map(|p| [crate::scalar::fraction_string(&p[0]), crate::scalar::fraction_string(&p[1])]))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<[BigRational; 2]>, D::Error> {
        let v: Vec<[String; 2]> = Vec::deserialize(d)?;
        v.iter()
            .map(|[a, b]| {
                Ok([
                    crate::scalar::parse_fraction(a).map_err(D::Error::custom)?,
                    crate::scalar::parse_fraction(b).map_err(D::Error::custom)?,
                ])
            })
            .collect()
    }
}

fn rat(n: &BigInt) -> BigRational {
    BigRational::from_integer(n.clone())
}

/// Least common denominator of a rational pair.
pub fn lcd(theta: &[BigRational; 2]) -> BigInt {
    theta[0].denom().lcm(theta[1].denom())
}

/// `d(x, Z)²` summed over coordinates: the squared distance to `Z²`.
pub fn dist_sq_to_z2(v: &[BigRational; 2]) -> BigRational {
    v.iter().fold(BigRational::zero(), |acc, x| {
        let f = x - x.round();
        acc + &f * &f
    })
}

fn scaled(theta: &[BigRational; 2], q: &BigInt) -> [BigRational; 2] {
    let q = rat(q);
    [&theta[0] * &q, &theta[1] * &q]
}

/// `d(qθ, Z²)²`.
pub fn dist_sq_at(theta: &[BigRational; 2], q: &BigInt) -> BigRational {
    dist_sq_to_z2(&scaled(theta, q))
}

fn theta_matrix(theta: &[BigRational; 2]) -> ThetaMatrix {
    ThetaMatrix::new(Split { d: 2, c: 1 }, &theta[..]).expect("two entries for a 2 × 1 matrix")
}

/// `M_{i,j}`: the smallest `d(qθ, Z²)` over `q_lo < q < q_hi`, against `d(q_lo θ, Z²)`.
/// Found by enumerating cylinders of doubling width.
pub fn big_m(theta: &[BigRational; 2], i: usize, j: usize, q_lo: &BigInt, q_hi: &BigInt) -> Result<Gap> {
    let lo_sq = dist_sq_at(theta, q_lo);
    if q_hi - q_lo < BigInt::from(2) {
        return Err(Error::InvalidArgument(format!("no integer strictly between {q_lo} and {q_hi}")));
    }
    let b = theta_matrix(theta).lattice();
    let height_sq = rat(&(q_hi * q_hi));
    let half = ratio(1, 2);
    let mut w_sq = if lo_sq.is_zero() { ratio(1, 4) } else { &lo_sq * ratio(4, 1) };
    loop {
        let cyl = Cylinder::from_squares(w_sq.clone(), height_sq.clone())?;
        let mut best: Option<BigRational> = None;
        for v in enumerate_in_cylinder(&b, &cyl)? {
            let q = v.y[2].abs();
            if &q > q_lo && &q < q_hi {
                let d = b.plus_sq_base(&v);
                if best.as_ref().is_none_or(|x| d < *x) {
                    best = Some(d);
                }
            }
        }
        if let Some(hi_sq) = best {
            return Ok(Gap { i, j, hi_sq, lo_sq });
        }
        if w_sq >= half {
            return Err(Error::SearchExhausted(format!("no denominator found strictly between {q_lo} and {q_hi}")));
        }
        w_sq *= ratio(4, 1);
    }
}

/// `m_{i,j} = d(Q_{i−1}θ, Z²) − d(Q_i θ, Z²)`.
pub fn small_m(theta: &[BigRational; 2], i: usize, j: usize, q: &[BigInt]) -> Gap {
    Gap { i, j, hi_sq: dist_sq_at(theta, &q[i - 1]), lo_sq: dist_sq_at(theta, &q[i]) }
}

/// All gaps on `θ_j`: `M_{i,j}` for `i < j` and `m_{i,j}` for `i ≤ j`.
fn gaps_for(theta: &[BigRational; 2], j: usize, q: &[BigInt]) -> Result<(Vec<Gap>, Vec<Gap>)> {
    let big = (1..j).map(|i| big_m(theta, i, j, &q[i - 1], &q[i])).collect::<Result<Vec<_>>>()?;
    let small = (1..=j).map(|i| small_m(theta, i, j, q)).collect();
    Ok((big, small))
}

/// State at `n = 1`: `θ₀ = (0, 0)`, `θ₁ = (1/5, 1/5)`.
pub fn init_state() -> BadConstructionState {
    let thetas = vec![[ratio(0, 1), ratio(0, 1)], [ratio(1, 5), ratio(1, 5)]];
    let q = vec![BigInt::one(), BigInt::from(5)];
    let (big, small) = gaps_for(&thetas[1], 1, &q).expect("gaps at n = 1 need no search");
    BadConstructionState { n: 1, thetas, q, history: Vec::new(), big_m: big, small_m: small, certified: 0 }
}

/// Solves `a·x ≡ b (mod m)`; returns `(x, m / gcd(a, m))`.
fn solve_linear(a: &BigInt, b: &BigInt, m: &BigInt) -> Option<(BigInt, BigInt)> {
    let a = a.mod_floor(m);
    let g = a.gcd(m);
    if !b.mod_floor(&g).is_zero() {
        return None;
    }
    let m2 = m / &g;
    if m2.is_one() {
        return Some((BigInt::zero(), m2));
    }
    let e = (&a / &g).extended_gcd(&m2);
    let x = ((b / &g) * e.x).mod_floor(&m2);
    Some((x, m2))
}

/// The `k ∈ [0, Q)` with `α ≡ kθ (mod Z²)`.
fn k_of_point(theta: &[BigRational; 2], q: &BigInt, alpha: &[BigRational; 2]) -> Result<BigInt> {
    let a = (&theta[0] * rat(q)).to_integer();
    let b = (&theta[1] * rat(q)).to_integer();
    let u = &alpha[0] * rat(q);
    let v = &alpha[1] * rat(q);
    if !u.is_integer() || !v.is_integer() {
        return Err(Error::Certification("α is not a point of Λ_n".into()));
    }
    let (u, v) = (u.to_integer(), v.to_integer());
    let bad = || Error::Certification("α is not a point of Λ_n".into());
    let (k1, m1) = solve_linear(&b, &v, q).ok_or_else(bad)?;
    let rhs = &u - &a * &k1;
    let (t1, m2) = solve_linear(&(&a * &m1), &rhs, q).ok_or_else(bad)?;
    let k = (k1 + &m1 * t1).mod_floor(q);
    if &(&m1 * &m2) != q {
        return Err(Error::Certification("θ_n does not have least common denominator Q_n".into()));
    }
    Ok(k)
}

/// Primitive points of `Λ` in the open quadrant of the given sign with
/// `‖α‖² ≥ min_sq`, ordered by norm then coordinates, among those with `‖α‖² ≤ r_sq`.
fn quadrant_candidates(theta: &[BigRational; 2], q: &BigInt, sign: i32, min_sq: &BigRational, r_sq: &BigRational) -> Vec<[BigRational; 2]> {
    let (s, t) = gauss_reduce_basis(theta, q);
    let q2 = rat(&(q * q));
    // in the scaled lattice Q·Λ, ‖a·s + b·t‖² ≥ (a²‖s‖² + b²‖t‖²)/2 for a reduced pair
    let bound = (r_sq * &q2 * ratio(2, 1)).ceil().to_integer();
    let ns = &s[0] * &s[0] + &s[1] * &s[1];
    let nt = &t[0] * &t[0] + &t[1] * &t[1];
    let a_max: BigInt = num_integer::Roots::sqrt(&(&bound / &ns)) + 1;
    let b_max: BigInt = num_integer::Roots::sqrt(&(&bound / &nt)) + 1;
    let mut out: Vec<(BigRational, [BigRational; 2])> = Vec::new();
    let mut a = -a_max.clone();
    while a <= a_max {
        let mut b = -b_max.clone();
        while b <= b_max {
            if a.gcd(&b).is_one() {
                let x = &a * &s[0] + &b * &t[0];
                let y = &a * &s[1] + &b * &t[1];
                let inside = if sign > 0 { x.is_positive() && y.is_positive() } else { x.is_negative() && y.is_negative() };
                if inside {
                    let p = [BigRational::new(x, q.clone()), BigRational::new(y, q.clone())];
                    let n = rational_norm_sq(&p);
                    if &n >= min_sq && &n <= r_sq {
                        out.push((n, p));
                    }
                }
            }
            b += 1;
        }
        a += 1;
    }
    out.sort();
    out.into_iter().map(|(_, p)| p).collect()
}

/// One step of the construction. `α_n` is the first admissible point in a scan of the
/// primitive points of `Λ_n` in the required open quadrant by increasing norm.
pub fn step(state: &BadConstructionState, x_search_bound: u64) -> Result<BadConstructionState> {
    let n = state.n;
    if n < 1 || state.thetas.len() != n + 1 || state.q.len() != n + 1 {
        return Err(Error::InvalidArgument("malformed construction state".into()));
    }
    let theta = state.theta().clone();
    let qn = state.q_n().clone();
    let sign = if n.is_multiple_of(2) { 1 } else { -1 };
    let eps_prev_sq = rational_norm_sq(&state.eps_prev());
    let min_l_sq = BigRational::new(BigInt::from(n), qn.clone());
    let sixty_four = ratio(64, 1);
    let mut seen: u64 = 0;
    let mut r_sq = &min_l_sq * ratio(4, 1);
    while seen < x_search_bound {
        // the candidate list only grows at its tail as the radius doubles
        let cands = quadrant_candidates(&theta, &qn, sign, &min_l_sq, &r_sq);
        for alpha in cands.into_iter().skip(seen as usize) {
            seen += 1;
            if seen > x_search_bound {
                break;
            }
            let l_sq = rational_norm_sq(&alpha);
            let k = k_of_point(&theta, &qn, &alpha)?;
            let p = ceil_rational(&(ratio(10, 1) * rat(&qn) * &l_sq)).max(BigInt::from(2));
            let q_next = &qn * &p - &k;
            let shrink = BigRational::new(qn.clone(), q_next.clone());
            let eps = [&alpha[0] * &shrink, &alpha[1] * &shrink];
            let e_sq = rational_norm_sq(&eps);
            let e64 = &e_sq * &sixty_four;
            if e_sq >= eps_prev_sq || !state.big_m.iter().chain(&state.small_m).all(|g| g.dominates(&e64)) {
                continue;
            }
            let inv_q_next = BigRational::new(BigInt::one(), q_next.clone());
            let theta_next = [&theta[0] + &alpha[0] * &inv_q_next, &theta[1] + &alpha[1] * &inv_q_next];
            if lcd(&theta_next) != q_next {
                return Err(Error::Certification(format!("det Λ_{} ≠ 1/Q_{}", n + 1, n + 1)));
            }
            let mut next = state.clone();
            next.n = n + 1;
            next.thetas.push(theta_next);
            next.q.push(q_next);
            next.certified = 0;
            next.history.push(StepRecord { n, alpha, rank: seen, q_alternative: &qn * (&p + 1) - &k, k, p, eps, l_sq });
            let (big, small) = gaps_for(&next.thetas[n + 1], n + 1, &next.q)?;
            if let Some(g) = big.iter().find(|g| !g.is_positive()) {
                return Err(Error::Certification(format!("M_{{{},{}}} ≤ 0 after step {n}", g.i, g.j)));
            }
            next.big_m.extend(big);
            next.small_m.extend(small);
            return Ok(next);
        }
        r_sq *= ratio(4, 1);
    }
    Err(Error::SearchExhausted(format!("no admissible α_{n} among the first {x_search_bound} candidates")))
}

/// Exact Lagrange reduction of a 2-dimensional integer lattice; returns the reduced pair.
pub fn gauss_reduce(mut u: [BigInt; 2], mut v: [BigInt; 2]) -> ([BigInt; 2], [BigInt; 2]) {
    let norm = |w: &[BigInt; 2]| &w[0] * &w[0] + &w[1] * &w[1];
    if norm(&u) > norm(&v) {
        std::mem::swap(&mut u, &mut v);
    }
    loop {
        let dot = &u[0] * &v[0] + &u[1] * &v[1];
        let nu = norm(&u);
        // nearest integer to dot / nu
        let m = (BigInt::from(2) * &dot + &nu).div_floor(&(BigInt::from(2) * &nu));
        v = [&v[0] - &m * &u[0], &v[1] - &m * &u[1]];
        if norm(&v) >= nu {
            return (u, v);
        }
        std::mem::swap(&mut u, &mut v);
    }
}

/// Integer basis of `Q·Λ = Z·(A, B) + Q·Z²`.
fn scaled_lattice_basis(theta: &[BigRational; 2], q: &BigInt) -> ([BigInt; 2], [BigInt; 2]) {
    let a = (&theta[0] * rat(q)).to_integer();
    let b = (&theta[1] * rat(q)).to_integer();
    // Hermite form: first coordinates generate g·Z; combine (A,B) and (Q,0).
    let e = a.extended_gcd(q);
    let g = e.gcd.clone();
    let first = [g.clone(), &e.x * &b];
    // vectors with zero first coordinate: (0, Q) and (Q/g)(A,B) − (A/g)(Q,0) = (0, (Q/g)B)
    let c = q.gcd(&(q / &g * &b));
    let second = [BigInt::zero(), c];
    (first, second)
}

/// Reduced integer basis of `Q·Λ`.
fn gauss_reduce_basis(theta: &[BigRational; 2], q: &BigInt) -> ([BigInt; 2], [BigInt; 2]) {
    let (u, v) = scaled_lattice_basis(theta, q);
    gauss_reduce(u, v)
}

/// `(λ₁², λ₂²)` of `Λ = Z² + Zθ`, exactly.
pub fn successive_minima_sq(theta: &[BigRational; 2]) -> (BigRational, BigRational) {
    let q = lcd(theta);
    let (u, v) = scaled_lattice_basis(theta, &q);
    let (s, t) = gauss_reduce(u, v);
    let q2 = rat(&(&q * &q));
    let n = |w: &[BigInt; 2]| rat(&(&w[0] * &w[0] + &w[1] * &w[1])) / &q2;
    (n(&s), n(&t))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub id: u8,
    pub vacuous: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub n: usize,
    pub conditions: Vec<ConditionCheck>,
    #[serde(with = "crate::bestapprox::rational_str")]
    pub lambda1_sq: BigRational,
    #[serde(with = "crate::bestapprox::rational_str")]
    pub lambda2_sq: BigRational,
    /// `Q_n² · d(Q_{n−1}θ_n, Z²)⁴`.
    #[serde(with = "crate::bestapprox::rational_str")]
    pub q_next_sq_r_fourth: BigRational,
}

fn fail(cond: u8, n: usize, what: String) -> Error {
    Error::Certification(format!("condition {cond} at n = {n}: {what}"))
}

/// Re-verifies conditions 1–7 at the current `n` from the θ and Q lists alone.
pub fn certify(state: &BadConstructionState) -> Result<CertifyReport> {
    let n = state.n;
    let theta = state.theta();
    let q = &state.q;
    let mut checks = Vec::new();
    let mut push = |id: u8, vacuous: bool, detail: String| checks.push(ConditionCheck { id, vacuous, detail });

    // 1: Q_0 < … < Q_n are exactly the best-approximation denominators of θ_n.
    for (j, t) in state.thetas.iter().enumerate() {
        if lcd(t) != q[j] {
            return Err(fail(1, n, format!("lcd(θ_{j}) = {} ≠ Q_{j} = {}", lcd(t), q[j])));
        }
    }
    if q[0] != BigInt::one() || q[1] != BigInt::from(5) {
        return Err(fail(1, n, "Q_0 = 1 and Q_1 = 5 are required".into()));
    }
    let tm = theta_matrix(theta);
    let chain = chain_engine(&tm, n + 2)?;
    let got: Vec<BigInt> = chain.records.iter().map(|r| r.q_vec[0].clone()).collect();
    if got != *q || !chain.terminal {
        return Err(fail(1, n, format!("best approximations are {got:?}")));
    }
    let mut detail = format!("chain engine lists {} denominators ending at r = 0", got.len());
    if q[n] <= BigInt::from(DIRECT_SCAN_LIMIT) {
        let limit = u64::try_from(&q[n]).expect("checked above");
        let scan = direct_scan(&tm, limit)?;
        let scanned: Vec<BigInt> = scan.records.iter().map(|r| r.q_vec[0].clone()).collect();
        if scanned != *q {
            return Err(fail(1, n, format!("direct scan gives {scanned:?}")));
        }
        detail.push_str("; direct scan agrees");
    }
    push(1, false, detail);

    // 2: Q_j > 2j·Q_{j−1}.
    for j in 1..=n {
        if q[j] <= BigInt::from(2 * j) * &q[j - 1] {
            return Err(fail(2, n, format!("Q_{j} = {} ≤ {}·Q_{}", q[j], 2 * j, j - 1)));
        }
    }
    push(2, false, format!("Q_j > 2j·Q_(j-1) for j = 1..{n}"));

    // 3: M_{i,n} > 0 for i < n.
    let (big_n, _) = gaps_for(theta, n, q)?;
    for g in &big_n {
        if !g.is_positive() {
            return Err(fail(3, n, format!("M_{{{},{}}}: {} ≤ {}", g.i, g.j, g.hi_sq, g.lo_sq)));
        }
    }
    push(3, big_n.is_empty(), format!("{} gaps positive", big_n.len()));

    // 4, 5: ‖θ_n − θ_{n−1}‖ against earlier gaps.
    let prev = &state.thetas[n - 1];
    let diff = [&theta[0] - &prev[0], &theta[1] - &prev[1]];
    let scale = rat(&(&q[n - 1] * &q[n - 1])) * ratio(64, 1);
    let x_sq = rational_norm_sq(&diff) * scale;
    let mut big_prev = Vec::new();
    let mut small_prev = Vec::new();
    for j in 1..n {
        let (b, s) = gaps_for(&state.thetas[j], j, &q[..=j])?;
        big_prev.extend(b);
        small_prev.extend(s);
    }
    if let Some(g) = big_prev.iter().find(|g| !g.dominates(&x_sq)) {
        return Err(fail(4, n, format!("step exceeds M_{{{},{}}}/(8Q)", g.i, g.j)));
    }
    push(4, big_prev.is_empty(), format!("{} gaps dominate", big_prev.len()));
    if let Some(g) = small_prev.iter().find(|g| !g.dominates(&x_sq)) {
        return Err(fail(5, n, format!("step exceeds m_{{{},{}}}/(8Q)", g.i, g.j)));
    }
    push(5, small_prev.is_empty(), format!("{} gaps dominate", small_prev.len()));

    // 6: ε_{n−1} is a shortest vector of Λ_n with the prescribed sign.
    let eps = state.eps_prev();
    let eps_sq = rational_norm_sq(&eps);
    let (l1, l2) = successive_minima_sq(theta);
    if l1 != eps_sq {
        return Err(fail(6, n, format!("λ₁² = {l1} but ‖ε‖² = {eps_sq}")));
    }
    let want_positive = (n - 1).is_multiple_of(2);
    if !eps.iter().all(|e| if want_positive { e.is_positive() } else { e.is_negative() }) {
        return Err(fail(6, n, format!("ε_{} = ({}, {}) has the wrong signs", n - 1, eps[0], eps[1])));
    }
    push(6, false, format!("λ₁² = ‖ε_{}‖² = {}", n - 1, fraction_string(&eps_sq)));

    // 7: 2λ₁ ≤ λ₂ ≤ 30λ₁.
    if l2 < &l1 * ratio(4, 1) || l2 > &l1 * ratio(900, 1) {
        return Err(fail(7, n, format!("λ₂²/λ₁² = {}", &l2 / &l1)));
    }
    push(7, false, format!("λ₂²/λ₁² = {}", fraction_string(&(&l2 / &l1))));

    let r_sq = dist_sq_at(theta, &q[n - 1]);
    let q_next_sq_r_fourth = rat(&(&q[n] * &q[n])) * &r_sq * &r_sq;
    Ok(CertifyReport { n, conditions: checks, lambda1_sq: l1, lambda2_sq: l2, q_next_sq_r_fourth })
}

/// Runs `certify` and records the result in the state's bitmask.
pub fn certify_in_place(state: &mut BadConstructionState) -> Result<CertifyReport> {
    let report = certify(state)?;
    state.certified = 0x7f;
    Ok(report)
}

/// `Q_k r_k²` and `Q_{k+1} r_k²` for `1 ≤ k < n`, with `r_k` measured on `θ_n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixDiagnostic {
    #[serde(with = "crate::bestapprox::rational_vec")]
    pub q_r_sq: Vec<BigRational>,
    #[serde(with = "crate::bestapprox::rational_vec")]
    pub q_next_r_sq: Vec<BigRational>,
}

impl PrefixDiagnostic {
    fn running_min(xs: &[BigRational], upto: usize) -> Option<BigRational> {
        xs.iter().take(upto).min().cloned()
    }

    /// `min_{k≤2} Q_k r_k² ≥ 4 · min_k Q_k r_k²`.
    pub fn drop_holds(&self) -> bool {
        match (Self::running_min(&self.q_r_sq, 2), Self::running_min(&self.q_r_sq, usize::MAX)) {
            (Some(early), Some(all)) => early >= all * ratio(4, 1),
            _ => false,
        }
    }

    /// `min_k Q_{k+1} r_k² ≥ ½ · min_{k≤2} Q_{k+1} r_k²`.
    pub fn floor_holds(&self) -> bool {
        match (Self::running_min(&self.q_next_r_sq, 2), Self::running_min(&self.q_next_r_sq, usize::MAX)) {
            (Some(early), Some(all)) => all * ratio(2, 1) >= early,
            _ => false,
        }
    }
}

pub fn prefix_diagnostic(state: &BadConstructionState) -> PrefixDiagnostic {
    let theta = state.theta();
    let q = &state.q;
    let mut q_r_sq = Vec::new();
    let mut q_next_r_sq = Vec::new();
    for k in 1..state.n {
        let r_sq = dist_sq_at(theta, &q[k]);
        q_r_sq.push(rat(&q[k]) * &r_sq);
        q_next_r_sq.push(rat(&q[k + 1]) * &r_sq);
    }
    PrefixDiagnostic { q_r_sq, q_next_r_sq }
}

/// One entry of the JSON certificate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateStep {
    pub n: usize,
    pub theta: [String; 2],
    pub q: String,
    pub alpha: Option<[String; 2]>,
    pub p: Option<String>,
    pub k: Option<String>,
    pub q_alternative: Option<String>,
    pub conditions: Vec<ConditionCheck>,
    pub lambda1_sq: String,
    pub lambda2_sq: String,
    pub q_next_sq_r_fourth: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub steps: Vec<CertificateStep>,
    pub prefix: PrefixDiagnostic,
    pub drop_holds: bool,
    pub floor_holds: bool,
}

/// Runs `steps` certified steps from the initial state.
pub fn run(steps: usize, x_search_bound: u64) -> Result<(BadConstructionState, Certificate)> {
    let mut state = init_state();
    let mut out = Vec::new();
    let pair = |p: &[BigRational; 2]| [fraction_string(&p[0]), fraction_string(&p[1])];
    let mut record = |state: &mut BadConstructionState| -> Result<()> {
        let report = certify_in_place(state)?;
        let made = state.history.last();
        out.push(CertificateStep {
            n: state.n,
            theta: pair(state.theta()),
            q: state.q_n().to_string(),
            alpha: made.map(|h| pair(&h.alpha)),
            p: made.map(|h| h.p.to_string()),
            k: made.map(|h| h.k.to_string()),
            q_alternative: made.map(|h| h.q_alternative.to_string()),
            conditions: report.conditions,
            lambda1_sq: fraction_string(&report.lambda1_sq),
            lambda2_sq: fraction_string(&report.lambda2_sq),
            q_next_sq_r_fourth: fraction_string(&report.q_next_sq_r_fourth),
        });
        Ok(())
    };
    record(&mut state)?;
    for _ in 0..steps {
        state = step(&state, x_search_bound)?;
        record(&mut state)?;
    }
    let prefix = prefix_diagnostic(&state);
    let cert = Certificate { drop_holds: prefix.drop_holds(), floor_holds: prefix.floor_holds(), prefix, steps: out };
    Ok((state, cert))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_state() {
        let s = init_state();
        assert_eq!(s.q, vec![BigInt::one(), BigInt::from(5)]);
        assert_eq!(s.eps_prev(), [ratio(1, 5), ratio(1, 5)]);
        let r = certify(&s).unwrap();
        let vacuous: Vec<u8> = r.conditions.iter().filter(|c| c.vacuous).map(|c| c.id).collect();
        assert_eq!(vacuous, vec![3, 4, 5]);
    }

    #[test]
    fn gap_comparison_is_exact() {
        // √1 − √(1/4) = 1/2
        let g = Gap { i: 1, j: 1, hi_sq: ratio(1, 1), lo_sq: ratio(1, 4) };
        assert!(g.dominates(&ratio(1, 4)));
        assert!(!g.dominates(&ratio(1_000_001, 4_000_000)));
    }

    #[test]
    fn minima_of_a_square_lattice() {
        // Z² + Z(1/2, 1/2): λ₁² = 1/2, λ₂² = 1/2
        let (a, b) = successive_minima_sq(&[ratio(1, 2), ratio(1, 2)]);
        assert_eq!(a, ratio(1, 2));
        assert_eq!(b, ratio(1, 2));
        let (a, b) = successive_minima_sq(&[ratio(1, 5), ratio(1, 5)]);
        assert_eq!(a, ratio(2, 25));
        assert_eq!(b, ratio(13, 25));
    }

    #[test]
    fn k_recovers_the_multiple() {
        let theta = [ratio(3, 7), ratio(2, 7)];
        let q = BigInt::from(7);
        for k in 0..7i64 {
            let p = [ratio(3 * k, 7) + ratio(5, 1), ratio(2 * k, 7) - ratio(1, 1)];
            assert_eq!(k_of_point(&theta, &q, &p).unwrap(), BigInt::from(k));
        }
    }
}
