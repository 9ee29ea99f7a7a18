//! Best simultaneous Diophantine approximations of a rational matrix θ,
//! by a direct scan over denominators and by walking minimal vectors of `M_θ Z^{d+c}`.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::enumerate::CylinderSearch;
use crate::error::{Error, Result};
use crate::geometry::{minkowski_bound, Split};
use crate::lattice::LatticeBasis;
use crate::scalar::{fraction_string, ln_bigint, norm_sq, parse_fraction, round_half_down};

pub const DEFAULT_SCAN_BUDGET: u64 = 100_000_000;

/// A d × c rational matrix held as integer numerators over a common denominator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThetaMatrix {
    split: Split,
    num: Vec<Vec<BigInt>>,
    den: BigInt,
}

impl ThetaMatrix {
    /// From row-major entries.
    pub fn new(split: Split, entries: &[BigRational]) -> Result<Self> {
        if entries.len() != split.d * split.c {
            return Err(Error::DimensionMismatch {
                expected: format!("{} entries", split.d * split.c),
                got: format!("{}", entries.len()),
            });
        }
        let den = entries.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
        let num = (0..split.d)
            .map(|i| {
                (0..split.c)
                    .map(|j| (&entries[i * split.c + j] * BigRational::from_integer(den.clone())).to_integer())
                    .collect()
            })
            .collect();
        Ok(ThetaMatrix { split, num, den })
    }

    /// Parses `"p1/q1,p2/q2,..."` in row-major order.
    pub fn parse(split: Split, spec: &str) -> Result<Self> {
        let entries: Result<Vec<BigRational>> = spec.split(',').map(parse_fraction).collect();
        Self::new(split, &entries?)
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn den(&self) -> &BigInt {
        &self.den
    }

    pub fn numerators(&self) -> &[Vec<BigInt>] {
        &self.num
    }

    pub fn entry(&self, i: usize, j: usize) -> BigRational {
        BigRational::new(self.num[i][j].clone(), self.den.clone())
    }

    pub fn entries(&self) -> Vec<BigRational> {
        (0..self.split.d).flat_map(|i| (0..self.split.c).map(move |j| (i, j))).map(|(i, j)| self.entry(i, j)).collect()
    }

    /// Row-major fraction list, the inverse of [`parse`](Self::parse).
    pub fn to_fraction_list(&self) -> String {
        self.entries().iter().map(fraction_string).collect::<Vec<_>>().join(",")
    }

    /// `M_θ = [[I_d, -θ], [0, I_c]]`.
    pub fn lattice(&self) -> LatticeBasis {
        LatticeBasis::theta_lattice(self.split, &self.num, &self.den).expect("M_θ is unimodular")
    }

    /// `AQ` where `A = D·θ`.
    fn a_times(&self, q: &[BigInt]) -> Vec<BigInt> {
        self.num.iter().map(|row| row.iter().zip(q).map(|(a, b)| a * b).sum()).collect()
    }

    /// Nearest `P` to `θQ` (ties to the smaller integer) and the squared
    /// residual numerator `‖AQ - D·P‖²`; the distance is that over `D²`.
    pub fn nearest(&self, q: &[BigInt]) -> (Vec<BigInt>, BigInt) {
        let s = self.a_times(q);
        let p: Vec<BigInt> = s.iter().map(|si| round_half_down(si, &self.den)).collect();
        let res: Vec<BigInt> = s.iter().zip(&p).map(|(si, pi)| si - &self.den * pi).collect();
        (p, norm_sq(&res))
    }

    pub fn dist_sq(&self, q: &[BigInt]) -> BigRational {
        let (_, num) = self.nearest(q);
        BigRational::new(num, &self.den * &self.den)
    }
}

/// Entries `k / 2^bits` with `k` uniform in `[0, 2^bits)`, from a ChaCha20 stream.
pub fn sample_theta(split: Split, bits: u32, seed: u64) -> Result<ThetaMatrix> {
    sample_theta_stream(split, bits, seed, 0)
}

/// As [`sample_theta`] on an independent substream, used for per-trial draws.
pub fn sample_theta_stream(split: Split, bits: u32, seed: u64, stream: u64) -> Result<ThetaMatrix> {
    if bits < 64 {
        return Err(Error::InvalidArgument(format!("bits must be ≥ 64, got {bits}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let words = bits.div_ceil(64) as usize;
    let den = BigInt::one() << bits;
    let entries: Vec<BigRational> = (0..split.d * split.c)
        .map(|_| {
            let mut k = BigInt::zero();
            for w in 0..words {
                k += BigInt::from(rng.next_u64()) << (64 * w);
            }
            let k = k % &den;
            BigRational::new(k, den.clone())
        })
        .collect();
    ThetaMatrix::new(split, &entries)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BestApproxRecord {
    pub index: usize,
    #[serde(with = "bigint_vec")]
    pub q_vec: Vec<BigInt>,
    #[serde(with = "bigint_vec")]
    pub p_vec: Vec<BigInt>,
    /// `‖Q‖²`
    #[serde(with = "bigint_str")]
    pub q_sq: BigInt,
    /// `d(θQ, Z^d)²`
    #[serde(with = "rational_str")]
    pub r_sq: BigRational,
}

impl BestApproxRecord {
    pub fn ln_q(&self) -> f64 {
        0.5 * ln_bigint(&self.q_sq)
    }

    pub fn ln_r(&self) -> f64 {
        if self.r_sq.is_zero() {
            return f64::NEG_INFINITY;
        }
        0.5 * (ln_bigint(self.r_sq.numer()) - ln_bigint(self.r_sq.denom()))
    }

    /// `‖Q‖` as a decimal string: exact when it is an integer, else 30 significant digits.
    pub fn q_string(&self) -> String {
        let s = num_integer::Roots::sqrt(&self.q_sq);
        if &s * &s == self.q_sq {
            s.to_string()
        } else {
            crate::scalar::format_time(self.ln_q().exp())
        }
    }
}

pub(crate) mod bigint_str {
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&x.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub(crate) mod bigint_vec {
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(x.iter().map(|v| v.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigInt>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter().map(|s| s.parse().map_err(serde::de::Error::custom)).collect()
    }
}

pub(crate) mod rational_str {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&crate::scalar::fraction_string(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        crate::scalar::parse_fraction(&s).map_err(serde::de::Error::custom)
    }
}

pub(crate) mod rational_vec {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &[BigRational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(x.iter().map(crate::scalar::fraction_string))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigRational>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter().map(|s| crate::scalar::parse_fraction(s).map_err(serde::de::Error::custom)).collect()
    }
}

/// A computed prefix of the best-approximation sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApproxSequence {
    pub records: Vec<BestApproxRecord>,
    /// Set when `θQ ∈ Z^d` was reached: the sequence is finite and complete.
    pub terminal: bool,
}

impl ApproxSequence {
    pub fn q_sq_list(&self) -> Vec<BigInt> {
        self.records.iter().map(|r| r.q_sq.clone()).collect()
    }
}

/// Flip so the first nonzero entry of `q` is positive.
fn canonical_sign(q: &mut [BigInt], p: &mut [BigInt]) {
    if q.iter().find(|x| !x.is_zero()).is_some_and(|x| x.is_negative()) {
        q.iter_mut().for_each(|x| *x = -&*x);
        p.iter_mut().for_each(|x| *x = -&*x);
    }
}

/// Canonical `Q` (first nonzero entry positive) with `‖Q‖² ≤ bound`, sorted by norm then lexicographically.
fn canonical_denominators(c: usize, bound: u64, budget: u64) -> Result<Vec<(u64, Vec<i64>)>> {
    let m = (bound as f64).sqrt().floor() as i64;
    let mut out = Vec::new();
    let mut cur = vec![0i64; c];
    fn rec(i: usize, norm: u64, lead: bool, m: i64, bound: u64, budget: u64, cur: &mut Vec<i64>, out: &mut Vec<(u64, Vec<i64>)>) -> Result<()> {
        if i == cur.len() {
            if lead {
                out.push((norm, cur.clone()));
                if out.len() as u64 > budget {
                    return Err(Error::BudgetExceeded { budget });
                }
            }
            return Ok(());
        }
        let lo = if lead { -m } else { 0 };
        for x in lo..=m {
            let n2 = norm + (x * x) as u64;
            if n2 > bound {
                continue;
            }
            cur[i] = x;
            rec(i + 1, n2, lead || x != 0, m, bound, budget, cur, out)?;
        }
        cur[i] = 0;
        Ok(())
    }
    rec(0, 0, false, m, bound, budget, &mut cur, &mut out)?;
    out.sort();
    Ok(out)
}

/// Every best-approximation denominator with `‖Q‖ ≤ q_max`, by scanning
/// denominators in order of norm and keeping record-breakers.
pub fn direct_scan(theta: &ThetaMatrix, q_max: u64) -> Result<ApproxSequence> {
    direct_scan_with_budget(theta, q_max, DEFAULT_SCAN_BUDGET)
}

pub fn direct_scan_with_budget(theta: &ThetaMatrix, q_max: u64, budget: u64) -> Result<ApproxSequence> {
    let c = theta.split.c;
    let den_sq = &theta.den * &theta.den;
    let mut records = Vec::new();
    let mut best: Option<BigInt> = None;
    let push = |q: Vec<BigInt>, p: Vec<BigInt>, num: BigInt, records: &mut Vec<BestApproxRecord>| {
        let index = records.len();
        records.push(BestApproxRecord {
            index,
            q_sq: norm_sq(&q),
            q_vec: q,
            p_vec: p,
            r_sq: BigRational::new(num, den_sq.clone()),
        });
    };
    if c == 1 {
        if q_max > budget {
            return Err(Error::BudgetExceeded { budget });
        }
        for q in 1..=q_max {
            let qv = vec![BigInt::from(q)];
            let (p, num) = theta.nearest(&qv);
            if best.as_ref().is_none_or(|b| num < *b) {
                let terminal = num.is_zero();
                best = Some(num.clone());
                push(qv, p, num, &mut records);
                if terminal {
                    return Ok(ApproxSequence { records, terminal: true });
                }
            }
        }
        return Ok(ApproxSequence { records, terminal: false });
    }
    let bound = q_max.checked_mul(q_max).ok_or(Error::BudgetExceeded { budget })?;
    let qs = canonical_denominators(c, bound, budget)?;
    let mut i = 0;
    while i < qs.len() {
        let shell = qs[i].0;
        let mut shell_best: Option<(BigInt, Vec<BigInt>, Vec<BigInt>)> = None;
        while i < qs.len() && qs[i].0 == shell {
            let qv: Vec<BigInt> = qs[i].1.iter().map(|&x| BigInt::from(x)).collect();
            let (p, num) = theta.nearest(&qv);
            if shell_best.as_ref().is_none_or(|(b, _, _)| num < *b) {
                shell_best = Some((num, qv, p));
            }
            i += 1;
        }
        let (num, qv, p) = shell_best.expect("shell is nonempty");
        if best.as_ref().is_none_or(|b| num < *b) {
            let terminal = num.is_zero();
            best = Some(num.clone());
            push(qv, p, num, &mut records);
            if terminal {
                return Ok(ApproxSequence { records, terminal: true });
            }
        }
    }
    Ok(ApproxSequence { records, terminal: false })
}

/// The first `count` records, found by walking minimal vectors of `M_θ Z^{d+c}`.
pub fn chain_engine(theta: &ThetaMatrix, count: usize) -> Result<ApproxSequence> {
    chain_engine_until(theta, count, None)
}

/// Records with `‖Q‖ ≤ q_max`, by the chain engine.
pub fn chain_engine_to(theta: &ThetaMatrix, q_max: u64) -> Result<ApproxSequence> {
    chain_engine_until(theta, usize::MAX, Some(BigInt::from(q_max) * BigInt::from(q_max)))
}

fn chain_engine_until(theta: &ThetaMatrix, count: usize, q_sq_max: Option<BigInt>) -> Result<ApproxSequence> {
    let split = theta.split;
    let (d, c) = (split.d, split.c);
    let den_sq = &theta.den * &theta.den;
    let mut records: Vec<BestApproxRecord> = Vec::new();
    if count == 0 {
        return Ok(ApproxSequence { records, terminal: false });
    }
    // q₀ = 1: the shortest integer vectors are the unit vectors; ties go to the lexicographically smallest.
    let mut first: Option<(BigInt, Vec<BigInt>, Vec<BigInt>)> = None;
    for j in (0..c).rev() {
        let q: Vec<BigInt> = (0..c).map(|i| if i == j { BigInt::one() } else { BigInt::zero() }).collect();
        let (p, num) = theta.nearest(&q);
        if first.as_ref().is_none_or(|(b, _, _)| num < *b) {
            first = Some((num, q, p));
        }
    }
    let (num, q, p) = first.expect("c ≥ 1");
    let mut current_num = num.clone();
    records.push(BestApproxRecord { index: 0, q_sq: norm_sq(&q), q_vec: q, p_vec: p, r_sq: BigRational::new(num, den_sq.clone()) });

    let basis = theta.lattice();
    let mut search = CylinderSearch::new(&basis);
    let ln_c = minkowski_bound(d, c).ln_value();
    let shrink = (-(2f64).powi(-40)).ln_1p();
    let ln_den = ln_bigint(&theta.den);
    while records.len() < count {
        if current_num.is_zero() {
            return Ok(ApproxSequence { records, terminal: true });
        }
        let ln_r = 0.5 * ln_bigint(&current_num) - ln_den;
        let ln_height = (ln_c - d as f64 * (ln_r + shrink)) / c as f64;
        let cands = search.candidates(ln_r, ln_height);

        let cands = cands?;
        let mut best: Option<(BigInt, BigInt, Vec<BigInt>, Vec<BigInt>)> = None;
        for v in cands {
            if v.plus_num_sq >= current_num {
                continue;
            }
            let mut p = v.y[..d].to_vec();
            let mut q = v.y[d..].to_vec();
            if q.iter().all(|x| x.is_zero()) {
                continue;
            }
            canonical_sign(&mut q, &mut p);
            let q_sq = norm_sq(&q);
            let key_better = match &best {
                None => true,
                Some((bq, bw, bqv, bpv)) => (&q_sq, &v.plus_num_sq, &q, &p).cmp(&(bq, bw, bqv, bpv)) == Ordering::Less,
            };
            if key_better {
                best = Some((q_sq, v.plus_num_sq.clone(), q, p));
            }
        }
        let Some((q_sq, width, q, p)) = best else {
            return Err(Error::InconsistentSuccessor(format!("no successor after record {}", records.len() - 1)));
        };
        if let Some(limit) = &q_sq_max {
            if q_sq > *limit {
                break;
            }
        }
        current_num = width.clone();
        let index = records.len();
        records.push(BestApproxRecord { index, q_sq, q_vec: q, p_vec: p, r_sq: BigRational::new(width, den_sq.clone()) });
    }
    let terminal = records.last().is_some_and(|r| r.r_sq.is_zero());
    Ok(ApproxSequence { records, terminal })
}

/// `βₙ² = (qₙ₊₁²)^c · (rₙ²)^d`, exact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BetaSequence {
    pub split: Split,
    pub beta_sq: Vec<BigRational>,
}

impl BetaSequence {
    pub fn value(&self, n: usize) -> f64 {
        let b = &self.beta_sq[n];
        if b.is_zero() {
            return 0.0;
        }
        (0.5 * (ln_bigint(b.numer()) - ln_bigint(b.denom()))).exp()
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.beta_sq.len()).map(|n| self.value(n)).collect()
    }

    /// `0 ≤ βₙ ≤ C_{d,c}` for every term, decided exactly.
    pub fn within_minkowski(&self) -> bool {
        let bound = minkowski_bound(self.split.d, self.split.c);
        self.beta_sq.iter().all(|b| !b.is_negative() && bound.certify_le_sq(b) == Some(true))
    }
}

pub fn beta_sequence(split: Split, records: &[BestApproxRecord]) -> Result<BetaSequence> {
    if records.len() < 2 {
        return Err(Error::InvalidArgument("at least two records are needed".into()));
    }
    let beta_sq = records
        .windows(2)
        .map(|w| {
            let q = BigRational::from_integer(num_traits::pow(w[1].q_sq.clone(), split.c));
            q * num_traits::pow(w[0].r_sq.clone(), split.d)
        })
        .collect();
    Ok(BetaSequence { split, beta_sq })
}

/// `qₙ₊ₐ ≥ 2qₙ` and `rₙ₊ₐ ≤ rₙ/2` for every index with a partner `a` steps ahead.
pub fn doubling_holds(records: &[BestApproxRecord], a: usize) -> bool {
    let four = BigInt::from(4);
    records.windows(a + 1).all(|w| {
        let (first, last) = (&w[0], &w[a]);
        last.q_sq >= &four * &first.q_sq && BigRational::from_integer(four.clone()) * &last.r_sq <= first.r_sq
    })
}

/// `qₙ` strictly increasing and `rₙ` strictly decreasing.
pub fn is_monotone(records: &[BestApproxRecord]) -> bool {
    records.windows(2).all(|w| w[0].q_sq < w[1].q_sq && w[0].r_sq > w[1].r_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, ratio};

    fn s11() -> Split {
        Split::new(1, 1).unwrap()
    }

    fn qs(seq: &ApproxSequence) -> Vec<BigInt> {
        seq.records.iter().map(|r| r.q_vec[0].clone()).collect()
    }

    #[test]
    fn one_third() {
        let th = ThetaMatrix::parse(s11(), "1/3").unwrap();
        let seq = direct_scan(&th, 5).unwrap();
        assert!(seq.terminal);
        assert_eq!(qs(&seq), vec![int(1), int(3)]);
        assert_eq!(seq.records[0].r_sq, ratio(1, 9));
        assert_eq!(seq.records[1].r_sq, ratio(0, 1));
        let b = beta_sequence(s11(), &seq.records).unwrap();
        assert_eq!(b.beta_sq, vec![ratio(1, 1)]);
        assert_eq!(chain_engine(&th, 10).unwrap(), seq);
    }

    #[test]
    fn half_third_in_two_dimensions() {
        let s = Split::new(2, 1).unwrap();
        let th = ThetaMatrix::parse(s, "1/2,1/3").unwrap();
        let seq = direct_scan(&th, 6).unwrap();
        assert!(seq.terminal);
        let q: Vec<BigInt> = seq.records.iter().map(|r| r.q_vec[0].clone()).collect();
        assert_eq!(q, vec![int(1), int(2), int(6)]);
        let r: Vec<BigRational> = seq.records.iter().map(|r| r.r_sq.clone()).collect();
        assert_eq!(r, vec![ratio(13, 36), ratio(1, 9), ratio(0, 1)]);
        assert_eq!(chain_engine(&th, 10).unwrap(), seq);
    }

    #[test]
    fn first_record_is_a_unit_vector() {
        let s = Split::new(1, 2).unwrap();
        let th = ThetaMatrix::parse(s, "2/7,3/11").unwrap();
        let seq = chain_engine(&th, 1).unwrap();
        assert_eq!(seq.records.len(), 1);
        assert_eq!(seq.records[0].q_sq, int(1));
    }

    #[test]
    fn sampling_is_deterministic_and_in_range() {
        let s = Split::new(2, 1).unwrap();
        let a = sample_theta(s, 128, 42).unwrap();
        let b = sample_theta(s, 128, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_theta(s, 128, 43).unwrap());
        for e in a.entries() {
            assert!(!e.is_negative() && e < ratio(1, 1));
        }
        assert!(sample_theta(s, 32, 1).is_err());
    }

    #[test]
    fn spec_string_round_trip() {
        let s = Split::new(2, 1).unwrap();
        let th = ThetaMatrix::parse(s, "1/2,1/3").unwrap();
        assert_eq!(th.to_fraction_list(), "1/2,1/3");
        assert_eq!(ThetaMatrix::parse(s, &th.to_fraction_list()).unwrap(), th);
        assert!(ThetaMatrix::parse(s, "1/2").is_err());
    }
}
