use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};

use sdalab::bestapprox::{
    beta_sequence, chain_engine, chain_engine_to, direct_scan, is_monotone, sample_theta, sample_theta_stream,
    ThetaMatrix,
};
use sdalab::Split;

fn s(d: usize, c: usize) -> Split {
    Split::new(d, c).unwrap()
}

fn qs(theta: &ThetaMatrix, q_max: u64) -> Vec<BigInt> {
    direct_scan(theta, q_max).unwrap().records.iter().map(|r| r.q_vec[0].clone()).collect()
}

/// Partial quotients of `p/q` by the Euclidean algorithm.
fn partial_quotients(p: &BigInt, q: &BigInt) -> Vec<BigInt> {
    let (mut p, mut q) = (p.clone(), q.clone());
    let mut out = Vec::new();
    while !q.is_zero() {
        let (a, r) = p.div_mod_floor(&q);
        out.push(a);
        p = std::mem::replace(&mut q, r);
    }
    out
}

/// Distinct convergent denominators.
fn convergent_denominators(p: &BigInt, q: &BigInt) -> Vec<BigInt> {
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    let mut out: Vec<BigInt> = Vec::new();
    for a in partial_quotients(p, q) {
        let k2 = &a * &k1 + &k0;
        k0 = std::mem::replace(&mut k1, k2);
        if !k1.is_zero() && out.last() != Some(&k1) {
            out.push(k1.clone());
        }
    }
    out
}

#[test]
fn one_third_stops_at_resonance() {
    let theta = ThetaMatrix::parse(s(1, 1), "1/3").unwrap();
    let seq = direct_scan(&theta, 5).unwrap();
    assert!(seq.terminal);
    let got: Vec<(BigInt, BigRational)> = seq.records.iter().map(|r| (r.q_vec[0].clone(), r.r_sq.clone())).collect();
    assert_eq!(got, vec![(1.into(), BigRational::new(1.into(), 9.into())), (3.into(), BigRational::zero())]);
}

#[test]
fn fibonacci_ratio_gives_fibonacci_records() {
    let theta = ThetaMatrix::parse(s(1, 1), "832040/1346269").unwrap();
    let scan = qs(&theta, 1346269);
    assert_eq!(scan, convergent_denominators(&832040.into(), &1346269.into()));
    let mut fib = vec![BigInt::from(1), BigInt::from(2)];
    while fib.len() < 29 {
        let next = &fib[fib.len() - 1] + &fib[fib.len() - 2];
        fib.push(next);
    }
    // 832040 ties with its predecessor, so the last record jumps to 1346269
    fib[28] = BigInt::from(1346269);
    assert_eq!(scan, fib);
    let chain = chain_engine(&theta, 40).unwrap();
    assert_eq!(chain.records[..25], direct_scan(&theta, 1346269).unwrap().records[..25]);
}

#[test]
fn half_third_in_the_plane() {
    let theta = ThetaMatrix::parse(s(2, 1), "1/2,1/3").unwrap();
    let scan = direct_scan(&theta, 6).unwrap();
    let chain = chain_engine_to(&theta, 6).unwrap();
    assert_eq!(scan.records, chain.records);
    assert_eq!(qs(&theta, 6), vec![BigInt::from(1), 2.into(), 6.into()]);
}

#[test]
fn chain_engine_matches_continued_fractions() {
    for seed in 0..20 {
        let theta = sample_theta(s(1, 1), 128, seed).unwrap();
        let want = convergent_denominators(&theta.numerators()[0][0], theta.den());
        let got: Vec<BigInt> =
            chain_engine(&theta, want.len() + 5).unwrap().records.iter().map(|r| r.q_vec[0].clone()).collect();
        assert_eq!(got, want, "seed {seed}");
    }
}

#[test]
fn first_record_is_a_shortest_vector() {
    for (d, c) in [(1, 1), (2, 1), (1, 2)] {
        let theta = sample_theta(s(d, c), 64, 5).unwrap();
        let seq = chain_engine(&theta, 1).unwrap();
        assert_eq!(seq.records[0].q_sq, BigInt::one());
    }
}

#[test]
fn dyadic_samples_have_long_expansions() {
    for seed in 0..100 {
        let theta = sample_theta(s(1, 1), 256, seed).unwrap();
        let n = partial_quotients(&theta.numerators()[0][0], theta.den()).len();
        assert!(n >= 80, "seed {seed}: {n} partial quotients");
    }
}

#[test]
fn sampling_is_deterministic() {
    let a = sample_theta_stream(s(2, 1), 128, 42, 3).unwrap();
    let b = sample_theta_stream(s(2, 1), 128, 42, 3).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, sample_theta_stream(s(2, 1), 128, 42, 4).unwrap());
}

#[test]
fn beta_of_one_third_is_on_the_boundary() {
    let theta = ThetaMatrix::parse(s(1, 1), "1/3").unwrap();
    let seq = direct_scan(&theta, 5).unwrap();
    let betas = beta_sequence(s(1, 1), &seq.records).unwrap();
    assert_eq!(betas.beta_sq, vec![BigRational::one()]);
}

#[test]
fn fibonacci_betas_satisfy_the_double_inequality() {
    let theta = ThetaMatrix::parse(s(1, 1), "832040/1346269").unwrap();
    let seq = direct_scan(&theta, 1346269).unwrap();
    let betas = beta_sequence(s(1, 1), &seq.records).unwrap();
    let quarter = BigRational::new(1.into(), 4.into());
    assert!(betas.beta_sq.iter().all(|b| *b >= quarter && *b <= BigRational::one()));
    assert!(betas.within_minkowski());
    assert!(is_monotone(&seq.records));
}

#[test]
fn records_serialize_fractions_as_strings() {
    let theta = ThetaMatrix::parse(s(1, 1), "1/3").unwrap();
    let seq = direct_scan(&theta, 5).unwrap();
    let json = serde_json::to_string(&seq.records[0]).unwrap();
    assert!(json.contains("\"1/9\""), "{json}");
    let back: sdalab::bestapprox::BestApproxRecord = serde_json::from_str(&json).unwrap();
    assert_eq!(back, seq.records[0]);
}
