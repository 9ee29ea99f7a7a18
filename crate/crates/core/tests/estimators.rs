use std::f64::consts::LN_2;

use sdalab::estimators::{
    bjw_oracle_cdf_1d, ks_distance, levy_ergodic, surface_mc_2d_with, EmpiricalCdf, DEFAULT_H_BOX,
};
use sdalab::{Execution, Split};

/// Mass of `{1/(1+xy) ≤ t}` under the density `1/(ln 2 (1+xy)²)` on the unit square.
fn grid_cdf(t: f64, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let mut sum = 0.0;
    for i in 0..n {
        let x = (i as f64 + 0.5) * h;
        for j in 0..n {
            let y = (j as f64 + 0.5) * h;
            let s = 1.0 + x * y;
            if 1.0 / s <= t {
                sum += 1.0 / (s * s);
            }
        }
    }
    sum * h * h / LN_2
}

#[test]
fn oracle_cdf_matches_a_riemann_grid() {
    let want = grid_cdf(0.75, 10_000);
    let got = bjw_oracle_cdf_1d(0.75);
    assert!((got - want).abs() < 1e-4, "{got} vs {want}");
}

#[test]
fn oracle_cdf_is_monotone() {
    let mut prev = bjw_oracle_cdf_1d(0.5);
    assert_eq!(prev, 0.0);
    for i in 1..=1000 {
        let v = bjw_oracle_cdf_1d(0.5 + 0.5 * i as f64 / 1000.0);
        assert!(v >= prev);
        prev = v;
    }
    assert_eq!(prev, 1.0);
    assert_eq!(bjw_oracle_cdf_1d(0.2), 0.0);
}

#[test]
fn deeper_windows_shrink_the_spread() {
    let s = Split::new(1, 1).unwrap();
    let short = levy_ergodic(s, 100, 50, 256, 5).unwrap();
    let long = levy_ergodic(s, 100, 100, 256, 5).unwrap();
    assert!(long.stderr < short.stderr, "{} vs {}", long.stderr, short.stderr);
}

fn oracle_inverse(u: f64) -> f64 {
    let (mut lo, mut hi) = (0.5, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if bjw_oracle_cdf_1d(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn ks_of_an_exact_sample_is_small() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
    let xs: Vec<f64> = (0..100_000).map(|_| oracle_inverse(rng.gen())).collect();
    let e = EmpiricalCdf::new(xs).unwrap();
    assert!(ks_distance(&e, bjw_oracle_cdf_1d).unwrap() < 0.01);
}

#[test]
fn ks_edge_cases() {
    let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
    let e = EmpiricalCdf::new(xs).unwrap();
    let uniform = |x: f64| x.clamp(0.0, 1.0);
    assert!(ks_distance(&e, uniform).unwrap() <= 0.5 / 1000.0 + 1e-12);
    let shifted = |x: f64| (x - 0.1).clamp(0.0, 1.0);
    assert!(ks_distance(&e, shifted).unwrap() >= 0.1 - 1e-12);
    assert!(EmpiricalCdf::new(Vec::new()).is_err());
    assert!(EmpiricalCdf::new(vec![f64::NAN]).is_err());
}

#[test]
fn surface_mc_is_schedule_independent() {
    let a = surface_mc_2d_with(3000, 4, DEFAULT_H_BOX, Execution::Sequential).unwrap();
    let b = surface_mc_2d_with(3000, 4, DEFAULT_H_BOX, Execution::Parallel).unwrap();
    assert_eq!(a.mu_s_hat, b.mu_s_hat);
    assert_eq!(a.trace, b.trace);
    assert!(a.mu_s_hat > 0.0 && a.stderr.is_finite());
    assert_eq!(a.trace.len(), 3000);
}
