use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use proptest::prelude::*;

use sdalab::enumerate::enumerate_in_cylinder;
use sdalab::lattice::integer_det;
use sdalab::lll::{dot, gram_schmidt, lll_reduce_with_transform, LLL_DELTA};
use sdalab::{minkowski_bound, Cylinder, LatticeBasis, Split};

fn basis_strategy() -> impl Strategy<Value = (Split, Vec<Vec<i64>>)> {
    prop_oneof![Just(Split::new(1, 1).unwrap()), Just(Split::new(2, 1).unwrap()), Just(Split::new(1, 2).unwrap())]
        .prop_flat_map(|s| {
            let n = s.n();
            (Just(s), prop::collection::vec(prop::collection::vec(-50i64..=50, n), n))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lll_is_unimodular_and_reduced((s, cols) in basis_strategy()) {
        let Ok(b) = LatticeBasis::from_int_columns(s, &cols) else { return Ok(()) };
        let (r, u) = lll_reduce_with_transform(&b).unwrap();
        prop_assert_eq!(integer_det(&u).abs(), BigInt::one());
        prop_assert_eq!(r.det_base().abs(), b.det_base().abs());
        let red = r.columns_f64();
        let (mu, bsq) = gram_schmidt(&red);
        for k in 1..red.len() {
            for j in 0..k {
                prop_assert!(mu[k][j].abs() <= 0.5 + 1e-9);
            }
            prop_assert!(bsq[k] >= (LLL_DELTA - mu[k][k - 1].powi(2)) * bsq[k - 1] * (1.0 - 1e-9));
        }
        // same lattice: every reduced column is an integer combination of the old ones
        for (j, y) in u.iter().enumerate() {
            let img = b.image_f64(y);
            prop_assert!(img.iter().zip(&red[j]).all(|(a, c)| (a - c).abs() <= 1e-9 * (1.0 + c.abs())));
        }
    }

    #[test]
    fn cylinder_enumeration_matches_brute_force(
        cols in prop::collection::vec(prop::collection::vec(-3i64..=3, 2), 2),
        a in 1i64..=10,
        c in 1i64..=10,
    ) {
        let s = Split::new(1, 1).unwrap();
        let Ok(b) = LatticeBasis::from_int_columns(s, &cols) else { return Ok(()) };
        let cyl = Cylinder::new(BigRational::new(a.into(), 3.into()), BigRational::new(c.into(), 3.into())).unwrap();
        let mut got: Vec<Vec<i64>> = enumerate_in_cylinder(&b, &cyl).unwrap().iter().map(|v| canon(&b, &v.y)).collect();
        got.sort();
        got.dedup();
        let mut want = Vec::new();
        let det = (cols[0][0] * cols[1][1] - cols[0][1] * cols[1][0]).abs();
        // |y| ≤ ‖adj‖ · radius / |det| with radius ≤ 10/3 per block
        let bound = 2 * 3 * 4 / det + 2;
        for y0 in -bound..=bound {
            for y1 in -bound..=bound {
                let (x, z) = (cols[0][0] * y0 + cols[1][0] * y1, cols[0][1] * y0 + cols[1][1] * y1);
                if (x, z) != (0, 0) && 9 * x * x <= a * a && 9 * z * z <= c * c {
                    want.push(canon_i(&[x, z]));
                }
            }
        }
        want.sort();
        want.dedup();
        prop_assert_eq!(got, want);
    }
}

fn canon_i(v: &[i64]) -> Vec<i64> {
    if v.iter().find(|x| **x != 0).is_some_and(|x| *x < 0) {
        v.iter().map(|x| -x).collect()
    } else {
        v.to_vec()
    }
}

/// Image coordinates, sign-normalized, for comparison with the brute force.
fn canon(b: &LatticeBasis, y: &[BigInt]) -> Vec<i64> {
    let img = b.image_f64(y);
    canon_i(&img.iter().map(|x| x.round() as i64).collect::<Vec<_>>())
}

#[test]
fn minkowski_constants() {
    assert_eq!(minkowski_bound(1, 1).exact(), Some(BigRational::one()));
    let c21 = minkowski_bound(2, 1);
    assert_eq!(c21.exact(), None);
    assert!((c21.value() - 4.0 / std::f64::consts::PI).abs() < 1e-14);
    assert_eq!(minkowski_bound(1, 2).value(), c21.value());
    assert_eq!(c21.certify_le_sq(&BigRational::new(1.into(), 1.into())), Some(true));
    assert_eq!(c21.certify_le_sq(&BigRational::new(13.into(), 8.into())), Some(false));
}

#[test]
fn skewed_plane_basis_reduces_to_short_vectors() {
    let s = Split::new(1, 1).unwrap();
    let b = LatticeBasis::from_int_columns(s, &[vec![1, 0], vec![10, 1]]).unwrap();
    let (r, _) = lll_reduce_with_transform(&b).unwrap();
    for col in r.columns_f64() {
        assert!(dot(&col, &col) <= 2.0 + 1e-12);
    }
}
