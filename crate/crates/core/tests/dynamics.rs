use num_bigint::BigInt;

use sdalab::bestapprox::{direct_scan, ThetaMatrix};
use sdalab::dynamics::{
    first_return, minimal_vectors, return_map_explicit_1d, return_map_orbit_1d, surface_membership_s,
    third_vector_1d, visiting_times, SurfacePoint1D,
};
use sdalab::{LatticeBasis, Split};

#[test]
fn fibonacci_chain_heights_are_the_records() {
    let s = Split::new(1, 1).unwrap();
    let theta = ThetaMatrix::parse(s, "832040/1346269").unwrap();
    let b = theta.lattice();
    let chain = minimal_vectors(&b, 40).unwrap();
    let heights: Vec<BigInt> = chain
        .entries
        .iter()
        .map(|e| b.minus_num(&e.vector.y)[0].clone() / b.v_den())
        .map(|q| if q < BigInt::from(0) { -q } else { q })
        .filter(|q| *q != BigInt::from(0))
        .collect();
    let records: Vec<BigInt> = direct_scan(&theta, 1346269).unwrap().records.iter().map(|r| r.q_vec[0].clone()).collect();
    assert_eq!(heights, records);
}

#[test]
fn visiting_times_increase() {
    let s = Split::new(2, 1).unwrap();
    let theta = sdalab::bestapprox::sample_theta(s, 256, 3).unwrap();
    let chain = minimal_vectors(&theta.lattice().flowed(12.0), 30).unwrap();
    let (times, _) = visiting_times(&chain).unwrap();
    assert!(times.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn return_map_agrees_with_the_formula() {
    for (x, y, eps) in [(0.7, 0.3, 1), (0.123, 0.9, -1), (0.51, 0.02, 1)] {
        let p = SurfacePoint1D::new(x, y, eps).unwrap();
        let ret = first_return(&p.lattice().unwrap()).unwrap();
        let enumerated = SurfacePoint1D::from_lattice(&ret.lattice).unwrap();
        let explicit = return_map_explicit_1d(p).unwrap();
        assert!((enumerated.x - explicit.x).abs() <= 1e-12 * explicit.x);
        assert!((enumerated.y - explicit.y).abs() <= 1e-12 * explicit.y);
        assert_eq!(enumerated.eps, explicit.eps);
        let x2 = third_vector_1d(p).unwrap();
        assert!(x2 == ret.x2.y || x2.iter().map(|v| -v).collect::<Vec<_>>() == ret.x2.y);
    }
}

#[test]
fn orbit_visiting_identity() {
    let (rows, _) = return_map_orbit_1d(300, 3).unwrap();
    assert!(rows.iter().all(|r| r.visit_residual <= 1e-9 && r.delta <= 1e-9 && r.eps_agree));
    assert!(rows.windows(2).all(|w| w[1].start == w[0].enumerated));
}

#[test]
fn off_surface_lattices_are_rejected() {
    let b = LatticeBasis::identity(Split::new(1, 1).unwrap());
    assert!(!surface_membership_s(&b).unwrap().on_surface);
    assert!(first_return(&b).is_err());
    assert!(SurfacePoint1D::new(1.5, 0.2, 1).is_err());
    assert!(SurfacePoint1D::new(0.5, 0.2, 0).is_err());
}
