mod support;

use sosgap::group::Ring;

#[test]
fn group_ring_axioms() {
    assert_eq!(support::group_ring_axioms(200, 1), Ok(200));
}

#[test]
fn interval_scalars_enclose_exact_results() {
    support::interval_scalar_fuzz(50_000, 2).unwrap();
}

#[test]
fn interval_convolution_encloses_exact_result() {
    support::interval_convolution_fuzz(100, 3).unwrap();
}

#[test]
fn psd_projection_properties() {
    support::psd_projection_fuzz(200, 20, 4).unwrap();
}

#[test]
fn trivial_witness_residual_vanishes() {
    for (n, ring, d) in [(2, Ring::IntegersModP(3), 2), (2, Ring::Integers, 2), (3, Ring::Integers, 1)] {
        let l1 = support::trivial_witness_l1(n, ring, d);
        assert!(l1 <= 1e-10, "{n} {ring} {d}: {l1}");
    }
}
