use cardcsp::cardinal_dist::CardinalDist;
use cardcsp::oracle::{brute_moment, Evaluator};
use cardcsp::poly::{Basis, MultilinearPoly, Subset};
use cardcsp::quad::{rat, Quad};
use cardcsp::spectra::{null_vector, orthogonality_defect, project_null, EntryMode, FormKind, SetSymmetricForm};
use proptest::prelude::*;

const CAP: u128 = 1_000_000;

fn settings() -> impl Strategy<Value = (usize, i64, i64)> {
    prop::sample::select(vec![(6usize, 1i64, 2i64), (6, 1, 3), (8, 1, 4), (9, 1, 3), (8, 1, 2), (10, 2, 5)])
}

fn build(n: usize, basis: &Basis, terms: &[(u32, i64)], d: usize) -> MultilinearPoly {
    let mut f = MultilinearPoly::zero(n, basis.clone());
    for &(mask, c) in terms {
        let mask = mask & ((1 << n) - 1);
        if mask.count_ones() as usize <= d {
            let s = Subset::new((0..n).filter(|i| mask >> i & 1 == 1)).unwrap();
            f.add_term(s, Quad::from_rational(rat(c, 2)));
        }
    }
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn closed_moments_match_enumeration(
        (n, a, b) in settings(),
        terms in prop::collection::vec((0u32..1024, -4i64..=4), 1..8),
        chi in prop::bool::ANY,
    ) {
        let dist = CardinalDist::new(n, rat(a, b)).unwrap();
        let basis = if chi { Basis::Chi } else { dist.phi_basis() };
        let f = build(n, &basis, &terms, 3);
        let card = dist.cardinality();
        prop_assert_eq!(dist.expectation(&f).unwrap(), brute_moment(&f, card, 1, CAP).unwrap());
        prop_assert_eq!(dist.second_moment(&f).unwrap(), brute_moment(&f, card, 2, CAP).unwrap());
    }

    #[test]
    fn chi_and_phi_routes_agree((n, a, b) in settings(), terms in prop::collection::vec((0u32..1024, -4i64..=4), 1..8)) {
        let dist = CardinalDist::new(n, rat(a, b)).unwrap();
        let f = build(n, &Basis::Chi, &terms, 3);
        let g = f.convert_basis(&dist.phi_basis()).unwrap();
        prop_assert_eq!(dist.expectation(&f).unwrap(), dist.expectation(&g).unwrap());
        prop_assert_eq!(dist.variance(&f).unwrap(), dist.variance(&g).unwrap());
    }

    #[test]
    fn simplified_entries_exact_at_half(n in prop::sample::select(vec![6usize, 8, 10]), terms in prop::collection::vec((0u32..1024, -4i64..=4), 1..8)) {
        let dist = CardinalDist::new(n, rat(1, 2)).unwrap();
        let f = build(n, &dist.phi_basis(), &terms, 3);
        prop_assert_eq!(dist.second_moment_simplified(&f).unwrap(), dist.second_moment(&f).unwrap());
    }

    #[test]
    fn quadratic_forms_match((n, a, b) in settings(), terms in prop::collection::vec((0u32..1024, -4i64..=4), 1..8)) {
        let dist = CardinalDist::new(n, rat(a, b)).unwrap();
        let f = build(n, &dist.phi_basis(), &terms, 2);
        let a_form = SetSymmetricForm::new(dist.clone(), 2, FormKind::A, EntryMode::Exact).unwrap().build_dense(5000).unwrap();
        let b_form = SetSymmetricForm::new(dist.clone(), 2, FormKind::B, EntryMode::Exact).unwrap().build_dense(5000).unwrap();
        prop_assert_eq!(a_form.quadratic_form(&f).unwrap(), dist.second_moment(&f).unwrap());
        prop_assert_eq!(b_form.quadratic_form(&f).unwrap(), dist.variance(&f).unwrap());
    }

    #[test]
    fn projection_residual_is_orthogonal_and_faithful(
        (n, a, b) in settings(),
        terms in prop::collection::vec((0u32..1024, -4i64..=4), 1..10),
    ) {
        let dist = CardinalDist::new(n, rat(a, b)).unwrap();
        let f = build(n, &dist.phi_basis(), &terms, 2);
        let res = project_null(&f, &dist, 2000, 1e-9).unwrap();
        prop_assert!(res.exact);
        prop_assert!(orthogonality_defect(&res, f.degree()).is_zero());
        prop_assert!(res.h.degree() < f.degree().max(1));
        // residual differs from f only by a null-space element and a constant
        let diff = f.sub(&res.residual).unwrap();
        let ev = Evaluator::new(&diff);
        let values: Vec<Quad> = cardcsp::oracle::slice_points(n, dist.cardinality().minus_count()).map(|p| ev.evaluate(&p)).collect();
        prop_assert!(values.windows(2).all(|w| w[0] == w[1]));
    }
}

#[test]
fn null_vectors_vanish_on_the_slice() {
    for (n, p) in [(8usize, rat(1, 2)), (9, rat(1, 3))] {
        let dist = CardinalDist::new(n, p).unwrap();
        let a = SetSymmetricForm::new(dist.clone(), 2, FormKind::A, EntryMode::Exact).unwrap().build_dense(5000).unwrap();
        for s in [Subset::empty(), Subset::singleton(3)] {
            let v = null_vector(n, &dist.phi_basis(), &s);
            assert!(a.quadratic_form(&v).unwrap().is_zero());
            assert!(brute_moment(&v, dist.cardinality(), 2, CAP).unwrap().is_zero());
        }
    }
}

#[test]
fn seeded_sampling_is_reproducible() {
    let dist = CardinalDist::new(12, rat(1, 3)).unwrap();
    let f = MultilinearPoly::sum_of_variables(12, Basis::Chi).multiply(&MultilinearPoly::sum_of_variables(12, Basis::Chi)).unwrap();
    let a = dist.mc_moment(&f, 2, 500, 42).unwrap();
    let b = dist.mc_moment(&f, 2, 500, 42).unwrap();
    assert_eq!(a, b);
    // Σx_i = 4 on the slice, so f = 16 and E[f²] = 256 with no spread
    assert_eq!(a.mean, 256.0);
    assert_eq!(a.stderr, 0.0);
    for k in 0..20 {
        assert_eq!(dist.sample_seeded(k).count_minus(), 4);
    }
}
