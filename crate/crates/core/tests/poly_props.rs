use std::collections::BTreeMap;

use cardcsp::poly::{parse_poly, write_poly, Assignment, Basis, MultilinearPoly, Subset};
use cardcsp::quad::{rat, Quad};
use proptest::prelude::*;

fn poly_strategy(n: usize, d: usize) -> impl Strategy<Value = Vec<(u32, i64, i64)>> {
    prop::collection::vec((0u32..(1 << n), -5i64..=5, 1i64..=4), 0..10).prop_map(move |v| {
        v.into_iter().filter(|(m, _, _)| m.count_ones() as usize <= d).collect()
    })
}

fn build(n: usize, basis: &Basis, terms: &[(u32, i64, i64)]) -> MultilinearPoly {
    let mut f = MultilinearPoly::zero(n, basis.clone());
    for &(mask, a, b) in terms {
        let s = Subset::new((0..n).filter(|i| mask >> i & 1 == 1)).unwrap();
        f.add_term(s, Quad::from_rational(rat(a, b)));
    }
    f
}

fn points(n: usize) -> impl Iterator<Item = Assignment> {
    (0u32..1 << n).map(move |m| Assignment::new((0..n).map(|i| if m >> i & 1 == 1 { -1 } else { 1 }).collect()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn basis_change_preserves_values(terms in poly_strategy(5, 3), pk in 1i64..=4) {
        let p = rat(pk, 5);
        let phi = Basis::phi(p).unwrap();
        let f = build(5, &Basis::Chi, &terms);
        let g = f.convert_basis(&phi).unwrap();
        let back = g.convert_basis(&Basis::Chi).unwrap();
        prop_assert_eq!(&back, &f);
        prop_assert!(g.degree() <= f.degree());
        for a in points(5) {
            prop_assert_eq!(f.evaluate(&a).unwrap(), g.evaluate(&a).unwrap());
        }
    }

    #[test]
    fn product_is_pointwise(x in poly_strategy(4, 2), y in poly_strategy(4, 2), pk in 1i64..=3) {
        for basis in [Basis::Chi, Basis::phi(rat(pk, 4)).unwrap()] {
            let f = build(4, &basis, &x);
            let g = build(4, &basis, &y);
            let fg = f.multiply(&g).unwrap();
            for a in points(4) {
                prop_assert_eq!(fg.evaluate(&a).unwrap(), &f.evaluate(&a).unwrap() * &g.evaluate(&a).unwrap());
            }
        }
    }

    #[test]
    fn text_round_trip(terms in poly_strategy(6, 3)) {
        let f = build(6, &Basis::Chi, &terms);
        let text = write_poly(&f).unwrap();
        prop_assert_eq!(parse_poly(&text).unwrap(), f);
    }

    #[test]
    fn restriction_agrees(terms in poly_strategy(5, 3), fix in prop::collection::btree_map(0usize..5, prop::bool::ANY, 0..4)) {
        let f = build(5, &Basis::Chi, &terms);
        let fixed: BTreeMap<usize, i8> = fix.iter().map(|(&k, &v)| (k, if v { 1 } else { -1 })).collect();
        let r = f.restrict(&fixed).unwrap();
        for a in points(5) {
            if fixed.iter().all(|(&i, &v)| a.get(i) == v) {
                prop_assert_eq!(r.evaluate(&a).unwrap(), f.evaluate(&a).unwrap());
            }
        }
        prop_assert!(r.variables().iter().all(|v| !fixed.contains_key(v)));
    }
}

#[test]
fn duplicate_subset_rejected() {
    assert!(Subset::new([1, 1]).is_err());
}

#[test]
fn wrong_length_rejected() {
    let f = MultilinearPoly::sum_of_variables(3, Basis::Chi);
    assert!(f.evaluate(&Assignment::new(vec![1, 1]).unwrap()).is_err());
}
