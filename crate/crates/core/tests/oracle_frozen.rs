//! Values computed once by an independent exhaustive enumeration and frozen.

use cardcsp::cardinal_dist::{chi_delta_sequence, delta_sequence, CardinalDist};
use cardcsp::csp_model::{CspInstance, GlobalCardinality};
use cardcsp::oracle::{brute_avg, brute_force_decision, brute_moment, brute_opt, brute_variance};
use cardcsp::poly::{Basis, MultilinearPoly, Subset};
use cardcsp::quad::{rat, rat_int, Quad};
use cardcsp::solver;

const CAP: u128 = 10_000_000;

fn sqrt2(c: (i64, i64)) -> Quad {
    Quad::sqrt_of(&rat_int(2)).scale(&rat(c.0, c.1))
}

#[test]
fn phi_deltas_at_one_third() {
    let got = delta_sequence(9, &rat(1, 3), 5).unwrap();
    let want = vec![
        Quad::one(),
        Quad::zero(),
        Quad::from_rational(rat(-1, 8)),
        sqrt2((-1, 56)),
        Quad::from_rational(rat(3, 56)),
        sqrt2((1, 28)),
    ];
    assert_eq!(got, want);
}

#[test]
fn chi_deltas_at_one_third() {
    let want: Vec<_> = [(1, 1), (1, 3), (0, 1), (-2, 21), (-1, 21), (1, 21), (2, 21)].iter().map(|&(a, b)| rat(a, b)).collect();
    assert_eq!(chi_delta_sequence(9, 3, 6), want);
}

#[test]
fn second_delta_at_half() {
    let card = GlobalCardinality::bisection(4).unwrap();
    let f = MultilinearPoly::monomial(4, Basis::phi(rat(1, 2)).unwrap(), Subset::new([0, 1]).unwrap(), Quad::one()).unwrap();
    assert_eq!(brute_moment(&f, &card, 1, CAP).unwrap(), Quad::from_rational(rat(-1, 3)));
}

fn path(n: usize) -> CspInstance {
    let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
    CspInstance::from_edges(n, &edges).unwrap()
}

#[test]
fn path_six_bisection() {
    let inst = path(6);
    let card = GlobalCardinality::bisection(6).unwrap();
    assert_eq!(brute_opt(&inst, &card, CAP).unwrap().0, 5);
    assert_eq!(brute_avg(&inst, &card, CAP).unwrap(), rat_int(3));
    assert_eq!(brute_variance(&inst.to_polynomial(), &card, CAP).unwrap(), Quad::from_rational(rat(6, 5)));
    let dist = CardinalDist::from_cardinality(&card).unwrap();
    assert_eq!(dist.variance(&inst.to_polynomial()).unwrap(), Quad::from_rational(rat(6, 5)));
}

#[test]
fn path_nine_one_third() {
    let inst = path(9);
    let card = GlobalCardinality::new(9, rat(1, 3)).unwrap();
    assert_eq!(brute_opt(&inst, &card, CAP).unwrap().0, 6);
    assert_eq!(solver::average(&inst, &card).unwrap(), rat_int(4));
    let dist = CardinalDist::from_cardinality(&card).unwrap();
    assert_eq!(dist.variance(&inst.to_polynomial()).unwrap(), Quad::from_rational(rat(3, 2)));
}

#[test]
fn two_squares_with_bridge_one_quarter() {
    let edges = [(0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6), (6, 7), (7, 4), (0, 4)];
    let inst = CspInstance::from_edges(8, &edges).unwrap();
    let card = GlobalCardinality::new(8, rat(1, 4)).unwrap();
    assert_eq!(brute_opt(&inst, &card, CAP).unwrap().0, 5);
    assert_eq!(solver::average(&inst, &card).unwrap(), rat(27, 7));
    let dist = CardinalDist::from_cardinality(&card).unwrap();
    assert_eq!(dist.variance(&inst.to_polynomial()).unwrap(), Quad::from_rational(rat(48, 49)));
    // OPT = 5 ≥ 27/7 + 1 but not + 2
    assert!(brute_force_decision(&inst, &card, &rat_int(1), CAP).unwrap());
    assert!(!brute_force_decision(&inst, &card, &rat_int(2), CAP).unwrap());
}

#[test]
fn decision_at_zero_is_yes() {
    let inst = path(6);
    let card = GlobalCardinality::bisection(6).unwrap();
    assert!(brute_force_decision(&inst, &card, &rat_int(0), CAP).unwrap());
}

#[test]
fn empty_instance() {
    let inst = CspInstance::new(4, 2, vec![]).unwrap();
    let card = GlobalCardinality::bisection(4).unwrap();
    assert_eq!(brute_opt(&inst, &card, CAP).unwrap().0, 0);
}
