//! Ground truth by exhaustive enumeration of the slice.
//!
//! Everything here is deliberately naive: assignments are listed one by one
//! and values are computed from scratch, so the closed-form modules can be
//! checked against it.

use itertools::Itertools;
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::csp_model::{CspInstance, GlobalCardinality};
use crate::error::{input, Error, Result};
use crate::poly::{binomial, Assignment, Basis, MultilinearPoly};
use crate::quad::{Quad, Rational};

/// Default limit on the number of enumerated assignments.
pub const DEFAULT_CAP: u128 = 10_000_000;

fn check_cap(count: u128, cap: u128) -> Result<()> {
    if count > cap {
        return Err(Error::Resource(format!("{count} assignments exceed enumeration cap {cap}")));
    }
    Ok(())
}

/// Every assignment with exactly `minus` entries equal to −1, listed by the
/// lexicographic order of the −1 positions.
pub fn slice_points(n: usize, minus: usize) -> impl Iterator<Item = Assignment> {
    (0..n).combinations(minus).map(move |pos| Assignment::from_minus_positions(n, &pos))
}

pub fn slice_size(card: &GlobalCardinality) -> u128 {
    binomial(card.n(), card.minus_count())
}

/// Exact evaluator: converts to the χ basis and clears denominators, so an
/// evaluation is a signed sum of integers `A + B·√k` over a common `L`.
pub struct Evaluator {
    n: usize,
    denom: BigInt,
    radicand: Option<BigInt>,
    terms: Vec<(Vec<usize>, BigInt, BigInt)>,
}

impl Evaluator {
    pub fn new(f: &MultilinearPoly) -> Self {
        let chi = f.convert_basis(&Basis::Chi).expect("conversion to chi always succeeds");
        let mut denom = BigInt::one();
        let mut radicand = None;
        for (_, c) in chi.terms() {
            denom = num_integer::lcm(denom, c.rational_part().denom().clone());
            denom = num_integer::lcm(denom, c.irrational_part().denom().clone());
            if let Some(k) = c.radicand() {
                radicand = Some(k.clone());
            }
        }
        let l = Rational::from_integer(denom.clone());
        let terms = chi
            .terms()
            .map(|(s, c)| {
                let a = (c.rational_part() * &l).to_integer();
                let b = (c.irrational_part() * &l).to_integer();
                (s.iter().collect(), a, b)
            })
            .collect();
        Evaluator { n: f.n(), denom, radicand, terms }
    }

    /// Numerators `(A, B)` of f(a) = (A + B√k)/L.
    pub fn numerators(&self, a: &Assignment) -> (BigInt, BigInt) {
        let mut sa = BigInt::zero();
        let mut sb = BigInt::zero();
        for (vars, ca, cb) in &self.terms {
            let neg = vars.iter().filter(|&&i| a.get(i) < 0).count() % 2 == 1;
            if neg {
                sa -= ca;
                sb -= cb;
            } else {
                sa += ca;
                sb += cb;
            }
        }
        (sa, sb)
    }

    fn to_quad(&self, a: BigInt, b: BigInt, denom: &BigInt) -> Quad {
        let ra = Quad::from_rational(Rational::new(a, denom.clone()));
        match &self.radicand {
            Some(k) if !b.is_zero() => {
                let root = Quad::sqrt_of(&Rational::from_integer(k.clone()));
                &ra + &root.scale(&Rational::new(b, denom.clone()))
            }
            _ => ra,
        }
    }

    pub fn evaluate(&self, a: &Assignment) -> Quad {
        assert_eq!(a.len(), self.n);
        let (x, y) = self.numerators(a);
        self.to_quad(x, y, &self.denom)
    }

    /// (A + B√k)^e as integer pair.
    fn power(&self, a: &BigInt, b: &BigInt, e: u32) -> (BigInt, BigInt) {
        let k = self.radicand.clone().unwrap_or_else(BigInt::zero);
        let mut acc = (BigInt::one(), BigInt::zero());
        for _ in 0..e {
            let na = &acc.0 * a + &acc.1 * b * &k;
            let nb = &acc.0 * b + &acc.1 * a;
            acc = (na, nb);
        }
        acc
    }

    /// Mean of f^e over the listed points.
    pub fn moment<I: IntoIterator<Item = Assignment>>(&self, points: I, e: u32) -> Quad {
        let mut sa = BigInt::zero();
        let mut sb = BigInt::zero();
        let mut count = 0u64;
        for a in points {
            let (x, y) = self.numerators(&a);
            let (px, py) = self.power(&x, &y, e);
            sa += px;
            sb += py;
            count += 1;
        }
        assert!(count > 0, "empty enumeration");
        let denom = num_traits::pow(self.denom.clone(), e as usize) * BigInt::from(count);
        self.to_quad(sa, sb, &denom)
    }
}

/// Exact OPT over the slice and the lexicographically smallest maximizer
/// (with −1 ordered before +1).
pub fn brute_opt(inst: &CspInstance, card: &GlobalCardinality, cap: u128) -> Result<(usize, Assignment)> {
    check_cards(inst.n(), card)?;
    check_cap(slice_size(card), cap)?;
    let combos: Vec<Vec<usize>> = (0..card.n()).combinations(card.minus_count()).collect();
    let best = combos
        .par_iter()
        .map(|pos| {
            let a = Assignment::from_minus_positions(card.n(), pos);
            (inst.constraint_count(&a), a)
        })
        .reduce_with(|x, y| match x.0.cmp(&y.0) {
            std::cmp::Ordering::Greater => x,
            std::cmp::Ordering::Less => y,
            std::cmp::Ordering::Equal => {
                if x.1 <= y.1 {
                    x
                } else {
                    y
                }
            }
        })
        .expect("the slice is nonempty");
    Ok(best)
}

fn check_cards(n: usize, card: &GlobalCardinality) -> Result<()> {
    if n != card.n() {
        return input(format!("instance has {n} variables, cardinality constraint has {}", card.n()));
    }
    Ok(())
}

/// Mean number of satisfied constraints over the slice.
pub fn brute_avg(inst: &CspInstance, card: &GlobalCardinality, cap: u128) -> Result<Rational> {
    check_cards(inst.n(), card)?;
    check_cap(slice_size(card), cap)?;
    let total: u64 = slice_points(card.n(), card.minus_count()).map(|a| inst.constraint_count(&a) as u64).sum();
    Ok(Rational::new(BigInt::from(total), BigInt::from(slice_size(card))))
}

/// OPT ≥ AVG + t, by enumeration.
pub fn brute_force_decision(inst: &CspInstance, card: &GlobalCardinality, t: &Rational, cap: u128) -> Result<bool> {
    let (opt, _) = brute_opt(inst, card, cap)?;
    let avg = brute_avg(inst, card, cap)?;
    Ok(Rational::from_integer(BigInt::from(opt)) >= avg + t)
}

/// Maximum of a polynomial over the slice with the smallest maximizer.
pub fn brute_max_poly(f: &MultilinearPoly, card: &GlobalCardinality, cap: u128) -> Result<(Quad, Assignment)> {
    check_cards(f.n(), card)?;
    check_cap(slice_size(card), cap)?;
    let ev = Evaluator::new(f);
    let mut best: Option<(Quad, Assignment)> = None;
    for a in slice_points(card.n(), card.minus_count()) {
        let v = ev.evaluate(&a);
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, a));
        }
    }
    Ok(best.expect("the slice is nonempty"))
}

/// E_{D_p}[f^k] by enumeration.
pub fn brute_moment(f: &MultilinearPoly, card: &GlobalCardinality, k: u32, cap: u128) -> Result<Quad> {
    check_cards(f.n(), card)?;
    if let Basis::Phi(b) = f.basis() {
        if b.p() != card.p() {
            return input("basis p does not match the cardinality constraint");
        }
    }
    check_cap(slice_size(card), cap)?;
    Ok(Evaluator::new(f).moment(slice_points(card.n(), card.minus_count()), k))
}

pub fn brute_variance(f: &MultilinearPoly, card: &GlobalCardinality, cap: u128) -> Result<Quad> {
    let m1 = brute_moment(f, card, 1, cap)?;
    Ok(&brute_moment(f, card, 2, cap)? - &m1.square())
}

/// Product-measure second moment E_{U_p}[f²], weighting each point of
/// {±1}^n by p^{#minus}(1−p)^{#plus}.
pub fn product_second_moment(f: &MultilinearPoly, p: &Rational) -> Result<Quad> {
    let n = f.n();
    if n > 24 {
        return Err(Error::Resource(format!("2^{n} points exceed the product-measure cap")));
    }
    let ev = Evaluator::new(f);
    let one_minus = Rational::one() - p;
    let mut acc = Quad::zero();
    for mask in 0u32..(1u32 << n) {
        let v: Vec<i8> = (0..n).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect();
        let minus = mask.count_ones() as usize;
        let w = num_traits::pow(p.clone(), minus) * num_traits::pow(one_minus.clone(), n - minus);
        acc += &ev.evaluate(&Assignment::new(v)?).square().scale(&w);
    }
    Ok(acc)
}

/// Fourth-moment ratios of f over the slice.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperRatio {
    /// E[f⁴] / E[f²]².
    pub moment_ratio: Quad,
    /// E[f⁴] / ‖f‖⁴ with the norm taken in f's basis.
    pub norm_ratio: Quad,
}

pub fn hyper_ratio(f: &MultilinearPoly, card: &GlobalCardinality, cap: u128) -> Result<HyperRatio> {
    let m2 = brute_moment(f, card, 2, cap)?;
    if m2.is_zero() {
        return Err(Error::Degenerate("E[f²] = 0 on the slice".into()));
    }
    let m4 = brute_moment(f, card, 4, cap)?;
    let norm = f.l2_norm_sq();
    Ok(HyperRatio { moment_ratio: &m4 / &m2.square(), norm_ratio: &m4 / &norm.square() })
}

/// |E[g² | x_i = +1] − E[g² | x_i = −1]| over the slice.
pub fn restriction_gap(g: &MultilinearPoly, card: &GlobalCardinality, i: usize, cap: u128) -> Result<Quad> {
    check_cards(g.n(), card)?;
    if i >= g.n() {
        return input(format!("variable {} out of range", i + 1));
    }
    if g.variables().contains(&i) {
        return input(format!("g depends on variable {}", i + 1));
    }
    check_cap(slice_size(card), cap)?;
    let n = card.n();
    let minus = card.minus_count();
    let ev = Evaluator::new(g);
    let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    let cond = |xi: i8| {
        let m = if xi > 0 { minus } else { minus - 1 };
        let pts = others.iter().copied().combinations(m).map(|pos| {
            let mut a = Assignment::from_minus_positions(n, &pos).values().to_vec();
            a[i] = xi;
            Assignment::new(a).expect("±1 entries")
        });
        ev.moment(pts, 2)
    };
    Ok((&cond(1) - &cond(-1)).abs())
}

/// Square of 3d^{3/2}/(p(1−p))·‖g‖²/√n, i.e. 9d³‖g‖⁴/(p²(1−p)²n).
pub fn restriction_gap_bound_sq(d: usize, p: &Rational, n: usize, norm_sq: &Quad) -> Quad {
    let r = p * (Rational::one() - p);
    let c = Rational::from_integer(BigInt::from(9 * d * d * d)) / (&r * &r * Rational::from_integer(BigInt::from(n)));
    norm_sq.square().scale(&c)
}

/// E_Q[Var_{D_Q}(f_Q)] and Var_{D_p}(f).
///
/// Q is a uniformly random set of |1−2p|·n variables fixed to the majority
/// value; the remaining variables follow the bisection distribution.
pub fn averaged_restricted_variance(f: &MultilinearPoly, card: &GlobalCardinality, cap: u128) -> Result<(Quad, Quad)> {
    check_cards(f.n(), card)?;
    let n = card.n();
    let minus = card.minus_count();
    let plus = n - minus;
    let (fixed_val, q_size) = if plus >= minus { (1i8, plus - minus) } else { (-1i8, minus - plus) };
    let rest = n - q_size;
    let work = binomial(n, q_size).saturating_mul(binomial(rest, rest / 2));
    check_cap(work, cap)?;
    let ev = Evaluator::new(f);
    let mut total = Quad::zero();
    let mut count = 0u64;
    for q in (0..n).combinations(q_size) {
        let free: Vec<usize> = (0..n).filter(|j| !q.contains(j)).collect();
        let pts: Vec<Assignment> = free
            .iter()
            .copied()
            .combinations(rest / 2)
            .map(|pos| {
                let mut v = vec![fixed_val; n];
                for &j in &free {
                    v[j] = 1;
                }
                for &j in &pos {
                    v[j] = -1;
                }
                Assignment::new(v).expect("±1 entries")
            })
            .collect();
        let m1 = ev.moment(pts.iter().cloned(), 1);
        let m2 = ev.moment(pts, 2);
        total += &(&m2 - &m1.square());
        count += 1;
    }
    let avg = total.scale(&Rational::new(BigInt::one(), BigInt::from(count)));
    let var = brute_variance(f, card, cap)?;
    Ok((avg, var))
}

/// Whole-number value of a rational, if it is one and fits.
pub fn rational_to_usize(r: &Rational) -> Option<usize> {
    (r.is_integer() && !r.is_negative()).then(|| r.to_integer().to_usize()).flatten()
}
