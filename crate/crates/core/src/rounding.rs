//! Rewriting f on the slice as f − (Σx_i − (1−2p)n)·h with h chosen so that
//! few variables stay active.
//!
//! Bisection: snap the least-squares projection h_f level by level to
//! multiples of γ/(d!(d−1)!⋯). General p: for each degree level, find the
//! weight-(ℓ−1) correction that makes the most variables inactive, trying
//! every ℓ-subset as the set to clear.

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::cardinal_dist::CardinalDist;
use crate::error::{input, Error, Result};
use crate::poly::{subsets_of_size, Basis, MultilinearPoly, Subset};
use crate::quad::{fmt_rational, Quad, Rational};

#[derive(Clone, Debug)]
pub struct RoundingOutcome {
    /// Degree ≤ d−1, coefficients multiples of `granularity`.
    pub h: MultilinearPoly,
    /// Equals f − base_correction on the slice.
    pub reduced: MultilinearPoly,
    pub base_correction: Rational,
    pub active_set: BTreeSet<usize>,
    /// ‖reduced − constant‖² / ‖residual‖² (bisection only; 0/0 counts as 1).
    pub norm_blowup: Option<Rational>,
    /// ‖residual‖² of the projection that was rounded (bisection only).
    pub residual_norm_sq: Option<Rational>,
    /// γ/Γ_d with Γ_d = d!(d−1)!⋯2!.
    pub granularity: Rational,
    /// Whether the hypothesis of the rounding guarantee held.
    pub precondition_met: bool,
}

fn factorial(k: usize) -> BigInt {
    (1..=k as u64).map(BigInt::from).product()
}

/// Γ_d = d!(d−1)!⋯2!.
pub fn big_gamma(d: usize) -> BigInt {
    (2..=d).map(factorial).product()
}

/// Rounding step for weight w: γ / ((w+1)!(w+2)!⋯d!).
pub fn level_granularity(d: usize, gamma: &Rational, w: usize) -> Rational {
    let denom: BigInt = (w + 1..=d).map(factorial).product();
    gamma / Rational::from_integer(denom)
}

fn is_multiple(x: &Rational, g: &Rational) -> bool {
    (x / g).is_integer()
}

fn rational_coeffs(f: &MultilinearPoly) -> Result<HashMap<Subset, Rational>> {
    f.terms()
        .map(|(s, c)| c.to_rational().map(|r| (s.clone(), r)).ok_or_else(|| Error::Input("irrational χ coefficient".into())))
        .collect()
}

fn from_rational_map(n: usize, m: HashMap<Subset, Rational>) -> MultilinearPoly {
    let mut f = MultilinearPoly::zero(n, Basis::Chi);
    for (s, c) in m {
        f.add_term(s, Quad::from_rational(c));
    }
    f
}

fn check_gamma(f: &MultilinearPoly, gamma: &Rational) -> Result<()> {
    if !f.basis().is_chi() {
        return input("rounding works on χ-basis polynomials");
    }
    if !gamma.is_positive() {
        return input("γ must be positive");
    }
    for (s, c) in f.terms() {
        let r = c.as_rational().ok_or_else(|| Error::Input("irrational χ coefficient".into()))?;
        if !s.is_empty() && !is_multiple(r, gamma) {
            return input(format!("coefficient {} of {s} is not a multiple of γ = {}", fmt_rational(r), fmt_rational(gamma)));
        }
    }
    Ok(())
}

/// Variables occurring in a nonzero term.
pub fn active_variables(f: &MultilinearPoly) -> BTreeSet<usize> {
    f.variables()
}

/// f − f̂(∅) − (Σx_i)·h including the constant produced by x_i·x_i.
fn bisection_reduced(f: &MultilinearPoly, h: &MultilinearPoly) -> Result<MultilinearPoly> {
    let sum = MultilinearPoly::sum_of_variables(f.n(), Basis::Chi);
    f.without_constant().sub(&sum.multiply(h)?)
}

fn nonconst_norm(f: &MultilinearPoly) -> Rational {
    f.without_constant().l2_norm_sq().to_rational().expect("rational polynomial")
}

/// Bisection rounding with the hypothesis ‖f − (Σx)h_f‖² ≤ √n enforced.
pub fn round_bisection(f: &MultilinearPoly, h_f: &MultilinearPoly, gamma: &Rational) -> Result<RoundingOutcome> {
    let out = round_bisection_unchecked(f, h_f, gamma)?;
    if !out.precondition_met {
        let rn = out.residual_norm_sq.clone().unwrap_or_default();
        return Err(Error::Precondition(format!(
            "projection residual ‖·‖² = {} exceeds √n (n = {})",
            fmt_rational(&rn),
            f.n()
        )));
    }
    Ok(out)
}

/// Bisection rounding without enforcing the residual hypothesis; the
/// outcome records whether it held.
pub fn round_bisection_unchecked(f: &MultilinearPoly, h_f: &MultilinearPoly, gamma: &Rational) -> Result<RoundingOutcome> {
    check_gamma(f, gamma)?;
    if !h_f.basis().is_chi() || h_f.n() != f.n() {
        return input("h_f must be a χ-basis polynomial on the same variables");
    }
    let n = f.n();
    let d = f.degree();
    if d > 0 && h_f.degree() >= d {
        return input("h_f must have degree below deg f");
    }
    let residual = bisection_reduced(f, h_f)?;
    let residual_norm_sq = nonconst_norm(&residual);
    let precondition_met = &residual_norm_sq * &residual_norm_sq <= Rational::from_integer(BigInt::from(n));

    let mut h = rational_coeffs(h_f)?;
    if d > 0 {
        for w in (0..d).rev() {
            let g = level_granularity(d, gamma, w);
            for (s, c) in h.iter_mut() {
                if s.len() == w {
                    *c = (&*c / &g).round() * &g;
                }
            }
        }
    }
    h.retain(|_, c| !c.is_zero());
    let h = from_rational_map(n, h);
    let reduced = bisection_reduced(f, &h)?;
    let reduced_norm = nonconst_norm(&reduced);
    let norm_blowup = if residual_norm_sq.is_zero() {
        reduced_norm.is_zero().then(Rational::one)
    } else {
        Some(&reduced_norm / &residual_norm_sq)
    };
    Ok(RoundingOutcome {
        active_set: active_variables(&reduced),
        h,
        reduced,
        base_correction: f.constant_term().to_rational().expect("checked rational"),
        norm_blowup,
        residual_norm_sq: Some(residual_norm_sq),
        granularity: gamma / Rational::from_integer(big_gamma(d.max(1))),
        precondition_met,
    })
}

/// β_{ℓ−i,i} for i = 1..ℓ−1: β_{ℓ−1,1} = (ℓ−2)!, β_{ℓ−i−1,i+1} = −i/(ℓ−i−1)·β_{ℓ−i,i}.
fn betas(l: usize) -> Vec<Rational> {
    let mut b = vec![Rational::zero()];
    if l >= 2 {
        b.push(Rational::from_integer(factorial(l - 2)));
        for i in 1..l - 1 {
            let next = &b[i] * Rational::new(BigInt::from(-(i as i64)), BigInt::from(l - i - 1));
            b.push(next);
        }
    }
    b
}

/// The weight-(ℓ−1) polynomial h that would make every variable of `s`
/// inactive in the degree-ℓ part of g − (Σx_i)·h, where `top` holds the
/// degree-ℓ coefficients of g and |s| = ℓ.
///
/// Returns `None` when n < 2ℓ − 1, where the choice is not determined.
pub fn reconstruct_level(top: &HashMap<Subset, Rational>, n: usize, s: &Subset) -> Option<HashMap<Subset, Rational>> {
    let l = s.len();
    if l == 0 || n + 1 < 2 * l {
        return None;
    }
    let beta = betas(l);
    let fact = Rational::from_integer(factorial(l - 1));
    let sign = if l.is_multiple_of(2) { Rational::one() } else { -Rational::one() };
    let get = |t: &Subset| top.get(t).cloned().unwrap_or_default();
    let mut h = HashMap::new();
    for u in subsets_of_size(n, l - 1) {
        let s_prime = if u.intersection_len(s) == 0 {
            s.clone()
        } else {
            let mut sp = s.difference(&u);
            let mut j = 0;
            while sp.len() < l {
                if !u.contains(j) && !s.contains(j) {
                    sp = sp.with(j);
                }
                j += 1;
            }
            sp
        };
        let mut total = Rational::zero();
        for s2 in s_prime.sub_subsets(l - 1) {
            for (i, b) in beta.iter().enumerate().skip(1) {
                let mut r = Rational::zero();
                for t1 in u.sub_subsets(l - i) {
                    for t2 in s2.sub_subsets(i) {
                        r += get(&t1.union(&t2));
                    }
                }
                total += b * r;
            }
        }
        let val = (total / &fact - &sign * get(&s_prime)) / Rational::from_integer(BigInt::from(l));
        if !val.is_zero() {
            h.insert(u, val);
        }
    }
    Some(h)
}

/// Full h making the variables of `s` inactive in f − (Σx_i − shift)·h,
/// determined level by level from degree |s| down to 1. `s` must have
/// exactly deg f elements.
pub fn reconstruct_h(f: &MultilinearPoly, s: &Subset, shift: &Rational) -> Result<MultilinearPoly> {
    if !f.basis().is_chi() {
        return input("reconstruction works on χ-basis polynomials");
    }
    let d = f.degree();
    if s.len() != d {
        return input(format!("need a {d}-subset, got {} elements", s.len()));
    }
    let n = f.n();
    if s.max().is_some_and(|m| m >= n) {
        return input("subset index out of range");
    }
    let shifted = shifted_sum(n, shift);
    let mut g = f.clone();
    let mut h = MultilinearPoly::zero(n, Basis::Chi);
    for l in (1..=d).rev() {
        let top = rational_coeffs(&g.homogeneous_part(l))?;
        let sl = Subset::new(s.iter().take(l))?;
        let hl = reconstruct_level(&top, n, &sl)
            .ok_or_else(|| Error::Input(format!("n = {n} too small to reconstruct level {l}")))?;
        let hl = from_rational_map(n, hl);
        g = g.sub(&shifted.multiply(&hl)?)?;
        h = h.add(&hl)?;
    }
    Ok(h)
}

/// Σx_i − shift.
fn shifted_sum(n: usize, shift: &Rational) -> MultilinearPoly {
    let mut s = MultilinearPoly::sum_of_variables(n, Basis::Chi);
    s.add_term(Subset::empty(), Quad::from_rational(-shift));
    s
}

/// Variables that stay active in the degree-ℓ part after subtracting
/// (Σx)·h for homogeneous h of weight ℓ−1.
fn active_after(top: &HashMap<Subset, Rational>, h: &HashMap<Subset, Rational>, n: usize) -> usize {
    let mut m: HashMap<Subset, Rational> = top.clone();
    for (u, c) in h {
        for j in 0..n {
            if !u.contains(j) {
                let e = m.entry(u.with(j)).or_default();
                *e -= c;
            }
        }
    }
    let vars: BTreeSet<usize> = m.iter().filter(|(_, c)| !c.is_zero()).flat_map(|(s, _)| s.iter()).collect();
    vars.len()
}

/// Counters from the level scan.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScanReport {
    pub levels_scanned: usize,
    pub candidates_tried: usize,
}

/// General-p rounding; enforces Var_{D_p}(f) < √n.
pub fn round_global(f: &MultilinearPoly, dist: &CardinalDist, gamma: &Rational) -> Result<RoundingOutcome> {
    let var = dist.variance(f)?.to_rational().ok_or_else(|| Error::Input("irrational variance".into()))?;
    if &var * &var >= Rational::from_integer(BigInt::from(dist.n())) {
        return Err(Error::Precondition(format!("variance {} is not below √n (n = {})", fmt_rational(&var), dist.n())));
    }
    round_global_unchecked(f, dist, gamma).map(|(o, _)| o)
}

/// General-p rounding without the variance hypothesis.
pub fn round_global_unchecked(f: &MultilinearPoly, dist: &CardinalDist, gamma: &Rational) -> Result<(RoundingOutcome, ScanReport)> {
    check_gamma(f, gamma)?;
    let n = dist.n();
    if f.n() != n {
        return input("polynomial and distribution disagree on n");
    }
    let var = dist.variance(f)?.to_rational().ok_or_else(|| Error::Input("irrational variance".into()))?;
    let precondition_met = &var * &var < Rational::from_integer(BigInt::from(n));
    let shift = Rational::from_integer(BigInt::from(dist.cardinality().target_sum()));
    let shifted = shifted_sum(n, &shift);
    let d = f.degree();
    let mut g = f.clone();
    let mut h = MultilinearPoly::zero(n, Basis::Chi);
    let mut report = ScanReport::default();
    for l in (1..=d).rev() {
        let top = rational_coeffs(&g.homogeneous_part(l))?;
        if top.is_empty() {
            continue;
        }
        report.levels_scanned += 1;
        let baseline = top.keys().flat_map(|s| s.iter()).collect::<BTreeSet<_>>().len();
        if baseline == 0 {
            continue;
        }
        let candidates: Vec<Subset> = subsets_of_size(n, l).collect();
        report.candidates_tried += candidates.len();
        let best = candidates
            .par_iter()
            .enumerate()
            .filter_map(|(idx, s)| {
                let hl = reconstruct_level(&top, n, s)?;
                Some((active_after(&top, &hl, n), idx, hl))
            })
            .min_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((active, _, hl)) = best {
            if active < baseline {
                let hl = from_rational_map(n, hl);
                g = g.sub(&shifted.multiply(&hl)?)?;
                h = h.add(&hl)?;
            }
        }
    }
    let outcome = RoundingOutcome {
        active_set: active_variables(&g),
        h,
        reduced: g,
        base_correction: Rational::zero(),
        norm_blowup: None,
        residual_norm_sq: None,
        granularity: gamma / Rational::from_integer(big_gamma(d.max(1))),
        precondition_met,
    };
    Ok((outcome, report))
}

/// C'_{p,d} = 20d²·7^d·(d!)^{2d²}/(2p)^{4d}.
pub fn global_kernel_constant(d: usize, p: &Rational) -> Rational {
    let d_fact = factorial(d);
    let num = BigInt::from(20 * d * d) * num_traits::pow(BigInt::from(7), d) * num_traits::pow(d_fact, 2 * d * d);
    let two_p = p + p;
    Rational::from_integer(num) / num_traits::pow(two_p, 4 * d)
}

/// |active| ≤ d·‖reduced − const‖²·(Γ_d/γ)²: every nonzero coefficient is
/// at least γ/Γ_d in size and each term carries at most d variables.
pub fn bisection_kernel_bound(d: usize, reduced_norm_sq: &Rational, gamma: &Rational) -> Rational {
    let g = Rational::from_integer(big_gamma(d.max(1))) / gamma;
    Rational::from_integer(BigInt::from(d)) * reduced_norm_sq * &g * &g
}

/// Checks that every coefficient of h is a multiple of `granularity`.
pub fn is_integral(h: &MultilinearPoly, granularity: &Rational) -> bool {
    h.terms().all(|(_, c)| c.as_rational().is_some_and(|r| is_multiple(r, granularity)))
}
