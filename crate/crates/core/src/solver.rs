//! The decision procedure: is OPT ≥ AVG + t on the slice?
//!
//! Large variance certifies "yes" through the fourth-moment bound. Small
//! variance rewrites f so that only a few variables matter and enumerates
//! those exactly.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::cardinal_dist::{is_half, CardinalDist};
use crate::config::Config;
use crate::csp_model::{CspInstance, GlobalCardinality};
use crate::error::{input, Error, Result};
use crate::oracle::Evaluator;
use crate::poly::{Assignment, MultilinearPoly};
use crate::quad::{fmt_rational, rational_to_f64, Quad, Rational};
use crate::rounding::{self, RoundingOutcome};
use crate::spectra::project_null;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Answer {
    CertifiedAbove,
    SolvedExactly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    LargeVariance,
    SmallVariance,
    /// t ≤ 0: OPT ≥ AVG always holds.
    Trivial,
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Answer::CertifiedAbove => "CertifiedAbove",
            Answer::SolvedExactly => "SolvedExactly",
        })
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::LargeVariance => "LargeVariance",
            Branch::SmallVariance => "SmallVariance",
            Branch::Trivial => "Trivial",
        })
    }
}

/// The small-variance rewrite of f and what it leaves to enumerate.
#[derive(Clone, Debug)]
pub struct Kernelization {
    pub outcome: RoundingOutcome,
    /// Provable bound on |active_set| for this instance.
    pub kernel_bound: Rational,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub answer: Answer,
    pub branch: Branch,
    /// Whether OPT ≥ AVG + t.
    pub decision: bool,
    pub t: i64,
    pub opt: Option<Rational>,
    pub witness: Option<Assignment>,
    pub kernel: Option<BTreeSet<usize>>,
    pub kernel_bound: Option<Rational>,
    pub norm_blowup: Option<Rational>,
    pub avg: Rational,
    pub variance: Rational,
    pub threshold: Quad,
    pub warnings: Vec<String>,
}

/// Fourth-moment constant b with E[g⁴] ≤ b·E[g²]² for degree-d g of
/// mean zero: 12d·9^{2d} at p = 1/2, otherwise
/// 12·d^{3/2}·(256·(((1−p)/p)² + (p/(1−p))²)²)^d.
pub fn hypercontractive_constant(d: usize, p: &Rational) -> Quad {
    let d_big = BigInt::from(d);
    if is_half(p) {
        return Quad::from_rational(Rational::from_integer(BigInt::from(12) * &d_big * num_traits::pow(BigInt::from(9), 2 * d)));
    }
    let one = Rational::one();
    let a = (&one - p) / p;
    let b = p / (&one - p);
    let s = &a * &a + &b * &b;
    let c = Rational::from_integer(BigInt::from(256)) * &s * &s;
    let base = Rational::from_integer(BigInt::from(12) * &d_big) * num_traits::pow(c, d);
    &Quad::from_rational(base) * &Quad::sqrt_of(&Rational::from_integer(d_big))
}

/// 4·b·t²: under Var ≥ 4bt² the fourth-moment method gives Pr[g ≥ t] > 0.
pub fn certification_threshold(d: usize, p: &Rational, t: i64) -> Quad {
    let t2 = Rational::from_integer(BigInt::from(t) * BigInt::from(t) * 4);
    hypercontractive_constant(d.max(1), p).scale(&t2)
}

/// Kernel-size constant C_d = 24d²·7^d·9^d·4^d·Γ_d² for the bisection
/// path (kernel ≤ C_d·t² whenever Var < 4bt²).
pub fn bisection_kernel_constant(d: usize) -> BigInt {
    let g = rounding::big_gamma(d.max(1));
    BigInt::from(24 * d * d) * num_traits::pow(BigInt::from(7 * 9 * 4), d) * &g * &g
}

/// AVG = E_{D_p}[f_I].
pub fn average(inst: &CspInstance, card: &GlobalCardinality) -> Result<Rational> {
    let dist = CardinalDist::from_cardinality(card)?;
    rational(dist.expectation(&inst.to_polynomial())?)
}

fn rational(q: Quad) -> Result<Rational> {
    q.to_rational().ok_or_else(|| Error::Numerical("expected a rational value".into()))
}

fn check_inputs(n: usize, card: &GlobalCardinality, config: &Config) -> Result<CardinalDist> {
    if n != card.n() {
        return input(format!("instance has {n} variables, cardinality constraint has {}", card.n()));
    }
    config.check_p(card.p())?;
    CardinalDist::from_cardinality(card)
}

/// Rewrites a χ-basis f so that its slice values depend on few variables.
pub fn kernelize(f: &MultilinearPoly, card: &GlobalCardinality, gamma: &Rational, config: &Config) -> Result<Kernelization> {
    let dist = check_inputs(f.n(), card, config)?;
    let d = f.degree();
    let mut warnings = Vec::new();
    let n_big = Rational::from_integer(BigInt::from(f.n()));
    let (outcome, kernel_bound) = if is_half(card.p()) {
        let proj = project_null(f, &dist, config.projection_exact_cap, config.float_tol)?;
        if !proj.exact {
            warnings.push("projection computed in floating point".to_string());
        }
        let out = rounding::round_bisection_unchecked(f, &proj.h, gamma)?;
        if !out.precondition_met {
            warnings.push("projection residual exceeds √n; rounding guarantee does not apply".to_string());
        }
        let norm = out.reduced.without_constant().l2_norm_sq();
        let bound = rounding::bisection_kernel_bound(d, &rational(norm)?, gamma);
        (out, bound)
    } else {
        let (out, _) = rounding::round_global_unchecked(f, &dist, gamma)?;
        let var = rational(dist.variance(f)?)?;
        if &var * &var >= n_big {
            warnings.push("variance is not below √n; rounding guarantee does not apply".to_string());
        }
        let bound = rounding::global_kernel_constant(d.max(1), card.p()) * var / (gamma * gamma);
        (out, bound)
    };
    if Rational::from_integer(BigInt::from(outcome.active_set.len())) > kernel_bound && !outcome.active_set.is_empty() {
        warnings.push(format!("kernel of {} variables exceeds the bound {}", outcome.active_set.len(), fmt_rational(&kernel_bound)));
    }
    Ok(Kernelization { outcome, kernel_bound, warnings })
}

/// Exact maximum of `reduced` (which may only involve variables of `kernel`)
/// over kernel assignments extendable to a slice point, plus
/// `base_correction`. Returns the value and the lexicographically smallest
/// full slice point attaining it (−1 before +1, free minus ones placed on
/// the smallest non-kernel indices).
pub fn enumerate_kernel(
    reduced: &MultilinearPoly,
    kernel: &BTreeSet<usize>,
    card: &GlobalCardinality,
    base_correction: &Rational,
    cap: usize,
) -> Result<(Rational, Assignment)> {
    let n = card.n();
    let vars: Vec<usize> = kernel.iter().copied().collect();
    let k = vars.len();
    if k > cap || k > 64 {
        return Err(Error::KernelTooLarge { kernel: vars, cap });
    }
    if !reduced.variables().is_subset(kernel) {
        return input("reduced polynomial involves variables outside the kernel");
    }
    let pos = |v: usize| vars.binary_search(&v).expect("kernel variable");

    // scale to integers
    let mut denom = BigInt::one();
    let mut raw = Vec::new();
    let mut constant = Rational::zero();
    for (s, c) in reduced.terms() {
        let c = c.as_rational().ok_or_else(|| Error::Input("reduced polynomial must be rational".into()))?.clone();
        if s.is_empty() {
            constant = c;
            continue;
        }
        denom = denom.lcm(c.denom());
        raw.push((s.iter().map(pos).collect::<Vec<_>>(), c));
    }
    let mut by_depth: Vec<Vec<(u64, i128)>> = vec![Vec::new(); k];
    let mut abs_total = 0i128;
    for (idx, c) in &raw {
        let scaled = (c * Rational::from_integer(denom.clone())).to_integer();
        let v = scaled.to_i128().ok_or_else(|| Error::Numerical("kernel coefficients too large".into()))?;
        let mask = idx.iter().fold(0u64, |m, &i| m | (1 << i));
        let last = *idx.iter().max().expect("nonempty term");
        by_depth[last].push((mask, v));
        abs_total = abs_total.checked_add(v.abs()).ok_or_else(|| Error::Numerical("kernel coefficients too large".into()))?;
    }
    // remaining[j] = Σ|c| over terms decided at depth ≥ j
    let mut remaining = vec![0i128; k + 1];
    for j in (0..k).rev() {
        remaining[j] = remaining[j + 1] + by_depth[j].iter().map(|(_, v)| v.abs()).sum::<i128>();
    }
    let minus_budget = card.minus_count();
    let plus_budget = card.plus_count();
    let search = Search { by_depth: &by_depth, remaining: &remaining, k, minus_budget, plus_budget };

    let split = k.min(6);
    let best = (0u64..1 << split)
        .into_par_iter()
        .filter_map(|prefix| {
            // bit i of the prefix is variable i; lex order puts −1 (bit set) first
            let mut minus = 0u64;
            for i in 0..split {
                if prefix >> (split - 1 - i) & 1 == 0 {
                    minus |= 1 << i;
                }
            }
            search.run(minus, split)
        })
        .reduce_with(|a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    let Some((value, _, minus)) = best else {
        return Err(Error::Input("no kernel assignment fits the cardinality budget".into()));
    };
    let mut values = vec![1i8; n];
    let mut used = 0;
    for (i, &v) in vars.iter().enumerate() {
        if minus >> i & 1 == 1 {
            values[v] = -1;
            used += 1;
        }
    }
    for v in (0..n).filter(|v| !kernel.contains(v)).take(minus_budget - used) {
        values[v] = -1;
    }
    let opt = base_correction + constant + Rational::new(BigInt::from(value), denom);
    Ok((opt, Assignment::new(values)?))
}

struct Search<'a> {
    by_depth: &'a [Vec<(u64, i128)>],
    remaining: &'a [i128],
    k: usize,
    minus_budget: usize,
    plus_budget: usize,
}

impl Search<'_> {
    fn partial(&self, minus: u64, upto: usize) -> i128 {
        self.by_depth[..upto].iter().flatten().map(|&(m, v)| if (m & minus).count_ones() % 2 == 1 { -v } else { v }).sum()
    }

    /// Best (value, lex key, minus mask) among completions of the first
    /// `depth` assignments in `minus`.
    fn run(&self, minus: u64, depth: usize) -> Option<(i128, Vec<i8>, u64)> {
        let m = (minus & mask_below(depth)).count_ones() as usize;
        if m > self.minus_budget || depth - m > self.plus_budget {
            return None;
        }
        let mut best: Option<(i128, u64)> = None;
        self.dfs(minus & mask_below(depth), depth, self.partial(minus, depth), m, &mut best);
        best.map(|(v, mask)| (v, key(mask, self.k), mask))
    }

    fn dfs(&self, minus: u64, depth: usize, value: i128, m: usize, best: &mut Option<(i128, u64)>) {
        if let Some((b, _)) = best {
            if value + self.remaining[depth] <= *b {
                return;
            }
        }
        if depth == self.k {
            *best = Some((value, minus));
            return;
        }
        let plus_used = depth - m;
        for bit in [1u64, 0] {
            let (nm, np) = if bit == 1 { (m + 1, plus_used) } else { (m, plus_used + 1) };
            if nm > self.minus_budget || np > self.plus_budget {
                continue;
            }
            let next = minus | bit << depth;
            let delta: i128 =
                self.by_depth[depth].iter().map(|&(mk, v)| if (mk & next).count_ones() % 2 == 1 { -v } else { v }).sum();
            self.dfs(next, depth + 1, value + delta, nm, best);
        }
    }
}

fn mask_below(depth: usize) -> u64 {
    if depth >= 64 {
        u64::MAX
    } else {
        (1u64 << depth) - 1
    }
}

fn key(mask: u64, k: usize) -> Vec<i8> {
    (0..k).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect()
}

/// Decides OPT ≥ AVG + t for a CSP instance.
pub fn decide(inst: &CspInstance, card: &GlobalCardinality, t: i64, config: &Config) -> Result<Verdict> {
    let f = inst.to_polynomial();
    let verdict = decide_polynomial(&f, card, t, &inst.gamma(), config)?;
    if let (Some(w), Some(opt)) = (&verdict.witness, &verdict.opt) {
        let count = Rational::from_integer(BigInt::from(inst.constraint_count(w)));
        if count != *opt || !card.is_satisfied(w) {
            return Err(Error::Numerical(format!(
                "witness satisfies {} constraints, kernel search reported {}",
                fmt_rational(&count),
                fmt_rational(opt)
            )));
        }
    }
    Ok(verdict)
}

/// Decides max over the slice of f ≥ E[f] + t for a χ-basis f whose
/// nonconstant coefficients are multiples of `gamma`.
pub fn decide_polynomial(f: &MultilinearPoly, card: &GlobalCardinality, t: i64, gamma: &Rational, config: &Config) -> Result<Verdict> {
    if !f.basis().is_chi() {
        return input("the solver works on χ-basis polynomials");
    }
    let dist = check_inputs(f.n(), card, config)?;
    let avg = rational(dist.expectation(f)?)?;
    let variance = rational(dist.variance(f)?)?;
    let d = f.degree();
    let mut verdict = Verdict {
        answer: Answer::CertifiedAbove,
        branch: Branch::Trivial,
        decision: true,
        t,
        opt: None,
        witness: None,
        kernel: None,
        kernel_bound: None,
        norm_blowup: None,
        avg,
        variance,
        threshold: Quad::zero(),
        warnings: Vec::new(),
    };
    if t <= 0 {
        return Ok(verdict);
    }
    let t_big = BigInt::from(t);
    if num_traits::pow(t_big, 4) * 4 > BigInt::from(f.n()) {
        verdict.warnings.push("t² exceeds √n/2; small-variance guarantees are weak".to_string());
    }
    let threshold = certification_threshold(d, card.p(), t);
    verdict.threshold = threshold.clone();
    if Quad::from_rational(verdict.variance.clone()) >= threshold {
        verdict.branch = Branch::LargeVariance;
        return Ok(verdict);
    }
    verdict.branch = Branch::SmallVariance;
    verdict.answer = Answer::SolvedExactly;
    let kz = kernelize(f, card, gamma, config)?;
    verdict.warnings.extend(kz.warnings);
    let out = kz.outcome;
    verdict.kernel_bound = Some(kz.kernel_bound);
    verdict.norm_blowup = out.norm_blowup.clone();
    verdict.kernel = Some(out.active_set.clone());
    let (opt, witness) = enumerate_kernel(&out.reduced, &out.active_set, card, &out.base_correction, config.enum_cap)?;
    let check = Evaluator::new(f).evaluate(&witness);
    if check != Quad::from_rational(opt.clone()) {
        return Err(Error::Numerical(format!("kernel value {} differs from f at the witness ({check})", fmt_rational(&opt))));
    }
    verdict.decision = opt >= &verdict.avg + Rational::from_integer(BigInt::from(t));
    verdict.opt = Some(opt);
    verdict.witness = Some(witness);
    Ok(verdict)
}

/// `{"exact": "a/b", "float": x}`.
pub fn rational_json(r: &Rational) -> Value {
    json!({ "exact": fmt_rational(r), "float": rational_to_f64(r) })
}

pub fn quad_json(q: &Quad) -> Value {
    json!({ "exact": q.to_exact_string(), "float": q.to_f64() })
}

pub fn assignment_json(a: &Assignment) -> Value {
    Value::String(a.values().iter().map(|&v| if v < 0 { '-' } else { '+' }).collect())
}

pub fn set_json(s: &BTreeSet<usize>) -> Value {
    json!(s.iter().map(|i| i + 1).collect::<Vec<_>>())
}

impl Verdict {
    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "schema": 1,
            "answer": if self.decision { "yes" } else { "no" },
            "kind": self.answer.to_string(),
            "branch": self.branch.to_string(),
            "t": self.t,
            "avg": rational_json(&self.avg),
            "variance": rational_json(&self.variance),
            "threshold": quad_json(&self.threshold),
            "warnings": self.warnings,
        });
        let obj = v.as_object_mut().expect("object");
        if let Some(opt) = &self.opt {
            obj.insert("opt".into(), rational_json(opt));
        }
        if let Some(w) = &self.witness {
            obj.insert("witness".into(), assignment_json(w));
        }
        if let Some(k) = &self.kernel {
            obj.insert("kernel".into(), set_json(k));
            obj.insert("kernel_size".into(), json!(k.len()));
        }
        if let Some(b) = &self.kernel_bound {
            obj.insert("kernel_bound".into(), rational_json(b));
        }
        if let Some(b) = &self.norm_blowup {
            obj.insert("norm_blowup".into(), rational_json(b));
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{Basis, Subset};
    use crate::quad::{rat, rat_int};

    fn complete(n: usize) -> CspInstance {
        let edges: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        CspInstance::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn threshold_values() {
        assert_eq!(certification_threshold(2, &rat(1, 2), 1), Quad::from_int(629_856));
        assert_eq!(certification_threshold(2, &rat(1, 2), 2), Quad::from_int(4 * 629_856));
        assert!(certification_threshold(2, &rat(1, 3), 1) > certification_threshold(2, &rat(1, 2), 1));
    }

    #[test]
    fn k4_is_no() {
        let inst = complete(4);
        let card = GlobalCardinality::bisection(4).unwrap();
        let v = decide(&inst, &card, 1, &Config::default()).unwrap();
        assert_eq!(v.avg, rat_int(4));
        assert_eq!(v.answer, Answer::SolvedExactly);
        assert_eq!(v.opt, Some(rat_int(4)));
        assert!(!v.decision);
    }

    #[test]
    fn star_is_no() {
        let inst = CspInstance::from_edges(6, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]).unwrap();
        let card = GlobalCardinality::bisection(6).unwrap();
        let v = decide(&inst, &card, 1, &Config::default()).unwrap();
        assert_eq!(v.variance, rat_int(0));
        assert_eq!(v.branch, Branch::SmallVariance);
        assert_eq!(v.opt, Some(rat_int(3)));
        assert!(!v.decision);
    }

    #[test]
    fn path_is_yes() {
        let inst = CspInstance::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let card = GlobalCardinality::bisection(4).unwrap();
        let v = decide(&inst, &card, 1, &Config::default()).unwrap();
        assert_eq!(v.avg, rat_int(2));
        assert_eq!(v.opt, Some(rat_int(3)));
        assert!(v.decision);
        assert_eq!(v.witness.unwrap().values(), &[-1, 1, -1, 1]);
    }

    #[test]
    fn kernel_enumeration_small() {
        let card = GlobalCardinality::bisection(6).unwrap();
        let f = MultilinearPoly::monomial(6, Basis::Chi, Subset::new([0, 1]).unwrap(), Quad::one()).unwrap();
        let (opt, a) = enumerate_kernel(&f, &[0, 1].into_iter().collect(), &card, &rat_int(0), 40).unwrap();
        assert_eq!(opt, rat_int(1));
        assert_eq!(a.get(0), a.get(1));
        assert!(card.is_satisfied(&a));
        let (opt, a) = enumerate_kernel(&MultilinearPoly::zero(6, Basis::Chi), &BTreeSet::new(), &card, &rat(5, 2), 40).unwrap();
        assert_eq!(opt, rat(5, 2));
        assert!(card.is_satisfied(&a));
    }

    #[test]
    fn kernel_cap() {
        let card = GlobalCardinality::bisection(6).unwrap();
        let k: BTreeSet<usize> = (0..6).collect();
        let f = MultilinearPoly::sum_of_variables(6, Basis::Chi);
        assert!(matches!(enumerate_kernel(&f, &k, &card, &rat_int(0), 3), Err(Error::KernelTooLarge { .. })));
    }

    #[test]
    fn t_nonpositive() {
        let inst = complete(4);
        let card = GlobalCardinality::bisection(4).unwrap();
        let v = decide(&inst, &card, 0, &Config::default()).unwrap();
        assert!(v.decision);
        assert_eq!(v.branch, Branch::Trivial);
    }
}
