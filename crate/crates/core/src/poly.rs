//! Multilinear polynomials over {±1}^n in the standard basis χ_S = Π x_i and
//! the p-biased basis φ_S = Π φ_i.
//!
//! Variables are 0-based internally; parsing and rendering use 1-based
//! indices.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use itertools::Itertools;
use num_traits::{One, Zero};

use crate::error::{input, Error, Result};
use crate::quad::{fmt_rational, parse_rational, rat_int, Quad, Rational};

/// A set of variable indices, stored sorted and strictly increasing.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Subset(Vec<u32>);

impl Subset {
    pub fn empty() -> Self {
        Subset(Vec::new())
    }

    pub fn singleton(i: usize) -> Self {
        Subset(vec![i as u32])
    }

    /// Builds a subset from arbitrary indices; rejects duplicates.
    pub fn new<I: IntoIterator<Item = usize>>(items: I) -> Result<Self> {
        let mut v: Vec<u32> = items.into_iter().map(|i| i as u32).collect();
        v.sort_unstable();
        if v.windows(2).any(|w| w[0] == w[1]) {
            return input("repeated variable in subset");
        }
        Ok(Subset(v))
    }

    pub(crate) fn from_sorted(v: Vec<u32>) -> Self {
        debug_assert!(v.windows(2).all(|w| w[0] < w[1]));
        Subset(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|&i| i as usize)
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn max(&self) -> Option<usize> {
        self.0.last().map(|&i| i as usize)
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&(i as u32)).is_ok()
    }

    pub fn is_subset_of(&self, other: &Subset) -> bool {
        self.0.iter().all(|i| other.0.binary_search(i).is_ok())
    }

    pub fn intersection_len(&self, other: &Subset) -> usize {
        let (mut i, mut j, mut c) = (0, 0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    c += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        c
    }

    fn merge(&self, other: &Subset, keep_common: bool, keep_only: bool) -> Subset {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i] < b[j]) {
                if keep_only {
                    out.push(a[i]);
                }
                i += 1;
            } else if i == a.len() || b[j] < a[i] {
                if keep_only {
                    out.push(b[j]);
                }
                j += 1;
            } else {
                if keep_common {
                    out.push(a[i]);
                }
                i += 1;
                j += 1;
            }
        }
        Subset(out)
    }

    pub fn symmetric_difference(&self, other: &Subset) -> Subset {
        self.merge(other, false, true)
    }

    pub fn intersection(&self, other: &Subset) -> Subset {
        self.merge(other, true, false)
    }

    pub fn union(&self, other: &Subset) -> Subset {
        self.merge(other, true, true)
    }

    pub fn difference(&self, other: &Subset) -> Subset {
        Subset(self.0.iter().copied().filter(|i| other.0.binary_search(i).is_err()).collect())
    }

    pub fn with(&self, i: usize) -> Subset {
        let mut v = self.0.clone();
        if let Err(pos) = v.binary_search(&(i as u32)) {
            v.insert(pos, i as u32);
        }
        Subset(v)
    }

    pub fn without(&self, i: usize) -> Subset {
        Subset(self.0.iter().copied().filter(|&j| j as usize != i).collect())
    }

    /// All subsets of `self` with exactly `k` elements, in lexicographic order.
    pub fn sub_subsets(&self, k: usize) -> impl Iterator<Item = Subset> + '_ {
        self.0.iter().copied().combinations(k).map(Subset)
    }

    /// 1-based rendering, e.g. `{1,3}`.
    pub fn to_one_based(&self) -> Vec<usize> {
        self.iter().map(|i| i + 1).collect()
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.to_one_based().iter().join(","))
    }
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets_of_size(n: usize, k: usize) -> impl Iterator<Item = Subset> {
    (0..n as u32).combinations(k).map(Subset)
}

/// All subsets of `0..n` of size at most `d`, ordered by size then
/// lexicographically.
pub fn subsets_up_to(n: usize, d: usize) -> Vec<Subset> {
    (0..=d.min(n)).flat_map(|k| subsets_of_size(n, k)).collect()
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// `C(n, ≤ d)`.
pub fn binomial_up_to(n: usize, d: usize) -> u128 {
    (0..=d).map(|k| binomial(n, k)).sum()
}

/// Parameters of the p-biased basis.
#[derive(Debug)]
pub struct Bias {
    p: Rational,
    sqrt_r: Quad,
    q: Quad,
    phi_plus: Quad,
    phi_minus: Quad,
}

impl Bias {
    pub fn new(p: Rational) -> Result<Arc<Bias>> {
        if p <= Rational::zero() || p >= Rational::one() {
            return input(format!("p = {} must lie strictly between 0 and 1", fmt_rational(&p)));
        }
        let one = Rational::one();
        let r = &p * (&one - &p);
        let sqrt_r = Quad::sqrt_of(&r);
        let inv = sqrt_r.inv();
        let two_p_minus_1 = Quad::from_rational(&p + &p - &one);
        let q = &two_p_minus_1 * &inv;
        let phi_plus = inv.scale(&p);
        let phi_minus = inv.scale(&(&p - &one));
        Ok(Arc::new(Bias { p, sqrt_r, q, phi_plus, phi_minus }))
    }

    pub fn p(&self) -> &Rational {
        &self.p
    }

    /// √(p(1−p)).
    pub fn sqrt_r(&self) -> &Quad {
        &self.sqrt_r
    }

    /// q = (2p−1)/√(p(1−p)), so that φ_i² = qφ_i + 1.
    pub fn q(&self) -> &Quad {
        &self.q
    }

    /// φ_i evaluated at x_i = v.
    pub fn phi_value(&self, v: i8) -> &Quad {
        if v > 0 {
            &self.phi_plus
        } else {
            &self.phi_minus
        }
    }
}

/// Which family of characters the coefficients refer to.
#[derive(Clone, Debug)]
pub enum Basis {
    Chi,
    Phi(Arc<Bias>),
}

impl Basis {
    pub fn phi(p: Rational) -> Result<Basis> {
        Ok(Basis::Phi(Bias::new(p)?))
    }

    pub fn is_chi(&self) -> bool {
        matches!(self, Basis::Chi)
    }

    pub fn bias(&self) -> Option<&Arc<Bias>> {
        match self {
            Basis::Chi => None,
            Basis::Phi(b) => Some(b),
        }
    }

    fn value(&self, v: i8) -> Quad {
        match self {
            Basis::Chi => Quad::from_int(v as i64),
            Basis::Phi(b) => b.phi_value(v).clone(),
        }
    }
}

impl PartialEq for Basis {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Basis::Chi, Basis::Chi) => true,
            (Basis::Phi(a), Basis::Phi(b)) => a.p == b.p,
            _ => false,
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Chi => f.write_str("chi"),
            Basis::Phi(b) => write!(f, "phi(p={})", fmt_rational(&b.p)),
        }
    }
}

/// A point of {±1}^n.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assignment(Vec<i8>);

impl Assignment {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if values.iter().any(|&v| v != 1 && v != -1) {
            return input("assignment entries must be +1 or -1");
        }
        Ok(Assignment(values))
    }

    /// The assignment with −1 exactly at `minus` (0-based).
    pub fn from_minus_positions(n: usize, minus: &[usize]) -> Self {
        let mut v = vec![1i8; n];
        for &i in minus {
            v[i] = -1;
        }
        Assignment(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[i8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> i8 {
        self.0[i]
    }

    pub fn count_minus(&self) -> usize {
        self.0.iter().filter(|&&v| v < 0).count()
    }

    pub fn sum(&self) -> i64 {
        self.0.iter().map(|&v| v as i64).sum()
    }
}

/// Values fixed on a subset of variables.
pub type PartialAssignment = BTreeMap<usize, i8>;

/// Sparse multilinear polynomial with canonical (nonzero-only) coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct MultilinearPoly {
    n: usize,
    basis: Basis,
    coeffs: BTreeMap<Subset, Quad>,
}

impl MultilinearPoly {
    pub fn zero(n: usize, basis: Basis) -> Self {
        MultilinearPoly { n, basis, coeffs: BTreeMap::new() }
    }

    pub fn constant(n: usize, basis: Basis, c: Quad) -> Self {
        let mut f = Self::zero(n, basis);
        f.add_term(Subset::empty(), c);
        f
    }

    /// The single character of `s` with coefficient `c`.
    pub fn monomial(n: usize, basis: Basis, s: Subset, c: Quad) -> Result<Self> {
        let mut f = Self::zero(n, basis);
        f.check_subset(&s)?;
        f.add_term(s, c);
        Ok(f)
    }

    pub fn from_terms<I>(n: usize, basis: Basis, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Subset, Quad)>,
    {
        let mut f = Self::zero(n, basis);
        for (s, c) in terms {
            f.check_subset(&s)?;
            f.add_term(s, c);
        }
        Ok(f)
    }

    /// Σ_i x_i (or Σ_i φ_i).
    pub fn sum_of_variables(n: usize, basis: Basis) -> Self {
        let mut f = Self::zero(n, basis);
        for i in 0..n {
            f.add_term(Subset::singleton(i), Quad::one());
        }
        f
    }

    fn check_subset(&self, s: &Subset) -> Result<()> {
        match s.max() {
            Some(m) if m >= self.n => input(format!("variable {} out of range 1..={}", m + 1, self.n)),
            _ => Ok(()),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    /// Largest |S| with a nonzero coefficient; 0 for constants and zero.
    pub fn degree(&self) -> usize {
        self.coeffs.keys().map(Subset::len).max().unwrap_or(0)
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Subset, &Quad)> {
        self.coeffs.iter()
    }

    pub fn coeff(&self, s: &Subset) -> Quad {
        self.coeffs.get(s).cloned().unwrap_or_default()
    }

    pub fn coeff_ref(&self, s: &Subset) -> Option<&Quad> {
        self.coeffs.get(s)
    }

    pub fn constant_term(&self) -> Quad {
        self.coeff(&Subset::empty())
    }

    /// Adds `c` to the coefficient of `s`, pruning zeros.
    pub fn add_term(&mut self, s: Subset, c: Quad) {
        if c.is_zero() {
            return;
        }
        match self.coeffs.entry(s) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += &c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn set_coeff(&mut self, s: Subset, c: Quad) {
        if c.is_zero() {
            self.coeffs.remove(&s);
        } else {
            self.coeffs.insert(s, c);
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return input(format!("variable counts differ: {} vs {}", self.n, other.n));
        }
        if self.basis != other.basis {
            return input(format!("basis mismatch: {} vs {}", self.basis, other.basis));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (s, c) in &other.coeffs {
            out.add_term(s.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (s, c) in &other.coeffs {
            out.add_term(s.clone(), -c);
        }
        Ok(out)
    }

    pub fn scale(&self, c: &Quad) -> Self {
        let mut out = Self::zero(self.n, self.basis.clone());
        for (s, v) in &self.coeffs {
            out.add_term(s.clone(), v * c);
        }
        out
    }

    pub fn scale_rational(&self, c: &Rational) -> Self {
        let mut out = Self::zero(self.n, self.basis.clone());
        if c.is_zero() {
            return out;
        }
        for (s, v) in &self.coeffs {
            out.coeffs.insert(s.clone(), v.scale(c));
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.scale_rational(&-Rational::one())
    }

    /// Keeps only the terms with |S| = k.
    pub fn homogeneous_part(&self, k: usize) -> Self {
        self.filter(|s| s.len() == k)
    }

    pub fn without_constant(&self) -> Self {
        self.filter(|s| !s.is_empty())
    }

    pub fn filter(&self, keep: impl Fn(&Subset) -> bool) -> Self {
        MultilinearPoly {
            n: self.n,
            basis: self.basis.clone(),
            coeffs: self.coeffs.iter().filter(|(s, _)| keep(s)).map(|(s, c)| (s.clone(), c.clone())).collect(),
        }
    }

    /// Variables that occur in some nonzero term.
    pub fn variables(&self) -> BTreeSet<usize> {
        self.coeffs.keys().flat_map(|s| s.iter()).collect()
    }

    pub fn evaluate(&self, a: &Assignment) -> Result<Quad> {
        if a.len() != self.n {
            return input(format!("assignment has length {}, expected {}", a.len(), self.n));
        }
        let plus = self.basis.value(1);
        let minus = self.basis.value(-1);
        let mut total = Quad::zero();
        for (s, c) in &self.coeffs {
            let mut term = c.clone();
            for i in s.iter() {
                term = &term * if a.get(i) > 0 { &plus } else { &minus };
            }
            total += &term;
        }
        Ok(total)
    }

    /// Evaluation as `f64`; fast path for sampling.
    pub fn evaluate_f64(&self, a: &Assignment) -> f64 {
        let plus = self.basis.value(1).to_f64();
        let minus = self.basis.value(-1).to_f64();
        self.coeffs
            .iter()
            .map(|(s, c)| {
                s.iter().fold(c.to_f64(), |acc, i| acc * if a.get(i) > 0 { plus } else { minus })
            })
            .sum()
    }

    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = Self::zero(self.n, self.basis.clone());
        for (s, a) in &self.coeffs {
            for (t, b) in &other.coeffs {
                let ab = a * b;
                let base = s.symmetric_difference(t);
                match &self.basis {
                    Basis::Chi => out.add_term(base, ab),
                    Basis::Phi(bias) => {
                        // φ_i² = qφ_i + 1 on each shared index
                        let common = s.intersection(t);
                        for r in 0..=common.len() {
                            let w = &ab * &bias.q.pow(r as u32);
                            for extra in common.sub_subsets(r) {
                                out.add_term(base.union(&extra), w.clone());
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Re-expresses `self` in `target`; values at every point are unchanged.
    pub fn convert_basis(&self, target: &Basis) -> Result<Self> {
        if self.basis == *target {
            return Ok(self.clone());
        }
        match (&self.basis, target) {
            (Basis::Chi, Basis::Phi(b)) => {
                // x_i = 2√r·φ_i + (1−2p)
                let a = b.sqrt_r.scale(&rat_int(2));
                let c = Quad::from_rational(Rational::one() - b.p() - b.p());
                Ok(self.substitute_affine(target.clone(), &a, &c))
            }
            (Basis::Phi(b), Basis::Chi) => {
                // φ_i = x_i/(2√r) − (1−2p)/(2√r)
                let a = b.sqrt_r.scale(&rat_int(2)).inv();
                let c = -(&a * &Quad::from_rational(Rational::one() - b.p() - b.p()));
                Ok(self.substitute_affine(Basis::Chi, &a, &c))
            }
            (Basis::Phi(_), Basis::Phi(_)) => self.convert_basis(&Basis::Chi)?.convert_basis(target),
            (Basis::Chi, Basis::Chi) => unreachable!(),
        }
    }

    /// Replaces every variable v_i by `a·w_i + c` where w is the target basis.
    fn substitute_affine(&self, target: Basis, a: &Quad, c: &Quad) -> Self {
        let max_deg = self.degree();
        let a_pows: Vec<Quad> = (0..=max_deg).map(|k| a.pow(k as u32)).collect();
        let c_pows: Vec<Quad> = (0..=max_deg).map(|k| c.pow(k as u32)).collect();
        let mut out = Self::zero(self.n, target);
        for (s, v) in &self.coeffs {
            for k in 0..=s.len() {
                let w = &(v * &a_pows[k]) * &c_pows[s.len() - k];
                if w.is_zero() {
                    continue;
                }
                for t in s.sub_subsets(k) {
                    out.add_term(t, w.clone());
                }
            }
        }
        out
    }

    /// Σ_S f̂(S)², the squared norm under the product measure of the basis.
    pub fn l2_norm_sq(&self) -> Quad {
        self.coeffs.values().map(Quad::square).sum()
    }

    /// Substitutes the fixed values; the variable count is unchanged and the
    /// fixed variables no longer occur.
    pub fn restrict(&self, fixed: &PartialAssignment) -> Result<Self> {
        for (&i, &v) in fixed {
            if i >= self.n {
                return input(format!("variable {} out of range 1..={}", i + 1, self.n));
            }
            if v != 1 && v != -1 {
                return input("fixed values must be +1 or -1");
            }
        }
        let mut out = Self::zero(self.n, self.basis.clone());
        for (s, c) in &self.coeffs {
            let mut w = c.clone();
            let mut rest = Vec::with_capacity(s.len());
            for i in s.iter() {
                match fixed.get(&i) {
                    Some(&v) => w = &w * &self.basis.value(v),
                    None => rest.push(i as u32),
                }
            }
            out.add_term(Subset::from_sorted(rest), w);
        }
        Ok(out)
    }

    /// True when every coefficient is rational.
    pub fn is_rational(&self) -> bool {
        self.coeffs.values().all(Quad::is_rational)
    }

    /// Human-readable rendering with 1-based indices.
    pub fn to_text(&self) -> String {
        if self.coeffs.is_empty() {
            return "0".into();
        }
        let sym = if self.basis.is_chi() { "x" } else { "phi" };
        self.coeffs
            .iter()
            .map(|(s, c)| {
                if s.is_empty() {
                    format!("({c})")
                } else {
                    let vars = s.iter().map(|i| format!("{sym}{}", i + 1)).join("*");
                    format!("({c})*{vars}")
                }
            })
            .join(" + ")
    }
}

/// Parses a polynomial file:
///
/// ```text
/// poly <n> chi            # or: poly <n> phi <p>
/// <coef> <v1> ... <vk>    # one term per line, 1-based variables
/// ```
pub fn parse_poly(text: &str) -> Result<MultilinearPoly> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let perr = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
    let (hl, header) = lines.next().ok_or_else(|| perr(1, "empty polynomial file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() < 3 || h[0] != "poly" {
        return Err(perr(hl, "expected header `poly <n> chi` or `poly <n> phi <p>`"));
    }
    let n: usize = h[1].parse().map_err(|_| perr(hl, "bad variable count"))?;
    let basis = match (h[2], h.get(3)) {
        ("chi", None) => Basis::Chi,
        ("phi", Some(p)) => {
            let p = parse_rational(p).ok_or_else(|| perr(hl, "bad p"))?;
            Basis::phi(p).map_err(|e| perr(hl, &e.to_string()))?
        }
        _ => return Err(perr(hl, "unknown basis")),
    };
    let mut f = MultilinearPoly::zero(n, basis);
    for (ln, line) in lines {
        let mut parts = line.split_whitespace();
        let c = parts.next().and_then(parse_rational).ok_or_else(|| perr(ln, "bad coefficient"))?;
        let mut vars = Vec::new();
        for tok in parts {
            let v: usize = tok.parse().map_err(|_| perr(ln, "bad variable index"))?;
            if v == 0 || v > n {
                return Err(perr(ln, &format!("variable {v} out of range 1..={n}")));
            }
            vars.push(v - 1);
        }
        let s = Subset::new(vars).map_err(|_| perr(ln, "repeated variable in term"))?;
        f.add_term(s, Quad::from_rational(c));
    }
    Ok(f)
}

/// Renders a rational-coefficient polynomial in the `parse_poly` format.
pub fn write_poly(f: &MultilinearPoly) -> Option<String> {
    let mut out = match f.basis() {
        Basis::Chi => format!("poly {} chi\n", f.n()),
        Basis::Phi(b) => format!("poly {} phi {}\n", f.n(), fmt_rational(b.p())),
    };
    for (s, c) in f.terms() {
        out.push_str(&fmt_rational(c.as_rational()?));
        for v in s.to_one_based() {
            out.push_str(&format!(" {v}"));
        }
        out.push('\n');
    }
    Some(out)
}
