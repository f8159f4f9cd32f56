//! CSP instances, the global cardinality constraint, the instance file
//! format and compilation to the value polynomial f_I.
//!
//! File format (1-based variables, `#` starts a comment):
//!
//! ```text
//! csp <n> <m> <d> <p_num>/<p_den>
//! c <arity> <v1> ... <vk>
//! s <±1> ... <±1>
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{input, Error, Result};
use crate::poly::{Assignment, Basis, MultilinearPoly, Subset};
use crate::quad::{fmt_rational, parse_rational, rat, Quad, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    vars: Vec<usize>,
    patterns: BTreeSet<Vec<i8>>,
}

impl Constraint {
    /// `vars` are 0-based and distinct; each pattern matches the arity.
    pub fn new(vars: Vec<usize>, patterns: impl IntoIterator<Item = Vec<i8>>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        if !vars.iter().all(|v| seen.insert(*v)) {
            return input("duplicate variable in constraint");
        }
        let patterns: BTreeSet<Vec<i8>> = patterns.into_iter().collect();
        if patterns.is_empty() {
            return input("constraint has no satisfying pattern");
        }
        for p in &patterns {
            if p.len() != vars.len() {
                return input(format!("pattern length {} does not match arity {}", p.len(), vars.len()));
            }
            if p.iter().any(|&v| v != 1 && v != -1) {
                return input("pattern entries must be +1 or -1");
            }
        }
        Ok(Constraint { vars, patterns })
    }

    /// Satisfied when the two endpoints take different values.
    pub fn cut(u: usize, v: usize) -> Result<Self> {
        Constraint::new(vec![u, v], [vec![-1, 1], vec![1, -1]])
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    pub fn patterns(&self) -> &BTreeSet<Vec<i8>> {
        &self.patterns
    }

    pub fn is_satisfied(&self, a: &Assignment) -> bool {
        let local: Vec<i8> = self.vars.iter().map(|&v| a.get(v)).collect();
        self.patterns.contains(&local)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CspInstance {
    n: usize,
    d: usize,
    constraints: Vec<Constraint>,
}

impl CspInstance {
    pub fn new(n: usize, d: usize, constraints: Vec<Constraint>) -> Result<Self> {
        for c in &constraints {
            if c.arity() > d {
                return input(format!("constraint arity {} exceeds d = {d}", c.arity()));
            }
            if let Some(&v) = c.vars.iter().find(|&&v| v >= n) {
                return input(format!("variable {} out of range 1..={n}", v + 1));
            }
        }
        Ok(CspInstance { n, d, constraints })
    }

    /// MaxCut-style instance: one cut constraint per edge (0-based endpoints).
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let cs = edges.iter().map(|&(u, v)| Constraint::cut(u, v)).collect::<Result<Vec<_>>>()?;
        CspInstance::new(n, 2, cs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// γ = 2^{−d}; every coefficient of f_I is a multiple of it.
    pub fn gamma(&self) -> Rational {
        Rational::new(BigInt::one(), BigInt::one() << self.d)
    }

    /// f_I(x) = Σ_i Σ_{σ∈P_i} Π_j (1 + σ_j x_{i,j}) / 2^{k_i}, in the χ basis.
    pub fn to_polynomial(&self) -> MultilinearPoly {
        let mut f = MultilinearPoly::zero(self.n, Basis::Chi);
        for c in &self.constraints {
            let k = c.arity();
            let scale = Rational::new(BigInt::one(), BigInt::one() << k);
            let mut local = vec![Rational::zero(); 1 << k];
            for sigma in &c.patterns {
                for (mask, slot) in local.iter_mut().enumerate() {
                    let sign: i8 = (0..k).filter(|j| mask >> j & 1 == 1).map(|j| sigma[j]).product();
                    if sign > 0 {
                        *slot += &scale;
                    } else {
                        *slot -= &scale;
                    }
                }
            }
            for (mask, coef) in local.into_iter().enumerate() {
                if coef.is_zero() {
                    continue;
                }
                let vars = (0..k).filter(|j| mask >> j & 1 == 1).map(|j| c.vars[j]);
                let s = Subset::new(vars).expect("constraint variables are distinct");
                f.add_term(s, Quad::from_rational(coef));
            }
        }
        f
    }

    pub fn constraint_count(&self, a: &Assignment) -> usize {
        self.constraints.iter().filter(|c| c.is_satisfied(a)).count()
    }

    /// Serializes in the instance file format.
    pub fn to_text(&self, card: &GlobalCardinality) -> String {
        let mut out = format!("csp {} {} {} {}\n", self.n, self.m(), self.d, fmt_p(card.p()));
        for c in &self.constraints {
            let vars: Vec<String> = c.vars.iter().map(|v| (v + 1).to_string()).collect();
            let _ = writeln!(out, "c {} {}", c.arity(), vars.join(" "));
            for p in &c.patterns {
                let vals: Vec<String> = p.iter().map(|v| if *v > 0 { "+1".into() } else { "-1".into() }).collect();
                let _ = writeln!(out, "s {}", vals.join(" "));
            }
        }
        out
    }
}

fn fmt_p(p: &Rational) -> String {
    format!("{}/{}", p.numer(), p.denom())
}

/// Σx_i = (1−2p)n: exactly pn variables are −1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlobalCardinality {
    n: usize,
    p: Rational,
    minus: usize,
}

impl GlobalCardinality {
    pub fn new(n: usize, p: Rational) -> Result<Self> {
        if p <= Rational::zero() || p >= Rational::one() {
            return input(format!("p = {} must lie strictly between 0 and 1", fmt_rational(&p)));
        }
        let pn = &p * Rational::from_integer(BigInt::from(n));
        if !pn.is_integer() {
            return input(format!("p·n = {} is not an integer", fmt_rational(&pn)));
        }
        let minus = pn.to_integer().to_usize().expect("p·n fits in usize");
        Ok(GlobalCardinality { n, p, minus })
    }

    pub fn bisection(n: usize) -> Result<Self> {
        GlobalCardinality::new(n, rat(1, 2))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> &Rational {
        &self.p
    }

    /// Number of −1 entries, pn.
    pub fn minus_count(&self) -> usize {
        self.minus
    }

    /// Number of +1 entries, (1−p)n.
    pub fn plus_count(&self) -> usize {
        self.n - self.minus
    }

    /// (1−2p)n.
    pub fn target_sum(&self) -> i64 {
        self.n as i64 - 2 * self.minus as i64
    }

    pub fn is_satisfied(&self, a: &Assignment) -> bool {
        a.len() == self.n && a.count_minus() == self.minus
    }
}

/// Parses the instance file format.
pub fn parse_instance(text: &str) -> Result<(CspInstance, GlobalCardinality)> {
    let perr = |line: usize, msg: String| Error::Parse { line, msg };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .peekable();

    let (hl, header) = lines.next().ok_or_else(|| perr(1, "empty instance file".into()))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 5 || h[0] != "csp" {
        return Err(perr(hl, "expected header `csp <n> <m> <d> <p_num>/<p_den>`".into()));
    }
    let num = |s: &str, what: &str| s.parse::<usize>().map_err(|_| perr(hl, format!("bad {what}: {s}")));
    let n = num(h[1], "variable count")?;
    let m = num(h[2], "constraint count")?;
    let d = num(h[3], "arity bound")?;
    let p = parse_rational(h[4]).ok_or_else(|| perr(hl, format!("bad p: {}", h[4])))?;
    let card = GlobalCardinality::new(n, p).map_err(|e| perr(hl, e.to_string()))?;

    let mut constraints = Vec::with_capacity(m);
    while let Some((cl, line)) = lines.next() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks[0] != "c" {
            return Err(perr(cl, format!("expected constraint line `c ...`, found `{}`", toks[0])));
        }
        let arity: usize = toks
            .get(1)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| perr(cl, "bad arity".into()))?;
        if toks.len() != arity + 2 {
            return Err(perr(cl, format!("expected {arity} variables, found {}", toks.len() - 2)));
        }
        if arity > d {
            return Err(perr(cl, format!("arity {arity} exceeds d = {d}")));
        }
        let mut vars = Vec::with_capacity(arity);
        for t in &toks[2..] {
            let v: usize = t.parse().map_err(|_| perr(cl, format!("bad variable `{t}`")))?;
            if v == 0 || v > n {
                return Err(perr(cl, format!("variable {v} out of range 1..={n}")));
            }
            if vars.contains(&(v - 1)) {
                return Err(perr(cl, format!("duplicate variable {v} in constraint")));
            }
            vars.push(v - 1);
        }
        let mut patterns = Vec::new();
        while let Some(&(sl, sline)) = lines.peek() {
            let st: Vec<&str> = sline.split_whitespace().collect();
            if st[0] != "s" {
                break;
            }
            lines.next();
            if st.len() - 1 != arity {
                return Err(perr(sl, format!("pattern has {} entries, arity is {arity}", st.len() - 1)));
            }
            let pat = st[1..]
                .iter()
                .map(|t| match *t {
                    "+1" | "1" | "+" => Ok(1i8),
                    "-1" | "-" => Ok(-1i8),
                    _ => Err(perr(sl, format!("pattern entry `{t}` is not ±1"))),
                })
                .collect::<Result<Vec<i8>>>()?;
            patterns.push(pat);
        }
        if patterns.is_empty() {
            return Err(perr(cl, "constraint has no satisfying pattern".into()));
        }
        constraints.push(Constraint::new(vars, patterns).map_err(|e| perr(cl, e.to_string()))?);
    }
    if constraints.len() != m {
        return Err(perr(hl, format!("header declares {m} constraints, found {}", constraints.len())));
    }
    let inst = CspInstance::new(n, d, constraints).map_err(|e| perr(hl, e.to_string()))?;
    Ok((inst, card))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::rat_int;

    const EDGE: &str = "csp 2 1 2 1/2\nc 2 1 2\ns -1 +1\ns +1 -1\n";

    #[test]
    fn parse_edge() {
        let (inst, card) = parse_instance(EDGE).unwrap();
        assert_eq!(inst.m(), 1);
        assert_eq!(inst.constraints()[0], Constraint::cut(0, 1).unwrap());
        assert_eq!(card.minus_count(), 1);
        assert_eq!(card.target_sum(), 0);
    }

    #[test]
    fn parse_errors_carry_lines() {
        let e = parse_instance("csp 5 0 2 1/2\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }), "{e}");
        let e = parse_instance("# hi\ncsp 3 1 2 1/3\nc 2 1 1\ns 1 1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        let e = parse_instance("csp 3 1 2 1/3\nc 2 1 2\ns 1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        let e = parse_instance("csp 3 2 2 1/3\nc 2 1 2\ns 1 1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }), "{e}");
    }

    #[test]
    fn edge_polynomial() {
        let (inst, _) = parse_instance(EDGE).unwrap();
        let f = inst.to_polynomial();
        let expect = MultilinearPoly::from_terms(
            2,
            Basis::Chi,
            [(Subset::empty(), Quad::from_rational(rat(1, 2))), (Subset::new([0, 1]).unwrap(), Quad::from_rational(rat(-1, 2)))],
        )
        .unwrap();
        assert_eq!(f, expect);
        let a = Assignment::new(vec![1, -1]).unwrap();
        assert_eq!(inst.constraint_count(&a), 1);
    }

    #[test]
    fn k4_bisection() {
        let edges: Vec<_> = (0..4).flat_map(|u| (u + 1..4).map(move |v| (u, v))).collect();
        let inst = CspInstance::from_edges(4, &edges).unwrap();
        assert_eq!(inst.m(), 6);
        let a = Assignment::new(vec![1, 1, -1, -1]).unwrap();
        assert_eq!(inst.constraint_count(&a), 4);
        let card = GlobalCardinality::bisection(4).unwrap();
        let (back, c2) = parse_instance(&inst.to_text(&card)).unwrap();
        assert_eq!(back, inst);
        assert_eq!(c2, card);
    }

    #[test]
    fn empty_instance_counts_zero() {
        let inst = CspInstance::new(3, 2, vec![]).unwrap();
        assert_eq!(inst.constraint_count(&Assignment::new(vec![1, 1, 1]).unwrap()), 0);
        assert!(inst.to_polynomial().is_zero());
    }

    #[test]
    fn full_predicate_is_constant_one() {
        let c = Constraint::new(vec![0, 1], [vec![1, 1], vec![1, -1], vec![-1, 1], vec![-1, -1]]).unwrap();
        let inst = CspInstance::new(2, 2, vec![c]).unwrap();
        assert_eq!(inst.to_polynomial(), MultilinearPoly::constant(2, Basis::Chi, Quad::from_rational(rat_int(1))));
    }
}
