//! The set-symmetric forms A (second moment) and B (variance) on the
//! coefficient space of degree-≤d polynomials, their spectra, and the
//! projection onto the null space span{(Σφ_i)·φ_S}.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_traits::One;
use rayon::prelude::*;

use crate::cardinal_dist::{is_half, CardinalDist};
use crate::error::{input, Error, Result};
use crate::linalg::{solve_exact, solve_float};
use crate::poly::{binomial, binomial_up_to, subsets_up_to, Basis, MultilinearPoly, Subset};
use crate::quad::{Quad, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormKind {
    /// A(S,T) = E[φ_S φ_T].
    A,
    /// B(S,T) = A(S,T) − δ_{|S|}δ_{|T|}, on nonempty S, T.
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntryMode {
    /// E[φ_Sφ_T] with shared indices expanded through φ_i² = qφ_i + 1.
    Exact,
    /// δ_{|SΔT|}; agrees with `Exact` only at p = 1/2.
    Simplified,
}

#[derive(Clone, Debug)]
pub struct SetSymmetricForm {
    dist: CardinalDist,
    d: usize,
    kind: FormKind,
    mode: EntryMode,
}

impl SetSymmetricForm {
    pub fn new(dist: CardinalDist, d: usize, kind: FormKind, mode: EntryMode) -> Result<Self> {
        if d > dist.n() {
            return input(format!("d = {d} exceeds n = {}", dist.n()));
        }
        Ok(SetSymmetricForm { dist, d, kind, mode })
    }

    pub fn dist(&self) -> &CardinalDist {
        &self.dist
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn kind(&self) -> FormKind {
        self.kind
    }

    pub fn mode(&self) -> EntryMode {
        self.mode
    }

    /// Entry for |S| = s, |T| = t, |S∩T| = c.
    pub fn entry(&self, s: usize, t: usize, c: usize) -> Quad {
        let sd = s + t - 2 * c;
        let a = match self.mode {
            EntryMode::Exact => self.dist.pair_moment(sd, c),
            EntryMode::Simplified => self.dist.delta(sd).clone(),
        };
        match self.kind {
            FormKind::A => a,
            FormKind::B if s == 0 || t == 0 => Quad::zero(),
            FormKind::B => &a - &(self.dist.delta(s) * self.dist.delta(t)),
        }
    }

    /// Row/column labels: subsets of size ≤ d, B without ∅.
    pub fn index(&self) -> Vec<Subset> {
        let mut idx = subsets_up_to(self.dist.n(), self.d);
        if self.kind == FormKind::B {
            idx.remove(0);
        }
        idx
    }

    pub fn dimension(&self) -> u128 {
        binomial_up_to(self.dist.n(), self.d) - u128::from(self.kind == FormKind::B)
    }

    fn entry_table(&self) -> HashMap<(usize, usize, usize), Quad> {
        let mut table = HashMap::new();
        for s in 0..=self.d {
            for t in 0..=self.d {
                for c in 0..=s.min(t) {
                    if s + t - c <= self.dist.n() {
                        table.insert((s, t, c), self.entry(s, t, c));
                    }
                }
            }
        }
        table
    }

    fn check_cap(&self, cap: usize) -> Result<()> {
        let dim = self.dimension();
        if dim > cap as u128 {
            return Err(Error::Resource(format!("dense dimension {dim} exceeds cap {cap}")));
        }
        Ok(())
    }

    /// Exact dense matrix.
    pub fn build_dense(&self, cap: usize) -> Result<DenseForm> {
        self.check_cap(cap)?;
        let index = self.index();
        let table = self.entry_table();
        let rows: Vec<Vec<Quad>> = index
            .par_iter()
            .map(|s| {
                index
                    .iter()
                    .map(|t| table[&(s.len(), t.len(), s.intersection_len(t))].clone())
                    .collect()
            })
            .collect();
        let pos = index.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(DenseForm { kind: self.kind, index, pos, rows, p: self.dist.p().clone() })
    }

    /// Floating-point dense matrix.
    pub fn build_dense_f64(&self, cap: usize) -> Result<DMatrix<f64>> {
        self.check_cap(cap)?;
        let index = self.index();
        let table: HashMap<_, f64> = self.entry_table().into_iter().map(|(k, v)| (k, v.to_f64())).collect();
        let m = index.len();
        let data: Vec<f64> = index
            .par_iter()
            .flat_map_iter(|s| index.iter().map(|t| table[&(s.len(), t.len(), s.intersection_len(t))]).collect::<Vec<_>>())
            .collect();
        Ok(DMatrix::from_row_slice(m, m, &data))
    }

    /// Dense symmetric eigensolve with clustering of the nonzero spectrum.
    pub fn eigen_summary(&self, cap: usize, tol: f64) -> Result<EigenSummary> {
        let mat = self.build_dense_f64(cap)?;
        let norm = mat.iter().fold(0.0f64, |a, v| a.max(v.abs())) * mat.nrows() as f64;
        let eig = nalgebra::SymmetricEigen::new(mat.clone());
        // residual check of the decomposition
        let recon = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues) * eig.eigenvectors.transpose();
        let off = (&recon - &mat).amax();
        if off > tol * norm.max(1.0) * 1e3 {
            return Err(Error::Numerical(format!("eigendecomposition residual {off:.3e} too large")));
        }
        let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        values.sort_by(f64::total_cmp);
        let zero_tol = 1e-7 * norm.max(1.0);
        let null_dim = values.iter().filter(|v| v.abs() <= zero_tol).count();
        let nonzero: Vec<f64> = values.into_iter().filter(|v| v.abs() > zero_tol).collect();

        let n = self.dist.n();
        let k_range: Vec<usize> = match self.kind {
            FormKind::A => (0..=self.d).collect(),
            FormKind::B => (1..=self.d).collect(),
        };
        let theory: Vec<(usize, Rational)> = k_range.iter().map(|&k| (k, eigenvalue_closed_form(self.d, k))).collect();
        let nearest = |v: f64| {
            theory
                .iter()
                .min_by(|a, b| {
                    let da = (crate::quad::rational_to_f64(&a.1) - v).abs();
                    let db = (crate::quad::rational_to_f64(&b.1) - v).abs();
                    da.total_cmp(&db)
                })
                .map(|(_, cf)| cf.clone())
                .expect("at least one eigenspace")
        };
        let clusters = cluster(&nonzero, 10.0 / n as f64, &nearest)
            .into_iter()
            .map(|members| {
                let value = members.iter().sum::<f64>() / members.len() as f64;
                let cf = nearest(value);
                let cf_f = crate::quad::rational_to_f64(&cf);
                Cluster {
                    value,
                    min: members[0],
                    max: *members.last().unwrap(),
                    multiplicity: members.len(),
                    closed_form: cf,
                    gap: members.iter().map(|v| (v - cf_f).abs()).fold(0.0, f64::max),
                }
            })
            .collect();

        let blocks = if n > 2 * self.d && self.mode == EntryMode::Exact {
            let alpha = alpha_table(n, self.dist.p(), self.d)?;
            k_range
                .iter()
                .map(|&k| {
                    let v = johnson_eigenvector(&self.dist, self.d, k, &alpha)?;
                    let lambda = rayleigh_exact(self, &v)?;
                    Ok(Block {
                        k,
                        dimension: eigenspace_dimension(n, k),
                        exact: lambda.clone(),
                        value: lambda.to_f64(),
                        closed_form: eigenvalue_closed_form(self.d, k),
                    })
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };

        Ok(EigenSummary { null_dim, nonzero_eigenvalues: nonzero, clusters, blocks })
    }
}

/// Groups sorted values whose consecutive gaps are at most `gap`, never
/// joining values whose nearest closed forms differ.
fn cluster(sorted: &[f64], gap: f64, nearest: &dyn Fn(f64) -> Rational) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for &v in sorted {
        match out.last_mut() {
            Some(c) if v - c.last().unwrap() <= gap && nearest(v) == nearest(c[0]) => c.push(v),
            _ => out.push(vec![v]),
        }
    }
    out
}

/// dim V'_k = C(n,k) − C(n,k−1).
pub fn eigenspace_dimension(n: usize, k: usize) -> u128 {
    binomial(n, k) - if k == 0 { 0 } else { binomial(n, k - 1) }
}

/// Exact dense form with labelled rows.
#[derive(Clone, Debug)]
pub struct DenseForm {
    kind: FormKind,
    index: Vec<Subset>,
    pos: HashMap<Subset, usize>,
    rows: Vec<Vec<Quad>>,
    p: Rational,
}

impl DenseForm {
    pub fn index(&self) -> &[Subset] {
        &self.index
    }

    pub fn get(&self, i: usize, j: usize) -> &Quad {
        &self.rows[i][j]
    }

    pub fn dimension(&self) -> usize {
        self.index.len()
    }

    /// Coefficient vector of f over the index; terms outside it are an
    /// error, except ∅ for B, whose row and column vanish.
    pub fn coefficients(&self, f: &MultilinearPoly) -> Result<Vec<Quad>> {
        match f.basis() {
            Basis::Phi(b) if *b.p() == self.p => {}
            Basis::Chi if is_half(&self.p) => {}
            other => return input(format!("basis {other} does not match the form")),
        }
        let mut v = vec![Quad::zero(); self.index.len()];
        for (s, c) in f.terms() {
            match self.pos.get(s) {
                Some(&i) => v[i] = c.clone(),
                None if s.is_empty() && self.kind == FormKind::B => {}
                None => return input(format!("term {s} lies outside the form's index")),
            }
        }
        Ok(v)
    }

    pub fn apply(&self, v: &[Quad]) -> Vec<Quad> {
        let nz: Vec<usize> = (0..v.len()).filter(|&j| !v[j].is_zero()).collect();
        self.rows
            .par_iter()
            .map(|row| nz.iter().map(|&j| &row[j] * &v[j]).sum())
            .collect()
    }

    /// fᵀ·M·f.
    pub fn quadratic_form(&self, f: &MultilinearPoly) -> Result<Quad> {
        let v = self.coefficients(f)?;
        let mv = self.apply(&v);
        Ok(v.iter().zip(&mv).filter(|(a, _)| !a.is_zero()).map(|(a, b)| a * b).sum())
    }
}

/// One eigenspace V'_k with its exact eigenvalue.
#[derive(Clone, Debug)]
pub struct Block {
    pub k: usize,
    pub dimension: u128,
    pub exact: Quad,
    pub value: f64,
    pub closed_form: Rational,
}

#[derive(Clone, Debug)]
pub struct Cluster {
    pub value: f64,
    pub min: f64,
    pub max: f64,
    pub multiplicity: usize,
    pub closed_form: Rational,
    /// Largest distance from a member to `closed_form`.
    pub gap: f64,
}

#[derive(Clone, Debug)]
pub struct EigenSummary {
    pub null_dim: usize,
    pub nonzero_eigenvalues: Vec<f64>,
    pub clusters: Vec<Cluster>,
    /// Exact eigenvalue on each V'_k (exact-entry mode with n > 2d).
    pub blocks: Vec<Block>,
}

fn double_factorial(k: i64) -> Rational {
    let mut acc = BigInt::one();
    let mut i = k;
    while i > 1 {
        acc *= i;
        i -= 2;
    }
    Rational::from_integer(acc)
}

/// Σ_{even i ≤ d−k} ((i−1)!!)²/i!, the leading-order eigenvalue of V'_k.
pub fn eigenvalue_closed_form(d: usize, k: usize) -> Rational {
    assert!(k <= d, "k must not exceed d");
    (0..=d - k)
        .step_by(2)
        .map(|i| {
            let df = double_factorial(i as i64 - 1);
            let fact: BigInt = (1..=i as u64).map(BigInt::from).product();
            &df * &df / Rational::from_integer(fact)
        })
        .sum()
}

/// α_{k,k+i}: the coefficient ratio that extends a weight-k eigenvector to
/// weight k+i.
#[derive(Clone, Debug)]
pub struct AlphaTable {
    n: usize,
    values: Vec<Vec<Quad>>,
}

impl AlphaTable {
    /// α_{k,k+i}.
    pub fn get(&self, k: usize, i: usize) -> &Quad {
        &self.values[k][i]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.values.len() - 1
    }
}

/// Solves i·α_{k,k+i−1} + (k+i)·q·α_{k,k+i} + (n−2k−i)·α_{k,k+i+1} = 0 with
/// α_{k,k} = 1.
pub fn alpha_table(n: usize, p: &Rational, d: usize) -> Result<AlphaTable> {
    if n <= 2 * d {
        return input(format!("need n > 2d, got n = {n}, d = {d}"));
    }
    let bias = crate::poly::Bias::new(p.clone())?;
    let q = bias.q();
    let values = (0..=d)
        .map(|k| {
            let mut row = vec![Quad::one()];
            for i in 0..d - k {
                let prev = if i == 0 { Quad::zero() } else { row[i - 1].clone() };
                let num = &prev.scale(&Rational::from_integer(BigInt::from(i)))
                    + &(q * &row[i]).scale(&Rational::from_integer(BigInt::from(k + i)));
                let den = Rational::from_integer(BigInt::from(n - 2 * k - i));
                row.push(-(num.scale(&den.recip())));
            }
            row
        })
        .collect();
    Ok(AlphaTable { n, values })
}

/// A vector of V'_k: Π_{j<k}(φ_{2j} − φ_{2j+1}) extended to weight k+i by
/// f̂(T) = α_{k,k+i}·Σ_{S⊂T, |S|=k} f̂(S).
pub fn johnson_eigenvector(dist: &CardinalDist, d: usize, k: usize, alpha: &AlphaTable) -> Result<MultilinearPoly> {
    let n = dist.n();
    if 2 * k > n || k > d || alpha.d() < d {
        return input(format!("cannot build a V'_{k} vector with n = {n}, d = {d}"));
    }
    let basis = dist.phi_basis();
    let mut base = MultilinearPoly::zero(n, basis.clone());
    for mask in 0u32..(1u32 << k) {
        let s = Subset::new((0..k).map(|j| 2 * j + (mask >> j & 1) as usize))?;
        let sign = if mask.count_ones() % 2 == 0 { 1 } else { -1 };
        base.add_term(s, Quad::from_int(sign));
    }
    let mut out = base.clone();
    for i in 1..=d - k {
        let mut sums: HashMap<Subset, Quad> = HashMap::new();
        for (s, c) in base.terms() {
            let rest: Vec<u32> = (0..n as u32).filter(|j| !s.contains(*j as usize)).collect();
            for extra in itertools::Itertools::combinations(rest.into_iter(), i) {
                let t = s.union(&Subset::new(extra.into_iter().map(|j| j as usize))?);
                *sums.entry(t).or_default() += c;
            }
        }
        for (t, v) in sums {
            out.add_term(t, &v * alpha.get(k, i));
        }
    }
    Ok(out)
}

/// vᵀMv / vᵀv computed exactly; errors unless v is an exact eigenvector.
pub fn rayleigh_exact(form: &SetSymmetricForm, v: &MultilinearPoly) -> Result<Quad> {
    let dist = form.dist();
    let table = form.entry_table();
    let idx = form.index();
    let terms: Vec<(&Subset, &Quad)> = v.terms().filter(|(s, _)| !(s.is_empty() && form.kind == FormKind::B)).collect();
    let mv: Vec<Quad> = idx
        .par_iter()
        .map(|r| terms.iter().map(|(t, c)| &table[&(r.len(), t.len(), r.intersection_len(t))] * *c).sum())
        .collect();
    let _ = dist;
    let (anchor, av) = terms.first().ok_or_else(|| Error::Degenerate("zero vector".into()))?;
    let pos = idx.iter().position(|s| s == *anchor).expect("term inside index");
    let lambda = &mv[pos] / *av;
    for (i, s) in idx.iter().enumerate() {
        let expect = &v.coeff(s) * &lambda;
        if mv[i] != expect {
            return Err(Error::Numerical(format!("vector is not an eigenvector (row {s})")));
        }
    }
    Ok(lambda)
}

/// (Σ_i w_i)·w_S in the basis of `basis` (w = x or φ).
pub fn null_vector(n: usize, basis: &Basis, s: &Subset) -> MultilinearPoly {
    let sum = MultilinearPoly::sum_of_variables(n, basis.clone());
    let mono = MultilinearPoly::monomial(n, basis.clone(), s.clone(), Quad::one()).expect("subset in range");
    sum.multiply(&mono).expect("same basis")
}

#[derive(Clone, Debug)]
pub struct ProjectionResult {
    /// Degree ≤ d−1, in the basis of the input.
    pub h: MultilinearPoly,
    /// f − f̂(∅) − (Σw_i)·h with its constant term dropped.
    pub residual: MultilinearPoly,
    pub residual_norm_sq: Quad,
    /// False when the floating-point path produced h.
    pub exact: bool,
}

fn sparse_dot(a: &MultilinearPoly, b: &MultilinearPoly) -> Quad {
    let (small, large) = if a.num_terms() <= b.num_terms() { (a, b) } else { (b, a) };
    small
        .terms()
        .filter_map(|(s, c)| large.coeff_ref(s).map(|d| c * d))
        .sum()
}

/// Least-squares projection of f − f̂(∅) onto span{(Σw_i)·w_S : |S| ≤ d−1}
/// within the space of nonconstant polynomials, d = deg f.
///
/// Accepts the φ basis of `dist`, or the χ basis when p = 1/2.
pub fn project_null(f: &MultilinearPoly, dist: &CardinalDist, exact_cap: usize, tol: f64) -> Result<ProjectionResult> {
    let n = dist.n();
    if f.n() != n {
        return input("polynomial and distribution disagree on n");
    }
    match f.basis() {
        Basis::Phi(b) if b.p() == dist.p() => {}
        Basis::Chi if is_half(dist.p()) => {}
        other => return input(format!("projection needs the φ basis of the distribution, got {other}")),
    }
    let basis = f.basis().clone();
    let y = f.without_constant();
    let d = f.degree();
    if d == 0 {
        return Ok(ProjectionResult {
            h: MultilinearPoly::zero(n, basis.clone()),
            residual: MultilinearPoly::zero(n, basis),
            residual_norm_sq: Quad::zero(),
            exact: true,
        });
    }
    let unknowns = subsets_up_to(n, d - 1);
    let vecs: Vec<MultilinearPoly> = unknowns.par_iter().map(|s| null_vector(n, &basis, s).without_constant()).collect();
    let m = unknowns.len();
    let (coefs, exact): (Vec<Quad>, bool) = if m <= exact_cap {
        let gram: Vec<Vec<Quad>> = (0..m)
            .into_par_iter()
            .map(|i| (0..m).map(|j| sparse_dot(&vecs[i], &vecs[j])).collect())
            .collect();
        let rhs: Vec<Quad> = vecs.par_iter().map(|v| sparse_dot(v, &y)).collect();
        (solve_exact(gram, rhs)?, true)
    } else {
        let gram = DMatrix::from_fn(m, m, |i, j| sparse_dot(&vecs[i], &vecs[j]).to_f64());
        let rhs = DVector::from_iterator(m, vecs.iter().map(|v| sparse_dot(v, &y).to_f64()));
        let x = solve_float(&gram, &rhs, tol)?;
        let coefs = x
            .iter()
            .map(|v| Rational::from_float(*v).map(Quad::from_rational).ok_or_else(|| Error::Numerical("non-finite coefficient".into())))
            .collect::<Result<Vec<_>>>()?;
        (coefs, false)
    };
    let mut h = MultilinearPoly::zero(n, basis.clone());
    let mut sh = MultilinearPoly::zero(n, basis);
    for ((s, c), v) in unknowns.into_iter().zip(coefs).zip(&vecs) {
        if c.is_zero() {
            continue;
        }
        sh = sh.add(&v.scale(&c))?;
        h.add_term(s, c);
    }
    let residual = y.sub(&sh)?;
    let residual_norm_sq = residual.l2_norm_sq();
    if !exact {
        // the float path must still leave a residual orthogonal to the null space
        let worst = vecs.iter().map(|v| sparse_dot(v, &residual).to_f64().abs()).fold(0.0, f64::max);
        if worst > tol.sqrt() * (1.0 + residual_norm_sq.to_f64()) {
            return Err(Error::Numerical(format!("projection residual not orthogonal (inner product {worst:.3e})")));
        }
    }
    Ok(ProjectionResult { h, residual, residual_norm_sq, exact })
}

/// Largest |⟨residual, (Σw)w_S⟩| over |S| ≤ d−1, exact.
pub fn orthogonality_defect(res: &ProjectionResult, d: usize) -> Quad {
    let n = res.residual.n();
    let basis = res.residual.basis().clone();
    if d == 0 {
        return Quad::zero();
    }
    subsets_up_to(n, d - 1)
        .iter()
        .map(|s| sparse_dot(&null_vector(n, &basis, s).without_constant(), &res.residual).abs())
        .max()
        .unwrap_or_else(Quad::zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::rat;

    #[test]
    fn closed_forms() {
        assert_eq!(eigenvalue_closed_form(3, 3), Rational::one());
        assert_eq!(eigenvalue_closed_form(2, 0), rat(3, 2));
        assert_eq!(eigenvalue_closed_form(4, 0), rat(15, 8));
        assert_eq!(eigenvalue_closed_form(3, 2), Rational::one());
    }

    #[test]
    fn alpha_basics() {
        let a = alpha_table(9, &rat(1, 2), 3).unwrap();
        for k in 0..3 {
            assert!(a.get(k, 1).is_zero());
        }
        assert!(alpha_table(6, &rat(1, 2), 3).is_err());
        let a = alpha_table(9, &rat(1, 3), 3).unwrap();
        let q = crate::poly::Bias::new(rat(1, 3)).unwrap().q().clone();
        assert_eq!(*a.get(1, 1), -(q.scale(&rat(1, 7))));
    }

    #[test]
    fn small_dense_a() {
        let dist = CardinalDist::new(6, rat(1, 2)).unwrap();
        let form = SetSymmetricForm::new(dist.clone(), 1, FormKind::A, EntryMode::Exact).unwrap();
        let m = form.build_dense(100).unwrap();
        assert_eq!(m.dimension(), 7);
        for i in 1..7 {
            assert_eq!(*m.get(i, i), Quad::one());
            for j in 1..7 {
                if i != j {
                    assert_eq!(*m.get(i, j), Quad::from_rational(rat(-1, 5)));
                }
            }
        }
        let s = MultilinearPoly::sum_of_variables(6, dist.phi_basis());
        assert_eq!(m.quadratic_form(&s).unwrap(), Quad::zero());
        assert!(form.build_dense(3).is_err());
    }

    #[test]
    fn projection_of_null_vector() {
        let dist = CardinalDist::new(8, rat(1, 2)).unwrap();
        let basis = dist.phi_basis();
        let f = null_vector(8, &basis, &Subset::singleton(0));
        let r = project_null(&f, &dist, 2000, 1e-9).unwrap();
        assert!(r.residual.is_zero());
        assert_eq!(r.h, MultilinearPoly::monomial(8, basis, Subset::singleton(0), Quad::one()).unwrap());
    }
}
