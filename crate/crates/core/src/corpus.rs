//! Instance generators: random CSPs, structured graphs and planted kernels.

use itertools::Itertools;
use rand::seq::IndexedRandom;
use rand::Rng;

use crate::csp_model::{Constraint, CspInstance};
use crate::error::Result;
use crate::poly::{Basis, MultilinearPoly, Subset};
use crate::quad::{Quad, Rational};

/// m random constraints of arity 1..=d (arity d with probability 1/2), each
/// with a random nonempty set of satisfying patterns.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize, m: usize) -> Result<CspInstance> {
    let vars: Vec<usize> = (0..n).collect();
    let mut constraints = Vec::with_capacity(m);
    for _ in 0..m {
        let arity = if rng.random_bool(0.5) { d } else { rng.random_range(1..=d) };
        let chosen: Vec<usize> = vars.choose_multiple(rng, arity).copied().collect();
        let all: Vec<Vec<i8>> = (0..arity).map(|_| [-1i8, 1]).multi_cartesian_product().collect();
        let mut pats: Vec<Vec<i8>> = all.iter().filter(|_| rng.random_bool(0.5)).cloned().collect();
        if pats.is_empty() {
            pats.push(all[rng.random_range(0..all.len())].clone());
        }
        constraints.push(Constraint::new(chosen, pats)?);
    }
    CspInstance::new(n, d, constraints)
}

/// MaxBisection on K_n.
pub fn complete_graph(n: usize) -> Result<CspInstance> {
    let edges: Vec<(usize, usize)> = (0..n).tuple_combinations().collect();
    CspInstance::from_edges(n, &edges)
}

/// MaxBisection on the star with center 0.
pub fn star(n: usize) -> Result<CspInstance> {
    let edges: Vec<(usize, usize)> = (1..n).map(|i| (0, i)).collect();
    CspInstance::from_edges(n, &edges)
}

/// MaxBisection on the path 0–1–⋯–(n−1).
pub fn path(n: usize) -> Result<CspInstance> {
    let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
    CspInstance::from_edges(n, &edges)
}

/// m random constraints touching only the first k variables.
pub fn planted_instance<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize, k: usize, m: usize) -> Result<CspInstance> {
    let inner = random_instance(rng, k, d, m)?;
    CspInstance::new(n, d, inner.constraints().to_vec())
}

/// Degree-≤d χ polynomial on `vars` with coefficients in γ·{−r..=r}.
pub fn random_poly<R: Rng + ?Sized>(rng: &mut R, n: usize, vars: &[usize], d: usize, gamma: &Rational, r: i64) -> MultilinearPoly {
    let mut f = MultilinearPoly::zero(n, Basis::Chi);
    for k in 0..=d.min(vars.len()) {
        for s in vars.iter().copied().combinations(k) {
            let c = rng.random_range(-r..=r);
            if c != 0 {
                f.add_term(Subset::new(s).expect("distinct"), Quad::from_rational(gamma * Rational::from_integer(c.into())));
            }
        }
    }
    f
}

/// g(x_1..x_k) + (Σx_i − shift)·h* with g of degree d on the first k
/// variables and h* random of degree d−1 on all n variables. On the slice
/// with Σx_i = shift this equals g.
pub fn planted_poly<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize, k: usize, shift: i64, gamma: &Rational) -> MultilinearPoly {
    let kernel: Vec<usize> = (0..k).collect();
    let all: Vec<usize> = (0..n).collect();
    let g = random_poly(rng, n, &kernel, d, gamma, 3);
    let h = random_poly(rng, n, &all, d - 1, gamma, 2);
    let mut sum = MultilinearPoly::sum_of_variables(n, Basis::Chi);
    sum.add_term(Subset::empty(), Quad::from_int(-shift));
    g.add(&sum.multiply(&h).expect("same basis")).expect("same basis")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generators() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = random_instance(&mut rng, 8, 3, 20).unwrap();
        assert_eq!(inst.m(), 20);
        assert!(inst.constraints().iter().all(|c| c.arity() <= 3 && !c.patterns().is_empty()));
        assert_eq!(complete_graph(5).unwrap().m(), 10);
        assert_eq!(star(6).unwrap().m(), 5);
        assert_eq!(path(4).unwrap().m(), 3);
        let p = planted_instance(&mut rng, 10, 2, 4, 6).unwrap();
        assert!(p.constraints().iter().all(|c| c.vars().iter().all(|&v| v < 4)));
    }
}
