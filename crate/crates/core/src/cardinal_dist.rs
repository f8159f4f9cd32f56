//! The uniform distribution D_p on the slice {x : Σx_i = (1−2p)n}.

use std::collections::HashMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::csp_model::GlobalCardinality;
use crate::error::{input, Result};
use crate::poly::{binomial, Assignment, Basis, Bias, MultilinearPoly, Subset};
use crate::quad::{Quad, Rational};

/// δ_0..δ_kmax, with δ_k = E_{D_p}[φ_S] for |S| = k.
///
/// Uses k·δ_{k−1} + k·q·δ_k + (n−k)·δ_{k+1} = 0, which follows from
/// E[(Σφ_i)·φ_S] = 0 on the slice.
pub fn delta_sequence(n: usize, p: &Rational, kmax: usize) -> Result<Vec<Quad>> {
    if kmax > n {
        return input(format!("kmax = {kmax} exceeds n = {n}"));
    }
    GlobalCardinality::new(n, p.clone())?;
    let bias = Bias::new(p.clone())?;
    Ok(delta_from_q(n, bias.q(), kmax))
}

fn delta_from_q(n: usize, q: &Quad, kmax: usize) -> Vec<Quad> {
    let mut d = vec![Quad::one()];
    if kmax >= 1 {
        d.push(Quad::zero());
    }
    for k in 1..kmax {
        let kq = Quad::from_int(k as i64);
        let num = &(&kq * &d[k - 1]) + &(&(&kq * q) * &d[k]);
        let next = num.scale(&Rational::new(BigInt::from(-1), BigInt::from(n - k)));
        d.push(next);
    }
    d
}

/// ε_k = E_{D_p}[χ_S] for |S| = k: a hypergeometric average of (−1)^j.
pub fn chi_delta_sequence(n: usize, minus: usize, kmax: usize) -> Vec<Rational> {
    (0..=kmax)
        .map(|k| {
            let total = binomial(n, k);
            let mut acc = BigInt::zero();
            for j in 0..=k.min(minus) {
                if k - j > n - minus {
                    continue;
                }
                let w = BigInt::from(binomial(minus, j)) * BigInt::from(binomial(n - minus, k - j));
                if j % 2 == 0 {
                    acc += w;
                } else {
                    acc -= w;
                }
            }
            Rational::new(acc, BigInt::from(total))
        })
        .collect()
}

/// Point estimate with standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

#[derive(Clone, Debug)]
pub struct CardinalDist {
    card: GlobalCardinality,
    bias: Arc<Bias>,
    delta: Vec<Quad>,
    chi_delta: Vec<Rational>,
}

impl CardinalDist {
    pub fn new(n: usize, p: Rational) -> Result<Self> {
        Self::from_cardinality(&GlobalCardinality::new(n, p)?)
    }

    pub fn from_cardinality(card: &GlobalCardinality) -> Result<Self> {
        let bias = Bias::new(card.p().clone())?;
        let n = card.n();
        let delta = delta_from_q(n, bias.q(), n);
        let chi_delta = chi_delta_sequence(n, card.minus_count(), n);
        Ok(CardinalDist { card: card.clone(), bias, delta, chi_delta })
    }

    pub fn n(&self) -> usize {
        self.card.n()
    }

    pub fn p(&self) -> &Rational {
        self.card.p()
    }

    pub fn q(&self) -> &Quad {
        self.bias.q()
    }

    pub fn cardinality(&self) -> &GlobalCardinality {
        &self.card
    }

    pub fn bias(&self) -> &Arc<Bias> {
        &self.bias
    }

    pub fn phi_basis(&self) -> Basis {
        Basis::Phi(self.bias.clone())
    }

    pub fn delta(&self, k: usize) -> &Quad {
        &self.delta[k]
    }

    pub fn deltas(&self) -> &[Quad] {
        &self.delta
    }

    /// E_{D_p}[χ_S] for |S| = k.
    pub fn chi_delta(&self, k: usize) -> &Rational {
        &self.chi_delta[k]
    }

    fn check(&self, f: &MultilinearPoly) -> Result<()> {
        if f.n() != self.n() {
            return input(format!("polynomial has {} variables, distribution has {}", f.n(), self.n()));
        }
        match f.basis() {
            Basis::Chi => Ok(()),
            Basis::Phi(b) if b.p() == self.p() => Ok(()),
            Basis::Phi(_) => input(format!("basis {} does not match p of the distribution", f.basis())),
        }
    }

    /// E[φ_S φ_T] with |SΔT| = sd and |S∩T| = c, expanding φ_i² = qφ_i + 1.
    pub fn pair_moment(&self, sd: usize, c: usize) -> Quad {
        let q = self.q();
        let mut acc = Quad::zero();
        let mut qr = Quad::one();
        for r in 0..=c {
            let w = Rational::from_integer(BigInt::from(binomial(c, r)));
            acc += &(&qr * &self.delta[sd + r]).scale(&w);
            qr = &qr * q;
        }
        acc
    }

    /// E_{D_p}[f] = Σ_S f̂(S)·δ_{|S|}.
    pub fn expectation(&self, f: &MultilinearPoly) -> Result<Quad> {
        self.check(f)?;
        Ok(match f.basis() {
            Basis::Chi => f.terms().map(|(s, c)| c.scale(&self.chi_delta[s.len()])).sum(),
            Basis::Phi(_) => f.terms().map(|(s, c)| c * &self.delta[s.len()]).sum(),
        })
    }

    /// E_{D_p}[f²], exact.
    pub fn second_moment(&self, f: &MultilinearPoly) -> Result<Quad> {
        self.check(f)?;
        let terms: Vec<(&Subset, &Quad)> = f.terms().collect();
        let mut cache: HashMap<(usize, usize), Quad> = HashMap::new();
        let mut acc = Quad::zero();
        for (i, (s, a)) in terms.iter().enumerate() {
            for (j, (t, b)) in terms.iter().enumerate().skip(i) {
                let c = s.intersection_len(t);
                let sd = s.len() + t.len() - 2 * c;
                let e = match f.basis() {
                    Basis::Chi => cache
                        .entry((sd, 0))
                        .or_insert_with(|| Quad::from_rational(self.chi_delta[sd].clone()))
                        .clone(),
                    Basis::Phi(_) => cache.entry((sd, c)).or_insert_with(|| self.pair_moment(sd, c)).clone(),
                };
                let mut v = &(*a * *b) * &e;
                if i != j {
                    v = v.scale(&Rational::from_integer(BigInt::from(2)));
                }
                acc += &v;
            }
        }
        Ok(acc)
    }

    /// Σ_{S,T} f̂(S)f̂(T)·δ_{|SΔT|}: drops the q-expansion of shared indices.
    /// Exact only at p = 1/2.
    pub fn second_moment_simplified(&self, f: &MultilinearPoly) -> Result<Quad> {
        self.check(f)?;
        let mut acc = Quad::zero();
        for (s, a) in f.terms() {
            for (t, b) in f.terms() {
                let sd = s.len() + t.len() - 2 * s.intersection_len(t);
                acc += &(&(a * b) * &self.delta[sd]);
            }
        }
        Ok(acc)
    }

    pub fn variance(&self, f: &MultilinearPoly) -> Result<Quad> {
        let m = self.expectation(f)?;
        Ok(&self.second_moment(f)? - &m.square())
    }

    /// A uniform point of the slice: Fisher–Yates shuffle of the fixed
    /// multiset of pn minus ones and (1−p)n plus ones.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Assignment {
        let mut v = vec![1i8; self.n()];
        for x in v.iter_mut().take(self.card.minus_count()) {
            *x = -1;
        }
        v.shuffle(rng);
        Assignment::new(v).expect("entries are ±1")
    }

    pub fn sample_seeded(&self, seed: u64) -> Assignment {
        self.sample(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// Sample mean of f^k with its standard error.
    pub fn mc_moment(&self, f: &MultilinearPoly, k: u32, samples: usize, seed: u64) -> Result<McEstimate> {
        self.check(f)?;
        if samples == 0 {
            return input("sample count must be positive");
        }
        if ![1, 2, 4].contains(&k) {
            return input(format!("moment order {k} not in {{1, 2, 4}}"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..samples {
            let v = f.evaluate_f64(&self.sample(&mut rng)).powi(k as i32);
            sum += v;
            sum_sq += v * v;
        }
        let nf = samples as f64;
        let mean = sum / nf;
        let var = if samples > 1 { ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
        Ok(McEstimate { mean, stderr: (var / nf).sqrt(), samples })
    }
}

/// True when `p` equals 1/2.
pub fn is_half(p: &Rational) -> bool {
    p + p == Rational::one()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{rat, rat_int};

    #[test]
    fn first_deltas() {
        for (n, p) in [(6, rat(1, 2)), (9, rat(1, 3)), (12, rat(1, 4))] {
            let d = delta_sequence(n, &p, 3).unwrap();
            assert_eq!(d[0], Quad::one());
            assert_eq!(d[1], Quad::zero());
            assert_eq!(d[2], Quad::from_rational(rat(-1, n as i64 - 1)));
            let q = Bias::new(p).unwrap().q().clone();
            let expect = q.scale(&rat(2, ((n - 1) * (n - 2)) as i64));
            assert_eq!(d[3], expect);
        }
        assert!(delta_sequence(4, &rat(1, 2), 5).is_err());
        assert!(delta_sequence(5, &rat(1, 2), 2).is_err());
    }

    #[test]
    fn delta_four_on_four_bisection() {
        let d = delta_sequence(4, &rat(1, 2), 4).unwrap();
        assert_eq!(d[4], Quad::one());
    }

    #[test]
    fn chi_route_matches_at_half() {
        let dist = CardinalDist::new(10, rat(1, 2)).unwrap();
        for k in 0..=10 {
            assert_eq!(Quad::from_rational(dist.chi_delta(k).clone()), *dist.delta(k));
        }
    }

    #[test]
    fn constant_moments() {
        let dist = CardinalDist::new(6, rat(1, 3)).unwrap();
        let c = MultilinearPoly::constant(6, Basis::Chi, Quad::from_int(3));
        assert_eq!(dist.expectation(&c).unwrap(), Quad::from_int(3));
        assert_eq!(dist.variance(&c).unwrap(), Quad::zero());
        let est = dist.mc_moment(&c, 4, 10, 1).unwrap();
        assert_eq!(est.mean, 81.0);
        assert_eq!(est.stderr, 0.0);
        assert!(dist.mc_moment(&c, 2, 0, 1).is_err());
        assert!(dist.mc_moment(&c, 3, 5, 1).is_err());
    }

    #[test]
    fn p_mismatch_rejected() {
        let dist = CardinalDist::new(6, rat(1, 3)).unwrap();
        let f = MultilinearPoly::constant(6, Basis::phi(rat(1, 2)).unwrap(), Quad::one());
        assert!(dist.expectation(&f).is_err());
    }

    #[test]
    fn sample_counts() {
        let dist = CardinalDist::new(6, rat(1, 3)).unwrap();
        for seed in 0..20 {
            assert_eq!(dist.sample_seeded(seed).count_minus(), 2);
        }
        assert_eq!(dist.sample_seeded(7), dist.sample_seeded(7));
        let _ = rat_int(0);
    }
}
