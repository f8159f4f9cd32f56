//! Exact arithmetic in a real quadratic field Q(√k).
//!
//! The p-biased basis needs √(p(1−p)), so every moment at p ≠ 1/2 lives in
//! Q(√k) for one squarefree integer k. Values are `a + b√k` with rational
//! `a`, `b`. A value with `b = 0` carries no radicand and mixes freely with
//! any other value; mixing two different radicands is a logic error and
//! panics.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Roots;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

/// Shorthand for the rational `n/d`.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parse `a`, `a/b` or a finite decimal such as `0.25` into a rational.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    if let Some((ip, fp)) = s.split_once('.') {
        if fp.is_empty() || !fp.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let neg = ip.starts_with('-');
        let ip_abs = ip.trim_start_matches(['-', '+']);
        let whole: BigInt = if ip_abs.is_empty() { BigInt::zero() } else { ip_abs.parse().ok()? };
        let frac: BigInt = fp.parse().ok()?;
        let scale = num_traits::pow(BigInt::from(10), fp.len());
        let v = Rational::new(whole * &scale + frac, scale);
        return Some(if neg { -v } else { v });
    }
    s.parse::<BigInt>().ok().map(Rational::from_integer)
}

/// Exact rational in lowest terms as `n` or `n/d`.
pub fn fmt_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Writes `m = s²·k` with `k` squarefree, for `m > 0`.
fn squarefree_split(m: &BigInt) -> (BigInt, BigInt) {
    let root = m.sqrt();
    if &root * &root == *m {
        return (root, BigInt::one());
    }
    let Some(mut rest) = m.to_u128() else {
        return (BigInt::one(), m.clone());
    };
    let mut square = 1u128;
    let mut core = 1u128;
    let limit = (rest as f64).cbrt() as u128 + 2;
    let mut p = 2u128;
    while p <= limit && p * p <= rest {
        let mut e = 0u32;
        while rest % p == 0 {
            rest /= p;
            e += 1;
        }
        square *= p.pow(e / 2);
        if e % 2 == 1 {
            core *= p;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    // What remains has at most two prime factors above the cube root.
    let r = rest.sqrt();
    if r * r == rest {
        square *= r;
    } else {
        core *= rest;
    }
    (BigInt::from(square), BigInt::from(core))
}

/// An element `rat + irr·√rad` of a real quadratic field.
#[derive(Clone, Debug)]
pub struct Quad {
    rat: Rational,
    irr: Rational,
    rad: Option<Arc<BigInt>>,
}

impl Quad {
    pub fn zero() -> Self {
        Quad { rat: Rational::zero(), irr: Rational::zero(), rad: None }
    }

    pub fn one() -> Self {
        Quad::from_rational(Rational::one())
    }

    pub fn from_rational(r: Rational) -> Self {
        Quad { rat: r, irr: Rational::zero(), rad: None }
    }

    pub fn from_int(n: i64) -> Self {
        Quad::from_rational(rat_int(n))
    }

    /// Exact square root of a nonnegative rational.
    pub fn sqrt_of(r: &Rational) -> Self {
        assert!(!r.is_negative(), "square root of a negative rational");
        if r.is_zero() {
            return Quad::zero();
        }
        // √(a/b) = √(ab)/b
        let (s, k) = squarefree_split(&(r.numer() * r.denom()));
        let coef = Rational::new(s, r.denom().clone());
        if k.is_one() {
            Quad::from_rational(coef)
        } else {
            Quad { rat: Rational::zero(), irr: coef, rad: Some(Arc::new(k)) }
        }
    }

    fn normalize(mut self) -> Self {
        if self.irr.is_zero() {
            self.rad = None;
        }
        self
    }

    fn join(a: &Option<Arc<BigInt>>, b: &Option<Arc<BigInt>>) -> Option<Arc<BigInt>> {
        match (a, b) {
            (None, x) | (x, None) => x.clone(),
            (Some(x), Some(y)) => {
                assert!(x == y, "mixing values from different quadratic fields");
                Some(x.clone())
            }
        }
    }

    pub fn rational_part(&self) -> &Rational {
        &self.rat
    }

    pub fn irrational_part(&self) -> &Rational {
        &self.irr
    }

    pub fn radicand(&self) -> Option<&BigInt> {
        self.rad.as_deref()
    }

    pub fn is_zero(&self) -> bool {
        self.rat.is_zero() && self.irr.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.irr.is_zero()
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        self.irr.is_zero().then_some(&self.rat)
    }

    pub fn to_rational(&self) -> Option<Rational> {
        self.as_rational().cloned()
    }

    pub fn to_f64(&self) -> f64 {
        let a = rational_to_f64(&self.rat);
        match &self.rad {
            None => a,
            Some(k) => a + rational_to_f64(&self.irr) * k.to_f64().unwrap_or(f64::NAN).sqrt(),
        }
    }

    /// Exact sign: -1, 0 or 1.
    pub fn signum(&self) -> i32 {
        let sa = sign(&self.rat);
        let sb = sign(&self.irr);
        if sb == 0 {
            return sa;
        }
        if sa == 0 || sa == sb {
            return sb;
        }
        let k = Rational::from_integer(self.rad.as_deref().cloned().unwrap_or_else(BigInt::one));
        let a2 = &self.rat * &self.rat;
        let b2k = &self.irr * &self.irr * k;
        if a2 > b2k {
            sa
        } else {
            sb
        }
    }

    pub fn abs(&self) -> Quad {
        if self.signum() < 0 {
            -self
        } else {
            self.clone()
        }
    }

    pub fn square(&self) -> Quad {
        self * self
    }

    pub fn conjugate(&self) -> Quad {
        Quad { rat: self.rat.clone(), irr: -&self.irr, rad: self.rad.clone() }
    }

    /// `a² − b²k`, the field norm.
    pub fn norm(&self) -> Rational {
        let k = Rational::from_integer(self.rad.as_deref().cloned().unwrap_or_else(BigInt::zero));
        &self.rat * &self.rat - &self.irr * &self.irr * k
    }

    pub fn inv(&self) -> Quad {
        assert!(!self.is_zero(), "division by zero");
        let n = self.norm();
        let c = self.conjugate();
        Quad { rat: c.rat / &n, irr: c.irr / &n, rad: c.rad }.normalize()
    }

    pub fn pow(&self, e: u32) -> Quad {
        let mut acc = Quad::one();
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    pub fn scale(&self, r: &Rational) -> Quad {
        Quad { rat: &self.rat * r, irr: &self.irr * r, rad: self.rad.clone() }.normalize()
    }

    /// Exact string, e.g. `3/4` or `1/3+2/9*sqrt(2)`.
    pub fn to_exact_string(&self) -> String {
        match &self.rad {
            None => fmt_rational(&self.rat),
            Some(k) => {
                let irr = format!("{}*sqrt({})", fmt_rational(&self.irr.abs()), k);
                let op = if self.irr.is_negative() { "-" } else { "+" };
                if self.rat.is_zero() {
                    if self.irr.is_negative() {
                        format!("-{irr}")
                    } else {
                        irr
                    }
                } else {
                    format!("{}{}{}", fmt_rational(&self.rat), op, irr)
                }
            }
        }
    }
}

fn sign(r: &Rational) -> i32 {
    if r.is_zero() {
        0
    } else if r.is_negative() {
        -1
    } else {
        1
    }
}

impl Default for Quad {
    fn default() -> Self {
        Quad::zero()
    }
}

impl From<Rational> for Quad {
    fn from(r: Rational) -> Self {
        Quad::from_rational(r)
    }
}

impl From<i64> for Quad {
    fn from(n: i64) -> Self {
        Quad::from_int(n)
    }
}

impl PartialEq for Quad {
    fn eq(&self, other: &Self) -> bool {
        self.rat == other.rat
            && self.irr == other.irr
            && (self.irr.is_zero() || self.rad == other.rad)
    }
}

impl Eq for Quad {}

impl PartialOrd for Quad {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Quad {
    fn cmp(&self, other: &Self) -> Ordering {
        (self - other).signum().cmp(&0)
    }
}

impl fmt::Display for Quad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_exact_string())
    }
}

impl Neg for &Quad {
    type Output = Quad;
    fn neg(self) -> Quad {
        Quad { rat: -&self.rat, irr: -&self.irr, rad: self.rad.clone() }
    }
}

impl Neg for Quad {
    type Output = Quad;
    fn neg(self) -> Quad {
        Quad { rat: -self.rat, irr: -self.irr, rad: self.rad }
    }
}

impl Add<&Quad> for &Quad {
    type Output = Quad;
    fn add(self, o: &Quad) -> Quad {
        let rad = Quad::join(&self.rad, &o.rad);
        Quad { rat: &self.rat + &o.rat, irr: &self.irr + &o.irr, rad }.normalize()
    }
}

impl Sub<&Quad> for &Quad {
    type Output = Quad;
    fn sub(self, o: &Quad) -> Quad {
        let rad = Quad::join(&self.rad, &o.rad);
        Quad { rat: &self.rat - &o.rat, irr: &self.irr - &o.irr, rad }.normalize()
    }
}

impl Mul<&Quad> for &Quad {
    type Output = Quad;
    fn mul(self, o: &Quad) -> Quad {
        if self.irr.is_zero() {
            return o.scale(&self.rat);
        }
        if o.irr.is_zero() {
            return self.scale(&o.rat);
        }
        let rad = Quad::join(&self.rad, &o.rad);
        let k = Rational::from_integer(rad.as_deref().cloned().unwrap());
        let rat = &self.rat * &o.rat + &self.irr * &o.irr * k;
        let irr = &self.rat * &o.irr + &self.irr * &o.rat;
        Quad { rat, irr, rad }.normalize()
    }
}

impl Div<&Quad> for &Quad {
    type Output = Quad;
    fn div(self, o: &Quad) -> Quad {
        if o.irr.is_zero() {
            assert!(!o.rat.is_zero(), "division by zero");
            return self.scale(&o.rat.recip());
        }
        self * &o.inv()
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Quad> for Quad {
            type Output = Quad;
            fn $m(self, o: Quad) -> Quad {
                (&self).$m(&o)
            }
        }
        impl $tr<&Quad> for Quad {
            type Output = Quad;
            fn $m(self, o: &Quad) -> Quad {
                (&self).$m(o)
            }
        }
        impl $tr<Quad> for &Quad {
            type Output = Quad;
            fn $m(self, o: Quad) -> Quad {
                self.$m(&o)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl AddAssign<&Quad> for Quad {
    fn add_assign(&mut self, o: &Quad) {
        if o.irr.is_zero() {
            self.rat += &o.rat;
            return;
        }
        self.rad = Quad::join(&self.rad, &o.rad);
        self.rat += &o.rat;
        self.irr += &o.irr;
        if self.irr.is_zero() {
            self.rad = None;
        }
    }
}

impl AddAssign<Quad> for Quad {
    fn add_assign(&mut self, o: Quad) {
        *self += &o;
    }
}

impl SubAssign<&Quad> for Quad {
    fn sub_assign(&mut self, o: &Quad) {
        *self += &(-o);
    }
}

impl SubAssign<Quad> for Quad {
    fn sub_assign(&mut self, o: Quad) {
        *self += &(-o);
    }
}

impl MulAssign<&Quad> for Quad {
    fn mul_assign(&mut self, o: &Quad) {
        *self = &*self * o;
    }
}

impl std::iter::Sum for Quad {
    fn sum<I: Iterator<Item = Quad>>(iter: I) -> Quad {
        let mut acc = Quad::zero();
        for x in iter {
            acc += &x;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_canonical_forms() {
        assert_eq!(Quad::sqrt_of(&rat(1, 4)), Quad::from_rational(rat(1, 2)));
        let s = Quad::sqrt_of(&rat(2, 9));
        assert_eq!(s.radicand(), Some(&BigInt::from(2)));
        assert_eq!(s.irrational_part(), &rat(1, 3));
        // √(8/9) and 2·√(2/9) land in the same canonical form
        assert_eq!(Quad::sqrt_of(&rat(8, 9)), s.scale(&rat_int(2)));
        assert_eq!(Quad::sqrt_of(&rat(3, 16)).square(), Quad::from_rational(rat(3, 16)));
    }

    #[test]
    fn squarefree_split_large() {
        let m = BigInt::from(4u64 * 1_000_003u64 * 1_000_033u64);
        let (s, k) = squarefree_split(&m);
        assert_eq!(s, BigInt::from(2));
        assert_eq!(k, BigInt::from(1_000_003u64 * 1_000_033u64));
        let m = BigInt::from(9u64 * 1_000_003u64 * 1_000_003u64 * 7);
        assert_eq!(squarefree_split(&m), (BigInt::from(3 * 1_000_003u64), BigInt::from(7)));
    }

    #[test]
    fn field_ops_and_sign() {
        let r2 = Quad::sqrt_of(&rat_int(2));
        let x = Quad::from_int(3) - &r2; // 3 - √2 > 0
        assert_eq!(x.signum(), 1);
        let y = Quad::from_int(1) - &r2; // 1 - √2 < 0
        assert_eq!(y.signum(), -1);
        assert_eq!(&x * &x.inv(), Quad::one());
        assert_eq!((&x / &y) * &y, x);
        assert!(y < x);
        assert_eq!(x.to_exact_string(), "3-1*sqrt(2)");
        assert!((x.to_f64() - (3.0 - 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rational("1/100"), Some(rat(1, 100)));
        assert_eq!(parse_rational("-0.25"), Some(rat(-1, 4)));
        assert_eq!(parse_rational("7"), Some(rat_int(7)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("x"), None);
    }

    #[test]
    #[should_panic(expected = "different quadratic fields")]
    fn mixing_fields_panics() {
        let _ = Quad::sqrt_of(&rat_int(2)) + Quad::sqrt_of(&rat_int(3));
    }
}
