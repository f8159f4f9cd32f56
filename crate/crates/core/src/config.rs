//! Caps and tolerances, loadable from a `key = value` file.
//!
//! ```text
//! enum_cap = 40
//! dense_cap = 5000
//! float_tol = 1e-9
//! p0 = 1/100
//! ```

use num_traits::{One, Zero};

use crate::error::{input, Error, Result};
use crate::quad::{fmt_rational, parse_rational, rat, Rational};

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    /// Largest kernel that will be enumerated.
    pub enum_cap: usize,
    /// Largest dimension for a dense matrix build.
    pub dense_cap: usize,
    /// Tolerance for floating-point paths.
    pub float_tol: f64,
    /// Admissible p range is [p0, 1 − p0].
    pub p0: Rational,
    /// Largest number of slice points the oracle will enumerate.
    pub oracle_cap: u128,
    /// Projections with more unknowns than this switch to floating point.
    pub projection_exact_cap: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            enum_cap: 40,
            dense_cap: 5000,
            float_tol: 1e-9,
            p0: rat(1, 100),
            oracle_cap: 10_000_000,
            projection_exact_cap: 2000,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut cfg = Config::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || line.starts_with('[') {
                continue;
            }
            let perr = |msg: String| Error::Parse { line: idx + 1, msg };
            let (key, value) = line.split_once('=').ok_or_else(|| perr("expected `key = value`".into()))?;
            let key = key.trim();
            let value = value.trim().trim_matches('"');
            let uint = |v: &str| v.replace('_', "").parse::<u128>().map_err(|_| perr(format!("bad integer for {key}: {v}")));
            match key {
                "enum_cap" => cfg.enum_cap = uint(value)? as usize,
                "dense_cap" => cfg.dense_cap = uint(value)? as usize,
                "oracle_cap" => cfg.oracle_cap = uint(value)?,
                "projection_exact_cap" => cfg.projection_exact_cap = uint(value)? as usize,
                "float_tol" => {
                    cfg.float_tol = value.parse().map_err(|_| perr(format!("bad float for float_tol: {value}")))?
                }
                "p0" => cfg.p0 = parse_rational(value).ok_or_else(|| perr(format!("bad rational for p0: {value}")))?,
                other => return Err(perr(format!("unknown key `{other}`"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.float_tol > 0.0 && self.float_tol < 1.0) {
            return input("float_tol must lie in (0, 1)");
        }
        if self.p0 < Rational::zero() || &self.p0 + &self.p0 >= Rational::one() {
            return input(format!("p0 = {} must lie in [0, 1/2)", fmt_rational(&self.p0)));
        }
        Ok(())
    }

    /// Rejects p outside [p0, 1 − p0].
    pub fn check_p(&self, p: &Rational) -> Result<()> {
        if *p < self.p0 || *p > Rational::one() - &self.p0 {
            return input(format!(
                "p = {} outside the admissible range [{}, {}]",
                fmt_rational(p),
                fmt_rational(&self.p0),
                fmt_rational(&(Rational::one() - &self.p0))
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_keys() {
        let c = Config::parse("enum_cap = 20\n# note\np0 = 1/10\nfloat_tol=1e-6\n").unwrap();
        assert_eq!(c.enum_cap, 20);
        assert_eq!(c.p0, rat(1, 10));
        assert_eq!(c.float_tol, 1e-6);
        assert_eq!(c.dense_cap, 5000);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(Config::parse("nope = 1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(Config::parse("\nenum_cap 3"), Err(Error::Parse { line: 2, .. })));
        assert!(Config::parse("p0 = 3/4").is_err());
    }

    #[test]
    fn p_range() {
        let c = Config::default();
        assert!(c.check_p(&rat(1, 2)).is_ok());
        assert!(c.check_p(&rat(1, 200)).is_err());
        assert!(c.check_p(&rat(199, 200)).is_err());
    }
}
