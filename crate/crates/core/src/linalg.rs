//! Small dense linear algebra: exact Gauss–Jordan over Q(√k) and a float
//! least-squares fallback.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::quad::Quad;

/// Solves `a·x = b` exactly. Free variables are set to zero, so for a
/// consistent singular system the result is one particular solution.
pub fn solve_exact(mut a: Vec<Vec<Quad>>, mut b: Vec<Quad>) -> Result<Vec<Quad>> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(pr) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, pr);
        b.swap(r, pr);
        let inv = a[r][c].inv();
        for x in a[r][c..].iter_mut() {
            if !x.is_zero() {
                *x = &*x * &inv;
            }
        }
        b[r] = &b[r] * &inv;
        let pivot_row = a[r].clone();
        let pivot_b = b[r].clone();
        let nz: Vec<usize> = (c..cols).filter(|&j| !pivot_row[j].is_zero()).collect();
        for i in 0..rows {
            if i == r || a[i][c].is_zero() {
                continue;
            }
            let factor = a[i][c].clone();
            for &j in &nz {
                let v = &a[i][j] - &(&factor * &pivot_row[j]);
                a[i][j] = v;
            }
            b[i] = &b[i] - &(&factor * &pivot_b);
        }
        pivots.push((r, c));
        r += 1;
    }
    if b[r..].iter().any(|x| !x.is_zero()) {
        return Err(Error::Numerical("inconsistent linear system".into()));
    }
    let mut x = vec![Quad::zero(); cols];
    for (row, col) in pivots {
        x[col] = b[row].clone();
    }
    Ok(x)
}

/// Minimum-norm least-squares solution through an SVD.
pub fn solve_float(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let x = svd
        .solve(b, tol * smax.max(1.0))
        .map_err(|e| Error::Numerical(format!("SVD solve failed: {e}")))?;
    let resid = (a * &x - b).norm();
    let smin = svd.singular_values.iter().copied().filter(|s| *s > tol * smax).fold(f64::INFINITY, f64::min);
    if !resid.is_finite() || !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical(format!(
            "least-squares solve diverged (condition estimate {:.3e})",
            smax / smin
        )));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::rat;

    fn q(n: i64) -> Quad {
        Quad::from_int(n)
    }

    #[test]
    fn exact_regular() {
        let a = vec![vec![q(2), q(1)], vec![q(1), q(3)]];
        let x = solve_exact(a, vec![q(3), q(5)]).unwrap();
        assert_eq!(x, vec![Quad::from_rational(rat(4, 5)), Quad::from_rational(rat(7, 5))]);
    }

    #[test]
    fn exact_singular_consistent() {
        let a = vec![vec![q(1), q(1)], vec![q(2), q(2)]];
        let x = solve_exact(a, vec![q(3), q(6)]).unwrap();
        assert_eq!(x, vec![q(3), q(0)]);
        let a = vec![vec![q(1), q(1)], vec![q(2), q(2)]];
        assert!(solve_exact(a, vec![q(3), q(5)]).is_err());
    }

    #[test]
    fn float_least_squares() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 2.0]);
        let x = solve_float(&a, &b, 1e-12).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }
}
