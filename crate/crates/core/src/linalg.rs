//! Dense generic elimination and a sparse Gauss–Seidel/SOR solver.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn pivot_row<S: Scalar>(m: &[Vec<S>], col: usize) -> Option<usize> {
    let n = m.len();
    if S::is_exact() {
        (col..n).find(|&r| !m[r][col].is_zero())
    } else {
        let (mut best, mut best_mag) = (None, 0.0);
        for (r, row) in m.iter().enumerate().skip(col) {
            let mag = row[col].magnitude();
            if mag > best_mag {
                best_mag = mag;
                best = Some(r);
            }
        }
        best
    }
}

/// Determinant by Gaussian elimination.
pub fn determinant<S: Scalar>(mut m: Vec<Vec<S>>) -> S {
    let n = m.len();
    let mut det = S::one();
    for col in 0..n {
        let Some(p) = pivot_row(&m, col) else {
            return S::zero();
        };
        if p != col {
            m.swap(p, col);
            det = -det;
        }
        let piv = m[col][col].clone();
        det = det * piv.clone();
        for r in col + 1..n {
            if m[r][col].is_zero() {
                continue;
            }
            let f = m[r][col].clone() / piv.clone();
            for c in col..n {
                let v = m[col][c].clone() * f.clone();
                m[r][c] = m[r][c].clone() - v;
            }
        }
    }
    det
}

/// Natural log of |det| for large float matrices, together with its sign.
pub fn log_abs_determinant(mut m: Vec<Vec<f64>>) -> (f64, f64) {
    let n = m.len();
    let mut sign = 1.0;
    let mut acc = 0.0;
    for col in 0..n {
        let Some(p) = pivot_row(&m, col) else {
            return (f64::NEG_INFINITY, 0.0);
        };
        if p != col {
            m.swap(p, col);
            sign = -sign;
        }
        let piv = m[col][col];
        if piv < 0.0 {
            sign = -sign;
        }
        acc += piv.abs().ln();
        for r in col + 1..n {
            let f = m[r][col] / piv;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                m[r][c] -= m[col][c] * f;
            }
        }
    }
    (acc, sign)
}

/// Solve `m x = b`.
pub fn solve<S: Scalar>(mut m: Vec<Vec<S>>, mut b: Vec<S>) -> Result<Vec<S>> {
    let n = m.len();
    if b.len() != n {
        return Err(Error::Numeric("right-hand side has wrong length".into()));
    }
    for col in 0..n {
        let p = pivot_row(&m, col).ok_or_else(|| Error::Numeric("singular system".into()))?;
        m.swap(p, col);
        b.swap(p, col);
        let piv = m[col][col].clone();
        for r in col + 1..n {
            if m[r][col].is_zero() {
                continue;
            }
            let f = m[r][col].clone() / piv.clone();
            for c in col..n {
                let v = m[col][c].clone() * f.clone();
                m[r][c] = m[r][c].clone() - v;
            }
            let v = b[col].clone() * f;
            b[r] = b[r].clone() - v;
        }
    }
    let mut x = vec![S::zero(); n];
    for r in (0..n).rev() {
        let mut acc = b[r].clone();
        for c in r + 1..n {
            acc = acc - m[r][c].clone() * x[c].clone();
        }
        x[r] = acc / m[r][r].clone();
    }
    Ok(x)
}

/// Sparse row of a substochastic matrix: `(column, entry)` pairs.
pub type SparseRow = Vec<(usize, f64)>;

/// Solve `h = P h + b` for a substochastic `P` by successive over-relaxation.
///
/// Every state must reach absorption with positive probability, otherwise
/// the iteration does not converge and an error is returned.
pub fn solve_absorbing(rows: &[SparseRow], b: &[f64], tol: f64, max_sweeps: usize) -> Result<Vec<f64>> {
    let n = rows.len();
    let mut h = b.to_vec();
    let omega = 2.0 / (1.0 + (std::f64::consts::PI / (n as f64).sqrt().max(2.0)).sin());
    let omega = omega.min(1.95);
    for sweep in 0..max_sweeps {
        let mut delta: f64 = 0.0;
        for v in 0..n {
            let mut diag = 0.0;
            let mut acc = b[v];
            for &(u, p) in &rows[v] {
                if u == v {
                    diag += p;
                } else {
                    acc += p * h[u];
                }
            }
            if diag >= 1.0 {
                return Err(Error::Numeric(format!("state {v} never leaves itself")));
            }
            let gs = acc / (1.0 - diag);
            let new = h[v] + omega * (gs - h[v]);
            delta = delta.max((new - h[v]).abs());
            h[v] = new;
        }
        if delta < tol && sweep > 0 {
            for x in &mut h {
                if *x < 0.0 && *x > -1e-9 {
                    *x = 0.0;
                }
            }
            return Ok(h);
        }
        if !delta.is_finite() {
            return Err(Error::Numeric("relaxation diverged".into()));
        }
    }
    Err(Error::Numeric(format!("no convergence after {max_sweeps} sweeps")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    #[test]
    fn determinant_exact_two_by_two() {
        let m: Vec<Vec<BigRational>> = vec![
            vec![BigRational::from_ratio(2, 1), BigRational::from_ratio(-1, 1)],
            vec![BigRational::from_ratio(-1, 1), BigRational::from_ratio(2, 1)],
        ];
        assert_eq!(determinant(m), BigRational::from_ratio(3, 1));
    }

    #[test]
    fn determinant_needs_row_swap() {
        let m = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert_eq!(determinant(m), -1.0);
    }

    #[test]
    fn log_det_matches_det() {
        let m = vec![vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]];
        let d = determinant(m.clone());
        let (l, s) = log_abs_determinant(m);
        assert!((s * l.exp() - d).abs() < 1e-10);
    }

    #[test]
    fn absorbing_solver_matches_dense() {
        // h(1) = 1/2 h(2) + 1/2, h(2) = 1/2 h(1)
        let rows = vec![vec![(1, 0.5)], vec![(0, 0.5)]];
        let h = solve_absorbing(&rows, &[0.5, 0.0], 1e-14, 10_000).unwrap();
        assert!((h[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((h[1] - 1.0 / 3.0).abs() < 1e-12);
    }
}
