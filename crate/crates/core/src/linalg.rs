//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Row-major `Vec<Vec<f64>>` to a matrix; rows must share a length.
pub fn from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let m = rows.len();
    let n = rows.first().map_or(0, |r| r.len());
    DMatrix::from_fn(m, n, |i, j| rows[i][j])
}

pub fn to_rows(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect()
}

pub fn frobenius(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest singular value by power iteration on `AᵀA`.
pub fn operator_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return 0.0;
    }
    // Fixed, non-symmetric start so no singular direction is orthogonal to
    // it by construction.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * ((i * 7919) % 13) as f64);
    let nv = v.norm();
    v /= nv;
    let mut sigma = 0.0;
    for _ in 0..10_000 {
        let w = a.transpose() * (a * &v);
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        let next = nw.sqrt();
        v = w / nw;
        if (next - sigma).abs() <= 1e-15 * next {
            sigma = next;
            break;
        }
        sigma = next;
    }
    (a * &v).norm().max(sigma)
}

/// Largest singular value from a dense SVD.
pub fn operator_norm_exact(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.max()
}

/// Smallest singular value `min_{‖u‖=1} ‖Au‖` (zero when `A` has fewer rows than columns).
pub fn sigma_min(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    if a.nrows() < a.ncols() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.min()
}

/// Least squares `argmin ‖Ax − b‖₂` for full column rank `A`; `None` when rank deficient.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let ata = a.transpose() * a;
    let chol = ata.cholesky()?;
    Some(chol.solve(&(a.transpose() * b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_iteration_matches_svd() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.5, -1.0, 3.0, 2.0, 0.0, 1.0]);
        assert!((operator_norm(&a) - operator_norm_exact(&a)).abs() < 1e-8);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        assert!((sigma_min(&d) - 2.0).abs() < 1e-12);
        assert_eq!(operator_norm(&DMatrix::zeros(2, 2)), 0.0);
    }

    #[test]
    fn least_squares_recovers_exact_solution() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let x = DVector::from_vec(vec![2.0, -1.0]);
        let b = &a * &x;
        let got = least_squares(&a, &b).unwrap();
        assert!((got - x).norm() < 1e-12);
    }
}
