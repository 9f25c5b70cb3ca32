//! Small dense linear-algebra helpers shared by the factor engine and the
//! estimators: a cyclic Jacobi eigensolver for symmetric matrices,
//! eigen-based (pseudo-)inverses and a QR least-squares solver.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("Jacobi eigensolver did not converge after {0} sweeps")]
    NoConvergence(usize),
    #[error("matrix is singular (smallest eigenvalue {0:e})")]
    Singular(f64),
}

/// Relative off-diagonal tolerance for the Jacobi sweeps.
pub const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenpairs of a symmetric matrix, eigenvalues sorted in descending order.
/// Column `j` of `vectors` belongs to `values[j]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Only the upper triangle is trusted; the input is symmetrised first. Sweeps
/// stop once the off-diagonal Frobenius norm falls below `JACOBI_TOL` times
/// the Frobenius norm of the whole matrix.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> Result<SymmetricEigen, LinalgError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(LinalgError::NotSquare(n, a.ncols()));
    }
    let mut m = DMatrix::from_fn(n, n, |i, j| if i <= j { a[(i, j)] } else { a[(j, i)] });
    let mut v = DMatrix::<f64>::identity(n, n);
    let total = m.norm();

    let mut converged = n < 2 || total == 0.0;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(LinalgError::NoConvergence(sweeps));
        }
        sweeps += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        converged = off <= JACOBI_TOL * total;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymmetricEigen { values, vectors })
}

/// Inverse of a symmetric positive-definite matrix via its eigendecomposition.
/// Fails when the smallest eigenvalue is below `rel_tol` times the largest.
pub fn spd_inverse(a: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>, LinalgError> {
    let eig = jacobi_eigen(a)?;
    let max = eig.values.first().copied().unwrap_or(0.0);
    let min = eig.values.last().copied().unwrap_or(0.0);
    if !(min > rel_tol * max.abs()) {
        return Err(LinalgError::Singular(min));
    }
    Ok(eigen_recompose(&eig, |l| 1.0 / l))
}

/// `V f(Λ) Vᵀ` for a symmetric eigendecomposition.
pub fn eigen_recompose(eig: &SymmetricEigen, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let n = eig.values.len();
    let mut out = DMatrix::zeros(n, n);
    for (j, &l) in eig.values.iter().enumerate() {
        let w = f(l);
        if w == 0.0 {
            continue;
        }
        let col = eig.vectors.column(j);
        out += w * col * col.transpose();
    }
    out
}

/// Generalised inverse restricted to the strictly positive part of the
/// spectrum. Returns the inverse and the number of eigen-directions kept.
pub fn positive_part_pinv(
    a: &DMatrix<f64>,
    rel_tol: f64,
) -> Result<(DMatrix<f64>, usize), LinalgError> {
    let eig = jacobi_eigen(a)?;
    let scale = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cut = rel_tol * scale;
    let kept = eig.values.iter().filter(|&&l| l > cut).count();
    let inv = eigen_recompose(&eig, |l| if l > cut { 1.0 / l } else { 0.0 });
    Ok((inv, kept))
}

/// Indices of columns that are (numerically) linear combinations of earlier
/// columns, found by modified Gram-Schmidt in column order.
pub fn dependent_columns(x: &DMatrix<f64>, rel_tol: f64) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for j in 0..x.ncols() {
        let original = x.column(j).into_owned();
        let norm0 = original.norm();
        let mut r = original;
        for q in &basis {
            let proj = q.dot(&r);
            r -= proj * q;
        }
        // second pass for stability
        for q in &basis {
            let proj = q.dot(&r);
            r -= proj * q;
        }
        let norm = r.norm();
        if norm0 == 0.0 || norm <= rel_tol * norm0 {
            dependent.push(j);
        } else {
            basis.push(r / norm);
        }
    }
    dependent
}

/// Least-squares solution of `x b = y` for full-column-rank `x` via
/// Householder QR. Also returns `(xᵀx)⁻¹ = R⁻¹R⁻ᵀ`.
pub fn qr_least_squares(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>), LinalgError> {
    let k = x.ncols();
    let qr = x.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * y;
    let rhs = qty.rows(0, k).into_owned();
    let b = r
        .solve_upper_triangular(&rhs)
        .ok_or(LinalgError::Singular(0.0))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(LinalgError::Singular(0.0))?;
    let xtx_inv = &r_inv * r_inv.transpose();
    Ok((b, xtx_inv))
}

/// Cholesky-based positive semi-definiteness check with a relative jitter.
pub fn is_psd(a: &DMatrix<f64>, rel_tol: f64) -> bool {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0_f64, f64::max).max(f64::MIN_POSITIVE);
    let sym = (a + a.transpose()) * 0.5;
    let jittered = sym + DMatrix::identity(n, n) * (rel_tol * scale);
    jittered.cholesky().is_some()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_two_by_two_correlation() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let e = jacobi_eigen(&a).unwrap();
        assert!((e.values[0] - 1.5).abs() < 1e-14);
        assert!((e.values[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn jacobi_reconstructs_matrix() {
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                4.0, 1.0, -2.0, 0.5, 1.0, 3.0, 0.0, 0.2, -2.0, 0.0, 5.0, 1.5, 0.5, 0.2, 1.5, 2.0,
            ],
        );
        let e = jacobi_eigen(&a).unwrap();
        let back = eigen_recompose(&e, |l| l);
        assert!((back - &a).abs().max() < 1e-12);
        let vtv = e.vectors.transpose() * &e.vectors;
        assert!((vtv - DMatrix::identity(4, 4)).abs().max() < 1e-12);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(spd_inverse(&a, 1e-10), Err(LinalgError::Singular(_))));
    }

    #[test]
    fn dependent_columns_are_named_in_order() {
        let x = DMatrix::from_row_slice(4, 3, &[1.0, 2.0, 3.0, 1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 5.0, 6.0]);
        assert_eq!(dependent_columns(&x, 1e-10), vec![2]);
    }

    #[test]
    fn psd_check() {
        let good = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(is_psd(&good, 1e-10));
        assert!(!is_psd(&bad, 1e-10));
    }
}
