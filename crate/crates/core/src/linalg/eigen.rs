use super::{LinalgError, Matrix};
use crate::scalar::RankTol;

/// Eigenvalues sorted in descending order with matching eigenvector columns.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<S> {
    pub values: Vec<S>,
    pub vectors: Matrix<S>,
}

const MAX_SWEEPS: usize = 100;

/// Diagonalizes a real symmetric matrix with the cyclic Jacobi method.
///
/// # Input
///
/// * `a` -- symmetric `n × n` matrix; symmetry is checked against `tol`
/// * `tol` -- sweeps stop once the off-diagonal Frobenius norm drops below
///   `tol · ‖A‖_F` (an absolute floor of machine precision is also applied)
///
/// # Output
///
/// Eigenvalues in descending order, and an orthogonal matrix whose column `i`
/// is the unit eigenvector of eigenvalue `i`.
///
/// # Notes
///
/// Each rotation annihilates one off-diagonal pair, using the numerically
/// stable choice `t = sign(θ) / (|θ| + √(θ² + 1))` for the tangent.
pub fn jacobi_eigen(a: &Matrix<f64>, tol: RankTol) -> Result<SymmetricEigen<f64>, LinalgError> {
    if !a.is_symmetric(tol) {
        return Err(LinalgError::AsymmetricInput);
    }
    let n = a.rows();
    // Rotations only read the upper triangle; symmetrize so round-off
    // asymmetry below `tol` cannot stall the sweep.
    let mut m = Matrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let mut v: Matrix<f64> = Matrix::identity(n);
    let frob = frobenius(&m);
    let target = (tol.0 * frob).min(1e-14 * frob).max(f64::MIN_POSITIVE);
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal(&m) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut m, &mut v, p, q, c, s);
            }
        }
    }
    if !converged && off_diagonal(&m) > target.max(1e-12 * frob) {
        return Err(LinalgError::NotConverged);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(SymmetricEigen { values, vectors })
}

fn rotate(m: &mut Matrix<f64>, v: &mut Matrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    let n = m.rows();
    for k in 0..n {
        let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
    for k in 0..n {
        let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

fn frobenius(m: &Matrix<f64>) -> f64 {
    let n = m.rows();
    (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|ij| m[ij] * m[ij]).sum::<f64>().sqrt()
}

fn off_diagonal(m: &Matrix<f64>) -> f64 {
    let n = m.rows();
    (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|ij| m[ij] * m[ij])
        .sum::<f64>()
        .sqrt()
}

/// Reconstructs `V diag(λ) Vᵀ`.
#[cfg(test)]
fn reconstruct<S: crate::scalar::Scalar>(eig: &SymmetricEigen<S>) -> Matrix<S> {
    let d = Matrix::from_diagonal(&eig.values);
    &(&eig.vectors * &d) * &eig.vectors.transpose()
}
