use super::{LinalgError, Matrix};
use crate::scalar::{RankTol, Scalar};

/// Reduced row-echelon form together with its pivot columns.
#[derive(Clone, Debug)]
pub struct Rref<S> {
    pub reduced: Matrix<S>,
    pub pivots: Vec<usize>,
}

/// Gauss–Jordan reduction.
///
/// Exact scalars take the first nonzero entry of each column as pivot, which
/// makes the result canonical. Float scalars use partial pivoting and treat
/// entries below `tol` relative to the largest input entry as zero.
pub fn rref<S: Scalar>(a: &Matrix<S>, tol: RankTol) -> Rref<S> {
    let mut m = a.clone();
    let scale = a.max_abs();
    let (rows, cols) = (m.rows(), m.cols());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let candidate = if S::EXACT {
            (r..rows).find(|&i| !m[(i, c)].is_zero())
        } else {
            (r..rows)
                .max_by(|&i, &j| m[(i, c)].magnitude().total_cmp(&m[(j, c)].magnitude()))
                .filter(|&i| !m[(i, c)].negligible(scale, tol))
        };
        let Some(p) = candidate else {
            for i in r..rows {
                m[(i, c)] = S::zero();
            }
            continue;
        };
        if p != r {
            for j in 0..cols {
                let tmp = m[(p, j)].clone();
                m[(p, j)] = m[(r, j)].clone();
                m[(r, j)] = tmp;
            }
        }
        let inv = S::one() / m[(r, c)].clone();
        for j in c..cols {
            m[(r, j)] = m[(r, j)].clone() * inv.clone();
        }
        for i in 0..rows {
            if i == r || m[(i, c)].is_zero() {
                continue;
            }
            let f = m[(i, c)].clone();
            for j in c..cols {
                if !m[(r, j)].is_zero() {
                    m[(i, j)] = m[(i, j)].clone() - f.clone() * m[(r, j)].clone();
                }
            }
            m[(i, c)] = S::zero();
        }
        pivots.push(c);
        r += 1;
    }
    Rref { reduced: m, pivots }
}

pub fn rank<S: Scalar>(a: &Matrix<S>, tol: RankTol) -> usize {
    rref(a, tol).pivots.len()
}

/// Canonical kernel basis of an arbitrary matrix: one vector per free column,
/// with a 1 in that column.
pub fn null_space_general<S: Scalar>(a: &Matrix<S>, tol: RankTol) -> Vec<Vec<S>> {
    let Rref { reduced, pivots } = rref(a, tol);
    let n = a.cols();
    (0..n)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut x = vec![S::zero(); n];
            x[free] = S::one();
            for (i, &p) in pivots.iter().enumerate() {
                x[p] = -reduced[(i, free)].clone();
            }
            x
        })
        .collect()
}

pub fn inverse<S: Scalar>(a: &Matrix<S>, tol: RankTol) -> Result<Matrix<S>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::DimensionMismatch("inverse of a non-square matrix".into()));
    }
    let n = a.rows();
    let aug = Matrix::from_fn(n, 2 * n, |i, j| {
        if j < n {
            a[(i, j)].clone()
        } else if j - n == i {
            S::one()
        } else {
            S::zero()
        }
    });
    let Rref { reduced, pivots } = rref(&aug, tol);
    if pivots.len() < n || pivots[n - 1] >= n {
        return Err(LinalgError::Singular);
    }
    Ok(Matrix::from_fn(n, n, |i, j| reduced[(i, n + j)].clone()))
}

/// Solves `a x = b` for square invertible `a`.
pub fn solve<S: Scalar>(a: &Matrix<S>, b: &[S], tol: RankTol) -> Result<Vec<S>, LinalgError> {
    Ok(inverse(a, tol)?.mul_vec(b))
}
