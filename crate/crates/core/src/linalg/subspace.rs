use super::{dot, null_space_general, rref, scale_vec, LinalgError, Matrix};
use crate::scalar::{RankTol, Scalar};

/// Linear subspace of `S^ambient` with an independent basis.
///
/// Exact bases are the nonzero rows of a reduced row-echelon form, so equal
/// subspaces have equal bases. Float bases are orthonormal.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace<S> {
    ambient: usize,
    basis: Vec<Vec<S>>,
}

impl<S: Scalar> Subspace<S> {
    pub fn zero(ambient: usize) -> Self {
        Subspace { ambient, basis: Vec::new() }
    }

    pub fn full(ambient: usize) -> Self {
        Self::span(ambient, &Matrix::<S>::identity(ambient).columns(), RankTol::default())
    }

    pub fn span(ambient: usize, vectors: &[Vec<S>], tol: RankTol) -> Self {
        assert!(vectors.iter().all(|v| v.len() == ambient), "span: vector length mismatch");
        if vectors.is_empty() {
            return Self::zero(ambient);
        }
        let rows = Matrix::from_rows(vectors.to_vec());
        let r = rref(&rows, tol);
        let echelon: Vec<Vec<S>> = (0..r.pivots.len()).map(|i| r.reduced.row(i)).collect();
        let basis = if S::EXACT { echelon } else { orthonormalize(&echelon) };
        Subspace { ambient, basis }
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn is_zero(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn basis(&self) -> &[Vec<S>] {
        &self.basis
    }

    /// Basis vectors as columns (`ambient × dim`).
    pub fn basis_matrix(&self) -> Matrix<S> {
        Matrix::from_columns(self.ambient, &self.basis)
    }

    pub fn gram(&self) -> Matrix<S> {
        let b = self.basis_matrix();
        &b.transpose() * &b
    }

    pub fn contains(&self, v: &[S], tol: RankTol) -> bool {
        let mut vs = self.basis.clone();
        vs.push(v.to_vec());
        Self::span(self.ambient, &vs, tol).dim() == self.dim()
    }

    pub fn sum(&self, other: &Self, tol: RankTol) -> Self {
        let mut vs = self.basis.clone();
        vs.extend(other.basis.iter().cloned());
        Self::span(self.ambient, &vs, tol)
    }

    /// Orthogonal complement in the full ambient space.
    pub fn orthocomplement(&self, tol: RankTol) -> Self {
        if self.is_zero() {
            return Self::full(self.ambient);
        }
        let bt = Matrix::from_rows(self.basis.clone());
        Self::span(self.ambient, &null_space_general(&bt, tol), tol)
    }

    pub fn same_as(&self, other: &Self, tol: RankTol) -> bool {
        self.dim() == other.dim() && self.sum(other, tol).dim() == self.dim()
    }
}

fn orthonormalize<S: Scalar>(vectors: &[Vec<S>]) -> Vec<Vec<S>> {
    let mut out: Vec<Vec<S>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for q in &out {
            let c = dot(q, &w);
            w = w.iter().zip(q).map(|(a, b)| a.clone() - c.clone() * b.clone()).collect();
        }
        let norm = dot(&w, &w).sqrt().expect("squared norm is non-negative");
        out.push(scale_vec(&(S::one() / norm), &w));
    }
    out
}

/// Kernel of a symmetric matrix.
pub fn null_space<S: Scalar>(a: &Matrix<S>, tol: RankTol) -> Result<Subspace<S>, LinalgError> {
    if !a.is_symmetric(tol) {
        return Err(LinalgError::AsymmetricInput);
    }
    let n = a.rows();
    if S::EXACT {
        return Ok(Subspace::span(n, &null_space_general(a, tol), tol));
    }
    let eig = S::symmetric_eigen(a, tol)?;
    let scale = eig.values.iter().map(Scalar::magnitude).fold(0.0, f64::max);
    let kernel: Vec<Vec<S>> = eig
        .values
        .iter()
        .enumerate()
        .filter(|(_, l)| l.negligible(scale, tol))
        .map(|(i, _)| eig.vectors.column(i))
        .collect();
    Ok(Subspace::span(n, &kernel, tol))
}

/// Moore–Penrose pseudo-inverse of a symmetric matrix.
///
/// Exact: `A† = B (Bᵀ A B)⁻¹ Bᵀ` where the columns of `B` are a basis of the
/// range of `A`. Float: inverted nonnegligible eigenvalues.
pub fn pseudo_inverse<S: Scalar>(a: &Matrix<S>, tol: RankTol) -> Result<Matrix<S>, LinalgError> {
    if !a.is_symmetric(tol) {
        return Err(LinalgError::AsymmetricInput);
    }
    let n = a.rows();
    if S::EXACT {
        let pivots = rref(a, tol).pivots;
        if pivots.is_empty() {
            return Ok(Matrix::zeros(n, n));
        }
        let all: Vec<usize> = (0..n).collect();
        let b = a.select(&all, &pivots);
        let bt = b.transpose();
        let core = super::inverse(&(&(&bt * a) * &b), tol)?;
        return Ok(&(&b * &core) * &bt);
    }
    let eig = S::symmetric_eigen(a, tol)?;
    let scale = eig.values.iter().map(Scalar::magnitude).fold(0.0, f64::max);
    let mut out: Matrix<S> = Matrix::zeros(n, n);
    for (idx, l) in eig.values.iter().enumerate() {
        if l.negligible(scale, tol) {
            continue;
        }
        let v = eig.vectors.column(idx);
        let inv = S::one() / l.clone();
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = out[(i, j)].clone() + inv.clone() * v[i].clone() * v[j].clone();
            }
        }
    }
    Ok(out)
}

/// Orthogonal projection onto `s`: `B (BᵀB)⁻¹ Bᵀ`.
pub fn orthogonal_projection<S: Scalar>(s: &Subspace<S>, tol: RankTol) -> Matrix<S> {
    let n = s.ambient();
    if s.is_zero() {
        return Matrix::zeros(n, n);
    }
    let b = s.basis_matrix();
    let gram_inv = super::inverse(&s.gram(), tol).expect("basis Gram matrix is invertible");
    &(&b * &gram_inv) * &b.transpose()
}

pub fn subspace_intersect<S: Scalar>(s1: &Subspace<S>, s2: &Subspace<S>, tol: RankTol) -> Subspace<S> {
    assert_eq!(s1.ambient(), s2.ambient(), "intersect: ambient mismatch");
    let n = s1.ambient();
    if s1.is_zero() || s2.is_zero() {
        return Subspace::zero(n);
    }
    let (d1, d2) = (s1.dim(), s2.dim());
    let stacked = Matrix::from_fn(n, d1 + d2, |i, j| {
        if j < d1 {
            s1.basis()[j][i].clone()
        } else {
            -s2.basis()[j - d1][i].clone()
        }
    });
    let b1 = s1.basis_matrix();
    let vectors: Vec<Vec<S>> = null_space_general(&stacked, tol)
        .into_iter()
        .map(|c| b1.mul_vec(&c[..d1]))
        .collect();
    Subspace::span(n, &vectors, tol)
}

/// `s1 ∩ s2^⊥`.
pub fn subspace_orthocomplement_within<S: Scalar>(
    s1: &Subspace<S>,
    s2: &Subspace<S>,
    tol: RankTol,
) -> Subspace<S> {
    assert_eq!(s1.ambient(), s2.ambient(), "orthocomplement_within: ambient mismatch");
    if s1.is_zero() || s2.is_zero() {
        return s1.clone();
    }
    let b1 = s1.basis_matrix();
    let cross = &s2.basis_matrix().transpose() * &b1;
    let vectors: Vec<Vec<S>> =
        null_space_general(&cross, tol).into_iter().map(|c| b1.mul_vec(&c)).collect();
    Subspace::span(s1.ambient(), &vectors, tol)
}
