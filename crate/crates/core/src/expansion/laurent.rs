//! Truncated Laurent series in `κ` with matrix coefficients.

use crate::linalg::{pseudo_inverse, rank, LinalgError, Matrix};
use crate::scalar::{RankTol, Scalar};

/// `Σ_{p = low}^{valid} κ^p X_p`, exact for every power up to `valid`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixSeries<S> {
    low: i32,
    terms: Vec<Matrix<S>>,
    dim: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SeriesInversionError {
    #[error("leading coefficient is not invertible on a space of dimension {expected} (rank {found})")]
    LeadingNotInvertible { expected: usize, found: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

impl<S: Scalar> MatrixSeries<S> {
    /// Series with `terms[i]` at power `low + i`.
    pub fn new(low: i32, terms: Vec<Matrix<S>>, dim: usize) -> Self {
        assert!(terms.iter().all(|t| t.rows() == dim && t.cols() == dim), "series coefficient shape");
        MatrixSeries { low, terms, dim }
    }

    pub fn low(&self) -> i32 {
        self.low
    }

    /// Highest power known exactly.
    pub fn valid(&self) -> i32 {
        self.low + self.terms.len() as i32 - 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Coefficient of `κ^p`; zero below `low`.
    pub fn coeff(&self, p: i32) -> Matrix<S> {
        assert!(p <= self.valid(), "coefficient κ^{p} is beyond the known order {}", self.valid());
        if p < self.low {
            Matrix::zeros(self.dim, self.dim)
        } else {
            self.terms[(p - self.low) as usize].clone()
        }
    }

    /// `κ^s · self`.
    pub fn shift(&self, s: i32) -> Self {
        MatrixSeries { low: self.low + s, ..self.clone() }
    }

    /// Drops coefficients above power `p`.
    pub fn truncate(&self, p: i32) -> Self {
        let keep = (p - self.low + 1).clamp(0, self.terms.len() as i32) as usize;
        MatrixSeries { terms: self.terms[..keep].to_vec(), ..self.clone() }
    }

    pub fn add(&self, other: &Self) -> Self {
        let low = self.low.min(other.low);
        let valid = self.valid().min(other.valid());
        let terms = (low..=valid).map(|p| &self.coeff(p) + &other.coeff(p)).collect();
        MatrixSeries { low, terms, dim: self.dim }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let low = self.low + other.low;
        let valid = (self.low + other.valid()).min(other.low + self.valid());
        let terms = (low..=valid)
            .map(|p| {
                let mut acc = Matrix::zeros(self.dim, self.dim);
                for a in self.low..=p - other.low {
                    acc = &acc + &(&self.coeff(a) * &other.coeff(p - a));
                }
                acc
            })
            .collect();
        MatrixSeries { low, terms, dim: self.dim }
    }

    /// `X + κ^{-1} X Y X`, the shape of every inversion-formula step.
    pub fn resolve(x: &Self, y: &Self) -> Self {
        x.add(&x.mul(y).mul(x).shift(-1))
    }

    /// Neumann-series inverse of `X(κ) + P` on a space of dimension
    /// `domain_dim`, for a series starting at `κ⁰`:
    /// `Y₀ = (X₀ + P)†`, `Y_n = −Y₀ Σ_{i=1}^{n} X_i Y_{n−i}`.
    pub fn neumann(&self, projection: &Matrix<S>, domain_dim: usize, tol: RankTol) -> Result<Self, SeriesInversionError> {
        assert_eq!(self.low, 0, "neumann expects a series starting at κ⁰");
        let lead = &self.terms[0] + projection;
        let found = rank(&lead, tol);
        if found != domain_dim {
            return Err(SeriesInversionError::LeadingNotInvertible { expected: domain_dim, found });
        }
        let y0 = pseudo_inverse(&lead, tol)?;
        let mut ys = vec![y0.clone()];
        for n in 1..self.terms.len() {
            let mut acc = Matrix::zeros(self.dim, self.dim);
            for i in 1..=n {
                acc = &acc + &(&self.terms[i] * &ys[n - i]);
            }
            ys.push(-&(&y0 * &acc));
        }
        Ok(MatrixSeries { low: 0, terms: ys, dim: self.dim })
    }
}

/// Coefficients of the reduced series `x(κ) = Σ_j κ^j x_j` of the inversion
/// formula, `x_j = P T_{j+1} P` with
/// `T_n = Σ_{i_1+…+i_r = n} (−1)^{r−1} X_{i_1} Y X_{i_2} Y ⋯ Y X_{i_r}`,
/// which is the recursion `T_n = X_n − Σ_{i=1}^{n−1} X_i Y T_{n−i}`.
///
/// `coefficients[i]` is `X_i` (index 0 unused), `middle` is `Y = X₀† + P`.
pub fn reduced_coefficients<S: Scalar>(
    coefficients: &[Matrix<S>],
    middle: &Matrix<S>,
    projection: &Matrix<S>,
    count: usize,
) -> Vec<Matrix<S>> {
    assert!(coefficients.len() > count, "need X_1 … X_{count}");
    let dim = middle.rows();
    let mut t: Vec<Matrix<S>> = vec![Matrix::zeros(dim, dim)];
    for n in 1..=count {
        let mut acc = coefficients[n].clone();
        for i in 1..n {
            acc = &acc - &(&(&coefficients[i] * middle) * &t[n - i]);
        }
        t.push(acc);
    }
    (1..=count).map(|n| &(projection * &t[n]) * projection).collect()
}
