//! Truncated power series in `κ` with exact rational coefficients.
//!
//! A [`Series`] of order `J` stores `c₀..c_J`; every operation returns a
//! series whose order is the minimum of its inputs' orders, so no coefficient
//! is ever read beyond the point where it is known.

use num_traits::{One, Zero};

use crate::scalar::{rat, Rational};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SeriesError {
    #[error("cannot invert a series whose constant term is zero")]
    DivisionByZeroConstantTerm,
    #[error("square root expects a series with zero constant term")]
    NonZeroConstantTerm,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    coeffs: Vec<Rational>,
}

impl Series {
    /// Series of order `order` from leading coefficients, zero-padded.
    pub fn new(mut coeffs: Vec<Rational>, order: usize) -> Self {
        coeffs.resize(order + 1, Rational::zero());
        Series { coeffs }
    }

    pub fn constant(c: Rational, order: usize) -> Self {
        Self::new(vec![c], order)
    }

    /// The variable `κ` itself.
    pub fn kappa(order: usize) -> Self {
        Self::new(vec![Rational::zero(), Rational::one()], order)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, i: usize) -> &Rational {
        &self.coeffs[i]
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    fn common(&self, other: &Self) -> usize {
        self.order().min(other.order())
    }

    pub fn add(&self, other: &Self) -> Self {
        let j = self.common(other);
        Series { coeffs: (0..=j).map(|i| &self.coeffs[i] + &other.coeffs[i]).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let j = self.common(other);
        Series { coeffs: (0..=j).map(|i| &self.coeffs[i] - &other.coeffs[i]).collect() }
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Series { coeffs: self.coeffs.iter().map(|x| x * c).collect() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let j = self.common(other);
        let coeffs = (0..=j)
            .map(|n| (0..=n).fold(Rational::zero(), |acc, i| acc + &self.coeffs[i] * &other.coeffs[n - i]))
            .collect();
        Series { coeffs }
    }

    /// Multiplication by `κ`, truncated to the same order.
    pub fn mul_kappa(&self) -> Self {
        let mut coeffs = vec![Rational::zero()];
        coeffs.extend(self.coeffs[..self.order()].iter().cloned());
        Series { coeffs }
    }

    /// Reciprocal by back-substitution.
    pub fn inv(&self) -> Result<Self, SeriesError> {
        let a0 = &self.coeffs[0];
        if a0.is_zero() {
            return Err(SeriesError::DivisionByZeroConstantTerm);
        }
        let inv0 = a0.recip();
        let mut b = vec![inv0.clone()];
        for n in 1..=self.order() {
            let s = (1..=n).fold(Rational::zero(), |acc, i| acc + &self.coeffs[i] * &b[n - i]);
            b.push(-(s * &inv0));
        }
        Ok(Series { coeffs: b })
    }

    /// `√(1 + a)` for `a` with zero constant term.
    pub fn sqrt_one_plus(&self) -> Result<Self, SeriesError> {
        if !self.coeffs[0].is_zero() {
            return Err(SeriesError::NonZeroConstantTerm);
        }
        let mut s = vec![Rational::one()];
        for n in 1..=self.order() {
            let cross = (1..n).fold(Rational::zero(), |acc, i| acc + &s[i] * &s[n - i]);
            s.push((&self.coeffs[n] - cross) / rat(2, 1));
        }
        Ok(Series { coeffs: s })
    }

    pub fn pow(&self, mut n: u32) -> Self {
        let mut result = Series::constant(Rational::one(), self.order());
        let mut base = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                result = result.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        result
    }
}

/// `μ(κ) = 1 + κ²/2 − κ√(1 + κ²/4)`: the root of `μ² − (2+κ²)μ + 1 = 0`
/// with `μ(0) = 1`.
pub fn mu_series(order: usize) -> Series {
    let quarter_k2 = Series::new(vec![Rational::zero(), Rational::zero(), rat(1, 4)], order);
    let root = quarter_k2.sqrt_one_plus().expect("zero constant term");
    let half_k2 = Series::new(vec![Rational::one(), Rational::zero(), rat(1, 2)], order);
    half_k2.sub(&root.mul_kappa())
}

/// Series of the Dirichlet half-line resolvent entry
/// `(μ^|n−m| − μ^(n+m)) / (μ⁻¹ − μ)`.
///
/// Both numerator and denominator vanish at `κ = 0`; after cancelling
/// `(1 − μ)` the entry is `μ^(a+1)·(1 + μ + … + μ^(b−a−1)) / (1 + μ)` with
/// `a = |n−m|`, `b = n+m`.
pub fn ray_resolvent_entry_series(n: u32, m: u32, order: usize) -> Series {
    assert!(n >= 1 && m >= 1, "ray positions start at 1");
    let mu = mu_series(order);
    let a = n.abs_diff(m);
    let span = 2 * n.min(m);
    let mut geometric = Series::constant(Rational::zero(), order);
    let mut power = Series::constant(Rational::one(), order);
    for _ in 0..span {
        geometric = geometric.add(&power);
        power = power.mul(&mu);
    }
    let one_plus_mu = mu.add(&Series::constant(Rational::one(), order));
    mu.pow(a + 1)
        .mul(&geometric)
        .mul(&one_plus_mu.inv().expect("1 + μ has constant term 2"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(values: &[(i64, i64)]) -> Vec<Rational> {
        values.iter().map(|&(p, q)| rat(p, q)).collect()
    }

    /// Solves `κ²μ = (1 − μ)²` order by order with `μ₀ = 1, μ₁ = −1`.
    fn mu_oracle(order: usize) -> Vec<Rational> {
        // Writing μ = 1 − κ·y gives y² = μ, i.e. y² = 1 − κ y.
        // Coefficient n: Σ y_i y_{n−i} = [n=0] − y_{n−1}.
        let mut y = vec![Rational::one()];
        for n in 1..order {
            let cross = (1..n).fold(Rational::zero(), |acc, i| acc + &y[i] * &y[n - i]);
            y.push((-&y[n - 1] - cross) / rat(2, 1));
        }
        let mut mu = vec![Rational::one()];
        mu.extend(y.iter().map(|c| -c.clone()));
        mu.truncate(order + 1);
        mu
    }

    #[test]
    fn geometric_inverse() {
        let one_minus_k = Series::new(r(&[(1, 1), (-1, 1)]), 5);
        assert_eq!(one_minus_k.inv().unwrap().coeffs(), &r(&[(1, 1); 6])[..]);
        let k = Series::kappa(3);
        assert_eq!(k.inv(), Err(SeriesError::DivisionByZeroConstantTerm));
    }

    #[test]
    fn sqrt_matches_binomial_series() {
        let x = Series::new(r(&[(0, 1), (0, 1), (1, 4)]), 6);
        let s = x.sqrt_one_plus().unwrap();
        assert_eq!(s.coeffs(), &r(&[(1, 1), (0, 1), (1, 8), (0, 1), (-1, 128), (0, 1), (1, 1024)])[..]);
        assert_eq!(s.mul(&s), x.add(&Series::constant(Rational::one(), 6)));
    }

    #[test]
    fn mu_leading_coefficients() {
        let mu = mu_series(8);
        assert_eq!(&mu.coeffs()[..6], &r(&[(1, 1), (-1, 1), (1, 2), (-1, 8), (0, 1), (1, 128)])[..]);
        assert_eq!(mu.coeffs(), &mu_oracle(8)[..]);
        let k2 = Series::new(r(&[(2, 1), (0, 1), (1, 1)]), 8);
        let quadratic = mu.mul(&mu).sub(&k2.mul(&mu)).add(&Series::constant(Rational::one(), 8));
        assert!(quadratic.coeffs().iter().all(Zero::is_zero));
        assert_eq!(&mu.inv().unwrap().coeffs()[..4], &r(&[(1, 1), (1, 1), (1, 2), (1, 8)])[..]);
    }

    #[test]
    fn resolvent_entry_examples() {
        assert_eq!(ray_resolvent_entry_series(2, 5, 8).coeff(0), &rat(2, 1));
        assert_eq!(ray_resolvent_entry_series(1, 3, 8).coeff(1), &rat(-3, 1));
        assert_eq!(ray_resolvent_entry_series(1, 1, 8).coeff(3), &rat(-1, 8));
    }

    #[test]
    fn pow_matches_repeated_product() {
        let a = Series::new(r(&[(1, 1), (1, 2), (-1, 3)]), 6);
        let mut expected = Series::constant(Rational::one(), 6);
        for _ in 0..5 {
            expected = expected.mul(&a);
        }
        assert_eq!(a.pow(5), expected);
    }
}
