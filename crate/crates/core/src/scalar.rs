//! Scalar field contract shared by the exact and the floating-point backends.
//!
//! Every algorithm in the crate is generic over [`Scalar`]. Rank decisions go
//! through [`Scalar::negligible`], which is an exact zero test for
//! [`Rational`] and a relative threshold for `f64`.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::linalg::{LinalgError, Matrix, SymmetricEigen};

/// Exact rational scalar.
pub type Rational = BigRational;

/// Relative tolerance for rank decisions in the float backend.
///
/// Ignored by exact scalars.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankTol(pub f64);

impl Default for RankTol {
    fn default() -> Self {
        RankTol(1e-9)
    }
}

pub trait Scalar:
    Clone
    + fmt::Debug
    + fmt::Display
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// True when arithmetic is exact and rank decisions carry no tolerance.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(n: i64) -> Self;
    fn from_rational(q: &Rational) -> Self;
    fn to_f64(&self) -> f64;

    /// `(hi, lo)` with `hi = to_f64()` and `hi + lo` closer to the exact value.
    fn to_f64_split(&self) -> (f64, f64) {
        (self.to_f64(), 0.0)
    }

    /// Exact zero test.
    fn is_zero(&self) -> bool;

    /// Zero test used for rank decisions; `scale` is the magnitude of the
    /// surrounding data.
    fn negligible(&self, scale: f64, tol: RankTol) -> bool;

    fn is_positive(&self) -> bool;

    /// Square root when it exists in the field.
    fn sqrt(&self) -> Option<Self>;

    fn magnitude(&self) -> f64 {
        self.to_f64().abs()
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num) / Self::from_i64(den)
    }

    /// Symmetric eigendecomposition, available only for float scalars.
    fn symmetric_eigen(a: &Matrix<Self>, _tol: RankTol) -> Result<SymmetricEigen<Self>, LinalgError> {
        let _ = a;
        Err(LinalgError::RationalBackendUnsupported)
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn zero() -> Self {
        Zero::zero()
    }

    fn one() -> Self {
        One::one()
    }

    fn from_i64(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn from_rational(q: &Rational) -> Self {
        q.clone()
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn to_f64_split(&self) -> (f64, f64) {
        let hi = Scalar::to_f64(self);
        match BigRational::from_float(hi) {
            Some(h) => (hi, Scalar::to_f64(&(self - h))),
            None => (hi, 0.0),
        }
    }

    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }

    fn negligible(&self, _scale: f64, _tol: RankTol) -> bool {
        Zero::is_zero(self)
    }

    fn is_positive(&self) -> bool {
        Signed::is_positive(self)
    }

    fn sqrt(&self) -> Option<Self> {
        if Signed::is_negative(self) {
            return None;
        }
        let n = self.numer().sqrt();
        let d = self.denom().sqrt();
        (&n * &n == *self.numer() && &d * &d == *self.denom()).then(|| BigRational::new(n, d))
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }

    fn one() -> Self {
        1.0
    }

    fn from_i64(n: i64) -> Self {
        n as f64
    }

    fn from_rational(q: &Rational) -> Self {
        ToPrimitive::to_f64(q).unwrap_or(f64::NAN)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn is_zero(&self) -> bool {
        *self == 0.0
    }

    fn negligible(&self, scale: f64, tol: RankTol) -> bool {
        self.abs() <= tol.0 * scale.max(1.0)
    }

    fn is_positive(&self) -> bool {
        *self > 0.0
    }

    fn sqrt(&self) -> Option<Self> {
        (*self >= 0.0).then(|| f64::sqrt(*self))
    }

    fn symmetric_eigen(a: &Matrix<Self>, tol: RankTol) -> Result<SymmetricEigen<Self>, LinalgError> {
        crate::linalg::jacobi_eigen(a, tol)
    }
}

/// Error for malformed rational literals.
#[derive(Debug, thiserror::Error)]
#[error("invalid rational literal `{0}`")]
pub struct ParseRationalError(pub String);

/// Parses `"p"`, `"p/q"` or a terminating decimal such as `"-0.25"` exactly.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError(text.to_string());
    let t = text.trim();
    if let Some((p, q)) = t.split_once('/') {
        let p = BigInt::from_str(p.trim()).map_err(|_| err())?;
        let q = BigInt::from_str(q.trim()).map_err(|_| err())?;
        if q.is_zero() {
            return Err(err());
        }
        return Ok(BigRational::new(p, q));
    }
    if let Some((int, frac)) = t.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let negative = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches(['-', '+']), frac);
        let mag = BigInt::from_str(&digits).map_err(|_| err())?;
        let den = num_traits::pow(BigInt::from(10), frac.len());
        let q = BigRational::new(mag, den);
        return Ok(if negative { -q } else { q });
    }
    BigInt::from_str(t).map(BigRational::from_integer).map_err(|_| err())
}

/// Formats a rational as `"p"` or `"p/q"`.
pub fn format_rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Shorthand used throughout tests and examples.
pub fn rat(num: i64, den: i64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_literal_forms() {
        assert_eq!(parse_rational("3").unwrap(), rat(3, 1));
        assert_eq!(parse_rational("-1/2").unwrap(), rat(-1, 2));
        assert_eq!(parse_rational("4/6").unwrap(), rat(2, 3));
        assert_eq!(parse_rational("-0.25").unwrap(), rat(-1, 4));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1.").is_err());
    }

    #[test]
    fn rational_sqrt_only_for_squares() {
        assert_eq!(Scalar::sqrt(&rat(9, 4)), Some(rat(3, 2)));
        assert_eq!(Scalar::sqrt(&rat(2, 1)), None);
        assert_eq!(Scalar::sqrt(&rat(-1, 1)), None);
    }

    #[test]
    fn format_round_trips() {
        for q in [rat(0, 1), rat(-7, 3), rat(5, 1)] {
            assert_eq!(parse_rational(&format_rational(&q)).unwrap(), q);
        }
    }
}
