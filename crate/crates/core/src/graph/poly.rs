//! Dense polynomials in the ray position `n`, lowest degree first.
//!
//! A polynomial is trimmed when it has no trailing exact zeros; the zero
//! polynomial is the empty vector.

use crate::scalar::Scalar;

pub fn trim<S: Scalar>(mut p: Vec<S>) -> Vec<S> {
    while p.last().is_some_and(Scalar::is_zero) {
        p.pop();
    }
    p
}

pub fn eval<S: Scalar>(p: &[S], n: usize) -> S {
    let x = S::from_i64(n as i64);
    p.iter().rev().fold(S::zero(), |acc, c| acc * x.clone() + c.clone())
}

pub fn add<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    let len = a.len().max(b.len());
    let get = |p: &[S], i: usize| p.get(i).cloned().unwrap_or_else(S::zero);
    trim((0..len).map(|i| get(a, i) + get(b, i)).collect())
}

pub fn scale<S: Scalar>(c: &S, p: &[S]) -> Vec<S> {
    trim(p.iter().map(|x| c.clone() * x.clone()).collect())
}

/// Degree, or `None` for the zero polynomial.
pub fn degree<S: Scalar>(p: &[S]) -> Option<usize> {
    p.iter().rposition(|c| !c.is_zero())
}

fn binomial(n: usize, k: usize) -> i64 {
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i + 1) as i64)
}

/// `q(n) = 2p(n) − p(n+1) − p(n−1)`, exactly.
pub fn second_difference<S: Scalar>(p: &[S]) -> Vec<S> {
    let mut q = vec![S::zero(); p.len()];
    for (d, c) in p.iter().enumerate() {
        // (n+1)^d + (n−1)^d − 2n^d = 2 Σ_{k≥1} C(d,2k) n^(d−2k)
        let mut k = 1;
        while 2 * k <= d {
            let w = S::from_i64(-2 * binomial(d, 2 * k));
            q[d - 2 * k] = q[d - 2 * k].clone() + w * c.clone();
            k += 1;
        }
    }
    trim(q)
}

/// Polynomial of degree `< xs.len()` through the points `(xs[i], ys[i])`,
/// via Newton divided differences.
pub fn interpolate<S: Scalar>(xs: &[usize], ys: &[S]) -> Vec<S> {
    assert_eq!(xs.len(), ys.len(), "interpolation points mismatch");
    let x: Vec<S> = xs.iter().map(|&v| S::from_i64(v as i64)).collect();
    let mut table = ys.to_vec();
    let len = xs.len();
    for level in 1..len {
        for i in (level..len).rev() {
            table[i] = (table[i].clone() - table[i - 1].clone()) / (x[i].clone() - x[i - level].clone());
        }
    }
    // Expand Σ table[i] Π_{l<i} (n − x_l) into monomial coefficients.
    let mut result = vec![S::zero(); len];
    let mut basis = vec![S::one()];
    for (i, coef) in table.iter().enumerate() {
        for (d, b) in basis.iter().enumerate() {
            result[d] = result[d].clone() + coef.clone() * b.clone();
        }
        let mut next = vec![S::zero(); basis.len() + 1];
        for (d, b) in basis.iter().enumerate() {
            next[d + 1] = next[d + 1].clone() + b.clone();
            next[d] = next[d].clone() - x[i].clone() * b.clone();
        }
        basis = next;
    }
    trim(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, Rational};

    #[test]
    fn second_difference_matches_pointwise() {
        let p: Vec<Rational> = vec![rat(3, 1), rat(-1, 2), rat(2, 3), rat(1, 1), rat(-1, 5)];
        let q = second_difference(&p);
        for n in 1..10 {
            let direct = eval(&p, n) * rat(2, 1) - eval(&p, n + 1) - eval(&p, n - 1);
            assert_eq!(eval(&q, n), direct);
        }
        assert_eq!(second_difference(&[rat(4, 1), rat(7, 1)]), Vec::<Rational>::new());
    }

    #[test]
    fn interpolation_recovers_polynomial() {
        let p: Vec<Rational> = vec![rat(1, 6), rat(0, 1), rat(-5, 2), rat(1, 3)];
        let xs = [4, 5, 6, 7];
        let ys: Vec<Rational> = xs.iter().map(|&x| eval(&p, x)).collect();
        assert_eq!(interpolate(&xs, &ys), p);
    }
}
