//! The free operator `H₀ = h₀ ⊕ h₁ ⊕ … ⊕ h_N` and the coefficients `G₀,ⱼ`
//! of its resolvent expansion at `κ = 0`.
//!
//! On `K` the coefficients are `(−1)^{j/2} h₀^{−j/2−1}` for even `j` and zero
//! for odd `j`. On a ray `g_j[n, m]` is, for fixed `m = n ∧ m`, a polynomial
//! of degree `j` in `n ∨ m`; these tail polynomials are exact rationals and
//! shared by every ray.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::graph::{poly, GraphWithRays, RayFunction, RayPart, Site};
use crate::linalg::{inverse, Matrix};
use crate::scalar::{rat, RankTol, Rational, Scalar};
use crate::series::ray_resolvent_entry_series;

pub const DEFAULT_KERNEL_CAP: usize = 8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FreeError {
    #[error("kernel order {j} exceeds the configured cap {cap}")]
    OrderExceedsCap { j: usize, cap: usize },
    #[error("the free coefficients apply only to finitely supported functions")]
    NotFinitelySupported,
    #[error("h0 is not positive definite")]
    NotPositiveDefinite,
}

/// Choice of the operator on `K`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FreeChoice {
    /// Dirichlet Laplacian of `K` plus one unit per attached ray.
    #[default]
    GraphDirichlet,
    /// `h₀ = 2·id`.
    TwiceIdentity,
}

/// Dirichlet matrix `deg_K(x) + #{α : x_α = x}` on the diagonal, `−1` on edges.
pub fn dirichlet_h0<S: Scalar>(g: &GraphWithRays) -> Matrix<S> {
    let mut h = Matrix::zeros(g.k_len(), g.k_len());
    for x in 0..g.k_len() {
        h[(x, x)] = S::from_i64((g.degree(x) + g.rays_at(x).len()) as i64);
    }
    for &(x, y) in g.edges() {
        h[(x, y)] = -S::one();
        h[(y, x)] = -S::one();
    }
    h
}

#[derive(Debug)]
pub struct FreeModel<S> {
    graph: GraphWithRays,
    choice: FreeChoice,
    h0: Matrix<S>,
    pivots: Vec<S>,
    cap: usize,
    tol: RankTol,
    /// `inverse_powers[i] = h₀^{−(i+1)}`, filled on demand.
    inverse_powers: Mutex<Vec<Matrix<S>>>,
}

impl<S: Scalar> FreeModel<S> {
    pub fn new(g: &GraphWithRays) -> Result<Self, FreeError> {
        Self::with_options(g, FreeChoice::default(), DEFAULT_KERNEL_CAP, RankTol::default())
    }

    pub fn with_options(
        g: &GraphWithRays,
        choice: FreeChoice,
        cap: usize,
        tol: RankTol,
    ) -> Result<Self, FreeError> {
        let h0 = match choice {
            FreeChoice::GraphDirichlet => dirichlet_h0(g),
            FreeChoice::TwiceIdentity => Matrix::identity(g.k_len()).scale(&S::from_i64(2)),
        };
        let pivots = ldl_pivots(&h0);
        let scale = h0.max_abs();
        if pivots.iter().any(|p| !p.is_positive() || p.negligible(scale, tol)) {
            return Err(FreeError::NotPositiveDefinite);
        }
        let first = inverse(&h0, tol).map_err(|_| FreeError::NotPositiveDefinite)?;
        Ok(FreeModel {
            graph: g.clone(),
            choice,
            h0,
            pivots,
            cap,
            tol,
            inverse_powers: Mutex::new(vec![first]),
        })
    }

    pub fn graph(&self) -> &GraphWithRays {
        &self.graph
    }

    pub fn choice(&self) -> FreeChoice {
        self.choice
    }

    pub fn h0(&self) -> &Matrix<S> {
        &self.h0
    }

    /// Pivots of the `LDLᵀ` factorization of `h₀`; all positive.
    pub fn positivity_witness(&self) -> &[S] {
        &self.pivots
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn tol(&self) -> RankTol {
        self.tol
    }

    fn check(&self, j: usize) -> Result<(), FreeError> {
        if j > self.cap {
            Err(FreeError::OrderExceedsCap { j, cap: self.cap })
        } else {
            Ok(())
        }
    }

    /// `h₀^{−p}` for `p ≥ 1`.
    pub fn h0_inverse_power(&self, p: usize) -> Matrix<S> {
        assert!(p >= 1);
        let mut powers = self.inverse_powers.lock().expect("cache lock");
        while powers.len() < p {
            let next = &powers[powers.len() - 1] * &powers[0];
            powers.push(next);
        }
        powers[p - 1].clone()
    }

    /// `K` block of `G₀,ⱼ`; `None` for odd `j`.
    pub fn k_block(&self, j: usize) -> Result<Option<Matrix<S>>, FreeError> {
        self.check(j)?;
        if j % 2 == 1 {
            return Ok(None);
        }
        let m = self.h0_inverse_power(j / 2 + 1);
        Ok(Some(if (j / 2) % 2 == 1 { -&m } else { m }))
    }

    /// `G₀,ⱼ[x, y]`.
    pub fn free_kernel(&self, j: usize, x: Site, y: Site) -> Result<S, FreeError> {
        self.check(j)?;
        Ok(match (x, y) {
            (Site::K(a), Site::K(b)) => match self.k_block(j)? {
                Some(m) => m[(a, b)].clone(),
                None => S::zero(),
            },
            (Site::Ray { ray: a, pos: n }, Site::Ray { ray: b, pos: m }) if a == b => {
                S::from_rational(&ray_kernel(j, n, m))
            }
            _ => S::zero(),
        })
    }

    /// `G₀,ⱼ u` for finitely supported `u`; ray tails are the exact
    /// polynomials `Σ_m u[m] g_j[·, m]`.
    pub fn apply_free_coefficient(&self, j: usize, u: &RayFunction<S>) -> Result<RayFunction<S>, FreeError> {
        self.check(j)?;
        if !u.is_finitely_supported() {
            return Err(FreeError::NotFinitelySupported);
        }
        let k = match self.k_block(j)? {
            Some(m) => m.mul_vec(u.k_values()),
            None => vec![S::zero(); self.graph.k_len()],
        };
        let rays = u.rays().iter().map(|part| apply_ray_kernel(j, part)).collect();
        Ok(RayFunction::from_parts(k, rays))
    }

    /// `H₀ u` with Dirichlet boundary on every ray; exact on polynomial tails.
    pub fn apply_h0(&self, u: &RayFunction<S>) -> RayFunction<S> {
        let k = self.h0.mul_vec(u.k_values());
        let rays = u.rays().iter().map(|r| r.second_difference(&S::zero())).collect();
        RayFunction::from_parts(k, rays)
    }

    /// `[⟨a_i, G₀,ⱼ b_l⟩]` for finitely supported families.
    pub fn sandwich(
        &self,
        j: usize,
        left: &[RayFunction<S>],
        right: &[RayFunction<S>],
    ) -> Result<Matrix<S>, FreeError> {
        let applied = right
            .iter()
            .map(|b| self.apply_free_coefficient(j, b))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Matrix::from_fn(left.len(), right.len(), |i, l| {
            crate::graph::pair(&left[i], &applied[l]).expect("left factor is finitely supported")
        }))
    }
}

impl<S: Scalar> Clone for FreeModel<S> {
    fn clone(&self) -> Self {
        let powers = self.inverse_powers.lock().expect("cache lock").clone();
        FreeModel {
            graph: self.graph.clone(),
            choice: self.choice,
            h0: self.h0.clone(),
            pivots: self.pivots.clone(),
            cap: self.cap,
            tol: self.tol,
            inverse_powers: Mutex::new(powers),
        }
    }
}

/// Pivots of symmetric Gaussian elimination without row exchanges; a
/// symmetric matrix is positive definite iff all of them are positive.
fn ldl_pivots<S: Scalar>(a: &Matrix<S>) -> Vec<S> {
    let n = a.rows();
    let mut work = a.clone();
    let mut pivots = Vec::with_capacity(n);
    for p in 0..n {
        let pivot = work[(p, p)].clone();
        pivots.push(pivot.clone());
        if pivot.is_zero() {
            break;
        }
        for i in p + 1..n {
            let factor = work[(i, p)].clone() / pivot.clone();
            if factor.is_zero() {
                continue;
            }
            for l in p..n {
                work[(i, l)] = work[(i, l)].clone() - factor.clone() * work[(p, l)].clone();
            }
        }
    }
    pivots
}

/// `g_j[n, m]` on one ray.
pub fn ray_kernel(j: usize, n: usize, m: usize) -> Rational {
    poly::eval(&ray_tail(j, n.min(m)), n.max(m))
}

/// `g_j[n, m]` read off the power series of the half-line resolvent.
pub fn ray_kernel_from_series(j: usize, n: usize, m: usize) -> Rational {
    ray_resolvent_entry_series(n as u32, m as u32, j).coeff(j).clone()
}

/// Polynomial `n ↦ g_j[n, m]` valid for `n ≥ m`.
pub fn ray_tail(j: usize, m: usize) -> Vec<Rational> {
    assert!(m >= 1, "ray positions start at 1");
    let mq = Rational::from_integer((m as i64).into());
    let cube = &mq * &mq * &mq;
    match j {
        0 => poly::trim(vec![mq]),
        1 => poly::trim(vec![Rational::zero(), -mq]),
        2 => poly::trim(vec![(&cube - &mq) / rat(6, 1), Rational::zero(), mq / rat(2, 1)]),
        3 => poly::trim(vec![
            Rational::zero(),
            &mq * rat(5, 24) - &cube / rat(6, 1),
            Rational::zero(),
            -mq / rat(6, 1),
        ]),
        _ => interpolated_tail(j, m),
    }
}

fn interpolated_tail(j: usize, m: usize) -> Vec<Rational> {
    static MEMO: OnceLock<Mutex<HashMap<(usize, usize), Vec<Rational>>>> = OnceLock::new();
    let memo = MEMO.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(p) = memo.lock().expect("memo lock").get(&(j, m)) {
        return p.clone();
    }
    // Two spare nodes confirm the degree bound.
    let xs: Vec<usize> = (m..=m + j + 2).collect();
    let ys: Vec<Rational> = xs.iter().map(|&n| ray_kernel_from_series(j, n, m)).collect();
    let p = poly::interpolate(&xs, &ys);
    assert!(p.len() <= j + 1, "g_{j} tail exceeds degree {j}");
    memo.lock().expect("memo lock").insert((j, m), p.clone());
    p
}

/// `g_j` applied to one finitely supported ray restriction.
fn apply_ray_kernel<S: Scalar>(j: usize, part: &RayPart<S>) -> RayPart<S> {
    let support: Vec<(usize, S)> = part
        .head()
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_zero())
        .map(|(i, v)| (i + 1, v.clone()))
        .collect();
    let radius = support.last().map_or(0, |(m, _)| *m);
    let tails: Vec<(Vec<S>, &S)> = support
        .iter()
        .map(|(m, v)| (ray_tail(j, *m).iter().map(S::from_rational).collect(), v))
        .collect();
    let tail = tails.iter().fold(Vec::new(), |acc, (p, v)| poly::add(&acc, &poly::scale(*v, p)));
    let head = (1..radius)
        .map(|n| {
            support.iter().fold(S::zero(), |acc, (m, v)| {
                acc + S::from_rational(&ray_kernel(j, n, *m)) * v.clone()
            })
        })
        .collect();
    RayPart::new(head, tail)
}

/// `(h g)[n, m] = 2g[n, m] − g[n+1, m] − g[n−1, m]` with `g[0, m] = 0`.
pub fn ray_h_applied(j: usize, n: usize, m: usize) -> Rational {
    let below = if n == 1 { Rational::zero() } else { ray_kernel(j, n - 1, m) };
    rat(2, 1) * ray_kernel(j, n, m) - ray_kernel(j, n + 1, m) - below
}

/// Expected value of `(h_α g_j)[n, m]`: `δ_{nm}`, `0`, or `−g_{j−2}[n, m]`.
pub fn ray_recursion_target(j: usize, n: usize, m: usize) -> Rational {
    match j {
        0 if n == m => Rational::one(),
        0 | 1 => Rational::zero(),
        _ => -ray_kernel(j - 2, n, m),
    }
}
