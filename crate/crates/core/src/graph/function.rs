use super::{poly, GraphError, GraphWithRays, Site};
use crate::scalar::{RankTol, Rational, Scalar};

/// Restriction of a function to one ray: explicit values at positions
/// `1..=head.len()`, and the polynomial `tail` beyond.
///
/// Normalized form: `tail` has no trailing zeros and the last head value
/// differs from the tail polynomial at that position.
#[derive(Clone, Debug, PartialEq)]
pub struct RayPart<S> {
    head: Vec<S>,
    tail: Vec<S>,
}

impl<S: Scalar> RayPart<S> {
    pub fn new(head: Vec<S>, tail: Vec<S>) -> Self {
        let mut part = RayPart { head, tail: poly::trim(tail) };
        while let Some(last) = part.head.last() {
            let at = poly::eval(&part.tail, part.head.len());
            if (last.clone() - at).is_zero() {
                part.head.pop();
            } else {
                break;
            }
        }
        part
    }

    pub fn zero() -> Self {
        RayPart { head: Vec::new(), tail: Vec::new() }
    }

    pub fn head(&self) -> &[S] {
        &self.head
    }

    pub fn tail(&self) -> &[S] {
        &self.tail
    }

    pub fn eval(&self, pos: usize) -> S {
        debug_assert!(pos >= 1);
        if pos <= self.head.len() {
            self.head[pos - 1].clone()
        } else {
            poly::eval(&self.tail, pos)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tail.is_empty()
    }

    pub fn tail_degree(&self) -> Option<usize> {
        poly::degree(&self.tail)
    }

    /// Coefficient of `n^d` in the tail.
    pub fn tail_coefficient(&self, d: usize) -> S {
        self.tail.get(d).cloned().unwrap_or_else(S::zero)
    }

    pub fn lin(a: &S, x: &Self, b: &S, y: &Self) -> Self {
        let len = x.head.len().max(y.head.len());
        let head = (1..=len).map(|n| a.clone() * x.eval(n) + b.clone() * y.eval(n)).collect();
        let tail = poly::add(&poly::scale(a, &x.tail), &poly::scale(b, &y.tail));
        Self::new(head, tail)
    }

    /// `(h u)[n] = 2u[n] − u[n+1] − u[n−1]`, with `u[0] = boundary`.
    pub fn second_difference(&self, boundary: &S) -> Self {
        let len = self.head.len() + 1;
        let two = S::from_i64(2);
        let head = (1..=len)
            .map(|n| {
                let prev = if n == 1 { boundary.clone() } else { self.eval(n - 1) };
                two.clone() * self.eval(n) - self.eval(n + 1) - prev
            })
            .collect();
        Self::new(head, poly::second_difference(&self.tail))
    }

    fn approx_eq(&self, other: &Self, scale: f64, tol: RankTol) -> bool {
        let len = self.head.len().max(other.head.len());
        let heads = (1..=len).all(|n| (self.eval(n) - other.eval(n)).negligible(scale, tol));
        let degree = self.tail.len().max(other.tail.len());
        heads
            && (0..degree)
                .all(|d| (self.tail_coefficient(d) - other.tail_coefficient(d)).negligible(scale, tol))
    }

    fn max_abs(&self) -> f64 {
        self.head.iter().chain(&self.tail).map(Scalar::magnitude).fold(0.0, f64::max)
    }
}

/// A function on a graph with rays: values on `K` plus one [`RayPart`] per ray.
///
/// Constructors and arithmetic keep every part normalized, so for exact
/// scalars structural equality is equality of functions.
#[derive(Clone, Debug, PartialEq)]
pub struct RayFunction<S> {
    k: Vec<S>,
    rays: Vec<RayPart<S>>,
}

impl<S: Scalar> RayFunction<S> {
    pub fn from_parts(k: Vec<S>, rays: Vec<RayPart<S>>) -> Self {
        RayFunction { k, rays }
    }

    pub fn zero(g: &GraphWithRays) -> Self {
        Self::zero_sized(g.k_len(), g.ray_count())
    }

    pub fn zero_sized(k_len: usize, rays: usize) -> Self {
        RayFunction { k: vec![S::zero(); k_len], rays: vec![RayPart::zero(); rays] }
    }

    pub fn delta(g: &GraphWithRays, site: Site) -> Self {
        Self::from_sites(g, &[(site, S::one())])
    }

    /// Finitely supported function with the given values; repeated sites add.
    pub fn from_sites(g: &GraphWithRays, values: &[(Site, S)]) -> Self {
        let mut k = vec![S::zero(); g.k_len()];
        let mut heads: Vec<Vec<S>> = vec![Vec::new(); g.ray_count()];
        for (site, value) in values {
            match *site {
                Site::K(x) => k[x] = k[x].clone() + value.clone(),
                Site::Ray { ray, pos } => {
                    let head = &mut heads[ray];
                    if head.len() < pos {
                        head.resize(pos, S::zero());
                    }
                    head[pos - 1] = head[pos - 1].clone() + value.clone();
                }
            }
        }
        let rays = heads.into_iter().map(|h| RayPart::new(h, Vec::new())).collect();
        RayFunction { k, rays }
    }

    /// `𝐧` on ray `ray`: the position `n` at `n`, zero elsewhere.
    pub fn ray_linear(g: &GraphWithRays, ray: usize) -> Self {
        let mut f = Self::zero(g);
        f.rays[ray] = RayPart::new(Vec::new(), vec![S::zero(), S::one()]);
        f
    }

    /// `𝟏` on ray `ray`.
    pub fn ray_constant(g: &GraphWithRays, ray: usize) -> Self {
        let mut f = Self::zero(g);
        f.rays[ray] = RayPart::new(Vec::new(), vec![S::one()]);
        f
    }

    pub fn k_values(&self) -> &[S] {
        &self.k
    }

    pub fn rays(&self) -> &[RayPart<S>] {
        &self.rays
    }

    pub fn ray(&self, ray: usize) -> &RayPart<S> {
        &self.rays[ray]
    }

    pub fn eval(&self, site: Site) -> S {
        match site {
            Site::K(x) => self.k[x].clone(),
            Site::Ray { ray, pos } => self.rays[ray].eval(pos),
        }
    }

    pub fn lin(a: &S, x: &Self, b: &S, y: &Self) -> Self {
        let k = x.k.iter().zip(&y.k).map(|(p, q)| a.clone() * p.clone() + b.clone() * q.clone()).collect();
        let rays = x.rays.iter().zip(&y.rays).map(|(p, q)| RayPart::lin(a, p, b, q)).collect();
        RayFunction { k, rays }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::lin(&S::one(), self, &S::one(), other)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::lin(&S::one(), self, &-S::one(), other)
    }

    pub fn scale(&self, c: &S) -> Self {
        Self::lin(c, self, &S::zero(), self)
    }

    /// `Σ coeffs[i] · funcs[i]`; `template` fixes the shape when `funcs` is empty.
    pub fn combination(template: &Self, coeffs: &[S], funcs: &[Self]) -> Self {
        assert_eq!(coeffs.len(), funcs.len(), "combination length mismatch");
        let zero = Self::zero_sized(template.k.len(), template.rays.len());
        coeffs.iter().zip(funcs).fold(zero, |acc, (c, f)| {
            if c.is_zero() {
                acc
            } else {
                Self::lin(&S::one(), &acc, c, f)
            }
        })
    }

    pub fn is_finitely_supported(&self) -> bool {
        self.rays.iter().all(RayPart::is_finite)
    }

    pub fn is_zero(&self) -> bool {
        self.k.iter().all(Scalar::is_zero)
            && self.rays.iter().all(|r| r.head.iter().all(Scalar::is_zero) && r.is_finite())
    }

    pub fn max_tail_degree(&self) -> Option<usize> {
        self.rays.iter().filter_map(RayPart::tail_degree).max()
    }

    /// Longest head over all rays.
    pub fn support_radius(&self) -> usize {
        self.rays.iter().map(|r| r.head.len()).max().unwrap_or(0)
    }

    /// Coefficient of `n^d` in each ray's tail.
    pub fn tail_vector(&self, d: usize) -> Vec<S> {
        self.rays.iter().map(|r| r.tail_coefficient(d)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.k.iter().map(Scalar::magnitude).chain(self.rays.iter().map(RayPart::max_abs)).fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: RankTol) -> bool {
        if S::EXACT {
            return self == other;
        }
        let scale = self.max_abs().max(other.max_abs());
        self.k.iter().zip(&other.k).all(|(a, b)| (a.clone() - b.clone()).negligible(scale, tol))
            && self.rays.iter().zip(&other.rays).all(|(a, b)| a.approx_eq(b, scale, tol))
    }

    /// Copy with negligible tail coefficients removed. Exact scalars only
    /// drop exact zeros, so this is the identity for them.
    pub fn chop_tails(&self, tol: RankTol) -> Self {
        if S::EXACT {
            return self.clone();
        }
        let scale = self.max_abs();
        let rays = self
            .rays
            .iter()
            .map(|r| {
                let tail = r.tail.iter().map(|t| if t.negligible(scale, tol) { S::zero() } else { t.clone() }).collect();
                RayPart::new(r.head.clone(), tail)
            })
            .collect();
        RayFunction { k: self.k.clone(), rays }
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> RayFunction<T> {
        RayFunction {
            k: self.k.iter().map(&f).collect(),
            rays: self
                .rays
                .iter()
                .map(|r| RayPart::new(r.head.iter().map(&f).collect(), r.tail.iter().map(&f).collect()))
                .collect(),
        }
    }
}

/// Duality pairing `Σ_x u1[x]·u2[x]` (real scalars).
///
/// Defined when, on every ray, at least one factor has a zero tail.
pub fn pair<S: Scalar>(u1: &RayFunction<S>, u2: &RayFunction<S>) -> Result<S, GraphError> {
    let mut total = crate::linalg::dot(&u1.k, &u2.k);
    for (ray, (a, b)) in u1.rays.iter().zip(&u2.rays).enumerate() {
        let len = match (a.is_finite(), b.is_finite()) {
            (false, false) => return Err(GraphError::NonSummablePair(ray)),
            (true, true) => a.head.len().min(b.head.len()),
            (true, false) => a.head.len(),
            (false, true) => b.head.len(),
        };
        for n in 1..=len {
            let (x, y) = (a.eval(n), b.eval(n));
            if !x.is_zero() && !y.is_zero() {
                total = total + x * y;
            }
        }
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceKind {
    /// Weighted `ℓ¹` space.
    L1Weighted,
    /// Its dual, weighted `ℓ^∞`.
    LinfDualWeighted,
}

/// Membership of `u` in the weighted space of order `s`.
///
/// Polynomial tails are never weighted-summable, and lie in the dual space
/// of order `s` exactly when their degree is at most `s`.
pub fn space_membership<S: Scalar>(u: &RayFunction<S>, s: &Rational, kind: SpaceKind) -> bool {
    match kind {
        SpaceKind::L1Weighted => u.is_finitely_supported(),
        SpaceKind::LinfDualWeighted => match u.max_tail_degree() {
            None => true,
            Some(d) => Scalar::to_f64(s) >= d as f64,
        },
    }
}

/// `−Δ_G u`, exact on polynomial tails.
pub fn apply_graph_laplacian<S: Scalar>(g: &GraphWithRays, u: &RayFunction<S>) -> RayFunction<S> {
    let k = (0..g.k_len())
        .map(|x| {
            let inner = g.neighbors(x).iter().fold(S::zero(), |acc, &y| acc + u.k[x].clone() - u.k[y].clone());
            g.rays_at(x)
                .into_iter()
                .fold(inner, |acc, a| acc + u.k[x].clone() - u.rays[a].eval(1))
        })
        .collect();
    let rays = (0..g.ray_count())
        .map(|a| u.rays[a].second_difference(&u.k[g.joints()[a]]))
        .collect();
    RayFunction { k, rays }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::scalar::rat;

    fn star3() -> GraphWithRays {
        GraphWithRays::star(3)
    }

    #[test]
    fn linear_function_is_harmonic_on_the_ray() {
        let g = star3();
        let n: RayFunction<Rational> = RayFunction::ray_linear(&g, 0);
        let lap = apply_graph_laplacian(&g, &n);
        assert_eq!(lap.eval(Site::Ray { ray: 0, pos: 2 }), rat(0, 1));
        assert_eq!(lap.eval(Site::Ray { ray: 0, pos: 1 }), rat(0, 1));
        assert_eq!(lap.eval(Site::K(0)), rat(-1, 1));
        assert!(lap.is_finitely_supported());
    }

    #[test]
    fn constant_on_whole_graph_is_harmonic() {
        let g = GraphWithRays::build(&["a", "b"], &[("a", "b")], &["a", "b"]).unwrap();
        let mut one = RayFunction::from_sites(&g, &[(Site::K(0), rat(1, 1)), (Site::K(1), rat(1, 1))]);
        for a in 0..2 {
            one = one.add(&RayFunction::ray_constant(&g, a));
        }
        assert!(apply_graph_laplacian(&g, &one).is_zero());
    }

    #[test]
    fn pairing_examples() {
        let g = star3();
        let d3: RayFunction<Rational> = RayFunction::delta(&g, Site::Ray { ray: 0, pos: 3 });
        let n1 = RayFunction::ray_linear(&g, 0);
        assert_eq!(pair(&d3, &n1).unwrap(), rat(3, 1));
        let c1: RayFunction<Rational> = RayFunction::ray_constant(&g, 0);
        assert_eq!(pair(&c1, &c1), Err(GraphError::NonSummablePair(0)));
        let u = RayFunction::from_sites(
            &g,
            &[(Site::Ray { ray: 1, pos: 1 }, rat(1, 1)), (Site::Ray { ray: 1, pos: 2 }, rat(-1, 1))],
        );
        assert_eq!(pair(&u, &RayFunction::ray_linear(&g, 1)).unwrap(), rat(-1, 1));
    }

    #[test]
    fn membership_examples() {
        let g = star3();
        let n: RayFunction<Rational> = RayFunction::ray_linear(&g, 0);
        assert!(space_membership(&n, &rat(1, 1), SpaceKind::LinfDualWeighted));
        assert!(!space_membership(&n, &rat(1, 2), SpaceKind::LinfDualWeighted));
        assert!(space_membership(&RayFunction::<Rational>::ray_constant(&g, 1), &rat(0, 1), SpaceKind::LinfDualWeighted));
        assert!(!space_membership(&n, &rat(2, 1), SpaceKind::L1Weighted));
    }

    #[test]
    fn head_is_trimmed_against_tail() {
        let part: RayPart<Rational> = RayPart::new(vec![rat(5, 1), rat(2, 1), rat(3, 1)], vec![rat(0, 1), rat(1, 1)]);
        assert_eq!(part.head(), &[rat(5, 1)]);
        assert_eq!(part.eval(3), rat(3, 1));
    }

    /// Dense matrix of `−Δ_G` on K plus positions up to `depth`.
    fn dense_laplacian(g: &GraphWithRays, depth: usize) -> (Vec<Site>, Matrix<Rational>) {
        let sites = g.window(depth);
        let idx = |s: Site| sites.iter().position(|&t| t == s);
        let mut m = Matrix::zeros(sites.len(), sites.len());
        let connect = |a: Site, b: Site, m: &mut Matrix<Rational>| {
            if let (Some(i), Some(j)) = (idx(a), idx(b)) {
                m[(i, j)] = m[(i, j)].clone() - rat(1, 1);
                m[(j, i)] = m[(j, i)].clone() - rat(1, 1);
            }
            for s in [a, b] {
                if let Some(i) = idx(s) {
                    m[(i, i)] = m[(i, i)].clone() + rat(1, 1);
                }
            }
        };
        for &(x, y) in g.edges() {
            connect(Site::K(x), Site::K(y), &mut m);
        }
        for (ray, &x) in g.joints().iter().enumerate() {
            connect(Site::K(x), Site::Ray { ray, pos: 1 }, &mut m);
            for pos in 1..=depth {
                connect(Site::Ray { ray, pos }, Site::Ray { ray, pos: pos + 1 }, &mut m);
            }
        }
        (sites, m)
    }

    #[test]
    fn laplacian_matches_dense_matrix_inside_window() {
        let g = GraphWithRays::build(&["a", "b", "c"], &[("a", "b"), ("b", "c")], &["a", "c", "c"]).unwrap();
        let depth = 8;
        let (sites, m) = dense_laplacian(&g, depth);
        let u = RayFunction::from_sites(
            &g,
            &[
                (Site::K(1), rat(2, 1)),
                (Site::K(2), rat(-1, 3)),
                (Site::Ray { ray: 0, pos: 1 }, rat(1, 2)),
                (Site::Ray { ray: 2, pos: 3 }, rat(4, 1)),
            ],
        )
        .add(&RayFunction::ray_linear(&g, 1));
        let values: Vec<Rational> = sites.iter().map(|&s| u.eval(s)).collect();
        let dense = m.mul_vec(&values);
        let exact = apply_graph_laplacian(&g, &u);
        for (i, &s) in sites.iter().enumerate() {
            let interior = match s {
                Site::Ray { pos, .. } => pos < depth,
                Site::K(_) => true,
            };
            if interior {
                assert_eq!(exact.eval(s), dense[i], "site {}", g.site_label(s));
            }
        }
    }
}
