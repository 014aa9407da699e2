//! Kernel operators of the form
//! `X = a·I + Σ_j c_j G₀,ⱼ + Σ_{i,l} |L_i⟩ W_il ⟨R_l|`.
//!
//! Only even `j` appear in the base part; odd free coefficients are finite
//! rank on every ray and are stored in the low-rank block with polynomial
//! factors. The low-rank factors are [`RayFunction`]s and may carry
//! polynomial tails, so an expression is a kernel on all of `G`, evaluable
//! at any pair of sites and applicable to finitely supported functions.

use std::collections::BTreeMap;

use crate::free::{ray_tail, FreeError, FreeModel};
use crate::graph::{pair, poly, GraphError, GraphWithRays, RayFunction, RayPart, Site};
use crate::linalg::{inverse, null_space_general, rank, rref, subspace_intersect, Matrix, Subspace};
use crate::scalar::{RankTol, Rational, Scalar};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OperatorError {
    #[error("the product of two free base kernels is not finite rank")]
    BaseComposition,
    #[error("a free kernel would act on a function that is not finitely supported")]
    UnboundedComposition,
    #[error(transparent)]
    Pairing(#[from] GraphError),
    #[error(transparent)]
    Free(#[from] FreeError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorExpr<S> {
    k_len: usize,
    rays: usize,
    identity: S,
    /// Even order `j` ↦ coefficient of `G₀,ⱼ`; no zero entries.
    base: BTreeMap<usize, S>,
    left: Vec<RayFunction<S>>,
    weights: Matrix<S>,
    right: Vec<RayFunction<S>>,
}

/// Function with the polynomial `p` as tail on ray `ray` and zero elsewhere.
pub fn ray_polynomial<S: Scalar>(g: &GraphWithRays, ray: usize, p: Vec<S>) -> RayFunction<S> {
    let mut rays = vec![RayPart::zero(); g.ray_count()];
    rays[ray] = RayPart::new(Vec::new(), p);
    RayFunction::from_parts(vec![S::zero(); g.k_len()], rays)
}

impl<S: Scalar> OperatorExpr<S> {
    pub fn zero(g: &GraphWithRays) -> Self {
        OperatorExpr {
            k_len: g.k_len(),
            rays: g.ray_count(),
            identity: S::zero(),
            base: BTreeMap::new(),
            left: Vec::new(),
            weights: Matrix::zeros(0, 0),
            right: Vec::new(),
        }
    }

    pub fn identity(g: &GraphWithRays) -> Self {
        OperatorExpr { identity: S::one(), ..Self::zero(g) }
    }

    /// `Σ_{i,l} |left_i⟩ weights_il ⟨right_l|`.
    pub fn low_rank(
        g: &GraphWithRays,
        left: Vec<RayFunction<S>>,
        weights: Matrix<S>,
        right: Vec<RayFunction<S>>,
    ) -> Self {
        assert_eq!((weights.rows(), weights.cols()), (left.len(), right.len()), "low-rank shape mismatch");
        OperatorExpr { left, weights, right, ..Self::zero(g) }
    }

    /// `Σ_i |f_i⟩⟨f_i|`-type block `F W Fᵀ`.
    pub fn congruence(g: &GraphWithRays, funcs: Vec<RayFunction<S>>, weights: Matrix<S>) -> Self {
        Self::low_rank(g, funcs.clone(), weights, funcs)
    }

    /// `G₀,ⱼ` as an expression. Odd orders are expanded into dyads
    /// `Σ_{a,b} c_ab |n^a⟩⟨n^b|` on every ray.
    pub fn free(g: &GraphWithRays, j: usize) -> Self {
        if j % 2 == 0 {
            let mut base = BTreeMap::new();
            base.insert(j, S::one());
            return OperatorExpr { base, ..Self::zero(g) };
        }
        let coeffs = odd_kernel_coefficients(j);
        let degree = coeffs.len();
        let mut left = Vec::new();
        let mut right = Vec::new();
        for ray in 0..g.ray_count() {
            for a in 0..degree {
                let mut monomial = vec![S::zero(); a + 1];
                monomial[a] = S::one();
                left.push(ray_polynomial(g, ray, monomial));
                let row: Vec<S> = coeffs[a].iter().map(S::from_rational).collect();
                right.push(ray_polynomial(g, ray, row));
            }
        }
        let n = left.len();
        Self::low_rank(g, left, Matrix::identity(n), right)
    }

    pub fn identity_coefficient(&self) -> &S {
        &self.identity
    }

    pub fn base_terms(&self) -> &BTreeMap<usize, S> {
        &self.base
    }

    pub fn left(&self) -> &[RayFunction<S>] {
        &self.left
    }

    pub fn right(&self) -> &[RayFunction<S>] {
        &self.right
    }

    pub fn weights(&self) -> &Matrix<S> {
        &self.weights
    }

    /// Number of dyads in the low-rank block.
    pub fn block_size(&self) -> usize {
        self.left.len()
    }

    pub fn has_base(&self) -> bool {
        !self.identity.is_zero() || !self.base.is_empty()
    }

    fn template(&self) -> RayFunction<S> {
        RayFunction::zero_sized(self.k_len, self.rays)
    }

    /// `X[x, y]`.
    pub fn eval(&self, model: &FreeModel<S>, x: Site, y: Site) -> Result<S, OperatorError> {
        let mut total = if x == y { self.identity.clone() } else { S::zero() };
        for (&j, c) in &self.base {
            total = total + c.clone() * model.free_kernel(j, x, y)?;
        }
        if !self.left.is_empty() {
            let lx: Vec<S> = self.left.iter().map(|f| f.eval(x)).collect();
            let ry: Vec<S> = self.right.iter().map(|f| f.eval(y)).collect();
            total = total + crate::linalg::dot(&lx, &self.weights.mul_vec(&ry));
        }
        Ok(total)
    }

    /// Kernel restricted to `rows × cols`.
    pub fn to_matrix(&self, model: &FreeModel<S>, rows: &[Site], cols: &[Site]) -> Result<Matrix<S>, OperatorError> {
        let mut m = Matrix::zeros(rows.len(), cols.len());
        for (i, &x) in rows.iter().enumerate() {
            for (l, &y) in cols.iter().enumerate() {
                m[(i, l)] = self.eval(model, x, y)?;
            }
        }
        Ok(m)
    }

    /// `X u` for finitely supported `u`.
    pub fn apply(&self, model: &FreeModel<S>, u: &RayFunction<S>) -> Result<RayFunction<S>, OperatorError> {
        let mut out = u.scale(&self.identity);
        for (&j, c) in &self.base {
            out = RayFunction::lin(&S::one(), &out, c, &model.apply_free_coefficient(j, u)?);
        }
        if !self.left.is_empty() {
            let pairings = self.right.iter().map(|r| pair(r, u)).collect::<Result<Vec<_>, _>>()?;
            let coeffs = self.weights.mul_vec(&pairings);
            out = out.add(&RayFunction::combination(&self.template(), &coeffs, &self.left));
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Self {
        OperatorExpr {
            left: self.right.clone(),
            right: self.left.clone(),
            weights: self.weights.transpose(),
            ..self.clone()
        }
    }

    pub fn scale(&self, c: &S) -> Self {
        let base = self
            .base
            .iter()
            .map(|(&j, b)| (j, c.clone() * b.clone()))
            .filter(|(_, b)| !b.is_zero())
            .collect();
        OperatorExpr {
            identity: c.clone() * self.identity.clone(),
            base,
            weights: self.weights.scale(c),
            ..self.clone()
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut base = self.base.clone();
        for (&j, c) in &other.base {
            let entry = base.entry(j).or_insert_with(S::zero);
            *entry = entry.clone() + c.clone();
        }
        base.retain(|_, c| !c.is_zero());
        let (n1, m1) = (self.left.len(), self.right.len());
        let (n2, m2) = (other.left.len(), other.right.len());
        let weights = Matrix::from_fn(n1 + n2, m1 + m2, |i, l| match (i < n1, l < m1) {
            (true, true) => self.weights[(i, l)].clone(),
            (false, false) => other.weights[(i - n1, l - m1)].clone(),
            _ => S::zero(),
        });
        OperatorExpr {
            k_len: self.k_len,
            rays: self.rays,
            identity: self.identity.clone() + other.identity.clone(),
            base,
            left: self.left.iter().chain(&other.left).cloned().collect(),
            weights,
            right: self.right.iter().chain(&other.right).cloned().collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-S::one()))
    }

    /// Same operator with a minimal low-rank block whose factors list the
    /// finitely supported combinations first.
    pub fn compress(&self, tol: RankTol) -> Self {
        let (left, weights, right) = compress_block(&self.left, &self.weights, &self.right, self.template(), tol);
        OperatorExpr { left, weights, right, ..self.clone() }
    }

    /// `self ∘ other`.
    pub fn compose(&self, model: &FreeModel<S>, other: &Self) -> Result<Self, OperatorError> {
        let tol = model.tol();
        let a = self.compress(tol);
        let b = other.compress(tol);
        if !a.base.is_empty() && !b.base.is_empty() {
            return Err(OperatorError::BaseComposition);
        }
        let g = model.graph();
        let mut result = OperatorExpr::zero(g);
        result.identity = a.identity.clone() * b.identity.clone();
        result = result.add(&base_only(&b).scale(&a.identity)).add(&base_only(&a).scale(&b.identity));
        result = result.add(&block_only(&b).scale(&a.identity)).add(&block_only(&a).scale(&b.identity));
        if !a.base.is_empty() && !b.left.is_empty() {
            let left = b
                .left
                .iter()
                .map(|f| a.apply_base(model, f))
                .collect::<Result<Vec<_>, _>>()?;
            result = result.add(&OperatorExpr::low_rank(g, left, b.weights.clone(), b.right.clone()));
        }
        if !b.base.is_empty() && !a.right.is_empty() {
            let right = a
                .right
                .iter()
                .map(|f| b.apply_base(model, f))
                .collect::<Result<Vec<_>, _>>()?;
            result = result.add(&OperatorExpr::low_rank(g, a.left.clone(), a.weights.clone(), right));
        }
        if !a.right.is_empty() && !b.left.is_empty() {
            let mut gram = Matrix::zeros(a.right.len(), b.left.len());
            for (i, r) in a.right.iter().enumerate() {
                for (l, f) in b.left.iter().enumerate() {
                    gram[(i, l)] = pair(r, f)?;
                }
            }
            let core = &(&a.weights * &gram) * &b.weights;
            result = result.add(&OperatorExpr::low_rank(g, a.left.clone(), core, b.right.clone()));
        }
        Ok(result.compress(tol))
    }

    /// `Σ c_j G₀,ⱼ f`, requiring `f` finitely supported.
    fn apply_base(&self, model: &FreeModel<S>, f: &RayFunction<S>) -> Result<RayFunction<S>, OperatorError> {
        if !f.is_finitely_supported() {
            return Err(OperatorError::UnboundedComposition);
        }
        let mut out = self.template();
        for (&j, c) in &self.base {
            out = RayFunction::lin(&S::one(), &out, c, &model.apply_free_coefficient(j, f)?);
        }
        Ok(out)
    }

    /// True when `self − other` compresses to the zero expression.
    pub fn same_as(&self, other: &Self, tol: RankTol) -> bool {
        let d = self.sub(other).compress(tol);
        d.identity.negligible(1.0, tol) && d.base.values().all(|c| c.negligible(1.0, tol)) && d.left.is_empty()
    }

    /// Tail coefficients of degree `d` of the left factors, one column per
    /// factor and one row per ray.
    pub fn left_tail_matrix(&self, d: usize) -> Matrix<S> {
        let columns: Vec<Vec<S>> = self.left.iter().map(|f| f.tail_vector(d)).collect();
        Matrix::from_columns(self.rays, &columns)
    }

    /// Converts every scalar, e.g. to evaluate an exact expression in floats.
    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T + Copy) -> OperatorExpr<T> {
        OperatorExpr {
            k_len: self.k_len,
            rays: self.rays,
            identity: f(&self.identity),
            base: self.base.iter().map(|(&j, c)| (j, f(c))).collect(),
            left: self.left.iter().map(|g| g.map(f)).collect(),
            weights: self.weights.map(f),
            right: self.right.iter().map(|g| g.map(f)).collect(),
        }
    }
}

/// `X₁ ∘ X₂ ∘ … ∘ X_n`, bracketed so that free kernels only meet finitely
/// supported factors. Every contiguous partial product is tried, shortest
/// first; the result is independent of the bracketing whenever one exists.
pub fn product<S: Scalar>(model: &FreeModel<S>, factors: &[&OperatorExpr<S>]) -> Result<OperatorExpr<S>, OperatorError> {
    let n = factors.len();
    assert!(n > 0, "empty product");
    // table[i][l]: product of factors[i..=i+l]
    let mut table: Vec<Vec<Result<OperatorExpr<S>, OperatorError>>> = Vec::with_capacity(n);
    for f in factors {
        table.push(vec![Ok((*f).clone())]);
    }
    for len in 1..n {
        for i in 0..n - len {
            let mut best = Err(OperatorError::UnboundedComposition);
            for split in 0..len {
                let (a, b) = (&table[i][split], &table[i + split + 1][len - split - 1]);
                if let (Ok(a), Ok(b)) = (a, b) {
                    match a.compose(model, b) {
                        Ok(x) => {
                            best = Ok(x);
                            break;
                        }
                        Err(e) => best = Err(e),
                    }
                }
            }
            table[i].push(best);
        }
    }
    table.swap_remove(0).pop().expect("full product entry")
}

fn base_only<S: Scalar>(x: &OperatorExpr<S>) -> OperatorExpr<S> {
    OperatorExpr {
        identity: S::zero(),
        left: Vec::new(),
        weights: Matrix::zeros(0, 0),
        right: Vec::new(),
        ..x.clone()
    }
}

fn block_only<S: Scalar>(x: &OperatorExpr<S>) -> OperatorExpr<S> {
    OperatorExpr { identity: S::zero(), base: BTreeMap::new(), ..x.clone() }
}

/// `c[a][b]` with `g_j[n, m] = Σ c_ab n^a m^b` for odd `j`.
fn odd_kernel_coefficients(j: usize) -> Vec<Vec<Rational>> {
    assert!(j % 2 == 1, "odd orders only");
    // Coefficient of n^a in the tail for fixed m is a polynomial in m of
    // degree ≤ j; two spare nodes confirm it.
    let ms: Vec<usize> = (1..=j + 3).collect();
    let tails: Vec<Vec<Rational>> = ms.iter().map(|&m| ray_tail(j, m)).collect();
    let coeffs: Vec<Vec<Rational>> = (0..=j)
        .map(|a| {
            let ys: Vec<Rational> = tails.iter().map(|t| t.get(a).cloned().unwrap_or_else(Rational::zero)).collect();
            let mut p = poly::interpolate(&ms, &ys);
            assert!(p.len() <= j + 1, "odd kernel coefficient exceeds degree {j}");
            p.resize(j + 1, Rational::zero());
            p
        })
        .collect();
    for (a, row) in coeffs.iter().enumerate() {
        for (b, c) in row.iter().enumerate() {
            assert_eq!(*c, coeffs[b][a], "odd kernel g_{j} is not a symmetric polynomial");
        }
    }
    coeffs
}

/// Exact coordinates of a family of functions: values on `K`, then per ray
/// the values at positions `1..=H` and the tail coefficients, where `H` and
/// the tail length are maxima over the family. Returns the coordinate
/// matrix (one column per function) and the indices of tail rows.
fn coordinates<S: Scalar>(funcs: &[RayFunction<S>], template: &RayFunction<S>) -> (Matrix<S>, Vec<usize>) {
    let k_len = template.k_values().len();
    let rays = template.rays().len();
    let mut rows: Vec<Vec<S>> = (0..k_len).map(|x| funcs.iter().map(|f| f.k_values()[x].clone()).collect()).collect();
    let mut tail_rows = Vec::new();
    for ray in 0..rays {
        let head = funcs.iter().map(|f| f.ray(ray).head().len()).max().unwrap_or(0);
        let tail = funcs.iter().map(|f| f.ray(ray).tail().len()).max().unwrap_or(0);
        for pos in 1..=head {
            rows.push(funcs.iter().map(|f| f.ray(ray).eval(pos)).collect());
        }
        for d in 0..tail {
            tail_rows.push(rows.len());
            rows.push(funcs.iter().map(|f| f.ray(ray).tail_coefficient(d)).collect());
        }
    }
    if rows.is_empty() {
        return (Matrix::zeros(0, funcs.len()), tail_rows);
    }
    (Matrix::from_rows(rows), tail_rows)
}

/// Independent subfamily `funcs[pivots]` and `E` with `funcs = funcs[pivots]·E`.
fn independent_subfamily<S: Scalar>(
    funcs: &[RayFunction<S>],
    template: &RayFunction<S>,
    tol: RankTol,
) -> (Vec<RayFunction<S>>, Matrix<S>) {
    let (coords, _) = coordinates(funcs, template);
    let r = rref(&coords, tol);
    let picked = r.pivots.iter().map(|&p| funcs[p].clone()).collect();
    let rows: Vec<usize> = (0..r.pivots.len()).collect();
    let all: Vec<usize> = (0..funcs.len()).collect();
    (picked, r.reduced.select(&rows, &all))
}

/// Basis of the column space of `w` (as coefficient vectors on `funcs`),
/// with a basis of its finitely supported part first.
fn finite_first_basis<S: Scalar>(
    funcs: &[RayFunction<S>],
    w: &Matrix<S>,
    template: &RayFunction<S>,
    tol: RankTol,
) -> Vec<Vec<S>> {
    let n = funcs.len();
    let columns = Subspace::span(n, &w.columns(), tol);
    let (coords, tail_rows) = coordinates(funcs, template);
    let all: Vec<usize> = (0..n).collect();
    let tails = coords.select(&tail_rows, &all);
    let finite = if tail_rows.is_empty() {
        Subspace::full(n)
    } else {
        Subspace::span(n, &null_space_general(&tails, tol), tol)
    };
    let mut basis: Vec<Vec<S>> = subspace_intersect(&columns, &finite, tol).basis().to_vec();
    for candidate in columns.basis() {
        let mut trial = basis.clone();
        trial.push(candidate.clone());
        let m = Matrix::from_columns(n, &trial);
        if rank(&m, tol) == trial.len() {
            basis = trial;
        }
    }
    basis
}

/// Combination `Σ c_i f_i`; when the tails cancel only up to rounding they
/// are dropped.
fn combine<S: Scalar>(template: &RayFunction<S>, c: &[S], funcs: &[RayFunction<S>], finite: bool, tol: RankTol) -> RayFunction<S> {
    let f = RayFunction::combination(template, c, funcs);
    if !finite || f.is_finitely_supported() {
        return f;
    }
    assert!(!S::EXACT, "exact finite combination kept a tail");
    let scale = f.max_abs();
    debug_assert!(f.rays().iter().all(|r| r.tail().iter().all(|t| t.negligible(scale, RankTol(tol.0.sqrt())))));
    let rays = f.rays().iter().map(|r| RayPart::new(r.head().to_vec(), Vec::new())).collect();
    RayFunction::from_parts(f.k_values().to_vec(), rays)
}

fn compress_block<S: Scalar>(
    left: &[RayFunction<S>],
    weights: &Matrix<S>,
    right: &[RayFunction<S>],
    template: RayFunction<S>,
    tol: RankTol,
) -> (Vec<RayFunction<S>>, Matrix<S>, Vec<RayFunction<S>>) {
    let empty = (Vec::new(), Matrix::zeros(0, 0), Vec::new());
    if left.is_empty() || right.is_empty() {
        return empty;
    }
    let (l1, el) = independent_subfamily(left, &template, tol);
    let (r1, er) = independent_subfamily(right, &template, tol);
    let w1 = &(&el * weights) * &er.transpose();
    if l1.is_empty() || r1.is_empty() || rank(&w1, tol) == 0 {
        return empty;
    }
    let cl = finite_first_basis(&l1, &w1, &template, tol);
    let cr = finite_first_basis(&r1, &w1.transpose(), &template, tol);
    let finite_count = |basis: &[Vec<S>], funcs: &[RayFunction<S>]| {
        basis
            .iter()
            .take_while(|c| {
                let (coords, tail_rows) = coordinates(funcs, &template);
                tail_rows.iter().all(|&t| crate::linalg::dot(&coords.row(t), c).negligible(coords.max_abs(), tol))
            })
            .count()
    };
    let fl = finite_count(&cl, &l1);
    let fr = finite_count(&cr, &r1);
    let c = Matrix::from_columns(l1.len(), &cl);
    let d = Matrix::from_columns(r1.len(), &cr);
    // W1 = C Y Dᵀ with Y = (CᵀC)⁻¹ Cᵀ W1 D (DᵀD)⁻¹.
    let ctc = inverse(&(&c.transpose() * &c), tol).expect("basis columns are independent");
    let dtd = inverse(&(&d.transpose() * &d), tol).expect("basis columns are independent");
    let core = &(&(&(&ctc * &c.transpose()) * &w1) * &d) * &dtd;
    let new_left = cl.iter().enumerate().map(|(i, v)| combine(&template, v, &l1, i < fl, tol)).collect();
    let new_right = cr.iter().enumerate().map(|(i, v)| combine(&template, v, &r1, i < fr, tol)).collect();
    (new_left, core, new_right)
}
