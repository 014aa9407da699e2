//! Threshold classification and the zero-energy eigenspaces.
//!
//! Everything is built from the intermediate operators `M₀ = U + v*G₀,₀v`
//! and `m₀ = −Σ_α |Qv*𝐧^(α)⟩⟨Qv*𝐧^(α)|` on `𝒦 = ℂ^k`. Eigenfunctions are
//! images of `𝒦`-vectors under `z`, so their ray tails are exact
//! polynomials: zero for bound states, constant for resonances and linear
//! for non-resonance functions.
//!
//! Bases are orthogonal but not normalized; squared norms are stored next
//! to them so exact scalars never need square roots.

use crate::free::{FreeError, FreeModel};
use crate::graph::{pair, GraphWithRays, RayFunction};
use crate::linalg::{
    dot, null_space, null_space_general, orthogonal_projection, pseudo_inverse, rank, scale_vec,
    subspace_orthocomplement_within, LinalgError, Matrix, Subspace,
};
use crate::operator::{product, OperatorError, OperatorExpr};
use crate::perturbation::{apply_hamiltonian, FactoredPerturbation, PerturbationError};
use crate::scalar::{RankTol, Scalar};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ThresholdError {
    #[error("tail degree {0} is too high for w; at most linear tails are allowed")]
    TailDegreeTooHigh(usize),
    #[error(transparent)]
    Perturbation(#[from] PerturbationError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Free(#[from] FreeError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ThresholdKind {
    Regular,
    FirstKind,
    SecondKind,
    ThirdKind,
}

impl ThresholdKind {
    /// Kind determined by the presence of resonances and bound states.
    pub fn from_dims(dim_resonance: usize, dim_bound: usize) -> Self {
        match (dim_resonance > 0, dim_bound > 0) {
            (false, false) => ThresholdKind::Regular,
            (true, false) => ThresholdKind::FirstKind,
            (false, true) => ThresholdKind::SecondKind,
            (true, true) => ThresholdKind::ThirdKind,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ThresholdKind::Regular => "regular",
            ThresholdKind::FirstKind => "first kind",
            ThresholdKind::SecondKind => "second kind",
            ThresholdKind::ThirdKind => "third kind",
        }
    }

    pub fn has_bound_states(self) -> bool {
        matches!(self, ThresholdKind::SecondKind | ThresholdKind::ThirdKind)
    }

    pub fn has_resonances(self) -> bool {
        matches!(self, ThresholdKind::FirstKind | ThresholdKind::ThirdKind)
    }
}

impl std::fmt::Display for ThresholdKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// `M₀`, `Q`, `m₀`, `S`, `P` and the moment data they are built from.
///
/// Matrices act on `𝒦 = ℂ^k`; `Q`, `S`, `P` are orthogonal projections.
#[derive(Clone, Debug)]
pub struct IntermediateOperators<S> {
    pub big_m0: Matrix<S>,
    pub big_m0_pinv: Matrix<S>,
    pub q_space: Subspace<S>,
    pub q: Matrix<S>,
    /// `m₀` on all of `𝒦`; it vanishes on `(Q𝒦)^⊥`.
    pub small_m0: Matrix<S>,
    /// `Q𝒦 ∩ (P𝒦)^⊥ = Ker m₀ ∩ Q𝒦`.
    pub s_space: Subspace<S>,
    pub s: Matrix<S>,
    pub p_space: Subspace<S>,
    pub p: Matrix<S>,
    /// `k × N`, column `α` is `v*𝐧^(α)`.
    pub moments: Matrix<S>,
    /// Unnormalized `Ψ̃^(α)`; the normalized function is `Ψ̃/√ν`.
    pub psi: Vec<RayFunction<S>>,
    /// `ν_α = ‖v*Ψ̃^(α)‖²`; zero entries contribute nothing to `z`.
    pub psi_norms: Vec<S>,
    /// `G₀,₀ v_i` for every column of `v`.
    pub g00_v: Vec<RayFunction<S>>,
}

pub fn intermediate_operators<S: Scalar>(
    model: &FreeModel<S>,
    v: &FactoredPerturbation<S>,
) -> Result<IntermediateOperators<S>, ThresholdError> {
    let g = model.graph();
    let tol = model.tol();
    let k = v.dim();
    let n = g.ray_count();
    let big_m0 = v.m_matrix(model, 0)?;
    let big_m0_pinv = pseudo_inverse(&big_m0, tol)?;
    let q_space = null_space(&big_m0, tol)?;
    let q = orthogonal_projection(&q_space, tol);
    let linear: Vec<RayFunction<S>> = (0..n).map(|a| RayFunction::ray_linear(g, a)).collect();
    let moment_columns: Vec<Vec<S>> = linear.iter().map(|f| v.adjoint(f)).collect();
    let moments = Matrix::from_columns(k, &moment_columns);
    let qn = &q * &moments;
    let small_m0 = -&(&qn * &qn.transpose());
    let p_space = Subspace::span(k, &moment_columns, tol);
    let p = orthogonal_projection(&p_space, tol);
    let s_space = subspace_orthocomplement_within(&q_space, &p_space, tol);
    let s = orthogonal_projection(&s_space, tol);

    // Gram–Schmidt of v*𝐧^(α) without normalization, carried along on the
    // functions themselves.
    let scale = moments.max_abs();
    let mut psi: Vec<RayFunction<S>> = Vec::with_capacity(n);
    let mut phi: Vec<Vec<S>> = Vec::with_capacity(n);
    let mut psi_norms: Vec<S> = Vec::with_capacity(n);
    for a in 0..n {
        let mut f = linear[a].clone();
        let mut x = moment_columns[a].clone();
        for c in 0..a {
            if psi_norms[c].is_zero() {
                continue;
            }
            let coeff = dot(&phi[c], &moment_columns[a]) / psi_norms[c].clone();
            f = RayFunction::lin(&S::one(), &f, &-coeff.clone(), &psi[c]);
            x = x.iter().zip(&phi[c]).map(|(xi, pi)| xi.clone() - coeff.clone() * pi.clone()).collect();
        }
        let mut nu = dot(&x, &x);
        if nu.negligible(scale * scale, tol) {
            nu = S::zero();
        }
        psi.push(f);
        phi.push(x);
        psi_norms.push(nu);
    }
    let g00_v = v
        .columns()
        .iter()
        .map(|c| model.apply_free_coefficient(0, c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(IntermediateOperators {
        big_m0,
        big_m0_pinv,
        q_space,
        q,
        small_m0,
        s_space,
        s,
        p_space,
        p,
        moments,
        psi,
        psi_norms,
        g00_v,
    })
}

impl<S: Scalar> IntermediateOperators<S> {
    /// `z Φ = Σ_α Ψ^(α) ⟨Φ^(α), M₀Φ⟩ − G₀,₀vΦ`.
    pub fn z_apply(&self, g: &GraphWithRays, v: &FactoredPerturbation<S>, phi: &[S]) -> RayFunction<S> {
        let template = RayFunction::zero(g);
        let mut out = RayFunction::combination(&template, &scale_vec(&-S::one(), phi), &self.g00_v);
        let m0_phi = self.big_m0.mul_vec(phi);
        for (a, f) in self.psi.iter().enumerate() {
            if self.psi_norms[a].is_zero() {
                continue;
            }
            let phi_a = v.adjoint(f);
            let c = dot(&phi_a, &m0_phi) / self.psi_norms[a].clone();
            out = RayFunction::lin(&S::one(), &out, &c, f);
        }
        out
    }

    /// Kind by invertibility of `M₀` on `𝒦` and of `m₀` on `Q𝒦`.
    pub fn classify(&self, tol: RankTol) -> ThresholdKind {
        let q_dim = self.q_space.dim();
        if q_dim == 0 {
            return ThresholdKind::Regular;
        }
        let m0_rank = rank(&self.small_m0, tol);
        if m0_rank == q_dim {
            ThresholdKind::FirstKind
        } else if m0_rank == 0 {
            ThresholdKind::SecondKind
        } else {
            ThresholdKind::ThirdKind
        }
    }
}

/// `w Ψ = U v*Ψ` for `Ψ` with at most linear tails.
pub fn w_apply<S: Scalar>(v: &FactoredPerturbation<S>, psi: &RayFunction<S>) -> Result<Vec<S>, ThresholdError> {
    match psi.max_tail_degree() {
        Some(d) if d > 1 => Err(ThresholdError::TailDegreeTooHigh(d)),
        _ => Ok(v.u().mul_vec(&v.adjoint(psi))),
    }
}

pub fn classify<S: Scalar>(
    model: &FreeModel<S>,
    v: &FactoredPerturbation<S>,
) -> Result<ThresholdKind, ThresholdError> {
    Ok(intermediate_operators(model, v)?.classify(model.tol()))
}

/// Generalized eigenfunctions at the threshold, stratified by their tails.
#[derive(Clone, Debug)]
pub struct ThresholdReport<S> {
    pub kind: ThresholdKind,
    pub ops: IntermediateOperators<S>,
    /// `ℓ²`-orthogonal basis of `𝖤`; all tails vanish.
    pub bound: Vec<RayFunction<S>>,
    pub bound_norms: Vec<S>,
    /// Representatives of `ℰ/𝖤`, `ℓ²`-orthogonal to `𝖤`, with mutually
    /// orthogonal constant-tail vectors `c^(γ)`.
    pub resonance: Vec<RayFunction<S>>,
    pub resonance_tails: Vec<Vec<S>>,
    /// `‖c^(γ)‖²`.
    pub resonance_norms: Vec<S>,
    /// `z(M₀†[P𝒦 ∩ (Q𝒦)^⊥])`; linear tails.
    pub nonresonance: Vec<RayFunction<S>>,
    /// `ℂ𝐧 ∩ Ker V`.
    pub kernel_v: Vec<RayFunction<S>>,
    /// `𝒦`-vectors mapped by `z` onto `resonance`, `bound` and
    /// `nonresonance`, in that order.
    pub domain: Vec<Vec<S>>,
}

impl<S: Scalar> ThresholdReport<S> {
    pub fn dim_bound(&self) -> usize {
        self.bound.len()
    }

    pub fn dim_resonance(&self) -> usize {
        self.resonance.len()
    }

    pub fn dim_nonresonance(&self) -> usize {
        self.nonresonance.len() + self.kernel_v.len()
    }

    /// All basis functions of `Ẽ`: bound, resonance, then non-resonance.
    pub fn all_functions(&self) -> Vec<&RayFunction<S>> {
        self.bound.iter().chain(&self.resonance).chain(&self.nonresonance).chain(&self.kernel_v).collect()
    }

    /// `𝖯 = Σ_γ |Ψ_γ⟩⟨Ψ_γ| / ‖Ψ_γ‖²` from the bound basis.
    pub fn bound_projection_from_basis(&self, g: &GraphWithRays) -> OperatorExpr<S> {
        let w: Vec<S> = self.bound_norms.iter().map(|n| S::one() / n.clone()).collect();
        OperatorExpr::congruence(g, self.bound.clone(), Matrix::from_diagonal(&w))
    }

    /// `𝒫 = Σ_γ |Ψ_γ⟩⟨Ψ_γ| / ‖c^(γ)‖²` from the resonance basis.
    pub fn resonance_projection_from_basis(&self, g: &GraphWithRays) -> OperatorExpr<S> {
        let w: Vec<S> = self.resonance_norms.iter().map(|n| S::one() / n.clone()).collect();
        OperatorExpr::congruence(g, self.resonance.clone(), Matrix::from_diagonal(&w))
    }
}

/// Unnormalized Gram–Schmidt of `funcs` in the inner product `ip`, applied
/// to `funcs` and their attached coordinate vectors alike. Returns the
/// orthogonal family, the transformed vectors and the squared norms.
fn orthogonalize<S: Scalar>(
    funcs: Vec<RayFunction<S>>,
    vectors: Vec<Vec<S>>,
    ip: impl Fn(&RayFunction<S>, &RayFunction<S>) -> S,
) -> (Vec<RayFunction<S>>, Vec<Vec<S>>, Vec<S>) {
    let mut out_f: Vec<RayFunction<S>> = Vec::new();
    let mut out_v: Vec<Vec<S>> = Vec::new();
    let mut norms: Vec<S> = Vec::new();
    for (mut f, mut x) in funcs.into_iter().zip(vectors) {
        for ((b, y), nb) in out_f.iter().zip(&out_v).zip(&norms) {
            let c = ip(b, &f) / nb.clone();
            f = RayFunction::lin(&S::one(), &f, &-c.clone(), b);
            x = x.iter().zip(y).map(|(xi, yi)| xi.clone() - c.clone() * yi.clone()).collect();
        }
        let nf = ip(&f, &f);
        out_f.push(f);
        out_v.push(x);
        norms.push(nf);
    }
    (out_f, out_v, norms)
}

pub fn eigenspaces<S: Scalar>(
    model: &FreeModel<S>,
    v: &FactoredPerturbation<S>,
) -> Result<ThresholdReport<S>, ThresholdError> {
    let g = model.graph();
    let tol = model.tol();
    let ops = intermediate_operators(model, v)?;
    let kind = ops.classify(tol);
    let z = |phi: &[S]| ops.z_apply(g, v, phi);

    let s_basis = ops.s_space.basis().to_vec();
    let bound_raw: Vec<RayFunction<S>> = s_basis.iter().map(|x| z(x).chop_tails(tol)).collect();
    let l2 = |a: &RayFunction<S>, b: &RayFunction<S>| pair(a, b).expect("bound states are finitely supported");
    let (bound, bound_domain, bound_norms) = orthogonalize(bound_raw, s_basis, l2);

    let res_dom = subspace_orthocomplement_within(&ops.q_space, &ops.s_space, tol).basis().to_vec();
    let mut res_raw = Vec::with_capacity(res_dom.len());
    let mut res_dom_adj = Vec::with_capacity(res_dom.len());
    for x in &res_dom {
        let mut f = z(x);
        let mut y = x.clone();
        for ((b, bx), nb) in bound.iter().zip(&bound_domain).zip(&bound_norms) {
            let c = pair(b, &f).expect("bound states are finitely supported") / nb.clone();
            f = RayFunction::lin(&S::one(), &f, &-c.clone(), b);
            y = y.iter().zip(bx).map(|(yi, bi)| yi.clone() - c.clone() * bi.clone()).collect();
        }
        res_raw.push(f);
        res_dom_adj.push(y);
    }
    let tails = |a: &RayFunction<S>, b: &RayFunction<S>| dot(&a.tail_vector(0), &b.tail_vector(0));
    let (resonance, res_domain, resonance_norms) = orthogonalize(res_raw, res_dom_adj, tails);
    let resonance_tails = resonance.iter().map(|f| f.tail_vector(0)).collect();

    let x_space = subspace_orthocomplement_within(&ops.p_space, &ops.q_space, tol);
    let nonres_domain: Vec<Vec<S>> = x_space.basis().iter().map(|x| ops.big_m0_pinv.mul_vec(x)).collect();
    let nonresonance = nonres_domain.iter().map(|x| z(x)).collect();

    let template = RayFunction::zero(g);
    let linear: Vec<RayFunction<S>> = (0..g.ray_count()).map(|a| RayFunction::ray_linear(g, a)).collect();
    let kernel_v = if v.dim() == 0 {
        linear.clone()
    } else {
        null_space_general(&ops.moments, tol)
            .iter()
            .map(|c| RayFunction::combination(&template, c, &linear))
            .collect()
    };

    let mut domain = res_domain;
    domain.extend(bound_domain);
    domain.extend(nonres_domain);
    Ok(ThresholdReport {
        kind,
        ops,
        bound,
        bound_norms,
        resonance,
        resonance_tails,
        resonance_norms,
        nonresonance,
        kernel_v,
        domain,
    })
}

/// Bound and resonance projections as finite-rank kernels.
#[derive(Clone, Debug)]
pub struct Projections<S> {
    pub bound: OperatorExpr<S>,
    pub resonance: OperatorExpr<S>,
}

/// `𝖯 = −G₀,₀v(Sv*G₀,₂vS)†v*G₀,₀` and `𝒫 = −(I−𝖯)G₀,₀vm₀†v*G₀,₀(I−𝖯)`,
/// assembled from pseudo-inverses only.
pub fn projections<S: Scalar>(
    model: &FreeModel<S>,
    v: &FactoredPerturbation<S>,
    report: &ThresholdReport<S>,
) -> Result<Projections<S>, ThresholdError> {
    let g = model.graph();
    let tol = model.tol();
    let ops = &report.ops;
    let bound = if report.dim_bound() == 0 {
        OperatorExpr::zero(g)
    } else {
        let m2 = v.m_matrix(model, 2)?;
        let core = pseudo_inverse(&(&(&ops.s * &m2) * &ops.s), tol)?;
        OperatorExpr::congruence(g, ops.g00_v.clone(), -&core).compress(tol)
    };
    let resonance = if report.dim_resonance() == 0 {
        OperatorExpr::zero(g)
    } else {
        let core = pseudo_inverse(&ops.small_m0, tol)?;
        let raw = OperatorExpr::congruence(g, ops.g00_v.clone(), -&core);
        if report.dim_bound() == 0 {
            raw.compress(tol)
        } else {
            let sandwich = OperatorExpr::identity(g).sub(&bound);
            product(model, &[&sandwich, &raw, &sandwich])?
        }
    };
    Ok(Projections { bound, resonance })
}

/// `(H₀ + V) f = 0`, exactly or up to the rank tolerance.
pub fn is_annihilated<S: Scalar>(model: &FreeModel<S>, v: &FactoredPerturbation<S>, f: &RayFunction<S>) -> bool {
    let hf = apply_hamiltonian(model, v, f);
    hf.approx_eq(&RayFunction::zero(model.graph()), model.tol())
        || (!S::EXACT && hf.max_abs() <= model.tol().0 * f.max_abs().max(1.0) * 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Site;
    use crate::perturbation::joining_perturbation;
    use crate::scalar::{rat, Rational};

    fn star(n: usize) -> (FreeModel<Rational>, FactoredPerturbation<Rational>) {
        let g = GraphWithRays::star(n);
        let v = joining_perturbation(&g);
        (FreeModel::new(&g).unwrap(), v)
    }

    #[test]
    fn star_graphs_are_first_kind() {
        for n in [1usize, 2, 3, 5] {
            let (model, v) = star(n);
            let g = model.graph().clone();
            let r = eigenspaces(&model, &v).unwrap();
            assert_eq!(r.kind, ThresholdKind::FirstKind);
            assert_eq!((r.dim_resonance(), r.dim_bound(), r.dim_nonresonance()), (1, 0, n - 1));
            // ℰ = ℂ(s + Σ𝟏^(α))
            let mut expected = RayFunction::delta(&g, Site::K(0));
            for a in 0..n {
                expected = expected.add(&RayFunction::ray_constant(&g, a));
            }
            let f = &r.resonance[0];
            let c = f.eval(Site::K(0));
            assert_eq!(*f, expected.scale(&c));
            for h in r.all_functions() {
                assert!(is_annihilated(&model, &v, h));
            }
        }
    }

    #[test]
    fn star_intermediate_operators() {
        let (model, v) = star(3);
        let ops = intermediate_operators(&model, &v).unwrap();
        let expected = Matrix::from_rows(vec![vec![rat(1, 3), rat(-1, 1)], vec![rat(-1, 1), rat(3, 1)]]);
        assert_eq!(ops.big_m0, expected);
        assert!(ops.q_space.same_as(&Subspace::span(2, &[vec![rat(3, 1), rat(1, 1)]], model.tol()), model.tol()));
        assert!(!ops.small_m0.is_zero(model.tol()));
    }

    #[test]
    fn zero_perturbation_is_regular() {
        let g = GraphWithRays::star(2);
        let model: FreeModel<Rational> = FreeModel::new(&g).unwrap();
        let v = FactoredPerturbation::zero();
        let r = eigenspaces(&model, &v).unwrap();
        assert_eq!(r.kind, ThresholdKind::Regular);
        assert_eq!(r.dim_nonresonance(), 2);
        assert_eq!(r.kernel_v, vec![RayFunction::ray_linear(&g, 0), RayFunction::ray_linear(&g, 1)]);
    }

    #[test]
    fn wz_is_identity_on_the_domain() {
        let (model, v) = star(3);
        let g = model.graph().clone();
        let r = eigenspaces(&model, &v).unwrap();
        for x in &r.domain {
            let f = r.ops.z_apply(&g, &v, x);
            assert_eq!(w_apply(&v, &f).unwrap(), *x);
        }
        assert!(r.ops.z_apply(&g, &v, &[rat(0, 1), rat(0, 1)]).is_zero());
    }

    #[test]
    fn star_projections_agree_across_routes() {
        let (model, v) = star(3);
        let g = model.graph().clone();
        let r = eigenspaces(&model, &v).unwrap();
        let p = projections(&model, &v, &r).unwrap();
        assert!(p.bound.same_as(&OperatorExpr::zero(&g), model.tol()));
        assert!(p.resonance.same_as(&r.resonance_projection_from_basis(&g), model.tol()));
    }
}
