//! Closed forms for `G₀` and `G₁`, one per threshold kind.
//!
//! Every term is a finite composition of `G₀,ⱼ`, `V`, `vM₀†v*`, `vm₀†v*`
//! and the projections `𝖯`, `𝒫`, evaluated with [`product`]. The
//! non-resonance part `P̃ = T Π Tᵀ` uses the transfer map `T` of the kind,
//! applied to `𝐧^(α)`, and the orthogonal projection `Π` of `ℂ^N` onto the
//! complement of the resonance coefficient vectors. `P̃` depends only on
//! `T`, not on the orthonormal basis chosen in that complement.

use crate::free::FreeModel;
use crate::graph::RayFunction;
use crate::linalg::{orthogonal_projection, pseudo_inverse, Matrix, Subspace};
use crate::operator::{product, OperatorExpr};
use crate::perturbation::FactoredPerturbation;
use crate::scalar::Scalar;
use crate::threshold::{Projections, ThresholdKind, ThresholdReport};

use super::ExpansionError;

/// `G₀`, `G₁` and the non-resonance functions `T𝐧^(α)` behind `P̃`.
#[derive(Clone, Debug)]
pub struct ClosedForms<S> {
    pub g0: OperatorExpr<S>,
    pub g1: OperatorExpr<S>,
    /// `T𝐧^(α)`, `α = 1..N`.
    pub transfer: Vec<RayFunction<S>>,
    /// Projection of `ℂ^N` onto the complement of the resonance coefficients.
    pub complement: Matrix<S>,
    pub nonresonance_projection: OperatorExpr<S>,
}

/// Building blocks shared by all four kinds.
struct Blocks<'a, S: Scalar> {
    model: &'a FreeModel<S>,
    v: &'a FactoredPerturbation<S>,
    id: OperatorExpr<S>,
    g: [OperatorExpr<S>; 4],
    big_v: OperatorExpr<S>,
    /// `vM₀†v*`.
    d: OperatorExpr<S>,
    /// `vm₀†v*`.
    dm: OperatorExpr<S>,
    bound: OperatorExpr<S>,
    res: OperatorExpr<S>,
}

impl<S: Scalar> Blocks<'_, S> {
    fn p(&self, factors: &[&OperatorExpr<S>]) -> Result<OperatorExpr<S>, ExpansionError> {
        Ok(product(self.model, factors)?)
    }

    /// `P̃ = T Π Tᵀ`. `transfer` only ever applies free kernels to the
    /// finitely supported `vM₀†v*𝐧`, so it accepts the growing `𝐧^(α)`.
    fn nonresonance(
        &self,
        report: &ThresholdReport<S>,
        transfer: impl Fn(&RayFunction<S>) -> Result<RayFunction<S>, ExpansionError>,
    ) -> Result<(Vec<RayFunction<S>>, Matrix<S>, OperatorExpr<S>), ExpansionError> {
        let g = self.model.graph();
        let tol = self.model.tol();
        let n = g.ray_count();
        // c_α = −⟨𝐧^(α), VΨ⟩ = −(v*𝐧^(α))ᵀ U v*Ψ.
        let moments = &report.ops.moments;
        let coefficient_vectors: Vec<Vec<S>> = report
            .resonance
            .iter()
            .map(|psi| {
                let uv = self.v.u().mul_vec(&self.v.adjoint(psi));
                moments.transpose().mul_vec(&uv).into_iter().map(|x| -x).collect()
            })
            .collect();
        let span = Subspace::span(n, &coefficient_vectors, tol);
        let complement = &Matrix::identity(n) - &orthogonal_projection(&span, tol);
        let images = (0..n).map(|a| transfer(&RayFunction::ray_linear(g, a))).collect::<Result<Vec<_>, _>>()?;
        let projection = OperatorExpr::congruence(g, images.clone(), complement.clone()).compress(tol);
        Ok((images, complement, projection))
    }

    /// `v M v*` applied to `f`, as the finitely supported `v(M v*f)`.
    fn sandwich_apply(&self, m: &Matrix<S>, f: &RayFunction<S>) -> RayFunction<S> {
        self.v.embed(self.model.graph(), &m.mul_vec(&self.v.adjoint(f)))
    }
}

/// Closed forms for the kind recorded in `report`.
pub fn closed_forms<S: Scalar>(
    model: &FreeModel<S>,
    v: &FactoredPerturbation<S>,
    report: &ThresholdReport<S>,
    projections: &Projections<S>,
) -> Result<ClosedForms<S>, ExpansionError> {
    closed_forms_as(report.kind, model, v, report, projections)
}

/// Closed forms of kind `kind`; the third-kind formula applies to every
/// threshold, the others only to their own kind.
pub fn closed_forms_as<S: Scalar>(
    kind: ThresholdKind,
    model: &FreeModel<S>,
    v: &FactoredPerturbation<S>,
    report: &ThresholdReport<S>,
    projections: &Projections<S>,
) -> Result<ClosedForms<S>, ExpansionError> {
    let g = model.graph();
    let tol = model.tol();
    let ops = &report.ops;
    let cols = v.columns().to_vec();
    let small_m0_pinv = pseudo_inverse(&ops.small_m0, tol)?;
    let b = Blocks {
        model,
        v,
        id: OperatorExpr::identity(g),
        g: [0, 1, 2, 3].map(|j| OperatorExpr::free(g, j)),
        big_v: OperatorExpr::congruence(g, cols.clone(), v.u().clone()),
        d: OperatorExpr::congruence(g, cols.clone(), ops.big_m0_pinv.clone()),
        dm: OperatorExpr::congruence(g, cols, small_m0_pinv.clone()),
        bound: projections.bound.clone(),
        res: projections.resonance.clone(),
    };
    let [g00, g01, g02, g03] = &b.g;
    let (id, bv, d, dm, bp, rp) = (&b.id, &b.big_v, &b.d, &b.dm, &b.bound, &b.res);

    let (g0, g1, transfer, complement, ptilde) = match kind {
        ThresholdKind::Regular | ThresholdKind::SecondKind => {
            let not_bound = id.sub(bp);
            let inner = g00.sub(&b.p(&[g00, d, g00])?);
            let g0 = if kind == ThresholdKind::Regular { inner } else { b.p(&[&not_bound, &inner, &not_bound])? };
            let (transfer, complement, ptilde) = b.nonresonance(report, |n| {
                let t = n.sub(&g00.apply(model, &b.sandwich_apply(&ops.big_m0_pinv, n))?);
                Ok(if kind == ThresholdKind::Regular { t } else { not_bound.apply(model, &t)? })
            })?;
            (g0, ptilde.scale(&-S::one()), transfer, complement, ptilde)
        }
        ThresholdKind::FirstKind => {
            let rv = b.p(&[rp, bv])?;
            let vr = b.p(&[bv, rp])?;
            // a = G₀,₀ − 𝒫VG₀,₁ and its transpose.
            let a = g00.sub(&b.p(&[&rv, g01])?);
            let at = g00.sub(&b.p(&[g01, &vr])?);
            let g0 = g00
                .sub(&b.p(&[&rv, g01])?)
                .sub(&b.p(&[g01, &vr])?)
                .sub(&b.p(&[&a, d, &at])?)
                .add(&b.p(&[&rv, g02, &vr])?);
            let (transfer, complement, ptilde) = b.nonresonance(report, |n| {
                Ok(n.sub(&a.apply(model, &b.sandwich_apply(&ops.big_m0_pinv, n))?))
            })?;
            let left_bracket = id.sub(&b.p(&[&a, d])?);
            let right_bracket = id.sub(&b.p(&[d, &at])?);
            let left_mid = id.add(&b.p(&[g01, &vr, bv])?);
            let right_mid = id.add(&b.p(&[bv, &rv, g01])?);
            let g1 = ptilde
                .scale(&-S::one())
                .add(&b.p(&[&rv, g03, &vr])?)
                .add(&b.p(&[&rv, g02, bv, rp, bv, g02, &vr])?)
                .sub(&b.p(&[&left_bracket, &left_mid, g02, &vr])?)
                .sub(&b.p(&[&rv, g02, &right_mid, &right_bracket])?);
            (g0, g1, transfer, complement, ptilde)
        }
        ThresholdKind::ThirdKind => {
            let not_bound = id.sub(bp);
            let rv = b.p(&[rp, bv])?;
            let vr = b.p(&[bv, rp])?;
            // I − vm₀†v*G₀,₁ and its transpose.
            let e = id.sub(&b.p(&[dm, g01])?);
            let et = id.sub(&b.p(&[g01, dm])?);
            let inner = g00
                .sub(&b.p(&[g00, dm, g01])?)
                .sub(&b.p(&[g01, dm, g00])?)
                .sub(&b.p(&[g00, &e, d, &et, g00])?)
                .add(&b.p(&[g00, dm, g02, dm, g00])?)
                .add(&b.p(&[g00, dm, g00, bp, g00, dm, g00])?);
            let g0 = b.p(&[&not_bound, &inner, &not_bound])?;
            let (transfer, complement, ptilde) = b.nonresonance(report, |n| {
                // w = vM₀†v*𝐧, then G₀,₀(w − vm₀†v*G₀,₁w).
                let w = b.sandwich_apply(&ops.big_m0_pinv, n);
                let y = w.sub(&b.sandwich_apply(&small_m0_pinv, &model.apply_free_coefficient(1, &w)?));
                let t = n.sub(&g00.apply(model, &y)?);
                Ok(not_bound.apply(model, &t)?)
            })?;
            let left_bracket = b.p(&[&not_bound, &id.sub(&b.p(&[g00, &e, d])?)])?;
            let right_bracket = b.p(&[&id.sub(&b.p(&[d, &et, g00])?), &not_bound])?;
            let g1 = ptilde
                .scale(&-S::one())
                .add(&b.p(&[&rv, g03, &vr])?)
                .sub(&b.p(&[&rv, g02, dm, g02, &vr])?)
                .sub(&b.p(&[&left_bracket, &et, g02, &vr])?)
                .sub(&b.p(&[&rv, g02, &e, &right_bracket])?);
            (g0, g1, transfer, complement, ptilde)
        }
    };
    Ok(ClosedForms {
        g0: g0.compress(tol),
        g1: g1.compress(tol),
        transfer,
        complement,
        nonresonance_projection: ptilde,
    })
}
