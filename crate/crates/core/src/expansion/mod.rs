//! Low-energy expansion `R(κ) = (H + κ²)^{-1} = Σ_{j ≥ −2} κ^j G_j`.
//!
//! The engine inverts `M(κ) = U + v*R₀(κ)v` as a Laurent series by the
//! inversion formula, reducing through `m(κ)` on `Q𝒦` and, for the third
//! kind, through `q(κ)` on `S𝒦`. The coefficients are then assembled into
//! `G_j = G₀,ⱼ − Σ_{j₁+j₂+j₃=j} G₀,ⱼ₁ v X_{j₂} v* G₀,ⱼ₃` with `X = M(κ)^{-1}`.
//!
//! The closed forms in [`closed`] are an independent route for `G₀` and `G₁`.

pub mod closed;
mod laurent;

pub use laurent::{reduced_coefficients, MatrixSeries, SeriesInversionError};

use crate::free::{FreeError, FreeModel};
use crate::graph::RayFunction;
use crate::linalg::{LinalgError, Matrix};
use crate::operator::{OperatorError, OperatorExpr};
use crate::perturbation::{FactoredPerturbation, PerturbationError};
use crate::scalar::Scalar;
use crate::threshold::{intermediate_operators, IntermediateOperators, ThresholdError, ThresholdKind};

/// Highest `M_j` the cascades consume.
pub const M_ORDER: usize = 5;
/// Highest free coefficient `G₀,ⱼ` entering `G₁`.
pub const FREE_ORDER: usize = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExpansionError {
    #[error("consistency violation: {0}")]
    ConsistencyViolation(String),
    #[error("requested coefficient G_{0} is outside −2..=1")]
    OrderOutOfRange(i32),
    #[error("the free model stores G₀,ⱼ only up to j = {cap}; the expansion needs {needed}")]
    KernelCapTooSmall { cap: usize, needed: usize },
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
    #[error(transparent)]
    Perturbation(#[from] PerturbationError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Free(#[from] FreeError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn consistency(stage: &str, err: SeriesInversionError) -> ExpansionError {
    match err {
        SeriesInversionError::LeadingNotInvertible { expected, found } => ExpansionError::ConsistencyViolation(format!(
            "{stage}: leading coefficient has rank {found} on a space of dimension {expected}"
        )),
        SeriesInversionError::Linalg(e) => ExpansionError::Linalg(e),
    }
}

/// Every series produced on the way to `M(κ)^{-1}`.
#[derive(Clone, Debug)]
pub struct InversionCascade<S> {
    pub kind: ThresholdKind,
    /// `M₀ … M₅`.
    pub big_m: Vec<Matrix<S>>,
    /// `(M(κ) + Q)^{-1}`; equal to `M(κ)^{-1}` in the regular case.
    pub b: MatrixSeries<S>,
    /// `m₀ … m₄` on `Q𝒦`; empty in the regular case.
    pub small_m: Vec<Matrix<S>>,
    /// `q₀ … q₃` on `S𝒦`; third kind only.
    pub q: Vec<Matrix<S>>,
    /// `M(κ)^{-1}`, valid through `κ¹`.
    pub inverse: MatrixSeries<S>,
}

/// Laurent inversion of `M(κ)` following the kind of the threshold.
pub fn invert_m<S: Scalar>(
    model: &FreeModel<S>,
    v: &FactoredPerturbation<S>,
    ops: &IntermediateOperators<S>,
) -> Result<InversionCascade<S>, ExpansionError> {
    if model.cap() < M_ORDER {
        return Err(ExpansionError::KernelCapTooSmall { cap: model.cap(), needed: M_ORDER });
    }
    let tol = model.tol();
    let k = v.dim();
    let kind = ops.classify(tol);
    let big_m: Vec<Matrix<S>> = (0..=M_ORDER).map(|j| v.m_matrix(model, j)).collect::<Result<_, _>>()?;
    let m_series = MatrixSeries::new(0, big_m.clone(), k);
    let dim_q = ops.q_space.dim();
    let dim_s = ops.s_space.dim();
    let zero = Matrix::zeros(k, k);

    if kind == ThresholdKind::Regular {
        let b = m_series.neumann(&zero, k, tol).map_err(|e| consistency("M₀", e))?;
        return Ok(InversionCascade { kind, big_m, b: b.clone(), small_m: Vec::new(), q: Vec::new(), inverse: b });
    }

    let b = m_series.neumann(&ops.q, k, tol).map_err(|e| consistency("M₀ + Q", e))?;
    let b0 = b.coeff(0);
    let small_m = reduced_coefficients(&big_m, &b0, &ops.q, M_ORDER);
    let m_series_small = MatrixSeries::new(0, small_m.clone(), k);

    let (inner, q) = match kind {
        ThresholdKind::FirstKind => {
            let a = m_series_small.neumann(&zero, dim_q, tol).map_err(|e| consistency("m₀", e))?;
            (a, Vec::new())
        }
        ThresholdKind::SecondKind => {
            if !small_m[0].is_zero(tol) {
                return Err(ExpansionError::ConsistencyViolation("m₀ is nonzero without resonances".into()));
            }
            let shifted = MatrixSeries::new(0, small_m[1..].to_vec(), k);
            let a = shifted.neumann(&zero, dim_q, tol).map_err(|e| consistency("m₁", e))?;
            (a.shift(-1), Vec::new())
        }
        ThresholdKind::ThirdKind => {
            let c = m_series_small.neumann(&ops.s, dim_q, tol).map_err(|e| consistency("m₀ + S", e))?;
            let c0 = c.coeff(0);
            let q = reduced_coefficients(&small_m, &c0, &ops.s, small_m.len() - 1);
            let a = MatrixSeries::new(0, q.clone(), k).neumann(&zero, dim_s, tol).map_err(|e| consistency("q₀", e))?;
            (MatrixSeries::resolve(&c, &a), q)
        }
        ThresholdKind::Regular => unreachable!(),
    };
    let inverse = MatrixSeries::resolve(&b, &inner);
    debug_assert!(inverse.valid() >= 1, "cascade lost too many orders");
    Ok(InversionCascade { kind, big_m, b, small_m, q, inverse })
}

/// `G₋₂ … G₁` together with the cascade that produced them.
#[derive(Clone, Debug)]
pub struct ResolventExpansion<S> {
    pub kind: ThresholdKind,
    pub cascade: InversionCascade<S>,
    /// `coefficients[i]` is `G_{i−2}`.
    pub coefficients: Vec<OperatorExpr<S>>,
}

impl<S: Scalar> ResolventExpansion<S> {
    /// `G_j` for `j ∈ −2..=1`.
    pub fn coefficient(&self, j: i32) -> Result<&OperatorExpr<S>, ExpansionError> {
        if !(-2..=1).contains(&j) {
            return Err(ExpansionError::OrderOutOfRange(j));
        }
        Ok(&self.coefficients[(j + 2) as usize])
    }
}

/// Runs the inversion cascade and assembles `G₋₂ … G₁`.
pub fn resolvent_expansion<S: Scalar>(
    model: &FreeModel<S>,
    v: &FactoredPerturbation<S>,
) -> Result<ResolventExpansion<S>, ExpansionError> {
    let ops = intermediate_operators(model, v)?;
    let cascade = invert_m(model, v, &ops)?;
    let g = model.graph();
    let tol = model.tol();
    let k = v.dim();

    // Left functions G₀,ᵢ v_c, block i = 0..=FREE_ORDER.
    let mut left: Vec<RayFunction<S>> = Vec::with_capacity(k * (FREE_ORDER + 1));
    for i in 0..=FREE_ORDER {
        for col in v.columns() {
            left.push(model.apply_free_coefficient(i, col)?);
        }
    }
    let x = &cascade.inverse;
    let mut coefficients = Vec::with_capacity(4);
    for j in -2..=1i32 {
        let n = left.len();
        let mut weights = Matrix::zeros(n, n);
        for j1 in 0..=FREE_ORDER as i32 {
            for j3 in 0..=FREE_ORDER as i32 {
                let j2 = j - j1 - j3;
                if j2 < x.low() {
                    continue;
                }
                let block = x.coeff(j2);
                for a in 0..k {
                    for b in 0..k {
                        weights[(j1 as usize * k + a, j3 as usize * k + b)] = -block[(a, b)].clone();
                    }
                }
            }
        }
        let correction = OperatorExpr::congruence(g, left.clone(), weights);
        let free = if j >= 0 { OperatorExpr::free(g, j as usize) } else { OperatorExpr::zero(g) };
        coefficients.push(free.add(&correction).compress(tol));
    }
    Ok(ResolventExpansion { kind: cascade.kind, cascade, coefficients })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{kind_representatives, star_instance};
    use crate::scalar::RankTol;

    #[test]
    fn small_m_matches_the_projected_inverse() {
        // m(κ) = κ^{-1}(Q − Q(M(κ)+Q)^{-1}Q) coefficientwise.
        for (_, inst) in kind_representatives().into_iter().filter(|(k, _)| *k != ThresholdKind::Regular) {
            let model = inst.model();
            let v = &inst.perturbation;
            let ops = intermediate_operators(&model, v).unwrap();
            let c = invert_m(&model, v, &ops).unwrap();
            for (j, mj) in c.small_m.iter().enumerate() {
                let direct = -&(&(&ops.q * &c.b.coeff(j as i32 + 1)) * &ops.q);
                assert_eq!(mj, &direct, "{} m_{j}", inst.name);
            }
            assert_eq!(c.small_m[0], ops.small_m0, "{} m₀", inst.name);
        }
    }

    #[test]
    fn inverse_times_m_is_identity() {
        for (_, inst) in kind_representatives() {
            let model = inst.model();
            let v = &inst.perturbation;
            let ops = intermediate_operators(&model, v).unwrap();
            let c = invert_m(&model, v, &ops).unwrap();
            let m = MatrixSeries::new(0, c.big_m.clone(), v.dim());
            let prod = c.inverse.mul(&m);
            for p in prod.low()..=prod.valid().min(1) {
                let expected = if p == 0 { Matrix::identity(v.dim()) } else { Matrix::zeros(v.dim(), v.dim()) };
                assert!(prod.coeff(p).approx_eq(&expected, RankTol::default()), "{} κ^{p}", inst.name);
            }
        }
    }

    #[test]
    fn star_leading_coefficients() {
        let inst = star_instance(3);
        let model = inst.model();
        let e = resolvent_expansion(&model, &inst.perturbation).unwrap();
        assert_eq!(e.kind, ThresholdKind::FirstKind);
        assert!(e.coefficient(-2).unwrap().same_as(&OperatorExpr::zero(model.graph()), model.tol()));
        assert!(e.coefficient(2).is_err());
    }
}
