//! Brute-force checks of the expansion.
//!
//! `R(κ) = (H + κ²)^{-1}` is computed on the graph truncated at ray
//! position `L` with a Dirichlet condition at `L + 1`. The resolvent decays
//! like `e^{−θ·dist}` with `θ = arccosh(1 + κ²/2) ≈ κ`, so `L ≥ c/κ` keeps
//! the reflected part below `e^{−2c}`.
//!
//! Near a zero-energy bound state `‖R(κ)‖ ~ κ^{-2}`, so a plain f64 solve
//! carries an error of order `ε‖H‖κ^{-4}`. Entries are therefore kept as
//! `hi + lo` pairs and solves are refined against a double-double residual.

mod banded;

pub use banded::{BandedLu, BandedMatrix};

use rayon::prelude::*;

use crate::expansion::ResolventExpansion;
use crate::free::FreeModel;
use crate::graph::{pair, GraphWithRays, RayFunction, Site};
use crate::linalg::Matrix;
use crate::operator::{OperatorError, OperatorExpr};
use crate::perturbation::{apply_hamiltonian, FactoredPerturbation};
use crate::scalar::{RankTol, Scalar};
use crate::threshold::{Projections, ThresholdReport};

pub const DEFAULT_CUTOFF_CONST: f64 = 40.0;
pub const DEFAULT_KAPPAS: [f64; 4] = [0.4, 0.2, 0.1, 0.05];
/// Slopes below this flag an entry.
pub const SLOPE_THRESHOLD: f64 = 1.9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("the truncated system is singular at κ = {0}")]
    SingularSolve(f64),
    #[error("cutoff L = {cutoff} is below c/κ = {required}")]
    CutoffTooSmall { cutoff: usize, required: usize },
    #[error("κ must be positive, got {0}")]
    NonPositiveKappa(f64),
    #[error("site {0:?} lies outside the truncated graph")]
    SiteOutsideCutoff(Site),
    #[error("⟨𝐧^({ray}), u₁⟩ = {value} is not zero")]
    PreconditionMomentNonzero { ray: usize, value: String },
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Smallest admissible cutoff `⌈c/κ⌉`.
pub fn required_cutoff(kappa: f64, cutoff_const: f64) -> usize {
    (cutoff_const / kappa).ceil() as usize
}

/// `H = H₀ + V` on `K ∪ {ray sites ≤ L}`, Dirichlet beyond `L`.
///
/// Sites are ordered `K` first, then by ray position, then by ray, which
/// keeps the matrix banded.
#[derive(Clone, Debug)]
pub struct TruncatedHamiltonian {
    graph: GraphWithRays,
    cutoff: usize,
    matrix: BandedMatrix,
    /// Rounding errors of `matrix`; `matrix + lo` is `H` to about `ε²`.
    lo: BandedMatrix,
}

impl TruncatedHamiltonian {
    pub fn new<S: Scalar>(model: &FreeModel<S>, v: &FactoredPerturbation<S>, cutoff: usize) -> Self {
        let g = model.graph().clone();
        let k = g.k_len();
        let n = g.ray_count();
        let mut h = TruncatedHamiltonian {
            graph: g.clone(),
            cutoff,
            matrix: BandedMatrix::zeros(k + n * cutoff),
            lo: BandedMatrix::zeros(k + n * cutoff),
        };
        let h0 = model.h0();
        for x in 0..k {
            for y in 0..k {
                h.add_split(x, y, h0[(x, y)].to_f64_split());
            }
        }
        for ray in 0..n {
            for pos in 1..=cutoff {
                let i = k + (pos - 1) * n + ray;
                h.matrix.add(i, i, 2.0);
                if pos < cutoff {
                    h.matrix.add(i, i + n, -1.0);
                    h.matrix.add(i + n, i, -1.0);
                }
            }
        }
        let support: Vec<Site> = g.window(v.support_radius().min(cutoff));
        for &x in &support {
            for &y in &support {
                let (i, j) = (site_index(&g, cutoff, x).unwrap(), site_index(&g, cutoff, y).unwrap());
                h.add_split(i, j, v.entry(x, y).to_f64_split());
            }
        }
        h
    }

    fn add_split(&mut self, i: usize, j: usize, (hi, lo): (f64, f64)) {
        if hi != 0.0 {
            let err = self.matrix.add_exact(i, j, hi);
            self.lo.add(i, j, lo + err);
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn index(&self, site: Site) -> Result<usize, OracleError> {
        site_index(&self.graph, self.cutoff, site).ok_or(OracleError::SiteOutsideCutoff(site))
    }

    pub fn entry(&self, x: Site, y: Site) -> Result<f64, OracleError> {
        Ok(self.matrix.get(self.index(x)?, self.index(y)?))
    }

    pub fn is_symmetric(&self) -> bool {
        self.matrix.is_symmetric()
    }

    /// `H + κ²` factorized.
    pub fn shifted_factor(&self, kappa: f64) -> Result<ShiftedSolver, OracleError> {
        let mut shifted = self.matrix.clone();
        let mut lo = self.lo.clone();
        let k2 = kappa * kappa;
        let k2_lo = kappa.mul_add(kappa, -k2);
        for i in 0..self.dim() {
            let err = shifted.add_exact(i, i, k2);
            lo.add(i, i, k2_lo + err);
        }
        let lu = shifted.factor().ok_or(OracleError::SingularSolve(kappa))?;
        Ok(ShiftedSolver { shifted, lo, lu })
    }
}

fn site_index(g: &GraphWithRays, cutoff: usize, site: Site) -> Option<usize> {
    match site {
        Site::K(x) if x < g.k_len() => Some(x),
        Site::Ray { ray, pos } if ray < g.ray_count() && (1..=cutoff).contains(&pos) => {
            Some(g.k_len() + (pos - 1) * g.ray_count() + ray)
        }
        _ => None,
    }
}

/// Factorized `H + κ²` together with the matrix it came from.
#[derive(Clone, Debug)]
pub struct ShiftedSolver {
    shifted: BandedMatrix,
    lo: BandedMatrix,
    lu: BandedLu,
}

/// Refinement steps; each gains about `log₁₀(1/(ε·cond))` digits.
const REFINEMENT_STEPS: usize = 3;

impl ShiftedSolver {
    /// `(H+κ²)^{-1} b`, refined against the double-double residual.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = self.lu.solve(b);
        for _ in 0..REFINEMENT_STEPS {
            let r = self.shifted.residual(&self.lo, &x, b);
            for (xi, d) in x.iter_mut().zip(self.lu.solve(&r)) {
                *xi += d;
            }
        }
        x
    }

    /// `‖(H+κ²)x − b‖_∞ / ‖b‖_∞`.
    pub fn relative_residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let r = self.shifted.residual(&self.lo, x, b);
        let num = r.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let den = b.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        num / den.max(f64::MIN_POSITIVE)
    }
}

/// `R(κ)[x, y]` for all `x ∈ rows`, `y ∈ cols`, with `L = ⌈c/κ⌉`.
pub fn numeric_resolvent_block<S: Scalar>(
    model: &FreeModel<S>,
    v: &FactoredPerturbation<S>,
    kappa: f64,
    cutoff_const: f64,
    rows: &[Site],
    cols: &[Site],
) -> Result<Matrix<f64>, OracleError> {
    let cutoff = required_cutoff(kappa, cutoff_const).max(v.support_radius() + 1);
    numeric_resolvent_block_with_cutoff(model, v, kappa, cutoff, cutoff_const, rows, cols)
}

pub fn numeric_resolvent_block_with_cutoff<S: Scalar>(
    model: &FreeModel<S>,
    v: &FactoredPerturbation<S>,
    kappa: f64,
    cutoff: usize,
    cutoff_const: f64,
    rows: &[Site],
    cols: &[Site],
) -> Result<Matrix<f64>, OracleError> {
    if kappa <= 0.0 || !kappa.is_finite() {
        return Err(OracleError::NonPositiveKappa(kappa));
    }
    let required = required_cutoff(kappa, cutoff_const);
    if cutoff < required {
        return Err(OracleError::CutoffTooSmall { cutoff, required });
    }
    let h = TruncatedHamiltonian::new(model, v, cutoff);
    let row_index: Vec<usize> = rows.iter().map(|&s| h.index(s)).collect::<Result<_, _>>()?;
    let col_index: Vec<usize> = cols.iter().map(|&s| h.index(s)).collect::<Result<_, _>>()?;
    let solver = h.shifted_factor(kappa)?;
    let mut out = Matrix::zeros(rows.len(), cols.len());
    for (j, &c) in col_index.iter().enumerate() {
        let mut b = vec![0.0; h.dim()];
        b[c] = 1.0;
        let x = solver.solve(&b);
        for (i, &r) in row_index.iter().enumerate() {
            out[(i, j)] = x[r];
        }
    }
    Ok(out)
}

/// `⟨δ_x, (H_L + κ²)^{-1} δ_y⟩` with an explicit cutoff `L ≥ c/κ`.
pub fn numeric_resolvent_entry<S: Scalar>(
    model: &FreeModel<S>,
    v: &FactoredPerturbation<S>,
    kappa: f64,
    cutoff: usize,
    x: Site,
    y: Site,
) -> Result<f64, OracleError> {
    let m = numeric_resolvent_block_with_cutoff(model, v, kappa, cutoff, DEFAULT_CUTOFF_CONST, &[x], &[y])?;
    Ok(m[(0, 0)])
}

/// `R(κ)` minus `R₀(κ) − R₀(κ)vM(κ)^{-1}v*R₀(κ)` on `sites`, all solved
/// numerically; the largest absolute entry.
pub fn second_resolvent_discrepancy<S: Scalar>(
    model: &FreeModel<S>,
    v: &FactoredPerturbation<S>,
    kappa: f64,
    cutoff_const: f64,
    sites: &[Site],
) -> Result<f64, OracleError> {
    let g = model.graph();
    let cutoff = required_cutoff(kappa, cutoff_const).max(v.support_radius() + 1);
    let support = g.window(v.support_radius().min(cutoff));
    let free = FactoredPerturbation::<S>::zero();
    let all: Vec<Site> = sites.iter().chain(&support).copied().collect();
    let r0 = numeric_resolvent_block_with_cutoff(model, &free, kappa, cutoff, cutoff_const, &all, &all)?;
    let r = numeric_resolvent_block_with_cutoff(model, v, kappa, cutoff, cutoff_const, sites, sites)?;
    // Columns of v restricted to the support.
    let k = v.dim();
    let vmat = Matrix::from_fn(all.len(), k, |i, c| {
        if i >= sites.len() {
            v.columns()[c].eval(all[i]).to_f64()
        } else {
            0.0
        }
    });
    let u = v.u().map(|x| x.to_f64());
    let r0v = &r0 * &vmat;
    let m = &u + &(&vmat.transpose() * &r0v);
    let m_inv = crate::linalg::inverse(&m, RankTol(1e-12)).map_err(|_| OracleError::SingularSolve(kappa))?;
    let correction = &(&r0v * &m_inv) * &r0v.transpose();
    let n = sites.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((r[(i, j)] - (r0[(i, j)] - correction[(i, j)])).abs());
        }
    }
    Ok(worst)
}

/// Residual sequence and fitted order of one kernel entry.
#[derive(Clone, Debug, PartialEq)]
pub struct EntryResidual {
    pub x: Site,
    pub y: Site,
    /// `|R(κ)[x,y] − Σ κ^j G_j[x,y]|`, one per `κ`.
    pub residuals: Vec<f64>,
    /// Least-squares slope of `log ρ` against `log κ`; `None` when every
    /// residual is at round-off level.
    pub slope: Option<f64>,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    pub kappas: Vec<f64>,
    /// Orders `j` kept in the partial sum.
    pub orders: Vec<i32>,
    pub entries: Vec<EntryResidual>,
}

impl ResidualReport {
    /// Smallest fitted slope over all entries with a measurable residual.
    pub fn min_slope(&self) -> Option<f64> {
        self.entries.iter().filter_map(|e| e.slope).min_by(f64::total_cmp)
    }

    pub fn flagged(&self) -> usize {
        self.entries.iter().filter(|e| e.flagged).count()
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Residuals below this relative level are treated as round-off.
const ROUNDOFF: f64 = 1e-11;

/// Fitted residual order of `Σ_{j ∈ orders} κ^j G_j` against the numeric
/// resolvent on `window × window`, solves for distinct `κ` run in parallel.
pub fn expansion_residual_report<S: Scalar>(
    model: &FreeModel<S>,
    v: &FactoredPerturbation<S>,
    expansion: &ResolventExpansion<S>,
    kappas: &[f64],
    window: &[Site],
    cutoff_const: f64,
    orders: &[i32],
) -> Result<ResidualReport, OracleError> {
    assert!(kappas.len() >= 2, "a slope needs at least two κ values");
    let coefficient_tables: Vec<(i32, Matrix<f64>)> = orders
        .iter()
        .map(|&j| {
            let op = expansion.coefficient(j).expect("orders lie in −2..=1");
            Ok((j, op.to_matrix(model, window, window)?.map(|x| x.to_f64())))
        })
        .collect::<Result<_, OracleError>>()?;
    let numeric: Vec<Matrix<f64>> = kappas
        .par_iter()
        .map(|&kappa| numeric_resolvent_block(model, v, kappa, cutoff_const, window, window))
        .collect::<Result<_, _>>()?;
    let log_kappa: Vec<f64> = kappas.iter().map(|k| k.ln()).collect();
    let mut entries = Vec::with_capacity(window.len() * window.len());
    for (i, &x) in window.iter().enumerate() {
        for (l, &y) in window.iter().enumerate() {
            let residuals: Vec<f64> = kappas
                .iter()
                .zip(&numeric)
                .map(|(&kappa, r)| {
                    let partial: f64 = coefficient_tables.iter().map(|(j, t)| kappa.powi(*j) * t[(i, l)]).sum();
                    (r[(i, l)] - partial).abs()
                })
                .collect();
            let scale = numeric.iter().map(|r| r[(i, l)].abs()).fold(1.0f64, f64::max);
            let slope = if residuals.iter().all(|&r| r <= ROUNDOFF * scale) {
                None
            } else {
                let logs: Vec<f64> = residuals.iter().map(|r| r.max(f64::MIN_POSITIVE).ln()).collect();
                Some(fit_slope(&log_kappa, &logs))
            };
            let flagged = slope.is_some_and(|s| s < SLOPE_THRESHOLD);
            entries.push(EntryResidual { x, y, residuals, slope, flagged });
        }
    }
    Ok(ResidualReport { kappas: kappas.to_vec(), orders: orders.to_vec(), entries })
}

/// One line of the identity ledger.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityCheck {
    pub name: String,
    pub passed: bool,
    /// First failing site or a short reason; empty when passed.
    pub detail: String,
}

fn check(name: &str, failure: Option<String>) -> IdentityCheck {
    IdentityCheck { name: name.to_string(), passed: failure.is_none(), detail: failure.unwrap_or_default() }
}

fn functions_agree<S: Scalar>(a: &RayFunction<S>, b: &RayFunction<S>, tol: RankTol) -> bool {
    if S::EXACT {
        a == b
    } else {
        a.sub(b).max_abs() <= 1e-9 * a.max_abs().max(b.max_abs()).max(1.0) || a.approx_eq(b, tol)
    }
}

/// `HG₋₂ = HG₋₁ = 0`, `HG₀ = I − 𝖯`, `HG₁ = −G₋₁` on every delta of the
/// window, symmetry of each `G_j` there, and the projection laws.
pub fn identity_suite<S: Scalar>(
    model: &FreeModel<S>,
    v: &FactoredPerturbation<S>,
    expansion: &ResolventExpansion<S>,
    report: &ThresholdReport<S>,
    projections: &Projections<S>,
    window: &[Site],
) -> Vec<IdentityCheck> {
    let g = model.graph();
    let tol = model.tol();
    let zero = RayFunction::zero(g);
    let coefficient = |j: i32| expansion.coefficient(j).expect("order in range");
    let bound = coefficient(-2);
    let res = coefficient(-1);
    let mut out = Vec::new();

    let columnwise = |name: &str, lhs_op: &OperatorExpr<S>, rhs: &dyn Fn(&RayFunction<S>) -> Result<RayFunction<S>, OperatorError>| {
        let failure = window.iter().find_map(|&y| {
            let delta = RayFunction::delta(g, y);
            let lhs = lhs_op.apply(model, &delta).map(|f| apply_hamiltonian(model, v, &f));
            match (lhs, rhs(&delta)) {
                (Ok(l), Ok(r)) if functions_agree(&l, &r, tol) => None,
                (Ok(_), Ok(_)) => Some(format!("fails at column {y:?}")),
                (Err(e), _) | (_, Err(e)) => Some(e.to_string()),
            }
        });
        check(name, failure)
    };
    out.push(columnwise("H G₋₂ = 0", bound, &|_| Ok(zero.clone())));
    out.push(columnwise("H G₋₁ = 0", res, &|_| Ok(zero.clone())));
    out.push(columnwise("H G₀ = I − 𝖯", coefficient(0), &|d| Ok(d.sub(&bound.apply(model, d)?))));
    out.push(columnwise("H G₁ = −G₋₁", coefficient(1), &|d| Ok(res.apply(model, d)?.scale(&-S::one()))));

    for j in -2..=1 {
        let failure = match coefficient(j).to_matrix(model, window, window) {
            Ok(m) if m.is_symmetric(tol) => None,
            Ok(_) => Some("kernel is not symmetric on the window".to_string()),
            Err(e) => Some(e.to_string()),
        };
        out.push(check(&format!("G_{j} symmetric"), failure));
    }

    let idempotent = match crate::operator::product(model, &[bound, bound]) {
        Ok(sq) if sq.same_as(bound, tol) => None,
        Ok(_) => Some("𝖯² ≠ 𝖯".to_string()),
        Err(e) => Some(e.to_string()),
    };
    out.push(check("𝖯² = 𝖯", idempotent));
    out.push(check(
        "G₋₂ = 𝖯",
        (!bound.same_as(&projections.bound, tol)).then(|| "engine and formula differ".to_string()),
    ));
    out.push(check(
        "G₋₁ = 𝒫",
        (!res.same_as(&projections.resonance, tol)).then(|| "engine and formula differ".to_string()),
    ));
    out.push(check(
        "𝖯 from the bound basis",
        (!bound.same_as(&report.bound_projection_from_basis(g), tol)).then(|| "basis route differs".to_string()),
    ));
    out.push(check(
        "𝒫 from the resonance basis",
        (!res.same_as(&report.resonance_projection_from_basis(g), tol)).then(|| "basis route differs".to_string()),
    ));
    // 𝒫 = L W Lᵀ is an orthogonal projection in the sense of its
    // asymptotic constants: W (CᵀC) W = W for the constant-tail matrix C.
    let compressed = res.compress(tol);
    let c = compressed.left_tail_matrix(0);
    let w = compressed.weights();
    let law = &(w * &(&c.transpose() * &c)) * w;
    out.push(check("𝒫 constant-tail law", (!law.approx_eq(w, tol)).then(|| "W CᵀC W ≠ W".to_string())));
    out
}

/// `⟨u₂, G₀,₂u₁⟩ = −⟨G₀,₀u₂, G₀,₀u₁⟩` for finitely supported `u₁, u₂`
/// with `⟨𝐧^(α), u₁⟩ = 0` for every ray.
pub fn lemma_pairing_check<S: Scalar>(
    model: &FreeModel<S>,
    u1: &RayFunction<S>,
    u2: &RayFunction<S>,
) -> Result<bool, OracleError> {
    let g = model.graph();
    for ray in 0..g.ray_count() {
        let m = pair(&RayFunction::ray_linear(g, ray), u1).map_err(OperatorError::from)?;
        if !m.negligible(1.0, model.tol()) {
            return Err(OracleError::PreconditionMomentNonzero { ray, value: m.to_string() });
        }
    }
    let (lhs, rhs) = pairing_sides(model, u1, u2)?;
    Ok(if S::EXACT { lhs == rhs } else { (lhs - rhs).negligible(1.0, model.tol()) })
}

/// `(⟨u₂, G₀,₂u₁⟩, −⟨G₀,₀u₂, G₀,₀u₁⟩)`.
pub fn pairing_sides<S: Scalar>(
    model: &FreeModel<S>,
    u1: &RayFunction<S>,
    u2: &RayFunction<S>,
) -> Result<(S, S), OracleError> {
    let apply = |j: usize, u: &RayFunction<S>| model.apply_free_coefficient(j, u).map_err(OperatorError::from);
    let lhs = pair(u2, &apply(2, u1)?).map_err(OperatorError::from)?;
    let rhs = -pair(&apply(0, u2)?, &apply(0, u1)?).map_err(OperatorError::from)?;
    Ok((lhs, rhs))
}
