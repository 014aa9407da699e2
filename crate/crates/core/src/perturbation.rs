//! Factored perturbations `V = v U v*` with finitely supported columns.

use crate::free::{dirichlet_h0, FreeChoice, FreeError, FreeModel};
use crate::graph::{pair, GraphWithRays, RayFunction, Site};
use crate::linalg::{rank, LinalgError, Matrix};
use crate::scalar::{RankTol, Scalar};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PerturbationError {
    #[error("U is not symmetric")]
    NonSymmetricU,
    #[error("U is not unitary: U² ≠ I")]
    NonUnitaryU,
    #[error("the columns of v are linearly dependent")]
    DependentColumns,
    #[error("column {0} of v is not finitely supported")]
    NotFinitelySupported(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Free(#[from] FreeError),
}

/// `V = v U v*` with `v : 𝒦 → ℓ²(G)` given by its columns.
#[derive(Clone, Debug, PartialEq)]
pub struct FactoredPerturbation<S> {
    columns: Vec<RayFunction<S>>,
    u: Matrix<S>,
    support_radius: usize,
}

impl<S: Scalar> FactoredPerturbation<S> {
    /// Validates `U = Uᵀ`, `U² = I` and injectivity of `v`.
    pub fn build(
        g: &GraphWithRays,
        columns: Vec<RayFunction<S>>,
        u: Matrix<S>,
        tol: RankTol,
    ) -> Result<Self, PerturbationError> {
        let k = columns.len();
        if u.rows() != k || u.cols() != k {
            return Err(PerturbationError::ShapeMismatch(format!(
                "{} columns but U is {}x{}",
                k,
                u.rows(),
                u.cols()
            )));
        }
        for (i, c) in columns.iter().enumerate() {
            if c.k_values().len() != g.k_len() || c.rays().len() != g.ray_count() {
                return Err(PerturbationError::ShapeMismatch(format!("column {i} has the wrong shape")));
            }
            if !c.is_finitely_supported() {
                return Err(PerturbationError::NotFinitelySupported(i));
            }
        }
        if !u.is_symmetric(tol) {
            return Err(PerturbationError::NonSymmetricU);
        }
        if !(&u * &u).approx_eq(&Matrix::identity(k), tol) {
            return Err(PerturbationError::NonUnitaryU);
        }
        let support_radius = columns.iter().map(RayFunction::support_radius).max().unwrap_or(0);
        let window = g.window(support_radius);
        let values = Matrix::from_fn(window.len(), k, |i, j| columns[j].eval(window[i]));
        if rank(&values, tol) < k {
            return Err(PerturbationError::DependentColumns);
        }
        Ok(FactoredPerturbation { columns, u, support_radius })
    }

    /// `V = 0` on the zero-dimensional `𝒦`.
    pub fn zero() -> Self {
        FactoredPerturbation { columns: Vec::new(), u: Matrix::zeros(0, 0), support_radius: 0 }
    }

    /// Converts every scalar, e.g. to rerun an exact instance in floats.
    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T + Copy) -> FactoredPerturbation<T> {
        FactoredPerturbation {
            columns: self.columns.iter().map(|c| c.map(f)).collect(),
            u: self.u.map(f),
            support_radius: self.support_radius,
        }
    }

    /// Dimension of `𝒦`.
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[RayFunction<S>] {
        &self.columns
    }

    pub fn u(&self) -> &Matrix<S> {
        &self.u
    }

    /// Largest ray position in the support of any column.
    pub fn support_radius(&self) -> usize {
        self.support_radius
    }

    /// `v* f = (⟨v_i, f⟩)_i`; defined whenever `f` has polynomial tails.
    pub fn adjoint(&self, f: &RayFunction<S>) -> Vec<S> {
        self.columns.iter().map(|c| pair(c, f).expect("columns are finitely supported")).collect()
    }

    /// `v c = Σ c_i v_i`.
    pub fn embed(&self, g: &GraphWithRays, c: &[S]) -> RayFunction<S> {
        RayFunction::combination(&RayFunction::zero(g), c, &self.columns)
    }

    /// `V f`, always finitely supported.
    pub fn apply(&self, g: &GraphWithRays, f: &RayFunction<S>) -> RayFunction<S> {
        self.embed(g, &self.u.mul_vec(&self.adjoint(f)))
    }

    /// `V[x, y]`.
    pub fn entry(&self, x: Site, y: Site) -> S {
        let left: Vec<S> = self.columns.iter().map(|c| c.eval(x)).collect();
        let right: Vec<S> = self.columns.iter().map(|c| c.eval(y)).collect();
        crate::linalg::dot(&left, &self.u.mul_vec(&right))
    }

    /// `M_j = v* G₀,ⱼ v`, plus `U` when `j = 0`.
    pub fn m_matrix(&self, model: &FreeModel<S>, j: usize) -> Result<Matrix<S>, PerturbationError> {
        let core = model.sandwich(j, &self.columns, &self.columns)?;
        Ok(if j == 0 { &core + &self.u } else { core })
    }
}

/// `H u = H₀ u + V u`.
pub fn apply_hamiltonian<S: Scalar>(
    model: &FreeModel<S>,
    v: &FactoredPerturbation<S>,
    u: &RayFunction<S>,
) -> RayFunction<S> {
    model.apply_h0(u).add(&v.apply(model.graph(), u))
}

/// The joining operator `J = −Σ_α (|s_α⟩⟨f_α| + |f_α⟩⟨s_α|)`.
///
/// One column `s_x = δ_x` per distinct joint vertex `x`, followed by one
/// column `f_x = Σ_{x_α = x} δ_{1^(α)}` per joint, so
/// `U = [[0, −I], [−I, 0]]`.
pub fn joining_perturbation<S: Scalar>(g: &GraphWithRays) -> FactoredPerturbation<S> {
    let joints = g.joint_vertices();
    let p = joints.len();
    let mut columns: Vec<RayFunction<S>> = joints.iter().map(|&x| RayFunction::delta(g, Site::K(x))).collect();
    columns.extend(joints.iter().map(|&x| {
        let sites: Vec<(Site, S)> =
            g.rays_at(x).into_iter().map(|ray| (Site::Ray { ray, pos: 1 }, S::one())).collect();
        RayFunction::from_sites(g, &sites)
    }));
    let u = Matrix::from_fn(2 * p, 2 * p, |i, j| if i.abs_diff(j) == p { -S::one() } else { S::zero() });
    let support_radius = 1;
    FactoredPerturbation { columns, u, support_radius }
}

/// Factors a symmetric matrix `V` on the given sites through its
/// eigendecomposition: `v_j = √|λ_j| u_j`, `U = diag(sign λ_j)`.
///
/// Requires the float backend. Eigenvalues below `tol` relative to the
/// largest are dropped.
pub fn factor_dense<S: Scalar>(
    g: &GraphWithRays,
    sites: &[Site],
    entries: &Matrix<S>,
    tol: RankTol,
) -> Result<FactoredPerturbation<S>, PerturbationError> {
    if entries.rows() != sites.len() || !entries.is_square() {
        return Err(PerturbationError::ShapeMismatch("V must be square over the listed sites".into()));
    }
    if !entries.is_symmetric(tol) {
        return Err(LinalgError::AsymmetricInput.into());
    }
    let eig = S::symmetric_eigen(entries, tol)?;
    let scale = eig.values.iter().map(Scalar::magnitude).fold(0.0, f64::max);
    let mut columns = Vec::new();
    let mut signs = Vec::new();
    for (idx, lambda) in eig.values.iter().enumerate() {
        if lambda.negligible(scale, tol) {
            continue;
        }
        let magnitude = if lambda.is_positive() { lambda.clone() } else { -lambda.clone() };
        let root = magnitude.sqrt().expect("absolute value is nonnegative");
        let values: Vec<(Site, S)> = sites
            .iter()
            .zip(eig.vectors.column(idx))
            .map(|(&s, x)| (s, root.clone() * x))
            .collect();
        columns.push(RayFunction::from_sites(g, &values));
        signs.push(if lambda.is_positive() { S::one() } else { -S::one() });
    }
    let u = Matrix::from_diagonal(&signs);
    let factored = FactoredPerturbation::build(g, columns, u, tol)?;
    let rebuilt = Matrix::from_fn(sites.len(), sites.len(), |i, j| factored.entry(sites[i], sites[j]));
    let bound = 1e-10 * entries.max_abs().max(1.0);
    assert!((&rebuilt - entries).max_abs() <= bound, "factor_dense reconstruction exceeded its bound");
    Ok(factored)
}

/// Sites carrying the coupling between `K` and the rays: all of `K`, then
/// position 1 on every ray.
pub fn coupling_sites(g: &GraphWithRays) -> Vec<Site> {
    g.window(1)
}

/// Dense matrix of `−Δ_G − H₀` on [`coupling_sites`] for the given free choice.
pub fn laplacian_defect<S: Scalar>(g: &GraphWithRays, choice: FreeChoice) -> Matrix<S> {
    let sites = coupling_sites(g);
    let k = g.k_len();
    let mut m = Matrix::zeros(sites.len(), sites.len());
    if choice == FreeChoice::TwiceIdentity {
        let h: Matrix<S> = dirichlet_h0(g);
        for x in 0..k {
            for y in 0..k {
                m[(x, y)] = h[(x, y)].clone();
            }
            m[(x, x)] = m[(x, x)].clone() - S::from_i64(2);
        }
    }
    for (ray, &x) in g.joints().iter().enumerate() {
        m[(x, k + ray)] = -S::one();
        m[(k + ray, x)] = -S::one();
    }
    m
}

/// The perturbation `V` with `H₀ + V = −Δ_G`.
///
/// For the graph Dirichlet choice this is the joining operator, exact in any
/// backend. For `h₀ = 2·id` the defect also lives on `K` and is factored
/// through [`factor_dense`], which needs the float backend.
pub fn free_laplacian_perturbation<S: Scalar>(
    g: &GraphWithRays,
    choice: FreeChoice,
    tol: RankTol,
) -> Result<FactoredPerturbation<S>, PerturbationError> {
    match choice {
        FreeChoice::GraphDirichlet => Ok(joining_perturbation(g)),
        FreeChoice::TwiceIdentity => factor_dense(g, &coupling_sites(g), &laplacian_defect(g, choice), tol),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::apply_graph_laplacian;
    use crate::scalar::{rat, Rational};

    fn tol() -> RankTol {
        RankTol::default()
    }

    #[test]
    fn build_errors() {
        let g = GraphWithRays::star(2);
        let d: RayFunction<Rational> = RayFunction::delta(&g, Site::K(0));
        let bad_u = Matrix::from_diagonal(&[rat(1, 1), rat(2, 1)]);
        assert_eq!(
            FactoredPerturbation::build(&g, vec![d.clone(), d.clone()], bad_u, tol()),
            Err(PerturbationError::NonUnitaryU)
        );
        let u = Matrix::from_diagonal(&[rat(1, 1), rat(-1, 1)]);
        assert_eq!(
            FactoredPerturbation::build(&g, vec![d.clone(), d], u, tol()),
            Err(PerturbationError::DependentColumns)
        );
    }

    #[test]
    fn star_joining_matches_its_closed_factors() {
        let g = GraphWithRays::star(3);
        let j: FactoredPerturbation<Rational> = joining_perturbation(&g);
        assert_eq!(j.dim(), 2);
        assert_eq!(j.u(), &Matrix::from_rows(vec![vec![rat(0, 1), rat(-1, 1)], vec![rat(-1, 1), rat(0, 1)]]));
        let model = FreeModel::new(&g).unwrap();
        let m0 = j.m_matrix(&model, 0).unwrap();
        assert_eq!(m0, Matrix::from_rows(vec![vec![rat(1, 3), rat(-1, 1)], vec![rat(-1, 1), rat(3, 1)]]));
        let f1 = RayFunction::delta(&g, Site::Ray { ray: 0, pos: 1 });
        assert_eq!(j.apply(&g, &f1), RayFunction::delta(&g, Site::K(0)).scale(&rat(-1, 1)));
    }

    #[test]
    fn joining_restores_graph_laplacian() {
        let g = GraphWithRays::build(&["a", "b", "c"], &[("a", "b"), ("b", "c")], &["a", "c", "c"]).unwrap();
        let model: FreeModel<Rational> = FreeModel::new(&g).unwrap();
        let j = joining_perturbation(&g);
        assert_eq!(j.dim(), 4);
        for site in g.window(3) {
            let d = RayFunction::delta(&g, site);
            assert_eq!(apply_hamiltonian(&model, &j, &d), apply_graph_laplacian(&g, &d));
        }
    }

    #[test]
    fn twice_identity_defect_is_factored_in_floats() {
        let g = GraphWithRays::build(&["a", "b"], &[("a", "b")], &["a", "b"]).unwrap();
        let model: FreeModel<f64> =
            FreeModel::with_options(&g, FreeChoice::TwiceIdentity, 8, tol()).unwrap();
        let v = free_laplacian_perturbation(&g, FreeChoice::TwiceIdentity, tol()).unwrap();
        for site in g.window(3) {
            let d = RayFunction::delta(&g, site);
            assert!(apply_hamiltonian(&model, &v, &d).approx_eq(&apply_graph_laplacian(&g, &d), tol()));
        }
        assert_eq!(
            free_laplacian_perturbation::<Rational>(&g, FreeChoice::TwiceIdentity, tol()),
            Err(PerturbationError::Linalg(LinalgError::RationalBackendUnsupported))
        );
    }

    #[test]
    fn dense_single_site() {
        let g = GraphWithRays::star(2);
        let v = factor_dense(&g, &[Site::K(0)], &Matrix::from_diagonal(&[2.0]), tol()).unwrap();
        assert!((v.columns()[0].eval(Site::K(0)).abs() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(v.u(), &Matrix::from_diagonal(&[1.0]));
        let zero = factor_dense(&g, &[Site::K(0)], &Matrix::<f64>::zeros(1, 1), tol()).unwrap();
        assert_eq!(zero.dim(), 0);
    }
}
