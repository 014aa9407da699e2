use proptest::prelude::*;

use rayzero::catalog::{kind_representatives, random_instances, regular_instance, star_instance, Instance};
use rayzero::expansion::resolvent_expansion;
use rayzero::free::FreeModel;
use rayzero::graph::{GraphWithRays, RayFunction, Site};
use rayzero::linalg::{inverse, Matrix};
use rayzero::oracle::*;
use rayzero::perturbation::FactoredPerturbation;
use rayzero::scalar::{rat, RankTol, Rational, Scalar};
use rayzero::threshold::{eigenspaces, projections};

fn ray(ray: usize, pos: usize) -> Site {
    Site::Ray { ray, pos }
}

/// Dirichlet half-line resolvent `(e^{−θ|n−m|} − e^{−θ(n+m)}) / (2 sinh θ)`
/// with `2 cosh θ = 2 + κ²`.
fn half_line_resolvent(kappa: f64, n: usize, m: usize) -> f64 {
    let theta = (1.0 + kappa * kappa / 2.0).acosh();
    let d = (n as f64 - m as f64).abs();
    ((-theta * d).exp() - (-theta * (n + m) as f64).exp()) / (2.0 * theta.sinh())
}

#[test]
fn free_resolvent_matches_the_half_line_formula() {
    let inst = star_instance(2);
    let model = inst.model();
    let zero = FactoredPerturbation::<Rational>::zero();
    for (n, m) in [(5, 5), (1, 4), (3, 7)] {
        let numeric = numeric_resolvent_entry(&model, &zero, 0.5, 200, ray(0, n), ray(0, m)).unwrap();
        assert!((numeric - half_line_resolvent(0.5, n, m)).abs() < 1e-12, "({n}, {m})");
    }
}

#[test]
fn free_resolvent_matches_the_free_expansion_to_sixth_order() {
    let inst = star_instance(2);
    let model = inst.model();
    let zero = FactoredPerturbation::<Rational>::zero();
    let x = ray(0, 5);
    let gap = |kappa: f64| {
        let numeric = numeric_resolvent_entry(&model, &zero, kappa, required_cutoff(kappa, 40.0), x, x).unwrap();
        let partial: f64 = (0..=5).map(|j| kappa.powi(j as i32) * model.free_kernel(j, x, x).unwrap().to_f64()).sum();
        (numeric - partial).abs()
    };
    // Halving κ shrinks an O(κ⁶) remainder by about 64.
    let (coarse, fine) = (gap(0.04), gap(0.02));
    assert!(coarse / fine > 2f64.powf(5.5), "ratio {}", coarse / fine);
}

#[test]
fn free_k_block_is_the_dirichlet_inverse() {
    let inst = regular_instance();
    let model = inst.model();
    let zero = FactoredPerturbation::<Rational>::zero();
    let kappa = 0.3;
    let k: Vec<Site> = (0..model.graph().k_len()).map(Site::K).collect();
    let numeric = numeric_resolvent_block(&model, &zero, kappa, DEFAULT_CUTOFF_CONST, &k, &k).unwrap();
    let h0 = model.h0().map(Scalar::to_f64);
    let shifted = &h0 + &Matrix::identity(k.len()).scale(&(kappa * kappa));
    let direct = inverse(&shifted, RankTol(1e-12)).unwrap();
    assert!(numeric.approx_eq(&direct, RankTol(1e-12)));
}

#[test]
fn second_resolvent_identity_holds_numerically() {
    for (_, inst) in kind_representatives() {
        let model = inst.model();
        let sites = model.graph().nearest_sites(6);
        let worst = second_resolvent_discrepancy(&model, &inst.perturbation, 0.3, DEFAULT_CUTOFF_CONST, &sites).unwrap();
        assert!(worst < 1e-10, "{}: {worst}", inst.name);
    }
}

#[test]
fn cutoff_below_the_rule_is_rejected() {
    let inst = star_instance(2);
    let model = inst.model();
    let err = numeric_resolvent_entry(&model, &inst.perturbation, 0.1, 100, Site::K(0), Site::K(0)).unwrap_err();
    assert_eq!(err, OracleError::CutoffTooSmall { cutoff: 100, required: 400 });
}

#[test]
fn doubling_the_cutoff_changes_nothing() {
    let inst = star_instance(3);
    let model = inst.model();
    for kappa in [0.4, 0.1] {
        let l = required_cutoff(kappa, DEFAULT_CUTOFF_CONST);
        for y in [Site::K(0), ray(1, 3)] {
            let a = numeric_resolvent_entry(&model, &inst.perturbation, kappa, l, ray(0, 2), y).unwrap();
            let b = numeric_resolvent_entry(&model, &inst.perturbation, kappa, 2 * l, ray(0, 2), y).unwrap();
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "κ = {kappa}: {a} vs {b}");
        }
    }
}

#[test]
fn truncated_solves_have_small_residuals() {
    for (_, inst) in kind_representatives() {
        let model = inst.model();
        let h = TruncatedHamiltonian::new(&model, &inst.perturbation, 200);
        assert!(h.is_symmetric(), "{}", inst.name);
        assert_eq!(h.dim(), model.graph().k_len() + 200 * model.graph().ray_count());
        let solver = h.shifted_factor(0.2).unwrap();
        for site in model.graph().nearest_sites(6) {
            let mut b = vec![0.0; h.dim()];
            b[h.index(site).unwrap()] = 1.0;
            let x = solver.solve(&b);
            assert!(solver.relative_residual(&x, &b) <= 1e-12, "{} at {site:?}", inst.name);
        }
    }
}

fn residual_report(inst: &Instance, orders: &[i32]) -> ResidualReport {
    let model = inst.model();
    let e = resolvent_expansion(&model, &inst.perturbation).unwrap();
    let window = model.graph().nearest_sites(6);
    expansion_residual_report(&model, &inst.perturbation, &e, &DEFAULT_KAPPAS, &window, DEFAULT_CUTOFF_CONST, orders)
        .unwrap()
}

/// κ values small enough for `κ³G₃` to be negligible next to `κ²G₂` on the
/// six nearest sites. The third-kind representative has an entry whose
/// `κ²` coefficient nearly cancels and only settles below `κ ≈ 10⁻³`.
const ASYMPTOTIC_KAPPAS: [f64; 3] = [0.0015625, 0.00078125, 0.000390625];

#[test]
fn residuals_are_second_order_for_every_kind() {
    for (kind, inst) in kind_representatives() {
        let model = inst.model();
        let e = resolvent_expansion(&model, &inst.perturbation).unwrap();
        let window = model.graph().nearest_sites(6);
        let report = expansion_residual_report(
            &model,
            &inst.perturbation,
            &e,
            &ASYMPTOTIC_KAPPAS,
            &window,
            DEFAULT_CUTOFF_CONST,
            &[-2, -1, 0, 1],
        )
        .unwrap();
        let slope = report.min_slope().unwrap();
        assert!(slope >= SLOPE_THRESHOLD, "{kind}: slope {slope}");
        assert_eq!(report.flagged(), 0);
    }
}

#[test]
fn free_residual_slopes_match_the_half_line_formula() {
    let g = GraphWithRays::star(2);
    let model = FreeModel::<Rational>::new(&g).unwrap();
    let zero = FactoredPerturbation::<Rational>::zero();
    let e = resolvent_expansion(&model, &zero).unwrap();
    let window = [ray(0, 1), ray(0, 3)];
    let report =
        expansion_residual_report(&model, &zero, &e, &DEFAULT_KAPPAS, &window, DEFAULT_CUTOFF_CONST, &[-2, -1, 0, 1])
            .unwrap();
    let log_kappa: Vec<f64> = DEFAULT_KAPPAS.iter().map(|k| k.ln()).collect();
    for entry in &report.entries {
        let (Site::Ray { pos: n, .. }, Site::Ray { pos: m, .. }) = (entry.x, entry.y) else { unreachable!() };
        let g00 = model.free_kernel(0, entry.x, entry.y).unwrap().to_f64();
        let g01 = model.free_kernel(1, entry.x, entry.y).unwrap().to_f64();
        let exact: Vec<f64> =
            DEFAULT_KAPPAS.iter().map(|&k| (half_line_resolvent(k, n, m) - g00 - k * g01).abs().ln()).collect();
        let expected = fit_slope(&log_kappa, &exact);
        assert!((entry.slope.unwrap() - expected).abs() < 1e-8, "({n}, {m})");
    }
    // On the prescribed κ range the far entry is still pre-asymptotic.
    let far = report.entries.iter().find(|e| e.x == ray(0, 3) && e.y == ray(0, 3)).unwrap();
    assert!(far.slope.unwrap() < SLOPE_THRESHOLD);
}

#[test]
fn dropping_the_resonance_term_breaks_the_star() {
    let report = residual_report(&star_instance(3), &[-2, 0, 1]);
    let slope = report.min_slope().unwrap();
    assert!(slope <= -0.5, "slope {slope}");
}

#[test]
fn dropping_any_nonzero_coefficient_degrades_the_order() {
    for (kind, inst) in kind_representatives() {
        let model = inst.model();
        let e = resolvent_expansion(&model, &inst.perturbation).unwrap();
        for j in -2..=1 {
            let op = e.coefficient(j).unwrap();
            if op.same_as(&rayzero::operator::OperatorExpr::zero(model.graph()), model.tol()) {
                continue;
            }
            let window = model.graph().nearest_sites(6);
            let table = op.to_matrix(&model, &window, &window).unwrap();
            if table.is_zero(model.tol()) {
                continue;
            }
            let orders: Vec<i32> = (-2..=1).filter(|&i| i != j).collect();
            let report = residual_report(&inst, &orders);
            let slope = report.min_slope().unwrap();
            assert!(slope < j as f64 + 0.5, "{kind}: dropping G_{j} leaves slope {slope}");
        }
    }
}

#[test]
fn identity_suite_passes_on_representatives_and_random_instances() {
    let instances: Vec<Instance> =
        kind_representatives().into_iter().map(|(_, i)| i).chain(random_instances(12, 7)).collect();
    for inst in instances {
        let model = inst.model();
        let v = &inst.perturbation;
        let report = eigenspaces(&model, v).unwrap();
        let proj = projections(&model, v, &report).unwrap();
        let e = resolvent_expansion(&model, v).unwrap();
        let window = model.graph().window(8);
        for c in identity_suite(&model, v, &e, &report, &proj, &window) {
            assert!(c.passed, "{}: {} ({})", inst.name, c.name, c.detail);
        }
    }
}

#[test]
fn identity_suite_in_float_mode() {
    for (kind, inst) in kind_representatives() {
        let exact = inst.model();
        let model = FreeModel::<f64>::with_options(exact.graph(), exact.choice(), exact.cap(), RankTol::default()).unwrap();
        let v = inst.perturbation.map(Scalar::to_f64);
        let report = eigenspaces(&model, &v).unwrap();
        assert_eq!(report.kind, kind);
        let proj = projections(&model, &v, &report).unwrap();
        let e = resolvent_expansion(&model, &v).unwrap();
        for c in identity_suite(&model, &v, &e, &report, &proj, &model.graph().window(6)) {
            assert!(c.passed, "{kind}: {} ({})", c.name, c.detail);
        }
    }
}

#[test]
fn pairing_identity_examples() {
    let g = GraphWithRays::star(2);
    let model = FreeModel::<Rational>::new(&g).unwrap();
    let u1 = RayFunction::from_sites(&g, &[(ray(0, 1), rat(2, 1)), (ray(0, 2), rat(-1, 1))]);
    let u2 = RayFunction::delta(&g, ray(0, 1));
    assert!(lemma_pairing_check(&model, &u1, &u2).unwrap());
    let (lhs, rhs) = pairing_sides(&model, &u1, &u1).unwrap();
    assert_eq!(lhs, rhs);
    assert!(rhs < rat(0, 1));
    let bad = RayFunction::delta(&g, ray(1, 1));
    assert!(matches!(lemma_pairing_check(&model, &bad, &u2), Err(OracleError::PreconditionMomentNonzero { ray: 1, .. })));
}

fn moment_free(g: &GraphWithRays, k_vals: &[i64], ray_vals: &[Vec<i64>]) -> RayFunction<Rational> {
    // Fix the first head entry of every ray so that Σ n u(n) = 0.
    let mut sites: Vec<(Site, Rational)> = k_vals.iter().enumerate().map(|(x, &c)| (Site::K(x), rat(c, 1))).collect();
    for (a, vals) in ray_vals.iter().enumerate() {
        let moment: i64 = vals.iter().enumerate().map(|(i, &c)| (i as i64 + 2) * c).sum();
        sites.push((ray(a, 1), rat(-moment, 1)));
        for (i, &c) in vals.iter().enumerate() {
            sites.push((ray(a, i + 2), rat(c, 1)));
        }
    }
    RayFunction::from_sites(g, &sites)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]
    #[test]
    fn pairing_identity_holds_for_moment_free_vectors(
        k1 in prop::collection::vec(-3i64..=3, 1),
        r1 in prop::collection::vec(prop::collection::vec(-3i64..=3, 3), 3),
        k2 in prop::collection::vec(-3i64..=3, 1),
        r2 in prop::collection::vec(prop::collection::vec(-3i64..=3, 4), 3),
    ) {
        let g = GraphWithRays::star(3);
        let model = FreeModel::<Rational>::new(&g).unwrap();
        let u1 = moment_free(&g, &k1, &r1);
        let mut sites: Vec<(Site, Rational)> = vec![(Site::K(0), rat(k2[0], 1))];
        for (a, vals) in r2.iter().enumerate() {
            for (i, &c) in vals.iter().enumerate() {
                sites.push((ray(a, i + 1), rat(c, 1)));
            }
        }
        let u2 = RayFunction::from_sites(&g, &sites);
        prop_assert!(lemma_pairing_check(&model, &u1, &u2).unwrap());
    }
}
