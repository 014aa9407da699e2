use rayzero::catalog::{kind_representatives, random_instances, Instance};
use rayzero::expansion::closed::{closed_forms, closed_forms_as};
use rayzero::expansion::resolvent_expansion;
use rayzero::graph::RayFunction;
use rayzero::operator::OperatorExpr;
use rayzero::perturbation::apply_hamiltonian;
use rayzero::threshold::{eigenspaces, is_annihilated, projections, ThresholdKind};

fn check_engine_against_closed_forms(inst: &Instance) {
    let model = inst.model();
    let v = &inst.perturbation;
    let tol = model.tol();
    let report = eigenspaces(&model, v).unwrap();
    let proj = projections(&model, v, &report).unwrap();
    let e = resolvent_expansion(&model, v).unwrap();
    assert_eq!(e.kind, report.kind, "{}", inst.name);
    assert!(e.coefficient(-2).unwrap().same_as(&proj.bound, tol), "{}: G₋₂ ≠ 𝖯", inst.name);
    assert!(e.coefficient(-1).unwrap().same_as(&proj.resonance, tol), "{}: G₋₁ ≠ 𝒫", inst.name);
    let closed = closed_forms(&model, v, &report, &proj).unwrap();
    assert!(e.coefficient(0).unwrap().same_as(&closed.g0, tol), "{}: G₀ routes differ", inst.name);
    assert!(e.coefficient(1).unwrap().same_as(&closed.g1, tol), "{}: G₁ routes differ", inst.name);
}

#[test]
fn engine_matches_closed_forms_for_every_kind() {
    for (_, inst) in kind_representatives() {
        check_engine_against_closed_forms(&inst);
    }
}

#[test]
fn engine_matches_closed_forms_on_random_instances() {
    for inst in random_instances(15, 2024) {
        check_engine_against_closed_forms(&inst);
    }
}

#[test]
fn third_kind_formula_covers_every_kind() {
    for (kind, inst) in kind_representatives() {
        let model = inst.model();
        let v = &inst.perturbation;
        let report = eigenspaces(&model, v).unwrap();
        let proj = projections(&model, v, &report).unwrap();
        let own = closed_forms(&model, v, &report, &proj).unwrap();
        let general = closed_forms_as(ThresholdKind::ThirdKind, &model, v, &report, &proj).unwrap();
        assert!(own.g0.same_as(&general.g0, model.tol()), "{kind}: G₀");
        assert!(own.g1.same_as(&general.g1, model.tol()), "{kind}: G₁");
    }
}

#[test]
fn nonresonance_functions_are_generalized_eigenfunctions() {
    for (kind, inst) in kind_representatives() {
        let model = inst.model();
        let v = &inst.perturbation;
        let report = eigenspaces(&model, v).unwrap();
        let proj = projections(&model, v, &report).unwrap();
        let closed = closed_forms(&model, v, &report, &proj).unwrap();
        let template = RayFunction::zero(model.graph());
        for c in closed.complement.columns() {
            let f = RayFunction::combination(&template, &c, &closed.transfer);
            assert!(is_annihilated(&model, v, &f), "{kind}: T applied to {c:?}");
            assert_eq!(f.tail_vector(1), c, "{kind}: leading tail");
        }
    }
}

/// `H G₋₂ = H G₋₁ = 0`, `H G₀ = I − 𝖯`, `H G₁ = −G₋₁`, column by column.
#[test]
fn hamiltonian_acts_on_coefficients_as_expected() {
    for (kind, inst) in kind_representatives() {
        let model = inst.model();
        let v = &inst.perturbation;
        let g = model.graph();
        let e = resolvent_expansion(&model, v).unwrap();
        let bound = e.coefficient(-2).unwrap();
        let res = e.coefficient(-1).unwrap();
        for site in g.window(8) {
            let delta = RayFunction::delta(g, site);
            let h = |op: &OperatorExpr<_>| apply_hamiltonian(&model, v, &op.apply(&model, &delta).unwrap());
            let zero = RayFunction::zero(g);
            assert_eq!(h(bound), zero, "{kind} H G₋₂ at {site:?}");
            assert_eq!(h(res), zero, "{kind} H G₋₁ at {site:?}");
            let expected0 = delta.sub(&bound.apply(&model, &delta).unwrap());
            assert_eq!(h(e.coefficient(0).unwrap()), expected0, "{kind} H G₀ at {site:?}");
            let expected1 = res.apply(&model, &delta).unwrap().scale(&rayzero::scalar::rat(-1, 1));
            assert_eq!(h(e.coefficient(1).unwrap()), expected1, "{kind} H G₁ at {site:?}");
        }
    }
}
