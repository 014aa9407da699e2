//! The `classify`, `eigenbasis`, `expand` and `verify` pipelines.

use serde_json::{Map, Value};

use rayzero::catalog::{family_matrix, family_sites};
use rayzero::expansion::{resolvent_expansion, ExpansionError};
use rayzero::free::FreeModel;
use rayzero::graph::{GraphWithRays, RayFunction, Site};
use rayzero::oracle::{expansion_residual_report, identity_suite, SLOPE_THRESHOLD};
use rayzero::perturbation::{factor_dense, joining_perturbation, FactoredPerturbation};
use rayzero::scalar::{RankTol, Rational, Scalar};
use rayzero::threshold::{eigenspaces, projections, ThresholdReport};

use crate::config::{Backend, PerturbationSpec, RunConfig};
use crate::report::{emit_matrix, emit_vec, Emit, Report};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Command {
    Classify,
    Eigenbasis,
    Expand,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Eigenbasis => "eigenbasis",
            Command::Expand => "expand",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    /// The configuration describes an invalid operator.
    #[error("invalid input: {0}")]
    Input(String),
    /// The computation itself failed.
    #[error("computation failed: {0}")]
    Compute(String),
}

fn compute(e: impl std::fmt::Display) -> RunError {
    RunError::Compute(e.to_string())
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Report, RunError> {
    match cfg.backend {
        Backend::Rational => run_with::<Rational>(command, cfg, RankTol::default()),
        Backend::Float { rank_tol } => run_with::<f64>(command, cfg, RankTol(rank_tol)),
    }
}

/// Free model and factored perturbation described by the config.
pub fn build<S: Scalar>(cfg: &RunConfig, tol: RankTol) -> Result<(FreeModel<S>, FactoredPerturbation<S>), RunError> {
    let g = &cfg.graph;
    let input = |e: &dyn std::fmt::Display| RunError::Input(e.to_string());
    let model = FreeModel::with_options(g, cfg.free_choice, cfg.engine.kernel_cap, tol).map_err(|e| input(&e))?;
    let v = match &cfg.perturbation {
        PerturbationSpec::Factored { columns, u } => {
            let cols = columns
                .iter()
                .map(|c| {
                    let values: Vec<(Site, S)> = c.iter().map(|(s, x)| (*s, S::from_rational(x))).collect();
                    RayFunction::from_sites(g, &values)
                })
                .collect();
            FactoredPerturbation::build(g, cols, u.map(S::from_rational), tol).map_err(|e| input(&e))?
        }
        PerturbationSpec::Dense { sites, matrix } => {
            factor_dense(g, sites, &matrix.map(S::from_rational), tol).map_err(|e| input(&e))?
        }
        PerturbationSpec::Family { e, tau } => {
            let m = family_matrix(&S::from_rational(e), &S::from_rational(tau));
            factor_dense(g, &family_sites(), &m, tol).map_err(|e| input(&e))?
        }
        PerturbationSpec::Joining => joining_perturbation(g),
        PerturbationSpec::None => FactoredPerturbation::zero(),
    };
    Ok((model, v))
}

fn backend_json(b: Backend) -> Value {
    match b {
        Backend::Rational => serde_json::json!({ "kind": "rational" }),
        Backend::Float { rank_tol } => serde_json::json!({ "kind": "float", "rank_tol": rank_tol }),
    }
}

fn graph_json(g: &GraphWithRays) -> Value {
    let name = |x: usize| g.vertices()[x].clone();
    serde_json::json!({
        "vertices": g.vertices(),
        "edges": g.edges().iter().map(|&(a, b)| [name(a), name(b)]).collect::<Vec<_>>(),
        "joints": g.joints().iter().map(|&x| name(x)).collect::<Vec<_>>(),
    })
}

/// Samples on `sites` plus the tail polynomial of every ray, lowest degree first.
fn function_json<S: Scalar + Emit>(f: &RayFunction<S>, sites: &[Site], tail_cap: usize) -> Result<Value, RunError> {
    let values: Vec<S> = sites.iter().map(|&s| f.eval(s)).collect();
    let mut tails = Vec::new();
    for (ray, part) in f.rays().iter().enumerate() {
        if part.tail().len() > tail_cap + 1 {
            return Err(RunError::Compute(format!(
                "ray {} tail has degree {} above the cap {tail_cap}",
                ray + 1,
                part.tail().len() - 1
            )));
        }
        tails.push(emit_vec(part.tail()));
    }
    Ok(serde_json::json!({ "values": emit_vec(&values), "tails": tails }))
}

fn dims_json<S: Scalar>(g: &GraphWithRays, r: &ThresholdReport<S>) -> Value {
    serde_json::json!({
        "rays": g.ray_count(),
        "bound": r.dim_bound(),
        "resonance_mod_bound": r.dim_resonance(),
        "nonresonance_mod_resonance": r.dim_nonresonance(),
    })
}

fn run_with<S: Scalar + Emit>(command: Command, cfg: &RunConfig, tol: RankTol) -> Result<Report, RunError> {
    let (model, v) = build::<S>(cfg, tol)?;
    let g = model.graph();
    let sites = g.nearest_sites(cfg.engine.window);
    let labels: Vec<String> = sites.iter().map(|&s| g.site_label(s)).collect();

    let mut rep = Report::default();
    rep.set("command", command.name());
    rep.set("backend", backend_json(cfg.backend));
    rep.set("graph", graph_json(g));
    rep.set(
        "perturbation",
        serde_json::json!({ "mode": cfg.perturbation.mode(), "rank": v.dim(), "support_radius": v.support_radius() }),
    );
    rep.line(format!("{} on {g}", command.name()));
    rep.line(format!("perturbation: {} (rank {}, support radius {})", cfg.perturbation.mode(), v.dim(), v.support_radius()));
    match cfg.backend {
        Backend::Rational => rep.line("backend: rational (exact)"),
        Backend::Float { rank_tol } => rep.line(format!("backend: float, rank_tol {rank_tol:e}")),
    }
    if let Some(note) = &cfg.backend_note {
        rep.set("backend_note", note.clone());
        rep.line(note.clone());
    }

    let report = eigenspaces(&model, &v).map_err(compute)?;
    rep.set("classification", report.kind.name());
    rep.set("dimensions", dims_json(g, &report));
    rep.set("m0", emit_matrix(&report.ops.big_m0));
    rep.line(format!("classification: {}", report.kind));
    rep.line(format!(
        "dim 𝖤 = {}, dim ℰ/𝖤 = {}, dim Ẽ/ℰ = {}, N = {}",
        report.dim_bound(),
        report.dim_resonance(),
        report.dim_nonresonance(),
        g.ray_count()
    ));
    rep.check(
        "dim Ẽ/ℰ + dim ℰ/𝖤 = N",
        report.dim_nonresonance() + report.dim_resonance() == g.ray_count(),
        "",
    );
    if command == Command::Classify {
        return Ok(rep);
    }

    rep.set("window", labels.clone());
    let tail_cap = cfg.engine.tail_cap;
    let mut bases = Map::new();
    for (name, funcs) in [
        ("bound", report.bound.clone()),
        ("resonance", report.resonance.clone()),
        ("nonresonance", report.nonresonance.iter().chain(&report.kernel_v).cloned().collect()),
    ] {
        let list = funcs.iter().map(|f| function_json(f, &sites, tail_cap)).collect::<Result<Vec<_>, _>>()?;
        bases.insert(name.into(), Value::Array(list));
    }
    rep.set("bases", Value::Object(bases));
    if command == Command::Eigenbasis {
        return Ok(rep);
    }

    let expansion = resolvent_expansion(&model, &v).map_err(|e| match e {
        ExpansionError::KernelCapTooSmall { .. } => RunError::Input(e.to_string()),
        other => compute(other),
    })?;
    let mut kernels = Map::new();
    for j in -2..=1 {
        let op = expansion.coefficient(j).map_err(compute)?;
        let m = op.to_matrix(&model, &sites, &sites).map_err(compute)?;
        kernels.insert(format!("G_{j}"), emit_matrix(&m));
    }
    rep.set("kernels", Value::Object(kernels));
    rep.line(format!("kernel tables G₋₂ … G₁ on {} sites", sites.len()));
    if command == Command::Expand {
        return Ok(rep);
    }

    let proj = projections(&model, &v, &report).map_err(compute)?;
    for c in identity_suite(&model, &v, &expansion, &report, &proj, &sites) {
        rep.check(c.name, c.passed, c.detail);
    }
    let e = &cfg.engine;
    let residuals = expansion_residual_report(&model, &v, &expansion, &e.kappas, &sites, e.cutoff_const, &[-2, -1, 0, 1])
        .map_err(compute)?;
    let entries: Vec<Value> = residuals
        .entries
        .iter()
        .map(|r| {
            serde_json::json!({
                "x": g.site_label(r.x),
                "y": g.site_label(r.y),
                "residuals": r.residuals,
                "slope": r.slope,
                "flagged": r.flagged,
            })
        })
        .collect();
    rep.set(
        "residuals",
        serde_json::json!({
            "kappas": residuals.kappas,
            "cutoff_const": e.cutoff_const,
            "orders": residuals.orders,
            "min_slope": residuals.min_slope(),
            "flagged": residuals.flagged(),
            "entries": entries,
        }),
    );
    let min = residuals.min_slope().map_or("none".to_string(), |s| format!("{s:.3}"));
    rep.check(
        format!("residual slope ≥ {SLOPE_THRESHOLD}"),
        residuals.flagged() == 0,
        format!("min slope {min}, {} of {} entries flagged", residuals.flagged(), residuals.entries.len()),
    );
    Ok(rep)
}
