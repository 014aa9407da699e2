//! Run configuration: a JSON document with exact `"p/q"` literals.
//!
//! ```json
//! {
//!   "graph": { "vertices": ["o"], "edges": [], "joints": ["o", "o", "o"] },
//!   "perturbation": { "joining": {} },
//!   "backend": { "kind": "rational" },
//!   "engine": { "window": 6, "kappas": [0.4, 0.2, 0.1, 0.05] },
//!   "output": { "report": "out/report.json", "summary": "out/summary.txt" }
//! }
//! ```
//!
//! Exactly one perturbation mode must be present. Unknown fields anywhere
//! are rejected.

use std::collections::BTreeMap;

use serde::Deserialize;

use rayzero::free::{FreeChoice, DEFAULT_KERNEL_CAP};
use rayzero::graph::{GraphError, GraphWithRays, Site};
use rayzero::linalg::Matrix;
use rayzero::oracle::{DEFAULT_CUTOFF_CONST, DEFAULT_KAPPAS};
use rayzero::scalar::{parse_rational, Rational};

pub const DEFAULT_RANK_TOL: f64 = 1e-9;
pub const DEFAULT_TAIL_CAP: usize = 6;
pub const DEFAULT_WINDOW: usize = 6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("unknown field: {0}")]
    UnknownField(String),
    #[error("invalid fraction `{0}`")]
    InvalidFraction(String),
    #[error("expected exactly one perturbation mode, found {0:?}")]
    PerturbationModes(Vec<&'static str>),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    graph: Option<GraphBlock>,
    perturbation: PerturbationBlock,
    #[serde(default)]
    backend: BackendBlock,
    #[serde(default)]
    engine: EngineBlock,
    #[serde(default)]
    output: OutputBlock,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphBlock {
    vertices: Vec<String>,
    #[serde(default)]
    edges: Vec<[String; 2]>,
    joints: Vec<String>,
    #[serde(default)]
    free_operator: FreeOperator,
}

#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum FreeOperator {
    #[default]
    Dirichlet,
    TwiceIdentity,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PerturbationBlock {
    factored: Option<FactoredBlock>,
    dense: Option<DenseBlock>,
    joining: Option<Empty>,
    family: Option<FamilyBlock>,
    none: Option<Empty>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Empty {}

/// Columns map site labels (`"k:<vertex>"`, `"r<ray>:<pos>"`) to values.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactoredBlock {
    columns: Vec<BTreeMap<String, String>>,
    u: Vec<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DenseBlock {
    sites: Vec<String>,
    matrix: Vec<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyBlock {
    e: String,
    tau: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BackendBlock {
    #[serde(default)]
    kind: BackendKind,
    rank_tol: Option<f64>,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Rational,
    Float,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EngineBlock {
    kernel_cap: Option<usize>,
    tail_cap: Option<usize>,
    cutoff_const: Option<f64>,
    kappas: Option<Vec<f64>>,
    window: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputBlock {
    report: Option<String>,
    summary: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PerturbationSpec {
    Factored { columns: Vec<Vec<(Site, Rational)>>, u: Matrix<Rational> },
    Dense { sites: Vec<Site>, matrix: Matrix<Rational> },
    Joining,
    Family { e: Rational, tau: Rational },
    None,
}

impl PerturbationSpec {
    pub fn mode(&self) -> &'static str {
        match self {
            PerturbationSpec::Factored { .. } => "factored",
            PerturbationSpec::Dense { .. } => "dense",
            PerturbationSpec::Joining => "joining",
            PerturbationSpec::Family { .. } => "family",
            PerturbationSpec::None => "none",
        }
    }

    /// Modes whose factorization needs square roots of eigenvalues.
    pub fn needs_float(&self) -> bool {
        matches!(self, PerturbationSpec::Dense { .. } | PerturbationSpec::Family { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Backend {
    Rational,
    Float { rank_tol: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineOptions {
    pub kernel_cap: usize,
    pub tail_cap: usize,
    pub cutoff_const: f64,
    pub kappas: Vec<f64>,
    /// Number of sites, nearest to `K` first, in every sampled table.
    pub window: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            kernel_cap: DEFAULT_KERNEL_CAP,
            tail_cap: DEFAULT_TAIL_CAP,
            cutoff_const: DEFAULT_CUTOFF_CONST,
            kappas: DEFAULT_KAPPAS.to_vec(),
            window: DEFAULT_WINDOW,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OutputPaths {
    pub report: Option<String>,
    pub summary: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub graph: GraphWithRays,
    pub free_choice: FreeChoice,
    pub perturbation: PerturbationSpec,
    pub backend: Backend,
    /// Set when the perturbation mode overrode a rational backend request.
    pub backend_note: Option<String>,
    pub engine: EngineOptions,
    pub output: OutputPaths,
}

/// Command-line overrides, applied after parsing and before validation.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub backend: Option<BackendKind>,
    pub rank_tol: Option<f64>,
    pub kernel_cap: Option<usize>,
    pub window: Option<usize>,
    pub kappas: Option<Vec<f64>>,
    pub cutoff_const: Option<f64>,
}

fn fraction(text: &str) -> Result<Rational, ConfigError> {
    parse_rational(text).map_err(|_| ConfigError::InvalidFraction(text.to_string()))
}

fn square(rows: &[Vec<String>], n: usize, what: &str) -> Result<Matrix<Rational>, ConfigError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(ConfigError::Invalid(format!("{what} must be {n}x{n}")));
    }
    let parsed = rows.iter().map(|r| r.iter().map(|x| fraction(x)).collect()).collect::<Result<Vec<Vec<_>>, _>>()?;
    Ok(Matrix::from_rows(parsed))
}

fn classify_serde_error(e: serde_json::Error) -> ConfigError {
    let msg = e.to_string();
    match msg.strip_prefix("unknown field ") {
        Some(rest) => ConfigError::UnknownField(rest.to_string()),
        None => ConfigError::Parse(msg),
    }
}

pub fn parse_config(document: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with(document, &Overrides::default())
}

pub fn parse_config_with(document: &str, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let doc: Document = serde_json::from_str(document).map_err(classify_serde_error)?;
    let p = &doc.perturbation;
    let present: Vec<&'static str> = [
        ("factored", p.factored.is_some()),
        ("dense", p.dense.is_some()),
        ("joining", p.joining.is_some()),
        ("family", p.family.is_some()),
        ("none", p.none.is_some()),
    ]
    .into_iter()
    .filter_map(|(name, on)| on.then_some(name))
    .collect();
    if present.len() != 1 {
        return Err(ConfigError::PerturbationModes(present));
    }

    let (graph, free_choice) = match (&doc.graph, &p.family) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::Invalid("the family mode fixes its own graph; drop the graph block".into()))
        }
        (None, Some(_)) => (GraphWithRays::star(2), FreeChoice::GraphDirichlet),
        (None, None) => return Err(ConfigError::Invalid("missing graph block".into())),
        (Some(g), None) => {
            let edges: Vec<(String, String)> = g.edges.iter().map(|[a, b]| (a.clone(), b.clone())).collect();
            let edges: Vec<(&str, &str)> = edges.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
            let vertices: Vec<&str> = g.vertices.iter().map(String::as_str).collect();
            let joints: Vec<&str> = g.joints.iter().map(String::as_str).collect();
            let choice = match g.free_operator {
                FreeOperator::Dirichlet => FreeChoice::GraphDirichlet,
                FreeOperator::TwiceIdentity => FreeChoice::TwiceIdentity,
            };
            (GraphWithRays::build(&vertices, &edges, &joints)?, choice)
        }
    };

    let perturbation = if let Some(f) = &p.factored {
        let columns = f
            .columns
            .iter()
            .map(|col| {
                col.iter()
                    .map(|(label, value)| Ok((graph.parse_site(label)?, fraction(value)?)))
                    .collect::<Result<Vec<_>, ConfigError>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let u = square(&f.u, columns.len(), "u")?;
        PerturbationSpec::Factored { columns, u }
    } else if let Some(d) = &p.dense {
        let sites = d.sites.iter().map(|s| graph.parse_site(s)).collect::<Result<Vec<_>, _>>()?;
        let matrix = square(&d.matrix, sites.len(), "dense matrix")?;
        PerturbationSpec::Dense { sites, matrix }
    } else if let Some(f) = &p.family {
        PerturbationSpec::Family { e: fraction(&f.e)?, tau: fraction(&f.tau)? }
    } else if p.joining.is_some() {
        PerturbationSpec::Joining
    } else {
        PerturbationSpec::None
    };

    let kind = overrides.backend.unwrap_or(doc.backend.kind);
    let rank_tol = overrides.rank_tol.or(doc.backend.rank_tol).unwrap_or(DEFAULT_RANK_TOL);
    if !(rank_tol > 0.0 && rank_tol < 1.0) {
        return Err(ConfigError::Invalid(format!("rank_tol must lie in (0, 1), got {rank_tol}")));
    }
    let mut backend_note = None;
    let backend = match kind {
        BackendKind::Float => Backend::Float { rank_tol },
        BackendKind::Rational if perturbation.needs_float() => {
            backend_note = Some(format!(
                "float backend forced: the {} mode factors V through square roots of its eigenvalues",
                perturbation.mode()
            ));
            Backend::Float { rank_tol }
        }
        BackendKind::Rational => Backend::Rational,
    };

    let e = &doc.engine;
    let defaults = EngineOptions::default();
    let engine = EngineOptions {
        kernel_cap: overrides.kernel_cap.or(e.kernel_cap).unwrap_or(defaults.kernel_cap),
        tail_cap: e.tail_cap.unwrap_or(defaults.tail_cap),
        cutoff_const: overrides.cutoff_const.or(e.cutoff_const).unwrap_or(defaults.cutoff_const),
        kappas: overrides.kappas.clone().or_else(|| e.kappas.clone()).unwrap_or(defaults.kappas),
        window: overrides.window.or(e.window).unwrap_or(defaults.window),
    };
    if engine.kappas.len() < 2 || engine.kappas.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
        return Err(ConfigError::Invalid("kappas needs at least two positive values".into()));
    }
    if !(engine.cutoff_const > 0.0 && engine.cutoff_const.is_finite()) {
        return Err(ConfigError::Invalid("cutoff_const must be positive".into()));
    }
    if engine.window == 0 {
        return Err(ConfigError::Invalid("window must be at least 1".into()));
    }

    Ok(RunConfig {
        graph,
        free_choice,
        perturbation,
        backend,
        backend_note,
        engine,
        output: OutputPaths { report: doc.output.report.clone(), summary: doc.output.summary.clone() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rayzero::scalar::rat;

    const STAR3: &str = r#"{
        "graph": { "vertices": ["0"], "joints": ["0", "0", "0"] },
        "perturbation": { "joining": {} }
    }"#;

    #[test]
    fn star_config_uses_defaults() {
        let cfg = parse_config(STAR3).unwrap();
        assert_eq!(cfg.graph, GraphWithRays::star(3));
        assert_eq!(cfg.perturbation, PerturbationSpec::Joining);
        assert_eq!(cfg.backend, Backend::Rational);
        assert_eq!(cfg.engine, EngineOptions::default());
    }

    #[test]
    fn family_forces_the_float_backend() {
        let cfg = parse_config(r#"{ "perturbation": { "family": { "e": "2", "tau": "1" } } }"#).unwrap();
        assert_eq!(cfg.backend, Backend::Float { rank_tol: DEFAULT_RANK_TOL });
        assert!(cfg.backend_note.is_some());
        assert_eq!(cfg.perturbation, PerturbationSpec::Family { e: rat(2, 1), tau: rat(1, 1) });
    }

    #[test]
    fn two_modes_conflict() {
        let doc = r#"{
            "graph": { "vertices": ["o"], "joints": ["o"] },
            "perturbation": {
                "dense": { "sites": ["k:o"], "matrix": [["1"]] },
                "factored": { "columns": [{ "k:o": "1" }], "u": [["1"]] }
            }
        }"#;
        assert_eq!(parse_config(doc), Err(ConfigError::PerturbationModes(vec!["factored", "dense"])));
    }

    #[test]
    fn unknown_fields_and_bad_fractions_are_rejected() {
        let doc = STAR3.replace("\"joints\"", "\"colour\": 1, \"joints\"");
        assert!(matches!(parse_config(&doc), Err(ConfigError::UnknownField(f)) if f.contains("colour")));
        let doc = r#"{
            "graph": { "vertices": ["o"], "joints": ["o"] },
            "perturbation": { "factored": { "columns": [{ "r1:1": "1/0" }], "u": [["1"]] } }
        }"#;
        assert_eq!(parse_config(doc), Err(ConfigError::InvalidFraction("1/0".into())));
    }

    #[test]
    fn factored_columns_are_exact() {
        let doc = r#"{
            "graph": { "vertices": ["a", "b"], "edges": [["a", "b"]], "joints": ["a", "b"] },
            "perturbation": { "factored": { "columns": [{ "k:a": "-1/3", "r2:4": "7" }], "u": [["-1"]] } },
            "backend": { "kind": "rational" }
        }"#;
        let cfg = parse_config(doc).unwrap();
        let PerturbationSpec::Factored { columns, u } = cfg.perturbation else { panic!("mode") };
        assert_eq!(columns[0], vec![(Site::K(0), rat(-1, 3)), (Site::Ray { ray: 1, pos: 4 }, rat(7, 1))]);
        assert_eq!(u, Matrix::from_rows(vec![vec![rat(-1, 1)]]));
    }

    #[test]
    fn overrides_win_over_the_document() {
        let o = Overrides { backend: Some(BackendKind::Float), window: Some(9), ..Default::default() };
        let cfg = parse_config_with(STAR3, &o).unwrap();
        assert_eq!(cfg.backend, Backend::Float { rank_tol: DEFAULT_RANK_TOL });
        assert_eq!(cfg.engine.window, 9);
    }
}
