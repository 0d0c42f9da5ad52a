//! Scenario files: TOML, or JSON when the file ends in `.json`.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use covdyn::constitutive::{
    from_lagrangian, ConstitutiveDensity, DirichletLagrangian, IncompatibleSvk, Lagrangian, LoadingDensity,
    ReferenceMetric, ZeroLagrangian,
};
use covdyn::dynamics::TimeScheme;
use covdyn::geometry::SpaceChart;
use covdyn::grid::{BodyGrid, Face};
use covdyn::kinematics::Configuration;
use nalgebra::DMatrix;
use serde::Deserialize;

use crate::expr::Expr;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    manifold: RawManifold,
    body: Option<RawBody>,
    material: Option<RawMaterial>,
    loading: Option<RawLoading>,
    initial: Option<RawInitial>,
    time: Option<RawTime>,
    linearize: Option<RawLinearize>,
    equilibrium: Option<RawEquilibrium>,
    geodesic: Option<RawGeodesic>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifold {
    name: String,
    dim: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBody {
    dim: usize,
    points: usize,
    density: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMaterial {
    lagrangian: String,
    lambda: Option<f64>,
    mu: Option<f64>,
    reference_metric: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLoading {
    body: Option<Vec<String>>,
    surface: Option<Vec<String>>,
    #[serde(default)]
    clamped: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    position: Vec<String>,
    velocity: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    dt: f64,
    steps: Option<usize>,
    duration: Option<f64>,
    scheme: Option<String>,
    output_every: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLinearize {
    motion: Option<Vec<String>>,
    displacement: Option<Vec<String>>,
    dt: Option<f64>,
    slices: Option<usize>,
    slice: Option<usize>,
    eps: Option<f64>,
    at_equilibrium: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEquilibrium {
    iterations: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeodesic {
    position: Vec<f64>,
    velocity: Vec<f64>,
    duration: Option<f64>,
    steps: Option<usize>,
}

/// A problem with one field of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Syntax { path: String, message: String },
    #[error("{}", format_invalid(.0))]
    Invalid(Vec<FieldError>),
}

fn format_invalid(errors: &[FieldError]) -> String {
    let lines: Vec<String> = errors.iter().map(|e| format!("  {e}")).collect();
    format!("invalid scenario ({} errors):\n{}", errors.len(), lines.join("\n"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaterialKind {
    Zero,
    Dirichlet,
    Svk,
}

#[derive(Debug, Clone)]
pub struct BodySpec {
    pub dim: usize,
    pub points: usize,
    pub density: Expr,
}

#[derive(Debug, Clone)]
pub struct MaterialSpec {
    pub kind: MaterialKind,
    pub lambda: f64,
    pub mu: f64,
    /// Row-major `d×d` expressions; Euclidean when absent.
    pub reference_metric: Option<Vec<Expr>>,
}

#[derive(Debug, Clone, Default)]
pub struct LoadingSpec {
    pub body: Option<Vec<Expr>>,
    pub surface: Option<Vec<Expr>>,
    pub clamped: Vec<Face>,
}

#[derive(Debug, Clone)]
pub struct InitialSpec {
    pub position: Vec<Expr>,
    pub velocity: Option<Vec<Expr>>,
}

#[derive(Debug, Clone)]
pub struct TimeSpec {
    pub dt: f64,
    pub steps: usize,
    pub scheme: TimeScheme,
    pub output_every: usize,
}

#[derive(Debug, Clone)]
pub struct LinearizeSpec {
    /// `κ(t, x)`; the stationary motion at the initial position when absent.
    pub motion: Option<Vec<Expr>>,
    /// `w(t, x)`; a seeded random smooth field when absent.
    pub displacement: Option<Vec<Expr>>,
    pub dt: f64,
    pub slices: usize,
    pub slice: usize,
    pub eps: f64,
    pub at_equilibrium: bool,
}

#[derive(Debug, Clone)]
pub struct GeodesicSpec {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub duration: f64,
    pub steps: usize,
}

/// A fully validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub manifold: String,
    pub chart: SpaceChart,
    pub body: Option<BodySpec>,
    pub material: Option<MaterialSpec>,
    pub loading: LoadingSpec,
    pub initial: Option<InitialSpec>,
    pub time: Option<TimeSpec>,
    pub linearize: LinearizeSpec,
    pub newton_iterations: usize,
    pub geodesic: Option<GeodesicSpec>,
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: display.clone(),
        source,
    })?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let raw: RawScenario = if json {
        serde_json::from_str(&text).map_err(|e| ScenarioError::Syntax {
            path: display.clone(),
            message: e.to_string(),
        })?
    } else {
        toml::from_str(&text).map_err(|e| ScenarioError::Syntax {
            path: display.clone(),
            message: toml_message(&text, &e),
        })?
    };
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    validate(raw, stem.unwrap_or_else(|| "scenario".into()))
}

pub fn parse_scenario_str(text: &str, json: bool) -> Result<Scenario, ScenarioError> {
    let raw: RawScenario = if json {
        serde_json::from_str(text).map_err(|e| ScenarioError::Syntax {
            path: "<input>".into(),
            message: e.to_string(),
        })?
    } else {
        toml::from_str(text).map_err(|e| ScenarioError::Syntax {
            path: "<input>".into(),
            message: toml_message(text, &e),
        })?
    };
    validate(raw, "scenario".into())
}

/// The error message prefixed with a one-based line and column.
fn toml_message(text: &str, e: &toml::de::Error) -> String {
    let msg = e.message().to_string();
    match e.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            format!("line {line}, column {column}: {msg}")
        }
        None => msg,
    }
}

struct Validator {
    errors: Vec<FieldError>,
}

impl Validator {
    fn error(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.errors.push(FieldError {
            field: field.into(),
            message: message.into(),
        });
    }

    /// Parses expressions, checking the coordinates they use and whether
    /// they may depend on time.
    fn exprs(&mut self, field: &str, src: &[String], d: Option<usize>, time: bool) -> Option<Vec<Expr>> {
        let mut out = Vec::with_capacity(src.len());
        let mut ok = true;
        for (k, s) in src.iter().enumerate() {
            let name = format!("{field}[{k}]");
            match s.parse::<Expr>() {
                Ok(e) => {
                    if let Some(d) = d {
                        if e.max_coordinate() > d {
                            self.error(
                                &name,
                                format!("uses x{} but the body has dimension {d}", e.max_coordinate()),
                            );
                            ok = false;
                        }
                    }
                    if !time && e.uses_time() {
                        self.error(&name, "may not depend on t");
                        ok = false;
                    }
                    out.push(e);
                }
                Err(e) => {
                    self.error(&name, format!("'{s}': {e}"));
                    ok = false;
                }
            }
        }
        ok.then_some(out)
    }

    fn vector(&mut self, field: &str, src: &[String], m: usize, d: Option<usize>, time: bool) -> Option<Vec<Expr>> {
        if src.len() != m {
            self.error(
                field,
                format!("expected {m} components (space dimension), got {}", src.len()),
            );
            return None;
        }
        self.exprs(field, src, d, time)
    }
}

fn validate(raw: RawScenario, default_name: String) -> Result<Scenario, ScenarioError> {
    let mut v = Validator { errors: Vec::new() };

    let catalog = match (raw.manifold.name.trim(), raw.manifold.dim) {
        ("euclidean", Some(m)) => format!("euclidean:{m}"),
        (name, _) => name.to_string(),
    };
    let chart = match SpaceChart::from_catalog(&catalog) {
        Ok(c) => Some(c),
        Err(_) => {
            v.error(
                "manifold.name",
                format!(
                    "unknown manifold '{}' (expected euclidean, sphere or half-plane)",
                    raw.manifold.name
                ),
            );
            None
        }
    };
    let m = chart.as_ref().map(|c| c.dim());

    let body = raw.body.and_then(|b| {
        let mut ok = true;
        if !(1..=2).contains(&b.dim) {
            v.error(
                "body.dim",
                format!("unsupported body dimension {} (expected 1 or 2)", b.dim),
            );
            ok = false;
        }
        if b.points < 5 {
            v.error(
                "body.points",
                format!("need at least 5 points per axis, got {}", b.points),
            );
            ok = false;
        }
        if let Some(m) = m {
            if b.dim > m {
                v.error(
                    "body.dim",
                    format!("body dimension {} exceeds space dimension {m}", b.dim),
                );
                ok = false;
            }
        }
        let src = b.density.unwrap_or_else(|| "1".into());
        let density = v.exprs("body.density", &[src], Some(b.dim), false);
        (ok && density.is_some()).then(|| BodySpec {
            dim: b.dim,
            points: b.points,
            density: density.expect("checked").remove(0),
        })
    });
    let d = body.as_ref().map(|b| b.dim);

    let material = raw.material.and_then(|mat| {
        let kind = match mat.lagrangian.trim() {
            "zero" => MaterialKind::Zero,
            "dirichlet" => MaterialKind::Dirichlet,
            "svk" | "svk-incompatible" => MaterialKind::Svk,
            other => {
                v.error(
                    "material.lagrangian",
                    format!("unknown lagrangian '{other}' (expected zero, dirichlet or svk)"),
                );
                return None;
            }
        };
        if kind != MaterialKind::Svk && (mat.lambda.is_some() || mat.mu.is_some() || mat.reference_metric.is_some()) {
            v.error("material", "lambda, mu and reference_metric apply only to svk");
        }
        let (lambda, mu) = (mat.lambda.unwrap_or(0.0), mat.mu.unwrap_or(1.0));
        if !(mu > 0.0 && lambda.is_finite()) {
            v.error("material.mu", format!("need mu > 0, got {mu}"));
        }
        let reference_metric = match (mat.reference_metric, d) {
            (Some(rows), Some(d)) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    v.error("material.reference_metric", format!("expected a {d}x{d} matrix"));
                    None
                } else {
                    let flat: Vec<String> = rows.into_iter().flatten().collect();
                    let parsed = v.exprs("material.reference_metric", &flat, Some(d), false);
                    if let Some(e) = &parsed {
                        let asym = (0..d).any(|a| (0..a).any(|b| e[a * d + b].source() != e[b * d + a].source()));
                        if asym {
                            v.error("material.reference_metric", "matrix must be symmetric");
                        }
                    }
                    parsed
                }
            }
            _ => None,
        };
        Some(MaterialSpec {
            kind,
            lambda,
            mu,
            reference_metric,
        })
    });

    let raw_loading = raw.loading.unwrap_or_default();
    let mut loading = LoadingSpec::default();
    if let Some(m) = m {
        loading.body = raw_loading.body.and_then(|b| v.vector("loading.body", &b, m, d, false));
        loading.surface = raw_loading
            .surface
            .and_then(|s| v.vector("loading.surface", &s, m, d, false));
    }
    for (k, label) in raw_loading.clamped.iter().enumerate() {
        match Face::parse(label) {
            Some(f) if d.is_none_or(|d| f.axis < d) => loading.clamped.push(f),
            _ => v.error(
                format!("loading.clamped[{k}]"),
                format!("'{label}' is not a face label such as x1- or x2+"),
            ),
        }
    }

    let initial = match (raw.initial, m) {
        (Some(init), Some(m)) => {
            let position = v.vector("initial.position", &init.position, m, d, false);
            let velocity = init.velocity.map(|vel| v.vector("initial.velocity", &vel, m, d, false));
            match (position, velocity) {
                (Some(position), None) => Some(InitialSpec {
                    position,
                    velocity: None,
                }),
                (Some(position), Some(Some(vel))) => Some(InitialSpec {
                    position,
                    velocity: Some(vel),
                }),
                _ => None,
            }
        }
        _ => None,
    };

    let time = raw.time.and_then(|t| {
        if !(t.dt > 0.0 && t.dt.is_finite()) {
            v.error("time.dt", format!("must be positive, got {}", t.dt));
            return None;
        }
        let steps = match (t.steps, t.duration) {
            (Some(s), None) => s,
            (None, Some(d)) if d > 0.0 => (d / t.dt).round() as usize,
            (None, Some(d)) => {
                v.error("time.duration", format!("must be positive, got {d}"));
                return None;
            }
            (Some(_), Some(_)) => {
                v.error("time", "give either steps or duration, not both");
                return None;
            }
            (None, None) => {
                v.error("time", "missing steps or duration");
                return None;
            }
        };
        let scheme = match t.scheme.as_deref().map(str::trim) {
            None | Some("rk4") => TimeScheme::Rk4,
            Some("leapfrog") => TimeScheme::Leapfrog,
            Some(other) => {
                v.error(
                    "time.scheme",
                    format!("unknown scheme '{other}' (expected rk4 or leapfrog)"),
                );
                return None;
            }
        };
        Some(TimeSpec {
            dt: t.dt,
            steps: steps.max(1),
            scheme,
            output_every: t.output_every.unwrap_or(1).max(1),
        })
    });

    let lin = raw.linearize.unwrap_or_default();
    let slices = lin.slices.unwrap_or(7);
    if slices < 5 {
        v.error("linearize.slices", format!("need at least 5 time slices, got {slices}"));
    }
    let slice = lin.slice.unwrap_or(slices / 2);
    if slice >= slices {
        v.error("linearize.slice", format!("slice {slice} outside 0..{slices}"));
    }
    let lin_dt = lin.dt.unwrap_or(1e-2);
    if lin_dt <= 0.0 {
        v.error("linearize.dt", format!("must be positive, got {lin_dt}"));
    }
    let eps = lin.eps.unwrap_or(0.2);
    if eps <= 0.0 {
        v.error("linearize.eps", format!("must be positive, got {eps}"));
    }
    let (lin_motion, lin_w) = match m {
        Some(m) => (
            lin.motion.and_then(|e| v.vector("linearize.motion", &e, m, d, true)),
            lin.displacement
                .and_then(|e| v.vector("linearize.displacement", &e, m, d, true)),
        ),
        None => (None, None),
    };

    let newton_iterations = raw.equilibrium.unwrap_or_default().iterations.unwrap_or(5);

    let geodesic = raw.geodesic.and_then(|g| {
        let m = m?;
        if g.position.len() != m || g.velocity.len() != m {
            v.error("geodesic", format!("position and velocity need {m} components"));
            return None;
        }
        if let Some(chart) = &chart {
            if !chart.contains(&g.position) {
                v.error("geodesic.position", format!("{:?} lies outside the chart", g.position));
                return None;
            }
        }
        let duration = g.duration.unwrap_or(1.0);
        if duration <= 0.0 {
            v.error("geodesic.duration", format!("must be positive, got {duration}"));
            return None;
        }
        Some(GeodesicSpec {
            position: g.position,
            velocity: g.velocity,
            duration,
            steps: g.steps.unwrap_or(1000).max(1),
        })
    });

    if !v.errors.is_empty() {
        return Err(ScenarioError::Invalid(v.errors));
    }
    Ok(Scenario {
        name: raw.name.unwrap_or(default_name),
        manifold: catalog,
        chart: chart.expect("validated"),
        body,
        material,
        loading,
        initial,
        time,
        linearize: LinearizeSpec {
            motion: lin_motion,
            displacement: lin_w,
            dt: lin_dt,
            slices,
            slice,
            eps,
            at_equilibrium: lin.at_equilibrium.unwrap_or(false),
        },
        newton_iterations,
        geodesic,
    })
}

/// Sections a run mode needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Needs {
    Body,
    Time,
    Geodesic,
}

impl Scenario {
    /// Checks that the sections a mode needs are present.
    pub fn require(&self, needs: &[Needs]) -> Result<(), ScenarioError> {
        let mut errors = Vec::new();
        let mut missing = |field: &str| {
            errors.push(FieldError {
                field: field.into(),
                message: "missing section".into(),
            })
        };
        for n in needs {
            match n {
                Needs::Body => {
                    if self.body.is_none() {
                        missing("body");
                    }
                    if self.material.is_none() {
                        missing("material");
                    }
                    if self.initial.is_none() {
                        missing("initial");
                    }
                }
                Needs::Time if self.time.is_none() => missing("time"),
                Needs::Geodesic if self.geodesic.is_none() => missing("geodesic"),
                _ => {}
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(errors))
        }
    }

    fn body_spec(&self) -> &BodySpec {
        self.body.as_ref().expect("body section required")
    }

    /// The body grid at `points` per axis, with the scenario's density.
    pub fn grid_with(&self, points: usize) -> covdyn::Result<BodyGrid> {
        let b = self.body_spec();
        let rho = b.density.clone();
        BodyGrid::new(b.dim, points)?.with_density(move |x| rho.eval(0.0, x))
    }

    pub fn grid(&self) -> covdyn::Result<BodyGrid> {
        self.grid_with(self.body_spec().points)
    }

    pub fn lagrangian(&self) -> Arc<dyn Lagrangian> {
        let mat = self.material.as_ref().expect("material section required");
        let d = self.body_spec().dim;
        match mat.kind {
            MaterialKind::Zero => Arc::new(ZeroLagrangian::new(d, self.chart.dim())),
            MaterialKind::Dirichlet => Arc::new(DirichletLagrangian::new(self.chart.clone(), d)),
            MaterialKind::Svk => {
                let reference = match &mat.reference_metric {
                    Some(e) => {
                        let e = e.clone();
                        ReferenceMetric::from_fn(d, move |x| DMatrix::from_fn(d, d, |a, b| e[a * d + b].eval(0.0, x)))
                    }
                    None => ReferenceMetric::euclidean(d),
                };
                Arc::new(IncompatibleSvk::new(self.chart.clone(), reference).with_moduli(mat.lambda, mat.mu))
            }
        }
    }

    pub fn density(&self, grid: &BodyGrid) -> Arc<dyn ConstitutiveDensity> {
        Arc::new(from_lagrangian(self.lagrangian(), grid))
    }

    pub fn load(&self) -> LoadingDensity {
        let mut load = LoadingDensity::zero();
        if let Some(b) = self.loading.body.clone() {
            load = load.with_body(move |x, _| b.iter().map(|e| e.eval(0.0, x)).collect());
        }
        if let Some(s) = self.loading.surface.clone() {
            load = load.with_surface(move |x, _| s.iter().map(|e| e.eval(0.0, x)).collect());
        }
        load
    }

    pub fn initial_configuration(&self, grid: &BodyGrid) -> covdyn::Result<Configuration> {
        let pos = &self.initial.as_ref().expect("initial section required").position;
        Configuration::from_fn(&self.chart, grid.clone(), |x| {
            pos.iter().map(|e| e.eval(0.0, x)).collect()
        })
    }

    pub fn initial_velocity(&self, grid: &BodyGrid) -> Vec<f64> {
        let m = self.chart.dim();
        match &self.initial.as_ref().expect("initial section required").velocity {
            Some(vel) => (0..grid.len())
                .flat_map(|p| {
                    let x = grid.point(p);
                    vel.iter().map(move |e| e.eval(0.0, &x)).collect::<Vec<_>>()
                })
                .collect(),
            None => vec![0.0; grid.len() * m],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[manifold]
name = "euclidean:1"

[body]
dim = 1
points = 33

[material]
lagrangian = "dirichlet"

[initial]
position = ["x"]
"#;

    fn errors(text: &str) -> Vec<FieldError> {
        match parse_scenario_str(text, false) {
            Err(ScenarioError::Invalid(e)) => e,
            other => panic!("expected validation errors, got {other:?}"),
        }
    }

    #[test]
    fn minimal_scenario_parses() {
        let sc = parse_scenario_str(MINIMAL, false).unwrap();
        assert_eq!(sc.manifold, "euclidean:1");
        assert_eq!(sc.body.as_ref().unwrap().points, 33);
        assert_eq!(sc.material.as_ref().unwrap().kind, MaterialKind::Dirichlet);
        assert!(sc.time.is_none());
        let grid = sc.grid().unwrap();
        assert_eq!(grid.len(), 33);
        assert_eq!(sc.initial_configuration(&grid).unwrap().at(32), &[1.0]);
    }

    #[test]
    fn unknown_manifold_names_the_field() {
        let e = errors(&MINIMAL.replace("euclidean:1", "torus"));
        assert_eq!(e[0].field, "manifold.name");
        assert!(e[0].message.contains("torus"));
    }

    #[test]
    fn rejects_three_dimensional_bodies() {
        let e = errors(&MINIMAL.replace("dim = 1", "dim = 3"));
        assert!(e
            .iter()
            .any(|e| e.field == "body.dim" && e.message.contains("unsupported body dimension")));
    }

    #[test]
    fn collects_every_error() {
        let text = MINIMAL
            .replace("euclidean:1", "euclidean:2")
            .replace("\"dirichlet\"", "\"rubber\"")
            .replace("[\"x\"]", "[\"x\", \"tan(x)\"]");
        let e = errors(&text);
        let fields: Vec<&str> = e.iter().map(|e| e.field.as_str()).collect();
        assert_eq!(fields, ["material.lagrangian", "initial.position[1]"]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let e = errors(&MINIMAL.replace("[\"x\"]", "[\"x\", \"0\"]"));
        assert_eq!(e[0].field, "initial.position");
        assert!(e[0].message.contains("expected 1"));
    }

    #[test]
    fn syntax_errors_carry_line_and_column() {
        let err = parse_scenario_str("[manifold]\nname = \n", false).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, ScenarioError::Syntax { .. }));
        assert!(msg.contains("line 2"), "{msg}");
        let err = parse_scenario_str("[manifold]\nname = \"sphere\"\ncolour = 1\n", false).unwrap_err();
        assert!(err.to_string().contains("colour"));
    }

    #[test]
    fn json_is_accepted() {
        let text = r#"{"manifold": {"name": "sphere"},
            "body": {"dim": 1, "points": 9},
            "material": {"lagrangian": "zero"},
            "initial": {"position": ["1 + 0.2*x", "x"]},
            "time": {"dt": 0.01, "duration": 0.1}}"#;
        let sc = parse_scenario_str(text, true).unwrap();
        assert_eq!(sc.chart.dim(), 2);
        assert_eq!(sc.time.unwrap().steps, 10);
    }

    #[test]
    fn euclidean_dimension_may_be_separate() {
        let sc = parse_scenario_str(
            &MINIMAL.replace("name = \"euclidean:1\"", "name = \"euclidean\"\ndim = 1"),
            false,
        )
        .unwrap();
        assert_eq!(sc.manifold, "euclidean:1");
    }

    #[test]
    fn svk_reference_metric_must_be_symmetric() {
        let text = MINIMAL
            .replace("euclidean:1", "euclidean:2")
            .replace("dim = 1", "dim = 2")
            .replace(
                "\"dirichlet\"",
                "\"svk\"\nreference_metric = [[\"1\", \"0.1\"], [\"0\", \"1\"]]",
            )
            .replace("[\"x\"]", "[\"x1\", \"x2\"]");
        let e = errors(&text);
        assert_eq!(e[0].field, "material.reference_metric");
    }

    #[test]
    fn missing_sections_are_named() {
        let sc = parse_scenario_str(MINIMAL, false).unwrap();
        match sc.require(&[Needs::Time, Needs::Geodesic]) {
            Err(ScenarioError::Invalid(e)) => {
                let fields: Vec<&str> = e.iter().map(|e| e.field.as_str()).collect();
                assert_eq!(fields, ["time", "geodesic"]);
            }
            other => panic!("{other:?}"),
        }
    }
}
