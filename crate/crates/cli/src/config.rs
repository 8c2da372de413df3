//! Strict JSON configuration for every subcommand. Unknown keys are errors.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use oscihom::averaging::TripleOptions;
use oscihom::geometry::{ClassifyOptions, Curve, CurveSpec, Orientation, PieceSpec, Point};
use oscihom::oscillatory::{OscillatoryQuadrature, Schedule};
use oscihom::pde::{SlabLimit, DEFAULT_PANELS};

use crate::error::{CliError, Ctx};

/// Environment variable overriding the quadrature node cap.
pub const NODE_CAP_ENV: &str = "OSCIHOM_NODE_CAP";

/// Reads and strictly parses a JSON config, reporting line and column on failure.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: strip_position(&e.to_string()),
    })
}

// serde_json appends " at line L column C"; the position is reported separately.
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

/// A curve by name or as explicit pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveInput {
    Circle {
        center: Point,
        radius: f64,
    },
    /// Flat sides `{±r} x [-1, 1]` capped by half circles of radius `r`.
    Stadium {
        r: f64,
    },
    RotatedSquare {
        origin: Point,
        side: f64,
        angle: f64,
    },
    Segment {
        p0: Point,
        p1: Point,
    },
    Polygon {
        vertices: Vec<Point>,
    },
    Polyline {
        vertices: Vec<Point>,
    },
    Pieces {
        segments: Vec<PieceSpec>,
        #[serde(default)]
        orientation: Orientation,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        modulus: Option<f64>,
    },
}

impl CurveInput {
    pub fn build(&self) -> Result<Curve, CliError> {
        let params = || format!("{self:?}");
        match self {
            CurveInput::Circle { center, radius } => Curve::circle(*center, *radius),
            CurveInput::Stadium { r } => Curve::stadium(*r),
            CurveInput::RotatedSquare { origin, side, angle } => Curve::rotated_square(*origin, *side, *angle),
            CurveInput::Segment { p0, p1 } => Curve::segment(*p0, *p1),
            CurveInput::Polygon { vertices } => Curve::polygon(vertices),
            CurveInput::Polyline { vertices } => Curve::polyline(vertices),
            CurveInput::Pieces { segments, orientation, modulus } => {
                CurveSpec { segments: segments.clone(), orientation: *orientation, modulus: *modulus }.build()
            }
        }
        .ctx("geometry", params)
    }
}

/// Optional overrides of module defaults; any subset may be given.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub height_bound: Option<u64>,
    pub classify_tol: Option<f64>,
    pub promotion_margin: Option<f64>,
    pub phases: Option<usize>,
    pub quad_per_unit: Option<usize>,
    pub cell_grid: Option<usize>,
    pub phase_tol: Option<f64>,
    pub max_loop_evals: Option<u64>,
    pub ppw: Option<usize>,
    pub rtol: Option<f64>,
    pub max_doublings: Option<usize>,
    pub node_cap: Option<u64>,
    pub window: Option<usize>,
    pub tol_conv: Option<f64>,
    pub slack: Option<f64>,
    pub iddc_width: Option<f64>,
    pub weyl_tol: Option<f64>,
    pub panels: Option<usize>,
}

/// Quadrature settings as echoed in `result.json`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadEcho {
    pub ppw: usize,
    pub nodes_per_panel: usize,
    pub h_cap: f64,
    pub rtol: f64,
    pub max_doublings: usize,
    pub node_cap: u64,
}

/// Every tolerance a run may use, after defaults, config and environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resolved {
    pub classify: ClassifyOptions,
    pub triple: TripleOptions,
    pub quadrature: QuadEcho,
    pub window: usize,
    pub tol_conv: f64,
    /// Sandwich slack around the homogenized bounds.
    pub slack: f64,
    /// Required tail-band width for curves satisfying the IDDC, if checked.
    pub iddc_width: Option<f64>,
    pub weyl_tol: f64,
    pub panels: usize,
}

impl Resolved {
    pub fn new(t: Option<&Tolerances>, node_cap_env: Option<&str>) -> Result<Self, CliError> {
        let d = Tolerances::default();
        let t = t.unwrap_or(&d);
        let mut classify = ClassifyOptions::default();
        classify.height_bound = t.height_bound.unwrap_or(classify.height_bound);
        classify.tol = t.classify_tol.unwrap_or(classify.tol);
        classify.promotion_margin = t.promotion_margin.unwrap_or(classify.promotion_margin);
        let mut triple = TripleOptions::default();
        triple.phases = t.phases.unwrap_or(triple.phases);
        triple.quad_per_unit = t.quad_per_unit.unwrap_or(triple.quad_per_unit);
        triple.cell_grid = t.cell_grid.unwrap_or(triple.cell_grid);
        triple.phase_tol = t.phase_tol.unwrap_or(triple.phase_tol);
        triple.max_loop_evals = t.max_loop_evals.unwrap_or(triple.max_loop_evals);
        let mut q = OscillatoryQuadrature::default();
        q.ppw = t.ppw.unwrap_or(q.ppw);
        q.rtol = t.rtol.unwrap_or(q.rtol);
        q.max_doublings = t.max_doublings.unwrap_or(q.max_doublings);
        q.node_cap = t.node_cap.unwrap_or(q.node_cap);
        if let Some(raw) = node_cap_env {
            q.node_cap = raw
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{NODE_CAP_ENV} must be a positive integer, got '{raw}'")))?;
        }
        Ok(Self {
            classify,
            triple,
            quadrature: QuadEcho {
                ppw: q.ppw,
                nodes_per_panel: q.nodes_per_panel,
                h_cap: q.h_cap,
                rtol: q.rtol,
                max_doublings: q.max_doublings,
                node_cap: q.node_cap,
            },
            window: t.window.unwrap_or(oscihom::oscillatory::sweep::DEFAULT_WINDOW),
            tol_conv: t.tol_conv.unwrap_or(oscihom::oscillatory::sweep::DEFAULT_TOL_CONV),
            slack: t.slack.unwrap_or(2e-2),
            iddc_width: t.iddc_width,
            weyl_tol: t.weyl_tol.unwrap_or(5e-3),
            panels: t.panels.unwrap_or(DEFAULT_PANELS),
        })
    }

    pub fn quad(&self) -> OscillatoryQuadrature {
        let e = self.quadrature;
        OscillatoryQuadrature {
            ppw: e.ppw,
            nodes_per_panel: e.nodes_per_panel,
            h_cap: e.h_cap,
            rtol: e.rtol,
            max_doublings: e.max_doublings,
            node_cap: e.node_cap,
        }
    }
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    /// Direction to classify (normalized internally).
    pub v: Vec<f64>,
    /// Height bound `Q`; shorthand for `tolerances.height_bound`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeylConfig {
    pub nu_prime: Vec<f64>,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AverageConfig {
    pub g: String,
    #[serde(default = "two")]
    pub dim: usize,
    /// Anchor point for the slow variable (origin if omitted).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weyl: Option<WeylConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripleConfig {
    pub g: String,
    #[serde(default = "two")]
    pub dim: usize,
    pub z: Vec<f64>,
    pub nu: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub curve: CurveInput,
    pub g: String,
    pub schedule: Schedule,
    /// Turn a non-converged tail band into a failing verdict.
    #[serde(default)]
    pub require_convergence: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub curve: CurveInput,
    pub g: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SandwichConfig {
    pub curve: CurveInput,
    pub g: String,
    pub schedule: Schedule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Disk {
        center: Point,
        radius: f64,
    },
    /// `{-r1 < x . nu < r2}` with data `m` on the lower face.
    Slab {
        nu: [f64; 2],
        r1: f64,
        r2: f64,
        m: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        limit: Option<SlabLimit>,
    },
    Bem {
        curve: CurveInput,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        panels: Option<usize>,
    },
}

/// Boundary value problem with oscillating data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub domain: DomainSpec,
    pub g: String,
    #[serde(default)]
    pub f: Option<String>,
    #[serde(default)]
    pub gamma0: Option<CurveInput>,
    #[serde(default)]
    pub epsilon_schedule: Option<Schedule>,
    pub eval_points: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExamplesConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let ok: Result<ClassifyConfig, _> = serde_json::from_str(r#"{"v":[3,4],"q":10}"#);
        assert!(ok.is_ok());
        let bad: Result<ClassifyConfig, _> = serde_json::from_str(r#"{"v":[3,4],"Q":10}"#);
        assert!(bad.is_err());
        let bad: Result<Tolerances, _> = serde_json::from_str(r#"{"slak":0.1}"#);
        assert!(bad.is_err());
        let bad: Result<CurveInput, _> = serde_json::from_str(r#"{"shape":"circle","center":[0,0],"radius":1,"x":1}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn problem_spec_shape() {
        let p: ProblemConfig = serde_json::from_str(
            r#"{"domain":{"kind":"bem","curve":{"shape":"stadium","r":2}},
                "g":"sin(2*pi*y1)^2","f":null,"gamma0":null,
                "epsilon_schedule":{"kind":"geometric","eps0":0.01,"ratio":0.5,"count":3},
                "eval_points":[[0,0]]}"#,
        )
        .unwrap();
        assert!(matches!(p.domain, DomainSpec::Bem { .. }));
        assert!(p.f.is_none());
    }

    #[test]
    fn environment_overrides_node_cap() {
        let t = Tolerances { node_cap: Some(10), ..Default::default() };
        assert_eq!(Resolved::new(Some(&t), None).unwrap().quadrature.node_cap, 10);
        assert_eq!(Resolved::new(Some(&t), Some("77")).unwrap().quadrature.node_cap, 77);
        assert!(Resolved::new(None, Some("lots")).is_err());
    }

    #[test]
    fn named_curves_build() {
        for src in [
            r#"{"shape":"stadium","r":2}"#,
            r#"{"shape":"rotated_square","origin":[0,0],"side":1,"angle":0.9553166181245093}"#,
            r#"{"shape":"pieces","segments":[{"kind":"line","p0":[0,0],"p1":[1,0]}]}"#,
        ] {
            let c: CurveInput = serde_json::from_str(src).unwrap();
            assert!(c.build().unwrap().length() > 0.0);
        }
    }
}
