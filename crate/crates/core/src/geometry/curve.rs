//! Piecewise-C¹ planar curves: lines, circular arcs and graphs `y = phi(x)`.
//!
//! Every piece is parametrized over `t in [0, 1]`. Normals are obtained by
//! rotating the unit tangent by a quarter turn whose sense is declared per
//! curve (`cw` turns the tangent clockwise, which gives the outward normal of
//! a counter-clockwise boundary).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::direction::{classify_direction, ClassifyOptions, Direction, DirectionClass};
use crate::quadrature::GaussLegendre;

pub type Point = [f64; 2];

const JOIN_TOL: f64 = 1e-12;
const FLAT_TOL: f64 = 1e-12;
const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    #[default]
    Cw,
    Ccw,
}

/// `y = phi(x)` for `x` running from `a` to `b`; `phi` is an expression in `x1`.
#[derive(Debug, Clone)]
pub struct GraphPiece {
    phi: Expr,
    dphi: Option<Expr>,
    pub a: f64,
    pub b: f64,
}

impl GraphPiece {
    pub fn new(phi: &str, dphi: Option<&str>, a: f64, b: f64) -> Result<Self> {
        let phi = Expr::parse(phi, 2)?;
        let dphi = dphi.map(|d| Expr::parse(d, 2)).transpose()?;
        for e in std::iter::once(&phi).chain(dphi.as_ref()) {
            if e.y_mask() != 0 || e.x_mask() & !1 != 0 {
                return Err(Error::InvalidCurve(format!("graph expression '{}' may only use x1", e.source())));
            }
        }
        if !(a.is_finite() && b.is_finite()) || a == b {
            return Err(Error::InvalidCurve("graph interval must be non-degenerate".into()));
        }
        Ok(Self { phi, dphi, a, b })
    }

    pub fn phi(&self, x: f64) -> f64 {
        self.phi.eval(&[x], &[]).unwrap_or(f64::NAN)
    }

    pub fn dphi(&self, x: f64) -> f64 {
        match &self.dphi {
            Some(d) => d.eval(&[x], &[]).unwrap_or(f64::NAN),
            None => (self.phi(x + FD_STEP) - self.phi(x - FD_STEP)) / (2.0 * FD_STEP),
        }
    }

    fn d2phi(&self, x: f64) -> f64 {
        let h = 1e-4;
        (self.dphi(x + h) - self.dphi(x - h)) / (2.0 * h)
    }

    pub fn source(&self) -> &str {
        self.phi.source()
    }

    pub fn derivative_source(&self) -> Option<&str> {
        self.dphi.as_ref().map(|d| d.source())
    }
}

#[derive(Debug, Clone)]
pub enum Piece {
    Line { p0: Point, p1: Point },
    Arc { center: Point, radius: f64, angle0: f64, angle1: f64 },
    Graph(GraphPiece),
}

impl Piece {
    pub fn point(&self, t: f64) -> Point {
        match self {
            Piece::Line { p0, p1 } => [p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1])],
            Piece::Arc { center, radius, angle0, angle1 } => {
                let th = angle0 + t * (angle1 - angle0);
                [center[0] + radius * th.cos(), center[1] + radius * th.sin()]
            }
            Piece::Graph(g) => {
                let x = g.a + t * (g.b - g.a);
                [x, g.phi(x)]
            }
        }
    }

    /// `d point / dt`.
    pub fn velocity(&self, t: f64) -> Point {
        match self {
            Piece::Line { p0, p1 } => [p1[0] - p0[0], p1[1] - p0[1]],
            Piece::Arc { radius, angle0, angle1, .. } => {
                let th = angle0 + t * (angle1 - angle0);
                let w = angle1 - angle0;
                [-radius * w * th.sin(), radius * w * th.cos()]
            }
            Piece::Graph(g) => {
                let x = g.a + t * (g.b - g.a);
                let dx = g.b - g.a;
                [dx, dx * g.dphi(x)]
            }
        }
    }

    pub fn speed(&self, t: f64) -> f64 {
        let v = self.velocity(t);
        v[0].hypot(v[1])
    }

    pub fn tangent(&self, t: f64) -> Point {
        let v = self.velocity(t);
        let s = v[0].hypot(v[1]);
        [v[0] / s, v[1] / s]
    }

    /// Signed curvature; positive when the tangent turns counter-clockwise.
    pub fn curvature(&self, t: f64) -> f64 {
        match self {
            Piece::Line { .. } => 0.0,
            Piece::Arc { radius, angle0, angle1, .. } => (angle1 - angle0).signum() / radius,
            Piece::Graph(g) => {
                let x = g.a + t * (g.b - g.a);
                let d1 = g.dphi(x);
                (g.b - g.a).signum() * g.d2phi(x) / (1.0 + d1 * d1).powf(1.5)
            }
        }
    }

    pub fn length(&self) -> f64 {
        match self {
            Piece::Line { p0, p1 } => (p1[0] - p0[0]).hypot(p1[1] - p0[1]),
            Piece::Arc { radius, angle0, angle1, .. } => radius * (angle1 - angle0).abs(),
            Piece::Graph(_) => {
                let rule = GaussLegendre::cached(16);
                let mut panels = 8;
                let mut prev = rule.composite(0.0, 1.0, panels, |t| self.speed(t));
                loop {
                    panels *= 2;
                    let next = rule.composite(0.0, 1.0, panels, |t| self.speed(t));
                    if (next - prev).abs() <= 1e-14 * next || panels >= 1 << 16 {
                        return next;
                    }
                    prev = next;
                }
            }
        }
    }

    /// Upper bound of the speed over `[0, 1]` (exact for lines and arcs).
    pub fn max_speed(&self) -> f64 {
        match self {
            Piece::Graph(_) => {
                let m = (0..=256).map(|i| self.speed(i as f64 / 256.0)).fold(0.0, f64::max);
                m * 1.05
            }
            _ => self.speed(0.0),
        }
    }

    /// A piece is flat when its normal varies by less than `FLAT_TOL`.
    pub fn is_flat(&self) -> bool {
        match self {
            Piece::Line { .. } => true,
            Piece::Arc { .. } => false,
            Piece::Graph(g) => {
                let d0 = g.dphi(g.a);
                (0..=64).all(|i| {
                    let x = g.a + (g.b - g.a) * i as f64 / 64.0;
                    (g.dphi(x) - d0).abs() < FLAT_TOL
                })
            }
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Piece::Line { .. } => "line",
            Piece::Arc { .. } => "arc",
            Piece::Graph(_) => "graph",
        }
    }
}

/// An oriented chain of pieces with a declared Lipschitz bound `L` for the
/// normal (`tau(s) = L s`).
#[derive(Debug, Clone)]
pub struct Curve {
    pieces: Vec<Piece>,
    orientation: Orientation,
    lengths: Vec<f64>,
    modulus: f64,
}

/// A quadrature node on a curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadNode {
    pub point: Point,
    pub normal: Point,
    pub weight: f64,
}

/// A maximal straight part of a curve.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatPart {
    /// Inclusive range of piece indices.
    pub pieces: (usize, usize),
    pub direction: Direction,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatDecomposition {
    pub flats: Vec<FlatPart>,
    pub total_length: f64,
    pub residual_length: f64,
    pub rational_length: f64,
    pub undetermined_length: f64,
    /// The rational-normal flat parts have zero total length.
    pub iddc_holds: bool,
}

impl Curve {
    pub fn new(pieces: Vec<Piece>, orientation: Orientation) -> Result<Self> {
        Self::with_modulus(pieces, orientation, None)
    }

    /// Builds a curve; `modulus` defaults to the largest curvature magnitude.
    pub fn with_modulus(pieces: Vec<Piece>, orientation: Orientation, modulus: Option<f64>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidCurve("curve has no pieces".into()));
        }
        let mut lengths = Vec::with_capacity(pieces.len());
        for (i, p) in pieces.iter().enumerate() {
            if let Piece::Arc { radius, .. } = p {
                if !(*radius > 0.0) {
                    return Err(Error::InvalidCurve(format!("piece {i}: arc radius must be positive")));
                }
            }
            let len = p.length();
            if !(len > 0.0) || !len.is_finite() {
                return Err(Error::InvalidCurve(format!("piece {i} ({}) has non-positive length", p.kind())));
            }
            lengths.push(len);
        }
        for (i, w) in pieces.windows(2).enumerate() {
            let a = w[0].point(1.0);
            let b = w[1].point(0.0);
            if (a[0] - b[0]).hypot(a[1] - b[1]) > JOIN_TOL * (1.0 + a[0].abs().max(a[1].abs())) {
                return Err(Error::InvalidCurve(format!(
                    "pieces {i} and {} do not share an endpoint: {a:?} vs {b:?}",
                    i + 1
                )));
            }
        }
        let modulus = match modulus {
            Some(m) if m >= 0.0 && m.is_finite() => m,
            Some(m) => return Err(Error::InvalidCurve(format!("modulus must be nonnegative, got {m}"))),
            None => pieces
                .iter()
                .map(|p| match p {
                    Piece::Line { .. } => 0.0,
                    Piece::Arc { radius, .. } => 1.0 / radius,
                    Piece::Graph(_) => (0..=256).map(|i| p.curvature(i as f64 / 256.0).abs()).fold(0.0, f64::max),
                })
                .fold(0.0, f64::max),
        };
        Ok(Self { pieces, orientation, lengths, modulus })
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn piece_lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    /// Lipschitz constant `L` of the normal, so that `tau(s) = L s`.
    pub fn modulus(&self) -> f64 {
        self.modulus
    }

    pub fn is_closed(&self) -> bool {
        let a = self.pieces.last().map(|p| p.point(1.0)).unwrap_or_default();
        let b = self.pieces[0].point(0.0);
        (a[0] - b[0]).hypot(a[1] - b[1]) <= JOIN_TOL * (1.0 + a[0].abs().max(a[1].abs()))
    }

    /// Unit normal of piece `i` at parameter `t`.
    pub fn normal(&self, piece: usize, t: f64) -> Point {
        rotate(self.pieces[piece].tangent(t), self.orientation)
    }

    /// Signed enclosed area (positive for counter-clockwise traversal); meaningful for closed curves only.
    pub fn signed_area(&self) -> f64 {
        let rule = GaussLegendre::cached(16);
        self.pieces
            .iter()
            .map(|p| {
                let panels = match p {
                    Piece::Line { .. } => 1,
                    _ => 64,
                };
                rule.composite(0.0, 1.0, panels, |t| {
                    let x = p.point(t);
                    let v = p.velocity(t);
                    0.5 * (x[0] * v[1] - x[1] * v[0])
                })
            })
            .sum()
    }

    /// Composite Gauss–Legendre nodes (`k` per sub-interval) with
    /// sub-intervals of arclength at most `h_max`.
    pub fn quadrature_nodes_with_order(&self, h_max: f64, k: usize) -> Result<Vec<QuadNode>> {
        let mut out = Vec::new();
        for i in 0..self.pieces.len() {
            out.extend(self.piece_nodes(i, h_max, k)?);
        }
        Ok(out)
    }

    /// Composite Gauss–Legendre nodes on a single piece.
    pub fn piece_nodes(&self, piece: usize, h_max: f64, k: usize) -> Result<Vec<QuadNode>> {
        if !(h_max > 0.0) {
            return Err(crate::error::domain("h_max must be positive"));
        }
        let p = self.pieces.get(piece).ok_or_else(|| crate::error::domain(format!("no piece {piece}")))?;
        let rule = GaussLegendre::cached(k);
        let n = ((p.max_speed() / h_max).ceil() as usize).max(1);
        let dt = 1.0 / n as f64;
        let mut out = Vec::with_capacity(n * k);
        for j in 0..n {
            let t0 = j as f64 * dt;
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let t = t0 + 0.5 * dt * (1.0 + x);
                out.push(QuadNode {
                    point: p.point(t),
                    normal: self.normal(piece, t),
                    weight: 0.5 * dt * w * p.speed(t),
                });
            }
        }
        Ok(out)
    }

    /// Eight-point composite Gauss–Legendre nodes.
    pub fn quadrature_nodes(&self, h_max: f64) -> Result<Vec<QuadNode>> {
        self.quadrature_nodes_with_order(h_max, 8)
    }

    /// Maximal straight parts with their classified normals.
    pub fn flat_decomposition(&self, opts: &ClassifyOptions) -> Result<FlatDecomposition> {
        let mut flats: Vec<FlatPart> = Vec::new();
        let mut i = 0;
        while i < self.pieces.len() {
            if !self.pieces[i].is_flat() {
                i += 1;
                continue;
            }
            let n0 = self.normal(i, 0.5);
            let mut j = i;
            let mut length = self.lengths[i];
            while j + 1 < self.pieces.len() && self.pieces[j + 1].is_flat() {
                let n1 = self.normal(j + 1, 0.5);
                if (n1[0] - n0[0]).abs() < FLAT_TOL && (n1[1] - n0[1]).abs() < FLAT_TOL {
                    j += 1;
                    length += self.lengths[j];
                } else {
                    break;
                }
            }
            let direction = classify_direction(&n0, opts)?;
            flats.push(FlatPart { pieces: (i, j), direction, length });
            i = j + 1;
        }
        let total_length = self.length();
        let flat_length: f64 = flats.iter().map(|f| f.length).sum();
        let rational_length = flats.iter().filter(|f| f.direction.is_rational()).map(|f| f.length).sum();
        let undetermined_length = flats
            .iter()
            .filter(|f| matches!(f.direction.class, DirectionClass::Undetermined { .. }))
            .map(|f| f.length)
            .sum();
        Ok(FlatDecomposition {
            flats,
            total_length,
            residual_length: total_length - flat_length,
            rational_length,
            undetermined_length,
            iddc_holds: rational_length == 0.0,
        })
    }

    // ---- constructors for the shapes used throughout the tests ----

    /// Counter-clockwise circle with outward normals.
    pub fn circle(center: Point, radius: f64) -> Result<Self> {
        Self::new(vec![Piece::Arc { center, radius, angle0: 0.0, angle1: 2.0 * PI }], Orientation::Cw)
    }

    /// Closed counter-clockwise polygon with outward normals.
    pub fn polygon(vertices: &[Point]) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidCurve("polygon needs at least three vertices".into()));
        }
        let pieces = (0..vertices.len())
            .map(|i| Piece::Line { p0: vertices[i], p1: vertices[(i + 1) % vertices.len()] })
            .collect();
        Self::new(pieces, Orientation::Cw)
    }

    /// Open polyline through `vertices`.
    pub fn polyline(vertices: &[Point]) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidCurve("polyline needs at least two vertices".into()));
        }
        let pieces = vertices.windows(2).map(|w| Piece::Line { p0: w[0], p1: w[1] }).collect();
        Self::new(pieces, Orientation::Cw)
    }

    /// The stadium `{|x1| < R, |x2| <= 1 + sqrt(R^2 - x1^2)}`: two flat sides
    /// `{±R} x [-1, 1]` joined tangentially by half circles of radius `R`
    /// centred at `(0, ±1)`. Counter-clockwise, outward normals.
    pub fn stadium(r: f64) -> Result<Self> {
        Self::new(
            vec![
                Piece::Line { p0: [r, -1.0], p1: [r, 1.0] },
                Piece::Arc { center: [0.0, 1.0], radius: r, angle0: 0.0, angle1: PI },
                Piece::Line { p0: [-r, 1.0], p1: [-r, -1.0] },
                Piece::Arc { center: [0.0, -1.0], radius: r, angle0: PI, angle1: 2.0 * PI },
            ],
            Orientation::Cw,
        )
    }

    /// Square of side `side` with one corner at `origin`, rotated
    /// counter-clockwise by `angle`.
    pub fn rotated_square(origin: Point, side: f64, angle: f64) -> Result<Self> {
        let u = [side * angle.cos(), side * angle.sin()];
        let v = [-u[1], u[0]];
        let o = origin;
        Self::polygon(&[
            o,
            [o[0] + u[0], o[1] + u[1]],
            [o[0] + u[0] + v[0], o[1] + u[1] + v[1]],
            [o[0] + v[0], o[1] + v[1]],
        ])
    }

    pub fn segment(p0: Point, p1: Point) -> Result<Self> {
        Self::new(vec![Piece::Line { p0, p1 }], Orientation::Cw)
    }
}

pub(crate) fn rotate(t: Point, orientation: Orientation) -> Point {
    match orientation {
        Orientation::Cw => [t[1], -t[0]],
        Orientation::Ccw => [-t[1], t[0]],
    }
}

// ---- JSON curve specs ----

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PieceSpec {
    Line {
        p0: Point,
        p1: Point,
    },
    Arc {
        center: Point,
        radius: f64,
        angle0: f64,
        angle1: f64,
    },
    Graph {
        expr: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dexpr: Option<String>,
        a: f64,
        b: f64,
    },
}

/// JSON form: `{"segments":[{"kind":"line","p0":[x,y],"p1":[x,y]}, ...],
/// "orientation":"cw"}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub segments: Vec<PieceSpec>,
    pub orientation: Orientation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus: Option<f64>,
}

impl CurveSpec {
    pub fn build(&self) -> Result<Curve> {
        let pieces = self
            .segments
            .iter()
            .map(|s| {
                Ok(match s {
                    PieceSpec::Line { p0, p1 } => Piece::Line { p0: *p0, p1: *p1 },
                    PieceSpec::Arc { center, radius, angle0, angle1 } => {
                        Piece::Arc { center: *center, radius: *radius, angle0: *angle0, angle1: *angle1 }
                    }
                    PieceSpec::Graph { expr, dexpr, a, b } => {
                        Piece::Graph(GraphPiece::new(expr, dexpr.as_deref(), *a, *b)?)
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Curve::with_modulus(pieces, self.orientation, self.modulus)
    }
}

impl From<&Curve> for CurveSpec {
    fn from(c: &Curve) -> Self {
        let segments = c
            .pieces
            .iter()
            .map(|p| match p {
                Piece::Line { p0, p1 } => PieceSpec::Line { p0: *p0, p1: *p1 },
                Piece::Arc { center, radius, angle0, angle1 } => {
                    PieceSpec::Arc { center: *center, radius: *radius, angle0: *angle0, angle1: *angle1 }
                }
                Piece::Graph(g) => PieceSpec::Graph {
                    expr: g.source().to_string(),
                    dexpr: g.derivative_source().map(str::to_string),
                    a: g.a,
                    b: g.b,
                },
            })
            .collect();
        CurveSpec { segments, orientation: c.orientation, modulus: Some(c.modulus) }
    }
}
