//! Nyström boundary integral solvers for the Laplace equation inside a
//! closed curve.
//!
//! The Dirichlet problem uses the double-layer potential
//! `u(x) = int K(x, y) phi(y) dsigma_y`, `K = (y - x) . n_y / (2 pi |x - y|^2)`,
//! with outward normals, and the interior jump relation
//! `(I/2 + K) phi = f`. Rather than solving for `phi`, the adjoint system
//! `(I/2 + K)^T psi = d(x)` is solved for each evaluation point: `psi` are
//! discrete harmonic-measure weights, so `u(x) = sum_j psi_j f(y_j)`. The
//! density `psi_j / w_j` is smooth and is interpolated onto an
//! oscillation-resolving quadrature, which lets one factorization serve an
//! entire sweep over `eps`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, LU};
use serde::{Deserialize, Serialize};

use super::LimitBounds;
use crate::error::{domain, Error, Result};
use crate::field::PeriodicField;
use crate::geometry::{Curve, Orientation, Point};
use crate::oscillatory::{integrate_curve, HomogenizedData, IntegralEstimate, OscillatoryQuadrature};
use crate::quadrature::{pairwise_sum, GaussLegendre};

pub const DEFAULT_PANELS: usize = 2048;

/// Boundary mesh shared by the Dirichlet and Neumann solvers: one node per
/// panel at the parameter midpoint, panels uniform in the parameter of each
/// piece and distributed in proportion to piece length.
#[derive(Debug, Clone)]
pub struct BoundaryMesh {
    pub curve: Curve,
    pub points: Vec<Point>,
    /// Outward unit normals.
    pub normals: Vec<Point>,
    pub weights: Vec<f64>,
    /// Curvature, positive where the boundary is convex.
    pub curvature: Vec<f64>,
    /// First node index and node count of each piece.
    pub piece_ranges: Vec<(usize, usize)>,
    outward_sign: f64,
}

impl BoundaryMesh {
    pub fn new(curve: &Curve, panels: usize) -> Result<Self> {
        if !curve.is_closed() {
            return Err(Error::InvalidCurve("boundary integral solvers need a closed curve".into()));
        }
        if panels < 8 {
            return Err(domain("need at least 8 boundary panels"));
        }
        let area = curve.signed_area();
        if area == 0.0 {
            return Err(Error::InvalidCurve("curve encloses no area".into()));
        }
        // Normals as declared point outward when the declared rotation
        // agrees with the traversal direction.
        let declared_out = match curve.orientation() {
            Orientation::Cw => area > 0.0,
            Orientation::Ccw => area < 0.0,
        };
        let outward_sign = if declared_out { 1.0 } else { -1.0 };
        let convex_sign = area.signum();
        let total = curve.length();
        let mut counts: Vec<usize> =
            curve.piece_lengths().iter().map(|l| ((l / total * panels as f64).round() as usize).max(4)).collect();
        // Keep the requested total exactly.
        let sum: usize = counts.iter().sum();
        if sum != panels {
            let longest = (0..counts.len())
                .max_by(|&a, &b| curve.piece_lengths()[a].total_cmp(&curve.piece_lengths()[b]))
                .unwrap();
            counts[longest] = (counts[longest] as isize + panels as isize - sum as isize).max(4) as usize;
        }
        let n: usize = counts.iter().sum();
        let mut mesh = Self {
            curve: curve.clone(),
            points: Vec::with_capacity(n),
            normals: Vec::with_capacity(n),
            weights: Vec::with_capacity(n),
            curvature: Vec::with_capacity(n),
            piece_ranges: Vec::with_capacity(counts.len()),
            outward_sign,
        };
        for (i, (p, &c)) in curve.pieces().iter().zip(&counts).enumerate() {
            mesh.piece_ranges.push((mesh.points.len(), c));
            let dt = 1.0 / c as f64;
            for k in 0..c {
                let t = (k as f64 + 0.5) * dt;
                mesh.points.push(p.point(t));
                let nrm = curve.normal(i, t);
                mesh.normals.push([outward_sign * nrm[0], outward_sign * nrm[1]]);
                mesh.weights.push(p.speed(t) * dt);
                mesh.curvature.push(convex_sign * p.curvature(t));
            }
        }
        Ok(mesh)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Outward normal of the underlying curve.
    pub fn outward_normal(&self, piece: usize, t: f64) -> Point {
        let n = self.curve.normal(piece, t);
        [self.outward_sign * n[0], self.outward_sign * n[1]]
    }

    /// Largest panel arclength.
    pub fn max_panel(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// Distance from `x` to the nearest node.
    pub fn distance_to_nodes(&self, x: Point) -> f64 {
        self.points.iter().map(|p| (p[0] - x[0]).hypot(p[1] - x[1])).fold(f64::INFINITY, f64::min)
    }

    /// `int K(x, y) dsigma_y`: about 1 inside, 0 outside.
    pub fn winding(&self, x: Point) -> f64 {
        let v: Vec<f64> =
            (0..self.len()).map(|j| double_layer(x, self.points[j], self.normals[j]) * self.weights[j]).collect();
        pairwise_sum(&v)
    }

    pub(crate) fn check_interior(&self, x: Point) -> Result<()> {
        let d = self.distance_to_nodes(x);
        if d < 2.0 * self.max_panel() {
            return Err(Error::Conditioning(format!(
                "point {x:?} is {d:.2e} from the boundary, closer than two panels ({:.2e}); refine the mesh",
                2.0 * self.max_panel()
            )));
        }
        let w = self.winding(x);
        if (w - 1.0).abs() > 0.25 {
            return Err(domain(format!("point {x:?} is not inside the boundary (winding {w:.3})")));
        }
        Ok(())
    }

    /// Cubic Lagrange interpolation of nodal `values` to parameter `t` of `piece`.
    pub fn interpolate(&self, values: &[f64], piece: usize, t: f64) -> f64 {
        let (start, count) = self.piece_ranges[piece];
        let s = t * count as f64 - 0.5;
        let base = (s.floor() as isize - 1).clamp(0, count as isize - 4) as usize;
        let mut acc = 0.0;
        for a in 0..4 {
            let mut l = 1.0;
            for b in 0..4 {
                if a != b {
                    l *= (s - (base + b) as f64) / (a as f64 - b as f64);
                }
            }
            acc += l * values[start + base + a];
        }
        acc
    }
}

/// `(y - x) . n_y / (2 pi |x - y|^2)`.
#[inline]
pub fn double_layer(x: Point, y: Point, ny: Point) -> f64 {
    let d = [y[0] - x[0], y[1] - x[1]];
    (d[0] * ny[0] + d[1] * ny[1]) / (2.0 * PI * (d[0] * d[0] + d[1] * d[1]))
}

/// Rough condition estimate from the LU pivots.
pub(crate) fn pivot_condition(lu: &LU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> f64 {
    let u = lu.u();
    let d: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].abs()).collect();
    let max = d.iter().copied().fold(0.0, f64::max);
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub(crate) const MAX_CONDITION: f64 = 1e12;

/// Dirichlet solver with a factored adjoint operator.
#[derive(Debug, Clone)]
pub struct DirichletBem {
    pub mesh: BoundaryMesh,
    adjoint: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pub condition: f64,
}

/// Harmonic-measure weights of one interior point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicMeasure {
    pub x: Point,
    /// `u(x) = sum_j weights_j f(y_j)`.
    pub weights: Vec<f64>,
    /// `weights_j / w_j`, the density against arclength.
    pub density: Vec<f64>,
}

impl HarmonicMeasure {
    pub fn total(&self) -> f64 {
        pairwise_sum(&self.weights)
    }
}

impl DirichletBem {
    pub fn new(curve: &Curve, panels: usize) -> Result<Self> {
        let mesh = BoundaryMesh::new(curve, panels)?;
        let n = mesh.len();
        // Transposed system: At[j][i] = A[i][j] = delta_ij / 2 + K(y_i, y_j) w_j.
        let mut at = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                let k = if i == j {
                    mesh.curvature[j] / (4.0 * PI)
                } else {
                    double_layer(mesh.points[i], mesh.points[j], mesh.normals[j])
                };
                at[(j, i)] = k * mesh.weights[j] + if i == j { 0.5 } else { 0.0 };
            }
        }
        let adjoint = at.lu();
        let condition = pivot_condition(&adjoint);
        if !(condition < MAX_CONDITION) {
            return Err(Error::Solver { message: "double-layer system is singular".into(), condition });
        }
        Ok(Self { mesh, adjoint, condition })
    }

    pub fn harmonic_measure(&self, x: Point) -> Result<HarmonicMeasure> {
        self.mesh.check_interior(x)?;
        let m = &self.mesh;
        let d = DVector::from_iterator(
            m.len(),
            (0..m.len()).map(|j| double_layer(x, m.points[j], m.normals[j]) * m.weights[j]),
        );
        let psi = self
            .adjoint
            .solve(&d)
            .ok_or_else(|| Error::Solver { message: "adjoint solve failed".into(), condition: self.condition })?;
        let weights: Vec<f64> = psi.iter().copied().collect();
        let density = weights.iter().zip(&m.weights).map(|(p, w)| p / w).collect();
        Ok(HarmonicMeasure { x, weights, density })
    }

    /// `u(x)` for boundary data sampled at the nodes.
    pub fn solve_nodal<F>(&self, x: Point, data: F) -> Result<f64>
    where
        F: Fn(Point) -> Result<f64>,
    {
        let hm = self.harmonic_measure(x)?;
        let v = self.mesh.points.iter().zip(&hm.weights).map(|(p, w)| Ok(w * data(*p)?)).collect::<Result<Vec<_>>>()?;
        Ok(pairwise_sum(&v))
    }

    /// `u_eps(x)` for data `g(y, y/eps)`, integrating the interpolated
    /// harmonic-measure density against an oscillation-resolving rule.
    pub fn solve_oscillating(
        &self,
        hm: &HarmonicMeasure,
        g: &PeriodicField,
        eps: f64,
        quad: &OscillatoryQuadrature,
    ) -> Result<IntegralEstimate> {
        integrate_curve(&self.mesh.curve, eps, quad, g.y_mask(), |s| {
            let w = self.mesh.interpolate(&hm.density, s.piece, s.t);
            Ok(w * g.eval(&s.point, &[s.point[0] / eps, s.point[1] / eps])?)
        })
    }

    /// Homogenized values with the lower, mean and upper boundary data.
    pub fn limit_bounds(&self, hm: &HarmonicMeasure, data: &HomogenizedData) -> Result<LimitBounds> {
        let pick = |k: usize| {
            piecewise_integral(&self.mesh, &hm.density, |piece, y| {
                let t = data.triple(piece, y)?;
                Ok([t.lower, t.mean, t.upper][k])
            })
        };
        Ok(LimitBounds { lower: pick(0)?, mean: pick(1)?, upper: pick(2)? })
    }

    /// `u(x)` for `eps`-independent data that may jump between pieces.
    pub fn solve_piecewise<F>(&self, hm: &HarmonicMeasure, datum: F) -> Result<f64>
    where
        F: Fn(usize, Point) -> Result<f64>,
    {
        piecewise_integral(&self.mesh, &hm.density, datum)
    }
}

/// `int w(y) datum(piece, y) dsigma_y` with eight-point panels, four per
/// mesh panel; exact breaks at piece junctions.
pub(crate) fn piecewise_integral<F>(mesh: &BoundaryMesh, density: &[f64], datum: F) -> Result<f64>
where
    F: Fn(usize, Point) -> Result<f64>,
{
    let rule = GaussLegendre::cached(8);
    let mut parts = Vec::new();
    for (i, p) in mesh.curve.pieces().iter().enumerate() {
        let panels = 4 * mesh.piece_ranges[i].1;
        let dt = 1.0 / panels as f64;
        for k in 0..panels {
            let lo = k as f64 * dt;
            let mut acc = 0.0;
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let t = lo + 0.5 * dt * (1.0 + x);
                let y = p.point(t);
                acc += w * p.speed(t) * mesh.interpolate(density, i, t) * datum(i, y)?;
            }
            parts.push(0.5 * dt * acc);
        }
    }
    Ok(pairwise_sum(&parts))
}
