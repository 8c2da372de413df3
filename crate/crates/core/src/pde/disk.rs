//! Dirichlet problem on a disk through the closed-form Poisson kernel and
//! Green function.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::LimitBounds;
use crate::averaging::TripleOptions;
use crate::error::{domain, Error, Result};
use crate::field::PeriodicField;
use crate::geometry::{ClassifyOptions, Curve, Point};
use crate::oscillatory::{integrate_curve, HomogenizedData, OscillatoryQuadrature};

/// Points closer to the circle than this fraction of the radius are refused.
const BOUNDARY_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Point,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(domain(format!("disk radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn boundary(&self) -> Result<Curve> {
        Curve::circle(self.center, self.radius)
    }

    fn relative(&self, x: Point) -> Point {
        [x[0] - self.center[0], x[1] - self.center[1]]
    }

    /// Poisson kernel `(R^2 - |x - c|^2) / (2 pi R |x - y|^2)`.
    pub fn poisson_kernel(&self, x: Point, y: Point) -> f64 {
        let xr = self.relative(x);
        let d2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
        (self.radius * self.radius - xr[0] * xr[0] - xr[1] * xr[1]) / (2.0 * PI * self.radius * d2)
    }

    /// Green function of `-Delta` with zero boundary values.
    pub fn green(&self, x: Point, y: Point) -> f64 {
        let (xr, yr) = (self.relative(x), self.relative(y));
        let r2 = self.radius * self.radius;
        let x2 = xr[0] * xr[0] + xr[1] * xr[1];
        let y2 = yr[0] * yr[0] + yr[1] * yr[1];
        let xy = xr[0] * yr[0] + xr[1] * yr[1];
        let d2 = (xr[0] - yr[0]).powi(2) + (xr[1] - yr[1]).powi(2);
        ((x2 * y2 - 2.0 * r2 * xy + r2 * r2) / r2).ln() / (4.0 * PI) - d2.ln() / (4.0 * PI)
    }

    fn check_interior(&self, x: Point) -> Result<f64> {
        let xr = self.relative(x);
        let r = xr[0].hypot(xr[1]);
        if r >= self.radius {
            return Err(domain(format!("point {x:?} is not inside the disk")));
        }
        if r > self.radius * (1.0 - BOUNDARY_MARGIN) {
            return Err(Error::Conditioning(format!(
                "point {x:?} is within {:.1e} of the boundary; the Poisson kernel cannot be resolved",
                self.radius - r
            )));
        }
        Ok(self.radius - r)
    }
}

/// An oscillating source `f(y, y/eps) dsigma` carried by a curve inside the domain.
#[derive(Debug, Clone)]
pub struct InteriorMeasure {
    pub support: Curve,
    pub density: PeriodicField,
}

#[derive(Debug, Clone)]
pub struct DiskProblem {
    pub disk: Disk,
    pub g: PeriodicField,
    pub measure: Option<InteriorMeasure>,
}

impl DiskProblem {
    pub fn new(disk: Disk, g: PeriodicField, measure: Option<InteriorMeasure>) -> Result<Self> {
        if g.dim() != 2 {
            return Err(domain("boundary density must be planar"));
        }
        if let Some(m) = &measure {
            let nodes = m.support.quadrature_nodes(0.05)?;
            if nodes.iter().any(|n| disk.check_interior(n.point).is_err()) {
                return Err(domain("interior measure must lie strictly inside the disk"));
            }
            if m.density.dim() != 2 {
                return Err(domain("interior density must be planar"));
            }
        }
        Ok(Self { disk, g, measure })
    }
}

/// Boundary and interior contributions to `u_eps(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskValue {
    pub value: f64,
    pub boundary: f64,
    pub interior: f64,
    pub certified: bool,
}

/// `u_eps(x) = int P(x, y) g(y, y/eps) dsigma_y + int_Gamma0 G(x, y) f(y, y/eps) dsigma_y`.
pub fn solve_disk(p: &DiskProblem, eps: f64, x: Point, quad: &OscillatoryQuadrature) -> Result<DiskValue> {
    let dist = p.disk.check_interior(x)?;
    let boundary = p.disk.boundary()?;
    // The kernel peaks on a scale comparable to the distance to the circle.
    let q = OscillatoryQuadrature { h_cap: quad.h_cap.min(0.25 * dist), ..*quad };
    let b = integrate_curve(&boundary, eps, &q, p.g.y_mask(), |s| {
        let y = s.point;
        Ok(p.disk.poisson_kernel(x, y) * p.g.eval(&y, &[y[0] / eps, y[1] / eps])?)
    })?;
    let (interior, cert) = match &p.measure {
        Some(m) => {
            let e = integrate_curve(&m.support, eps, quad, m.density.y_mask(), |s| {
                let y = s.point;
                Ok(p.disk.green(x, y) * m.density.eval(&y, &[y[0] / eps, y[1] / eps])?)
            })?;
            (e.value, e.certified)
        }
        None => (0.0, true),
    };
    Ok(DiskValue { value: b.value + interior, boundary: b.value, interior, certified: b.certified && cert })
}

/// The same representation with `eps`-independent data `datum(y)` on the
/// circle and `source(y)` on the interior support.
pub fn solve_disk_homogenized<D, S>(p: &DiskProblem, x: Point, datum: D, source: S) -> Result<f64>
where
    D: Fn(Point) -> Result<f64> + Sync,
    S: Fn(Point) -> Result<f64> + Sync,
{
    let dist = p.disk.check_interior(x)?;
    let boundary = p.disk.boundary()?;
    let q = OscillatoryQuadrature { h_cap: (0.25 * dist).min(1.0 / 16.0), ..Default::default() };
    let b = integrate_curve(&boundary, 1.0, &q, 0, |s| Ok(p.disk.poisson_kernel(x, s.point) * datum(s.point)?))?;
    let i = match &p.measure {
        Some(m) => integrate_curve(&m.support, 1.0, &q, 0, |s| Ok(p.disk.green(x, s.point) * source(s.point)?))?.value,
        None => 0.0,
    };
    Ok(b.value + i)
}

/// Homogenized values of `u(x)` with the boundary and interior data replaced
/// by their lower, mean and upper directional averages. Poisson kernel and
/// Green function are positive, so the order is preserved.
pub fn disk_limit_bounds(
    p: &DiskProblem,
    x: Point,
    classify: &ClassifyOptions,
    triple_opts: &TripleOptions,
) -> Result<LimitBounds> {
    let dist = p.disk.check_interior(x)?;
    let h = (0.25 * dist).min(1.0 / 16.0);
    let boundary = p.disk.boundary()?;
    let mut acc = bracket(&boundary, &p.g, h, classify, triple_opts, |y| p.disk.poisson_kernel(x, y))?;
    if let Some(m) = &p.measure {
        let s = bracket(&m.support, &m.density, h, classify, triple_opts, |y| p.disk.green(x, y))?;
        acc = [acc[0] + s[0], acc[1] + s[1], acc[2] + s[2]];
    }
    Ok(LimitBounds { lower: acc[0], mean: acc[1], upper: acc[2] })
}

/// `int kernel(y) (lower, mean, upper)(y) dsigma_y` over `c`.
fn bracket<K: Fn(Point) -> f64>(
    c: &Curve,
    f: &PeriodicField,
    h: f64,
    classify: &ClassifyOptions,
    triple_opts: &TripleOptions,
    kernel: K,
) -> Result<[f64; 3]> {
    let data = HomogenizedData::new(c, f, classify, triple_opts)?;
    let mut acc = [0.0; 3];
    for i in 0..c.pieces().len() {
        for n in c.piece_nodes(i, h, 8)? {
            let t = data.triple(i, n.point)?;
            let w = n.weight * kernel(n.point);
            acc[0] += w * t.lower;
            acc[1] += w * t.mean;
            acc[2] += w * t.upper;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn field(src: &str) -> PeriodicField {
        PeriodicField::parse(src, 2).unwrap()
    }

    fn problem(g: &str) -> DiskProblem {
        DiskProblem::new(Disk::new([0.0, 0.0], 1.0).unwrap(), field(g), None).unwrap()
    }

    #[test]
    fn constant_datum_reproduces_constant() {
        let p = problem("1");
        for x in [[0.0, 0.0], [0.5, -0.3], [0.0, 0.99]] {
            let v = solve_disk(&p, 0.1, x, &OscillatoryQuadrature::default()).unwrap();
            assert_abs_diff_eq!(v.value, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn harmonic_datum_is_reproduced() {
        let p = DiskProblem::new(Disk::new([0.3, -0.2], 1.5).unwrap(), field("x1 - 2*x1*x2"), None).unwrap();
        for x in [[0.3, -0.2], [1.0, 0.4], [-0.9, -0.8]] {
            let v = solve_disk(&p, 0.1, x, &OscillatoryQuadrature::default()).unwrap();
            assert_abs_diff_eq!(v.value, x[0] - 2.0 * x[0] * x[1], epsilon = 1e-9);
        }
    }

    #[test]
    fn green_function_vanishes_on_the_circle_and_is_symmetric() {
        let d = Disk::new([0.2, 0.1], 2.0).unwrap();
        let x = [0.5, -0.4];
        for th in [0.0, 1.0, 2.5] {
            let y = [0.2 + 2.0 * f64::cos(th), 0.1 + 2.0 * f64::sin(th)];
            assert_abs_diff_eq!(d.green(x, y), 0.0, epsilon = 1e-12);
        }
        let y = [-0.7, 0.9];
        assert_abs_diff_eq!(d.green(x, y), d.green(y, x), epsilon = 1e-12);
    }

    #[test]
    fn point_source_on_a_ring_matches_radial_solution() {
        // Uniform unit line density on the circle |y| = a inside the unit disk:
        // u(0) = a log(1/a) for -Delta u = mu.
        let a = 0.5;
        let m = InteriorMeasure { support: Curve::circle([0.0, 0.0], a).unwrap(), density: field("1") };
        let p = DiskProblem::new(Disk::new([0.0, 0.0], 1.0).unwrap(), field("0"), Some(m)).unwrap();
        let v = solve_disk(&p, 0.1, [0.0, 0.0], &OscillatoryQuadrature::default()).unwrap();
        assert_abs_diff_eq!(v.value, a * (1.0 / a).ln(), epsilon = 1e-10);
    }

    #[test]
    fn linear_in_boundary_and_interior_data() {
        let disk = Disk::new([0.0, 0.0], 1.0).unwrap();
        let ring = || Curve::circle([0.1, 0.0], 0.4).unwrap();
        let g = "abs(sin(pi*y1)*sin(pi*y2))";
        let f = "1 + cos(2*pi*y2)*x1";
        let both =
            DiskProblem::new(disk, field(g), Some(InteriorMeasure { support: ring(), density: field(f) })).unwrap();
        let only_g = DiskProblem::new(disk, field(g), None).unwrap();
        let only_f =
            DiskProblem::new(disk, field("0"), Some(InteriorMeasure { support: ring(), density: field(f) })).unwrap();
        let q = OscillatoryQuadrature::default();
        let x = [0.2, 0.3];
        let eps = 0.013;
        let a = solve_disk(&both, eps, x, &q).unwrap().value;
        let b = solve_disk(&only_g, eps, x, &q).unwrap().value + solve_disk(&only_f, eps, x, &q).unwrap().value;
        assert_abs_diff_eq!(a, b, epsilon = 1e-9);
    }

    #[test]
    fn maximum_principle() {
        let p = problem("abs(sin(pi*y1)*sin(pi*y2))");
        for x in [[0.0, 0.0], [0.7, 0.1], [-0.2, -0.95]] {
            let v = solve_disk(&p, 0.02, x, &OscillatoryQuadrature::default()).unwrap().value;
            assert!((-1e-8..=1.0 + 1e-8).contains(&v), "{v}");
        }
    }

    #[test]
    fn refuses_points_on_or_near_the_boundary() {
        let p = problem("1");
        let q = OscillatoryQuadrature::default();
        assert!(matches!(solve_disk(&p, 0.1, [1.0 - 1e-8, 0.0], &q), Err(Error::Conditioning(_))));
        assert!(matches!(solve_disk(&p, 0.1, [1.5, 0.0], &q), Err(Error::Domain(_))));
    }

    #[test]
    fn limit_bounds_split_only_on_rational_flats_of_the_source() {
        let disk = Disk::new([0.0, 0.0], 1.0).unwrap();
        let seg = Curve::segment([-0.5, 0.3], [0.5, 0.3]).unwrap();
        let measure = InteriorMeasure { support: seg, density: field("sin(2*pi*y2)^2") };
        let p = DiskProblem::new(disk, field("abs(sin(pi*y1)*sin(pi*y2))"), Some(measure)).unwrap();
        let x = [0.1, -0.2];
        let b = disk_limit_bounds(&p, x, &ClassifyOptions::default(), &TripleOptions::default()).unwrap();
        // Boundary part: mean datum 4/pi^2 everywhere, reproduced exactly.
        let boundary = 4.0 / (PI * PI);
        // Source extremes on the horizontal segment are 0 and 1: midpoint-rule oracle for int G.
        let n = 200_000;
        let green: f64 = (0..n).map(|k| disk.green(x, [-0.5 + (k as f64 + 0.5) / n as f64, 0.3]) / n as f64).sum();
        assert_abs_diff_eq!(b.lower, boundary, epsilon = 1e-9);
        assert_abs_diff_eq!(b.upper, boundary + green, epsilon = 1e-8);
        assert_abs_diff_eq!(b.mean, boundary + 0.5 * green, epsilon = 1e-8);
    }
}
