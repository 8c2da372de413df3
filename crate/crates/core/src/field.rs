//! Densities `g(x, y)` that are 1-periodic in the fast variable `y`, their
//! cell averages and their averages along closed torus loops.

use std::fmt;

use crate::error::{domain, Error, Result};
use crate::expr::Expr;
use crate::geometry::direction::gcd;
use crate::quadrature::{pairwise_sum, GaussLegendre};

const CELL_NODES: usize = 8;
const CELL_MAX_GRID: usize = 1024;
const CELL_TOL: f64 = 1e-8;
const LOOP_NODES: usize = 8;
pub const DEFAULT_QUAD_PER_UNIT: usize = 64;

/// A density given by an expression in `x1..xn, y1..yn`, 1-periodic in each
/// `y_i`. The fast variable is reduced modulo 1 before evaluation; the
/// anchor `x` never is.
#[derive(Debug, Clone)]
pub struct PeriodicField {
    expr: Expr,
    dim: usize,
}

impl PeriodicField {
    /// Parses and checks periodicity on a fixed probe set.
    pub fn parse(src: &str, dim: usize) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(format!("densities live in n = 2 or 3, got {dim}")));
        }
        let expr = Expr::parse(src, dim)?;
        let field = Self { expr, dim };
        field.check_periodic()?;
        Ok(field)
    }

    fn check_periodic(&self) -> Result<()> {
        let mask = self.y_mask();
        if mask == 0 {
            return Ok(());
        }
        // Deterministic, irrational-looking probe points.
        let probes = [0.1234567, 0.3819660, 0.6928203, 0.9142135, 0.5772157];
        for (k, &p) in probes.iter().enumerate() {
            let x: Vec<f64> = (0..self.dim).map(|i| probes[(k + i + 1) % probes.len()] - 0.5).collect();
            let y: Vec<f64> = (0..self.dim).map(|i| probes[(k + 2 * i) % probes.len()] * (1.0 + p)).collect();
            let base = match self.expr.eval(&x, &y) {
                Ok(v) => v,
                Err(_) => continue,
            };
            for i in 0..self.dim {
                if mask & (1 << i) == 0 {
                    continue;
                }
                for shift in [1.0, -1.0, 3.0] {
                    let mut ys = y.clone();
                    ys[i] += shift;
                    if let Ok(v) = self.expr.eval(&x, &ys) {
                        if (v - base).abs() > 1e-9 * (1.0 + base.abs()) {
                            return Err(domain(format!(
                                "density '{}' is not 1-periodic in y{}",
                                self.expr.source(),
                                i + 1
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> &str {
        self.expr.source()
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    /// Bit `i` set when the density depends on `y_{i+1}`.
    pub fn y_mask(&self) -> u8 {
        self.expr.y_mask()
    }

    pub fn x_mask(&self) -> u8 {
        self.expr.x_mask()
    }

    pub fn depends_on_y(&self) -> bool {
        self.y_mask() != 0
    }

    pub fn depends_on_x(&self) -> bool {
        self.x_mask() != 0
    }

    /// `g(x, y)` with `y` reduced componentwise modulo 1.
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let mut yr = [0.0f64; 3];
        for (dst, &v) in yr.iter_mut().zip(y) {
            *dst = v - v.floor();
        }
        self.expr.eval(x, &yr[..y.len().min(3)])
    }

    /// Mean of `g(x, .)` over the unit cell.
    pub fn cell_average(&self, x: &[f64], grid: usize) -> Result<f64> {
        Ok(self.cell_average_detail(x, grid)?.0)
    }

    /// Tensor Gauss–Legendre average (8 nodes per panel per axis) over the
    /// axes the density depends on. The grid is doubled until two successive
    /// values agree to `1e-8`; returns the value and the accepted grid.
    pub fn cell_average_detail(&self, x: &[f64], grid: usize) -> Result<(f64, usize)> {
        if grid < 2 {
            return Err(domain("cell average grid must be >= 2"));
        }
        let axes: Vec<usize> = (0..self.dim).filter(|i| self.y_mask() & (1 << i) != 0).collect();
        if axes.is_empty() {
            return Ok((self.eval(x, &vec![0.0; self.dim])?, grid));
        }
        let mut g = grid;
        let mut prev = self.tensor_average(x, &axes, g)?;
        while g < CELL_MAX_GRID {
            g *= 2;
            let next = self.tensor_average(x, &axes, g)?;
            if (next - prev).abs() < CELL_TOL {
                return Ok((next, g));
            }
            prev = next;
        }
        Err(Error::Accuracy(format!(
            "cell average of '{}' did not settle to {CELL_TOL:e} by grid {CELL_MAX_GRID}",
            self.source()
        )))
    }

    fn tensor_average(&self, x: &[f64], axes: &[usize], grid: usize) -> Result<f64> {
        let rule = GaussLegendre::cached(CELL_NODES);
        let h = 1.0 / grid as f64;
        // 1-D nodes and weights on [0, 1].
        let mut nodes = Vec::with_capacity(grid * CELL_NODES);
        let mut weights = Vec::with_capacity(grid * CELL_NODES);
        for p in 0..grid {
            for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                nodes.push((p as f64 + 0.5 * (1.0 + t)) * h);
                weights.push(0.5 * w * h);
            }
        }
        let n1 = nodes.len();
        let total = n1.pow(axes.len() as u32);
        let mut y = vec![0.0; self.dim];
        let mut partial = Vec::with_capacity(n1);
        let mut row = Vec::with_capacity(n1);
        for outer in 0..total / n1 {
            row.clear();
            let mut w_outer = 1.0;
            let mut rest = outer;
            for &ax in &axes[1..] {
                let idx = rest % n1;
                rest /= n1;
                y[ax] = nodes[idx];
                w_outer *= weights[idx];
            }
            for (yi, wi) in nodes.iter().zip(&weights) {
                y[axes[0]] = *yi;
                row.push(wi * self.expr.eval(x, &y)?);
            }
            partial.push(w_outer * pairwise_sum(&row));
        }
        Ok(pairwise_sum(&partial))
    }

    /// Mean of `g(x_anchor, .)` along the closed loop, using `quad_per_unit`
    /// eight-point panels per unit length between consecutive crossings of
    /// the integer grid.
    pub fn loop_average(&self, x_anchor: &[f64], lp: &TorusLoop, quad_per_unit: usize) -> Result<f64> {
        if self.dim != 2 {
            return Err(Error::UnsupportedDimension("torus loops are planar (n = 2)".into()));
        }
        if quad_per_unit < 16 {
            return Err(domain("loop quadrature needs at least 16 panels per unit length"));
        }
        let rule = GaussLegendre::cached(LOOP_NODES);
        let len = lp.length();
        let breaks = lp.cell_crossings(self.y_mask());
        let mut parts = Vec::with_capacity(breaks.len() * 2);
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b - a <= 0.0 {
                continue;
            }
            let panels = ((b - a) * quad_per_unit as f64).ceil().max(1.0) as usize;
            let h = (b - a) / panels as f64;
            for p in 0..panels {
                let lo = a + p as f64 * h;
                let mut acc = 0.0;
                for (t, wt) in rule.nodes.iter().zip(&rule.weights) {
                    let s = lo + 0.5 * h * (1.0 + t);
                    let y = lp.point(s);
                    acc += wt * self.eval(x_anchor, &y)?;
                }
                parts.push(0.5 * h * acc);
            }
        }
        Ok(pairwise_sum(&parts) / len)
    }
}

impl fmt::Display for PeriodicField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.source())
    }
}

/// The closed geodesic `{y : y . m/|m| = phase} mod Z^2` for a primitive
/// integer vector `m = (p, q)`. It has length `|m|`, tangent
/// `(-q, p)/|m|`, and phases repeat with period `1/|m|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusLoop {
    m: [i64; 2],
    phase: f64,
}

impl TorusLoop {
    pub fn new(m: [i64; 2], phase: f64) -> Result<Self> {
        if m == [0, 0] {
            return Err(domain("torus loop needs a nonzero lattice vector"));
        }
        if gcd(m[0].unsigned_abs(), m[1].unsigned_abs()) != 1 {
            return Err(domain(format!("lattice vector {m:?} is not primitive")));
        }
        if !phase.is_finite() {
            return Err(domain("phase must be finite"));
        }
        Ok(Self { m, phase })
    }

    pub fn m(&self) -> [i64; 2] {
        self.m
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn norm(&self) -> f64 {
        (self.m[0] as f64).hypot(self.m[1] as f64)
    }

    pub fn length(&self) -> f64 {
        self.norm()
    }

    /// Phase period `1/|m|`.
    pub fn phase_period(&self) -> f64 {
        1.0 / self.norm()
    }

    pub fn normal(&self) -> [f64; 2] {
        let n = self.norm();
        [self.m[0] as f64 / n, self.m[1] as f64 / n]
    }

    pub fn tangent(&self) -> [f64; 2] {
        let n = self.norm();
        [-(self.m[1] as f64) / n, self.m[0] as f64 / n]
    }

    pub fn start(&self) -> [f64; 2] {
        let nu = self.normal();
        [self.phase * nu[0], self.phase * nu[1]]
    }

    /// Point at arclength `s` (not reduced modulo 1).
    pub fn point(&self, s: f64) -> [f64; 2] {
        let o = self.start();
        let t = self.tangent();
        [o[0] + s * t[0], o[1] + s * t[1]]
    }

    /// Sorted arclengths in `[0, |m|]` (endpoints included) at which a
    /// coordinate selected by `mask` crosses an integer.
    pub fn cell_crossings(&self, mask: u8) -> Vec<f64> {
        let len = self.length();
        let o = self.start();
        let t = self.tangent();
        let mut out = vec![0.0, len];
        for i in 0..2 {
            if mask & (1 << i) == 0 || t[i] == 0.0 {
                continue;
            }
            let (a, b) = (o[i], o[i] + len * t[i]);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let mut k = lo.ceil();
            while k <= hi {
                let s = (k - o[i]) / t[i];
                if s > 0.0 && s < len {
                    out.push(s);
                }
                k += 1.0;
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    const SINSIN: &str = "abs(sin(pi*y1)*sin(pi*y2))";

    fn field(src: &str) -> PeriodicField {
        PeriodicField::parse(src, 2).unwrap()
    }

    #[test]
    fn eval_examples() {
        let g = field(SINSIN);
        assert_relative_eq!(g.eval(&[0.0, 0.0], &[0.5, 0.5]).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(g.eval(&[0.0, 0.0], &[1.5, 0.5]).unwrap(), 1.0, epsilon = 1e-15);
        let s = field("sin(2*pi*y1)^2");
        assert_relative_eq!(s.eval(&[0.0, 0.0], &[0.25, 0.9]).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn non_periodic_density_rejected() {
        assert!(PeriodicField::parse("y1^2", 2).is_err());
        assert!(PeriodicField::parse("sin(y2)", 2).is_err());
        assert!(PeriodicField::parse("x1^2 + sin(2*pi*y2)", 2).is_ok());
    }

    #[test]
    fn eval_error_points_at_division() {
        let g = field("1/(x1 - 1) + y1*0");
        match g.eval(&[1.0, 0.0], &[0.2, 0.2]) {
            Err(Error::Eval { column, .. }) => assert_eq!(column, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cell_average_examples() {
        assert_relative_eq!(field(SINSIN).cell_average(&[0.0, 0.0], 2).unwrap(), 4.0 / (PI * PI), epsilon = 1e-10);
        assert_relative_eq!(field("7").cell_average(&[0.0, 0.0], 2).unwrap(), 7.0, epsilon = 1e-15);
        // antiderivative of sin^2(2 pi t) is t/2 - sin(4 pi t)/(8 pi)
        let oracle = |t: f64| t / 2.0 - (4.0 * PI * t).sin() / (8.0 * PI);
        assert_relative_eq!(
            field("sin(2*pi*y1)^2").cell_average(&[0.0, 0.0], 2).unwrap(),
            oracle(1.0) - oracle(0.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn cell_average_depends_on_anchor() {
        let g = field("(1 + x2^2) * sin(pi*y1)^2");
        assert_relative_eq!(g.cell_average(&[0.3, 2.0], 2).unwrap(), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn cell_average_three_dimensional() {
        let g = PeriodicField::parse("cos(2*pi*y1)^2 * cos(2*pi*y3)^2 + y2*0", 3).unwrap();
        assert_relative_eq!(g.cell_average(&[0.0; 3], 2).unwrap(), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn loop_average_examples() {
        let s = field("sin(2*pi*y1)^2");
        let lp = TorusLoop::new([1, 0], 0.0).unwrap();
        assert_relative_eq!(s.loop_average(&[0.0, 0.0], &lp, 64).unwrap(), 0.0, epsilon = 1e-15);
        let c = 0.1;
        let lp = TorusLoop::new([1, 0], c).unwrap();
        assert_relative_eq!(
            s.loop_average(&[0.0, 0.0], &lp, 64).unwrap(),
            (2.0 * PI * c).sin().powi(2),
            epsilon = 1e-14
        );
        let s2 = field("sin(2*pi*y2)^2");
        for phase in [0.0, 0.3, 0.77] {
            let lp = TorusLoop::new([1, 0], phase).unwrap();
            assert_relative_eq!(s2.loop_average(&[0.0, 0.0], &lp, 64).unwrap(), 0.5, epsilon = 1e-13);
        }
        let g = field(SINSIN);
        for a in [0.0, 0.25, 0.5, 0.9] {
            let lp = TorusLoop::new([1, 0], a).unwrap();
            assert_relative_eq!(
                g.loop_average(&[0.0, 0.0], &lp, 64).unwrap(),
                2.0 / PI * (PI * a).sin().abs(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn loop_requires_primitive_vector() {
        assert!(TorusLoop::new([2, 4], 0.0).is_err());
        assert!(TorusLoop::new([0, 0], 0.0).is_err());
        assert!(TorusLoop::new([0, -1], 0.0).is_ok());
        let g = field(SINSIN);
        let lp = TorusLoop::new([1, 1], 0.0).unwrap();
        assert!(g.loop_average(&[0.0, 0.0], &lp, 8).is_err());
    }

    #[test]
    fn loop_closes_after_its_length() {
        for m in [[1, 0], [2, 3], [-5, 2], [7, -4]] {
            let lp = TorusLoop::new(m, 0.13).unwrap();
            let a = lp.point(0.0);
            let b = lp.point(lp.length());
            for i in 0..2 {
                let d = b[i] - a[i];
                assert!((d - d.round()).abs() < 1e-12, "m={m:?}");
            }
        }
    }

    #[test]
    fn loop_identification_over_phase_period() {
        let g = field("abs(sin(pi*y1)*sin(pi*y2)) + 0.3*cos(2*pi*(y1 + 2*y2))");
        for m in [[1, 1], [2, 1], [1, -3]] {
            let a = TorusLoop::new(m, 0.05).unwrap();
            let b = TorusLoop::new(m, 0.05 + a.phase_period()).unwrap();
            let va = g.loop_average(&[0.0, 0.0], &a, 64).unwrap();
            let vb = g.loop_average(&[0.0, 0.0], &b, 64).unwrap();
            assert!((va - vb).abs() < 1e-10, "m={m:?}: {va} vs {vb}");
        }
    }

    #[test]
    fn layered_density_phase_average_recovers_cell_average() {
        let g = field("1 + cos(2*pi*y1) + 0.5*sin(4*pi*y1)^2");
        let mean = g.cell_average(&[0.0, 0.0], 2).unwrap();
        let lp_phases = 64;
        let avg: f64 = (0..lp_phases)
            .map(|k| {
                let lp = TorusLoop::new([0, 1], k as f64 / lp_phases as f64).unwrap();
                g.loop_average(&[0.0, 0.0], &lp, 64).unwrap()
            })
            .sum::<f64>()
            / lp_phases as f64;
        assert!((avg - mean).abs() < 1e-6);
    }

    #[test]
    fn y_independent_density_agrees_everywhere() {
        let g = field("x1^2 + 3*x2");
        let x = [0.7, -1.2];
        let exact = g.eval(&x, &[0.0, 0.0]).unwrap();
        assert_relative_eq!(exact, 0.49 - 3.6, epsilon = 1e-14);
        assert_eq!(g.eval(&x, &[0.3, 0.9]).unwrap(), exact);
        assert_eq!(g.cell_average(&x, 2).unwrap(), exact);
        let lp = TorusLoop::new([2, 3], 0.1).unwrap();
        assert_relative_eq!(g.loop_average(&x, &lp, 16).unwrap(), exact, epsilon = 1e-13);
    }
}
