//! Composite Gauss–Legendre integration along a curve with panels short
//! enough to resolve oscillations of wavelength `eps`.
//!
//! Panel breakpoints are placed where a fast coordinate `y_i / eps` crosses
//! an integer, so densities that are smooth on the open unit cell (such as
//! `|sin(pi y)|`) are integrated as piecewise-smooth functions. The result is
//! recomputed with doubled panel density until two successive values agree.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::geometry::{Curve, Piece, Point};
use crate::quadrature::{pairwise_sum, GaussLegendre};

pub const DEFAULT_PPW: usize = 16;
pub const DEFAULT_NODE_CAP: u64 = 100_000_000;

/// Quadrature settings for oscillatory curve integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatoryQuadrature {
    /// Panels per wavelength `eps`.
    pub ppw: usize,
    /// Gauss–Legendre nodes per panel.
    pub nodes_per_panel: usize,
    /// Upper bound on the panel length when `eps` is large.
    pub h_cap: f64,
    /// Relative agreement (against the integral of `|integrand|`) required
    /// between successive doublings.
    pub rtol: f64,
    /// Number of `ppw` doublings attempted before reporting an uncertified value.
    pub max_doublings: usize,
    pub node_cap: u64,
}

impl Default for OscillatoryQuadrature {
    fn default() -> Self {
        Self {
            ppw: DEFAULT_PPW,
            nodes_per_panel: 4,
            h_cap: 1.0 / 16.0,
            rtol: 1e-8,
            max_doublings: 1,
            node_cap: DEFAULT_NODE_CAP,
        }
    }
}

impl OscillatoryQuadrature {
    pub fn with_ppw(ppw: usize) -> Self {
        Self { ppw, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.ppw < 8 {
            return Err(domain(format!("panels per wavelength must be >= 8, got {}", self.ppw)));
        }
        if self.nodes_per_panel == 0 || !(self.h_cap > 0.0) {
            return Err(domain("invalid quadrature settings"));
        }
        Ok(())
    }
}

/// A point handed to the integrand.
#[derive(Debug, Clone, Copy)]
pub struct Sample {
    pub point: Point,
    pub normal: Point,
    pub piece: usize,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralEstimate {
    pub value: f64,
    /// Integral of the absolute integrand; the scale for `rtol`.
    pub l1: f64,
    /// Nodes used by the accepted evaluation.
    pub nodes: u64,
    pub ppw: usize,
    pub certified: bool,
    /// `|value - previous|` at the last doubling.
    pub change: f64,
}

/// Integrates `integrand` over `curve` at oscillation scale `eps`, aligning
/// panels with integer crossings of the coordinates selected by `mask`.
pub fn integrate_curve<F>(
    curve: &Curve,
    eps: f64,
    quad: &OscillatoryQuadrature,
    mask: u8,
    integrand: F,
) -> Result<IntegralEstimate>
where
    F: Fn(&Sample) -> Result<f64> + Sync,
{
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(domain(format!("eps must be positive and finite, got {eps}")));
    }
    quad.validate()?;
    let mut ppw = quad.ppw;
    let (mut value, mut l1, mut nodes) = integrate_once(curve, eps, ppw, quad, mask, &integrand)?;
    let mut change = f64::INFINITY;
    for _ in 0..quad.max_doublings {
        let next_ppw = ppw * 2;
        let (v, a, n) = match integrate_once(curve, eps, next_ppw, quad, mask, &integrand) {
            Ok(r) => r,
            Err(Error::Budget { .. }) => break,
            Err(e) => return Err(e),
        };
        change = (v - value).abs();
        value = v;
        l1 = a;
        nodes = n;
        ppw = next_ppw;
        if change <= quad.rtol * l1.max(f64::MIN_POSITIVE) {
            return Ok(IntegralEstimate { value, l1, nodes, ppw, certified: true, change });
        }
    }
    let certified = change <= quad.rtol * l1.max(f64::MIN_POSITIVE);
    Ok(IntegralEstimate { value, l1, nodes, ppw, certified, change })
}

struct Interval {
    piece: usize,
    t0: f64,
    t1: f64,
    panels: usize,
}

fn integrate_once<F>(
    curve: &Curve,
    eps: f64,
    ppw: usize,
    quad: &OscillatoryQuadrature,
    mask: u8,
    integrand: &F,
) -> Result<(f64, f64, u64)>
where
    F: Fn(&Sample) -> Result<f64> + Sync,
{
    let h = (eps / ppw as f64).min(quad.h_cap);
    let k = quad.nodes_per_panel as u64;

    // Cheap upper bound on the node count before any allocation.
    let estimate: u64 =
        curve.pieces().iter().map(|p| ((p.max_speed() / h).ceil() as u64 + crossing_bound(p, eps, mask)) * k).sum();
    if estimate > quad.node_cap {
        return Err(Error::Budget { requested: estimate, cap: quad.node_cap });
    }

    let mut intervals = Vec::new();
    for (i, p) in curve.pieces().iter().enumerate() {
        let breaks = breakpoints(p, eps, mask);
        let speed = p.max_speed();
        for w in breaks.windows(2) {
            let dt = w[1] - w[0];
            if dt <= 0.0 {
                continue;
            }
            let panels = ((speed * dt / h).ceil() as usize).max(1);
            intervals.push(Interval { piece: i, t0: w[0], t1: w[1], panels });
        }
    }
    let nodes: u64 = intervals.iter().map(|iv| iv.panels as u64 * k).sum();

    let rule = GaussLegendre::cached(quad.nodes_per_panel);
    let pieces = curve.pieces();
    let chunk_sums: Vec<(f64, f64)> = intervals
        .par_chunks(2048)
        .map(|chunk| {
            let mut sum = 0.0;
            let mut abs = 0.0;
            for iv in chunk {
                let p = &pieces[iv.piece];
                let dt = (iv.t1 - iv.t0) / iv.panels as f64;
                for j in 0..iv.panels {
                    let lo = iv.t0 + j as f64 * dt;
                    let mut acc = 0.0;
                    let mut acc_abs = 0.0;
                    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                        let t = lo + 0.5 * dt * (1.0 + x);
                        let sample =
                            Sample { point: p.point(t), normal: curve.normal(iv.piece, t), piece: iv.piece, t };
                        let v = integrand(&sample)? * w * p.speed(t);
                        acc += v;
                        acc_abs += v.abs();
                    }
                    sum += 0.5 * dt * acc;
                    abs += 0.5 * dt * acc_abs;
                }
            }
            Ok((sum, abs))
        })
        .collect::<Result<Vec<_>>>()?;
    let sums: Vec<f64> = chunk_sums.iter().map(|c| c.0).collect();
    let abss: Vec<f64> = chunk_sums.iter().map(|c| c.1).collect();
    Ok((pairwise_sum(&sums), pairwise_sum(&abss), nodes))
}

fn crossing_bound(p: &Piece, eps: f64, mask: u8) -> u64 {
    if mask == 0 {
        return 0;
    }
    // Each coordinate crosses at most (extent / eps + 1) levels per monotone
    // stretch; arcs have at most two stretches per coordinate per turn.
    let len = p.length();
    let turns = match p {
        Piece::Arc { angle0, angle1, .. } => ((angle1 - angle0).abs() / PI).ceil() as u64 + 1,
        _ => 1,
    };
    (0..2).filter(|i| mask & (1 << i) != 0).count() as u64 * ((len / eps) as u64 + 2) * turns
}

/// Sorted parameters in `[0, 1]` (endpoints included) where a masked
/// coordinate of `p` divided by `eps` crosses an integer.
pub(crate) fn breakpoints(p: &Piece, eps: f64, mask: u8) -> Vec<f64> {
    let mut out = vec![0.0, 1.0];
    for i in 0..2 {
        if mask & (1 << i) == 0 {
            continue;
        }
        match p {
            Piece::Line { p0, p1 } => {
                let (a, b) = (p0[i] / eps, p1[i] / eps);
                if a == b {
                    continue;
                }
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                let mut k = lo.ceil();
                while k <= hi {
                    let t = (k - a) / (b - a);
                    if t > 0.0 && t < 1.0 {
                        out.push(t);
                    }
                    k += 1.0;
                }
            }
            Piece::Arc { center, radius, angle0, angle1 } => {
                arc_crossings(center[i], *radius, *angle0, *angle1, eps, i == 0, &mut out);
            }
            Piece::Graph(g) => {
                // Only the abscissa is aligned for graphs.
                if i == 0 {
                    let (a, b) = (g.a / eps, g.b / eps);
                    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                    let mut k = lo.ceil();
                    while k <= hi {
                        let t = (k - a) / (b - a);
                        if t > 0.0 && t < 1.0 {
                            out.push(t);
                        }
                        k += 1.0;
                    }
                }
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    out
}

fn arc_crossings(c: f64, r: f64, th0: f64, th1: f64, eps: f64, cosine: bool, out: &mut Vec<f64>) {
    let (lo, hi) = if th0 < th1 { (th0, th1) } else { (th1, th0) };
    let span = th1 - th0;
    let kmin = ((c - r) / eps).ceil() as i64;
    let kmax = ((c + r) / eps).floor() as i64;
    let mut push = |theta: f64| {
        // Shift theta by whole turns into [lo, hi] where possible.
        let n0 = ((lo - theta) / (2.0 * PI)).ceil();
        let mut th = theta + n0 * 2.0 * PI;
        while th <= hi {
            let t = (th - th0) / span;
            if t > 0.0 && t < 1.0 {
                out.push(t);
            }
            th += 2.0 * PI;
        }
    };
    for k in kmin..=kmax {
        let v = ((k as f64 * eps - c) / r).clamp(-1.0, 1.0);
        if cosine {
            let a = v.acos();
            push(a);
            if a != 0.0 && a != PI {
                push(-a);
            }
        } else {
            let a = v.asin();
            push(a);
            if a.abs() != PI / 2.0 {
                push(PI - a);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn breakpoints_on_a_line_hit_integer_levels() {
        let p = Piece::Line { p0: [0.05, 0.0], p1: [1.05, 0.0] };
        let b = breakpoints(&p, 0.25, 0b01);
        // x = 0.25, 0.5, 0.75, 1.0 inside
        assert_eq!(b.len(), 6);
        for t in &b[1..5] {
            let x = p.point(*t)[0] / 0.25;
            assert!((x - x.round()).abs() < 1e-12);
        }
    }

    #[test]
    fn breakpoints_on_an_arc_hit_integer_levels() {
        let p = Piece::Arc { center: [0.013, -0.027], radius: 1.0, angle0: 0.3, angle1: 0.3 + 2.0 * PI };
        let eps = 0.1;
        let b = breakpoints(&p, eps, 0b11);
        // each coordinate sweeps a diameter twice: 2 * 20 levels per coordinate
        assert!(b.len() >= 2 * 2 * 19, "{}", b.len());
        for t in &b[1..b.len() - 1] {
            let q = p.point(*t);
            let hit = (0..2).any(|i| {
                let s = q[i] / eps;
                (s - s.round()).abs() < 1e-9
            });
            assert!(hit, "t={t} point={q:?}");
        }
    }

    #[test]
    fn constant_integrand_gives_length() {
        let c = Curve::stadium(2.0).unwrap();
        let est = integrate_curve(&c, 0.01, &OscillatoryQuadrature::default(), 0b11, |_| Ok(1.0)).unwrap();
        assert_relative_eq!(est.value, 4.0 + 4.0 * PI, max_relative = 1e-12);
        assert!(est.certified);
    }

    #[test]
    fn kinked_density_certifies_with_aligned_panels() {
        let c = Curve::circle([0.0, 0.0], 1.0).unwrap();
        let eps = 1e-2;
        let est = integrate_curve(&c, eps, &OscillatoryQuadrature::default(), 0b11, |s| {
            let y = [s.point[0] / eps, s.point[1] / eps];
            Ok(((PI * y[0]).sin() * (PI * y[1]).sin()).abs())
        })
        .unwrap();
        assert!(est.certified, "change {}", est.change);
    }

    #[test]
    fn node_cap_is_enforced() {
        let c = Curve::circle([0.0, 0.0], 1.0).unwrap();
        let quad = OscillatoryQuadrature { node_cap: 1000, ..Default::default() };
        match integrate_curve(&c, 1e-3, &quad, 0b11, |_| Ok(1.0)) {
            Err(Error::Budget { cap, .. }) => assert_eq!(cap, 1000),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = Curve::circle([0.0, 0.0], 1.0).unwrap();
        assert!(integrate_curve(&c, 0.0, &OscillatoryQuadrature::default(), 0, |_| Ok(1.0)).is_err());
        assert!(integrate_curve(&c, 0.1, &OscillatoryQuadrature::with_ppw(4), 0, |_| Ok(1.0)).is_err());
    }
}
