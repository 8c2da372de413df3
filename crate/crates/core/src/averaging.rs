//! Directional averages of a periodic density: full-torus averages for
//! irrational directions, phase-optimized loop averages for rational ones,
//! Weyl lattice sums, and the covering scales `M_eps`, `rho_eps`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::field::{PeriodicField, TorusLoop, DEFAULT_QUAD_PER_UNIT};
use crate::geometry::{Curve, Direction, DirectionClass, Point};
use crate::oscillatory::integrator::{integrate_curve, OscillatoryQuadrature};
use crate::quadrature::{pairwise_sum, GaussLegendre};

/// Largest `N` enumerated exactly for two frequencies.
pub const WEYL_EXACT_LIMIT_2D: u64 = 512;
pub const DEFAULT_MAX_LOOP_EVALS: u64 = 100_000_000;
const WEYL_SAMPLES_2D: u64 = 1025 * 1025;

/// A normalized lattice sum `|I_N|^{-1} sum_{k in I_N} h(k . nu')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylSum {
    pub nu_prime: Vec<f64>,
    pub n: u64,
    pub value: f64,
    /// `int_0^1 h`.
    pub target: f64,
    /// Number of lattice points actually summed.
    pub points: u64,
    /// True when the lattice was too large and a random subset was used.
    pub sampled: bool,
}

impl WeylSum {
    pub fn error(&self) -> f64 {
        (self.value - self.target).abs()
    }
}

/// Averages `h(a_k)`, `a_k = k . nu' mod 1`, over the cube `I_N = [-N, N]^d`.
///
/// `h` is read as a function of `y1` alone. For `d = 2` and `N` above
/// [`WEYL_EXACT_LIMIT_2D`] a seeded uniform sample of lattice points replaces
/// the full enumeration and the result is marked `sampled`.
pub fn weyl_average(h: &PeriodicField, nu_prime: &[f64], n: u64, seed: u64) -> Result<WeylSum> {
    if h.depends_on_x() || h.y_mask() & !1 != 0 {
        return Err(domain("lattice averages need a density in y1 only"));
    }
    if n == 0 {
        return Err(domain("N must be >= 1"));
    }
    let origin = vec![0.0; h.dim()];
    let eval = |a: f64| -> Result<f64> {
        let mut y = vec![0.0; h.dim()];
        y[0] = a.rem_euclid(1.0);
        h.eval(&origin, &y)
    };
    let ni = n as i64;
    let (value, points, sampled) = match nu_prime {
        [v] => {
            let rows: Vec<f64> = (-ni..=ni)
                .collect::<Vec<_>>()
                .par_chunks(4096)
                .map(|ks| {
                    let vals = ks.iter().map(|&k| eval(k as f64 * v)).collect::<Result<Vec<_>>>()?;
                    Ok(pairwise_sum(&vals))
                })
                .collect::<Result<Vec<_>>>()?;
            let count = 2 * n + 1;
            (pairwise_sum(&rows) / count as f64, count, false)
        }
        [v1, v2] if n <= WEYL_EXACT_LIMIT_2D => {
            let rows: Vec<f64> = (-ni..=ni)
                .into_par_iter()
                .map(|k1| {
                    let base = (k1 as f64 * v1).rem_euclid(1.0);
                    let vals = (-ni..=ni).map(|k2| eval(base + k2 as f64 * v2)).collect::<Result<Vec<_>>>()?;
                    Ok(pairwise_sum(&vals))
                })
                .collect::<Result<Vec<_>>>()?;
            let count = (2 * n + 1).pow(2);
            (pairwise_sum(&rows) / count as f64, count, false)
        }
        [v1, v2] => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vals = (0..WEYL_SAMPLES_2D)
                .map(|_| {
                    let k1 = rng.gen_range(-ni..=ni);
                    let k2 = rng.gen_range(-ni..=ni);
                    let a = (k1 as f64 * v1).rem_euclid(1.0) + (k2 as f64 * v2).rem_euclid(1.0);
                    eval(a)
                })
                .collect::<Result<Vec<_>>>()?;
            (pairwise_sum(&vals) / WEYL_SAMPLES_2D as f64, WEYL_SAMPLES_2D, true)
        }
        _ => {
            return Err(Error::UnsupportedDimension(format!(
                "lattice sums take 1 or 2 frequencies, got {}",
                nu_prime.len()
            )))
        }
    };
    let target = h.cell_average(&origin, 2)?;
    Ok(WeylSum { nu_prime: nu_prime.to_vec(), n, value, target, points, sampled })
}

/// How the upper and lower averages were obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mechanism {
    /// Irrational normal: the plane equidistributes on the torus.
    Foliation,
    /// Rational normal: extremes over the phases of a closed loop.
    RationalLoop { m: [i64; 2] },
    /// Classification undecided; the band comes from the nearby approximant.
    Degenerate { approximant: [i64; 2] },
}

/// `(lower, mean, upper)` directional averages at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingTriple {
    pub lower: f64,
    pub mean: f64,
    pub upper: f64,
    pub mechanism: Mechanism,
    pub phase_argmax: Option<f64>,
    pub phase_argmin: Option<f64>,
}

impl AveragingTriple {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn is_flagged(&self) -> bool {
        matches!(self.mechanism, Mechanism::Degenerate { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TripleOptions {
    /// Uniform phase grid size before refinement.
    pub phases: usize,
    /// Loop quadrature panels per unit length.
    pub quad_per_unit: usize,
    /// Starting grid for the cell average.
    pub cell_grid: usize,
    /// Golden-section stopping width in phase.
    pub phase_tol: f64,
    /// Cap on density evaluations for one loop scan; long loops (large
    /// `|m|`) beyond it are refused rather than left to run for minutes.
    pub max_loop_evals: u64,
}

impl Default for TripleOptions {
    fn default() -> Self {
        Self {
            phases: 256,
            quad_per_unit: DEFAULT_QUAD_PER_UNIT,
            cell_grid: 2,
            phase_tol: 1e-8,
            max_loop_evals: DEFAULT_MAX_LOOP_EVALS,
        }
    }
}

/// Lower, mean and upper averages of `f(z, .)` over planes with normal `dir`.
pub fn directional_triple(
    f: &PeriodicField,
    z: &[f64],
    dir: &Direction,
    opts: &TripleOptions,
) -> Result<AveragingTriple> {
    if dir.dim() != f.dim() || z.len() != f.dim() {
        return Err(domain(format!(
            "dimension mismatch: density n = {}, point {}, direction {}",
            f.dim(),
            z.len(),
            dir.dim()
        )));
    }
    if opts.phases < 2 {
        return Err(domain("phase grid needs at least 2 phases"));
    }
    let mean = f.cell_average(z, opts.cell_grid)?;
    let lattice = match &dir.class {
        DirectionClass::Irrational => {
            return Ok(AveragingTriple {
                lower: mean,
                mean,
                upper: mean,
                mechanism: Mechanism::Foliation,
                phase_argmax: None,
                phase_argmin: None,
            })
        }
        DirectionClass::Rational { m } => m,
        DirectionClass::Undetermined { approximant, .. } => approximant,
    };
    if f.dim() != 2 {
        return Err(Error::UnsupportedDimension("rational directions are supported only in the plane".into()));
    }
    let m = [lattice[0], lattice[1]];
    // Loops with no dependence on y collapse immediately.
    if !f.depends_on_y() {
        let mechanism = loop_mechanism(&dir.class, m);
        return Ok(AveragingTriple {
            lower: mean,
            mean,
            upper: mean,
            mechanism,
            phase_argmax: Some(0.0),
            phase_argmin: Some(0.0),
        });
    }
    let lp = TorusLoop::new(m, 0.0)?;
    let period = lp.phase_period();
    let step = period / opts.phases as f64;
    // Grid plus two golden-section searches of roughly 40 probes each.
    let evals = ((opts.phases + 80) as f64 * (lp.length() * opts.quad_per_unit as f64 + 4.0) * 8.0) as u64;
    if evals > opts.max_loop_evals {
        return Err(Error::Budget { requested: evals, cap: opts.max_loop_evals });
    }
    let loop_at = |c: f64| -> Result<f64> { f.loop_average(z, &TorusLoop::new(m, c)?, opts.quad_per_unit) };
    let grid: Vec<f64> =
        (0..opts.phases).into_par_iter().map(|k| loop_at(k as f64 * step)).collect::<Result<Vec<_>>>()?;
    let (kmax, kmin) = extreme_indices(&grid);

    if let DirectionClass::Undetermined { .. } = dir.class {
        return Ok(AveragingTriple {
            lower: grid[kmin],
            mean,
            upper: grid[kmax],
            mechanism: Mechanism::Degenerate { approximant: m },
            phase_argmax: Some(kmax as f64 * step),
            phase_argmin: Some(kmin as f64 * step),
        });
    }

    let c_max = kmax as f64 * step;
    let c_min = kmin as f64 * step;
    let (pmax, vmax) = golden_section(|c| loop_at(c).map(|v| -v), c_max - step, c_max + step, opts.phase_tol)?;
    let (pmin, vmin) = golden_section(loop_at, c_min - step, c_min + step, opts.phase_tol)?;
    let (upper, argmax) = if -vmax > grid[kmax] { (-vmax, pmax) } else { (grid[kmax], c_max) };
    let (lower, argmin) = if vmin < grid[kmin] { (vmin, pmin) } else { (grid[kmin], c_min) };
    Ok(AveragingTriple {
        lower,
        mean,
        upper,
        mechanism: Mechanism::RationalLoop { m },
        phase_argmax: Some(argmax.rem_euclid(period)),
        phase_argmin: Some(argmin.rem_euclid(period)),
    })
}

fn loop_mechanism(class: &DirectionClass, m: [i64; 2]) -> Mechanism {
    match class {
        DirectionClass::Undetermined { .. } => Mechanism::Degenerate { approximant: m },
        _ => Mechanism::RationalLoop { m },
    }
}

fn extreme_indices(v: &[f64]) -> (usize, usize) {
    let mut imax = 0;
    let mut imin = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[imax] {
            imax = i;
        }
        if *x < v[imin] {
            imin = i;
        }
    }
    (imax, imin)
}

/// Minimizes `f` on `[a, b]`; returns the best point seen and its value.
fn golden_section<F>(f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

/// Covering scales for a curve whose normal has modulus `tau(s) = L s`:
/// `M = sqrt(min(1/tau(eps), 1/eps))` and `rho = eps M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalePair {
    pub epsilon: f64,
    pub lipschitz: f64,
    pub m: f64,
    pub rho: f64,
    /// `M tau(eps M)`.
    pub flatness: f64,
    /// `sqrt(tau(sqrt eps))`.
    pub flatness_bound: f64,
    /// Whether `flatness <= flatness_bound`.
    pub bound_holds: bool,
}

pub fn scale_pair(epsilon: f64, lipschitz: f64) -> Result<ScalePair> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(domain(format!("eps must lie in (0, 1), got {epsilon}")));
    }
    if !(lipschitz >= 0.0) || !lipschitz.is_finite() {
        return Err(domain(format!("Lipschitz constant must be finite and >= 0, got {lipschitz}")));
    }
    let tau = |s: f64| lipschitz * s;
    let inv_tau = if lipschitz == 0.0 { f64::INFINITY } else { 1.0 / tau(epsilon) };
    let m = inv_tau.min(1.0 / epsilon).sqrt();
    let rho = epsilon * m;
    let flatness = m * tau(rho);
    let flatness_bound = tau(epsilon.sqrt()).sqrt();
    Ok(ScalePair {
        epsilon,
        lipschitz,
        m,
        rho,
        flatness,
        flatness_bound,
        bound_holds: flatness <= flatness_bound * (1.0 + 1e-12),
    })
}

/// Mean of `f(z, y/eps)` over the plane through `z` with normal `nu`,
/// clipped to the cube of half-side `r` around `z`.
///
/// In the plane this is a segment integral; in space the cross-section
/// polygon is triangulated and integrated with collapsed Gauss rules on
/// sub-triangles of diameter about `eps / ppw`.
pub fn plane_average_finite(
    f: &PeriodicField,
    z: &[f64],
    nu: &[f64],
    eps: f64,
    r: f64,
    quad: &OscillatoryQuadrature,
) -> Result<f64> {
    if !(r > 0.0) || !(eps > 0.0) {
        return Err(domain("plane average needs r > 0 and eps > 0"));
    }
    if z.len() != f.dim() || nu.len() != f.dim() {
        return Err(domain("dimension mismatch between density, point and normal"));
    }
    let norm = nu.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(domain("normal must be a nonzero finite vector"));
    }
    let nu: Vec<f64> = nu.iter().map(|c| c / norm).collect();
    match f.dim() {
        2 => {
            let t = [-nu[1], nu[0]];
            let half = r / t[0].abs().max(t[1].abs());
            let p0 = [z[0] - half * t[0], z[1] - half * t[1]];
            let p1 = [z[0] + half * t[0], z[1] + half * t[1]];
            let seg = Curve::segment(p0, p1)?;
            let est =
                integrate_curve(&seg, eps, quad, f.y_mask(), |s| f.eval(z, &[s.point[0] / eps, s.point[1] / eps]))?;
            Ok(est.value / (2.0 * half))
        }
        3 => plane_average_3d(f, z, &nu, eps, r, quad),
        n => Err(Error::UnsupportedDimension(format!("plane averages need n = 2 or 3, got {n}"))),
    }
}

fn plane_average_3d(
    f: &PeriodicField,
    z: &[f64],
    nu: &[f64],
    eps: f64,
    r: f64,
    quad: &OscillatoryQuadrature,
) -> Result<f64> {
    let (u, v) = plane_basis(nu);
    // Cross-section of the cube in plane coordinates (a, b).
    let big = 2.0 * r;
    let mut poly: Vec<Point> = vec![[-big, -big], [big, -big], [big, big], [-big, big]];
    for i in 0..3 {
        for sign in [1.0, -1.0] {
            let (ca, cb) = (sign * u[i], sign * v[i]);
            poly = clip_half_plane(&poly, ca, cb, r);
        }
    }
    if poly.len() < 3 {
        return Err(domain("empty plane section"));
    }
    let h = (eps / quad.ppw as f64).min(quad.h_cap);
    let rule = GaussLegendre::cached(quad.nodes_per_panel);
    let mut tris = Vec::new();
    for i in 1..poly.len() - 1 {
        tris.push([poly[0], poly[i], poly[i + 1]]);
    }
    let mut estimate: u64 = 0;
    for t in &tris {
        let n = (tri_diameter(t) / h).ceil() as u64;
        estimate += n * n * (rule.len() as u64).pow(2);
    }
    if estimate > quad.node_cap {
        return Err(Error::Budget { requested: estimate, cap: quad.node_cap });
    }
    let eval_at = |p: Point| -> Result<f64> {
        let y: Vec<f64> = (0..3).map(|i| (z[i] + p[0] * u[i] + p[1] * v[i]) / eps).collect();
        f.eval(z, &y)
    };
    let mut sums = Vec::new();
    let mut areas = Vec::new();
    for t in &tris {
        let n = ((tri_diameter(t) / h).ceil() as usize).max(1);
        let lattice = |i: usize, j: usize| -> Point {
            let (s, q) = (i as f64 / n as f64, j as f64 / n as f64);
            [
                t[0][0] + s * (t[1][0] - t[0][0]) + q * (t[2][0] - t[0][0]),
                t[0][1] + s * (t[1][1] - t[0][1]) + q * (t[2][1] - t[0][1]),
            ]
        };
        let rows: Vec<(f64, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0;
                let mut area = 0.0;
                for j in 0..n - i {
                    let mut subs = vec![[lattice(i, j), lattice(i + 1, j), lattice(i, j + 1)]];
                    if i + j + 1 < n {
                        subs.push([lattice(i + 1, j), lattice(i + 1, j + 1), lattice(i, j + 1)]);
                    }
                    for s in subs {
                        let (val, a) = duffy(&s, rule, &eval_at)?;
                        acc += val;
                        area += a;
                    }
                }
                Ok((acc, area))
            })
            .collect::<Result<Vec<_>>>()?;
        sums.push(pairwise_sum(&rows.iter().map(|r| r.0).collect::<Vec<_>>()));
        areas.push(pairwise_sum(&rows.iter().map(|r| r.1).collect::<Vec<_>>()));
    }
    Ok(pairwise_sum(&sums) / pairwise_sum(&areas))
}

/// Collapsed tensor Gauss rule on a triangle; returns the integral and area.
fn duffy<F>(t: &[Point; 3], rule: &GaussLegendre, f: &F) -> Result<(f64, f64)>
where
    F: Fn(Point) -> Result<f64>,
{
    let twice_area = ((t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[1][1] - t[0][1]) * (t[2][0] - t[0][0])).abs();
    let mut acc = 0.0;
    for (xs, ws) in rule.nodes.iter().zip(&rule.weights) {
        let s = 0.5 * (1.0 + xs);
        for (xq, wq) in rule.nodes.iter().zip(&rule.weights) {
            let q = 0.5 * (1.0 + xq);
            let p = [
                t[0][0] + s * (t[1][0] - t[0][0]) + s * q * (t[2][0] - t[1][0]),
                t[0][1] + s * (t[1][1] - t[0][1]) + s * q * (t[2][1] - t[1][1]),
            ];
            acc += 0.25 * ws * wq * s * f(p)?;
        }
    }
    Ok((acc * twice_area, 0.5 * twice_area))
}

fn tri_diameter(t: &[Point; 3]) -> f64 {
    let d = |a: Point, b: Point| (a[0] - b[0]).hypot(a[1] - b[1]);
    d(t[0], t[1]).max(d(t[1], t[2])).max(d(t[0], t[2]))
}

/// Orthonormal basis of the plane orthogonal to the unit vector `nu`.
fn plane_basis(nu: &[f64]) -> ([f64; 3], [f64; 3]) {
    let k = (0..3).min_by(|&a, &b| nu[a].abs().total_cmp(&nu[b].abs())).unwrap();
    let mut e = [0.0; 3];
    e[k] = 1.0;
    let d = e[0] * nu[0] + e[1] * nu[1] + e[2] * nu[2];
    let mut u = [e[0] - d * nu[0], e[1] - d * nu[1], e[2] - d * nu[2]];
    let nu_ = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    u.iter_mut().for_each(|c| *c /= nu_);
    let v = [nu[1] * u[2] - nu[2] * u[1], nu[2] * u[0] - nu[0] * u[2], nu[0] * u[1] - nu[1] * u[0]];
    (u, v)
}

/// Sutherland–Hodgman clip of a convex polygon against `ca a + cb b <= r`.
fn clip_half_plane(poly: &[Point], ca: f64, cb: f64, r: f64) -> Vec<Point> {
    let inside = |p: &Point| ca * p[0] + cb * p[1] <= r;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let cur = poly[i];
        let prev = poly[(i + poly.len() - 1) % poly.len()];
        let (ic, ip) = (inside(&cur), inside(&prev));
        if ic != ip {
            let fp = ca * prev[0] + cb * prev[1] - r;
            let fc = ca * cur[0] + cb * cur[1] - r;
            let s = fp / (fp - fc);
            out.push([prev[0] + s * (cur[0] - prev[0]), prev[1] + s * (cur[1] - prev[1])]);
        }
        if ic {
            out.push(cur);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{classify_direction, ClassifyOptions};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn field(src: &str) -> PeriodicField {
        PeriodicField::parse(src, 2).unwrap()
    }

    fn rational(m: [i64; 2]) -> Direction {
        classify_direction(&[m[0] as f64, m[1] as f64], &ClassifyOptions::default()).unwrap()
    }

    const SINSIN: &str = "abs(sin(pi*y1)*sin(pi*y2))";

    #[test]
    fn weyl_constant_is_exact() {
        let w = weyl_average(&field("1"), &[2f64.sqrt() - 1.0], 50, 0).unwrap();
        assert_eq!(w.value, 1.0);
        assert_eq!(w.points, 101);
    }

    #[test]
    fn weyl_exponential_decays_for_irrational_frequency() {
        let v = 2f64.sqrt() - 1.0;
        let re = weyl_average(&field("cos(2*pi*y1)"), &[v], 100_000, 0).unwrap();
        let im = weyl_average(&field("sin(2*pi*y1)"), &[v], 100_000, 0).unwrap();
        assert!(re.value.hypot(im.value) <= 1e-3);
    }

    #[test]
    fn weyl_rational_frequency_sees_a_finite_orbit() {
        // Orbit oracle: {0, 1/2} visited equally (up to the one extra k = 0 term).
        let w = weyl_average(&field("cos(4*pi*y1)"), &[0.5], 1000, 0).unwrap();
        assert_abs_diff_eq!(w.value, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.target, 0.0, epsilon = 1e-10);
        let w = weyl_average(&field("sin(2*pi*y1)^2"), &[1.0 / 3.0], 30_000, 0).unwrap();
        assert_abs_diff_eq!(w.value, 0.5, epsilon = 1e-4);
    }

    #[test]
    fn weyl_two_frequencies_exact_and_sampled() {
        let h = field("sin(2*pi*y1)^2");
        let nu = [2f64.sqrt() - 1.0, 3f64.sqrt() - 1.0];
        let exact = weyl_average(&h, &nu, 64, 0).unwrap();
        assert!(!exact.sampled);
        assert_eq!(exact.points, 129 * 129);
        assert!(exact.error() < 1e-3);
        let sampled = weyl_average(&h, &nu, 2000, 7).unwrap();
        assert!(sampled.sampled);
        assert!(sampled.error() < 5e-3);
        let again = weyl_average(&h, &nu, 2000, 7).unwrap();
        assert_eq!(sampled.value, again.value);
    }

    #[test]
    fn weyl_rejects_mixed_densities() {
        assert!(weyl_average(&field("sin(2*pi*y2)"), &[0.3], 10, 0).is_err());
        assert!(weyl_average(&field("x1*sin(2*pi*y1)"), &[0.3], 10, 0).is_err());
        assert!(weyl_average(&field("1"), &[0.3, 0.2, 0.1], 10, 0).is_err());
    }

    #[test]
    fn triple_for_layered_density_on_axis_loop() {
        let t = directional_triple(&field("sin(2*pi*y1)^2"), &[0.0, 0.0], &rational([1, 0]), &TripleOptions::default())
            .unwrap();
        assert_abs_diff_eq!(t.lower, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(t.upper, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(t.mean, 0.5, epsilon = 1e-9);
        assert_eq!(t.mechanism, Mechanism::RationalLoop { m: [1, 0] });
    }

    #[test]
    fn triple_for_product_density_on_horizontal_loop() {
        let t = directional_triple(&field(SINSIN), &[0.3, -0.2], &rational([0, 1]), &TripleOptions::default()).unwrap();
        assert_abs_diff_eq!(t.upper, 2.0 / PI, epsilon = 1e-10);
        assert_abs_diff_eq!(t.lower, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(t.phase_argmax.unwrap(), 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(t.phase_argmin.unwrap(), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn triple_collapses_for_irrational_normal() {
        let dir = classify_direction(&[1.0, 2f64.sqrt()], &ClassifyOptions::default()).unwrap();
        let t = directional_triple(&field(SINSIN), &[0.0, 0.0], &dir, &TripleOptions::default()).unwrap();
        assert_eq!(t.mechanism, Mechanism::Foliation);
        assert_abs_diff_eq!(t.mean, 4.0 / (PI * PI), epsilon = 1e-8);
        assert!(t.width() <= 1e-6);
    }

    #[test]
    fn triple_orders_and_argmax_repeats_across_loop_period() {
        let f = field("cos(2*pi*(y1 + 2*y2)) + 0.3*sin(2*pi*y1)^2");
        let dir = rational([2, -1]);
        let t = directional_triple(&f, &[0.1, 0.2], &dir, &TripleOptions::default()).unwrap();
        assert!(t.lower <= t.mean + 1e-8 && t.mean <= t.upper + 1e-8);
        let lp = TorusLoop::new([2, -1], t.phase_argmax.unwrap()).unwrap();
        let shifted = TorusLoop::new([2, -1], t.phase_argmax.unwrap() + lp.phase_period()).unwrap();
        let a = f.loop_average(&[0.1, 0.2], &lp, 64).unwrap();
        let b = f.loop_average(&[0.1, 0.2], &shifted, 64).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        assert_abs_diff_eq!(a, t.upper, epsilon = 1e-10);
    }

    #[test]
    fn undetermined_direction_is_degenerate() {
        let dir = classify_direction(&[0.6 + 2e-8, 0.8], &ClassifyOptions::default()).unwrap();
        let t = directional_triple(&field(SINSIN), &[0.0, 0.0], &dir, &TripleOptions::default()).unwrap();
        assert!(t.is_flagged());
        assert!(t.lower <= t.mean && t.mean <= t.upper);
    }

    #[test]
    fn rational_in_space_is_unsupported() {
        let f = PeriodicField::parse("sin(2*pi*y3)", 3).unwrap();
        let dir = classify_direction(&[0.0, 0.0, 1.0], &ClassifyOptions::default()).unwrap();
        assert!(matches!(
            directional_triple(&f, &[0.0; 3], &dir, &TripleOptions::default()),
            Err(Error::UnsupportedDimension(_))
        ));
        let dir = classify_direction(&[1.0, 2f64.sqrt(), 3f64.sqrt()], &ClassifyOptions::default()).unwrap();
        let t = directional_triple(&f, &[0.0; 3], &dir, &TripleOptions::default()).unwrap();
        assert_abs_diff_eq!(t.mean, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn scale_pairs() {
        let s = scale_pair(1e-4, 1.0).unwrap();
        assert_abs_diff_eq!(s.m, 100.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.rho, 1e-2, epsilon = 1e-15);
        let s = scale_pair(1e-4, 100.0).unwrap();
        assert_abs_diff_eq!(s.m, 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.rho, 1e-3, epsilon = 1e-15);
        let s = scale_pair(0.25, 1.0).unwrap();
        assert_abs_diff_eq!(s.m, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.rho, 0.5, epsilon = 1e-12);
        // For a linear modulus M tau(eps M) = min(1, L), which exceeds
        // sqrt(L) eps^{1/4} once eps is small.
        let s = scale_pair(1e-4, 1.0).unwrap();
        assert_abs_diff_eq!(s.flatness, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.flatness_bound, 0.1, epsilon = 1e-12);
        assert!(!s.bound_holds);
        let s = scale_pair(1e-4, 0.0).unwrap();
        assert_abs_diff_eq!(s.m, 100.0, epsilon = 1e-9);
        assert!(s.bound_holds);
        assert!(scale_pair(1.5, 1.0).is_err());
    }

    #[test]
    fn plane_average_constant_and_vertical_layer() {
        let q = OscillatoryQuadrature::default();
        let v = plane_average_finite(&field("3"), &[0.2, 0.1], &[1.0, 2.0], 0.01, 1.5, &q).unwrap();
        assert_abs_diff_eq!(v, 3.0, epsilon = 1e-12);
        let eps = 0.01;
        let c = 0.1;
        for r in [0.5, 2.0] {
            let v = plane_average_finite(&field("sin(2*pi*y1)^2"), &[c * eps, 0.0], &[1.0, 0.0], eps, r, &q).unwrap();
            assert_abs_diff_eq!(v, (2.0 * PI * c).sin().powi(2), epsilon = 1e-10);
        }
    }

    #[test]
    fn plane_average_irrational_segment() {
        let v = plane_average_finite(
            &field(SINSIN),
            &[0.0, 0.0],
            &[1.0, 2f64.sqrt()],
            1e-3,
            1.0,
            &OscillatoryQuadrature::default(),
        )
        .unwrap();
        assert!((v - 4.0 / (PI * PI)).abs() < 1e-2, "{v}");
    }

    #[test]
    fn plane_average_rational_is_periodic_along_normal() {
        // Shifting the anchor by eps/|m| along nu moves the line by a full loop period.
        let f = field("cos(2*pi*(y1 + y2)) + 0.5*cos(2*pi*y1)");
        let eps = 0.05;
        let nu = [1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()];
        let q = OscillatoryQuadrature::default();
        let shift = eps / 2f64.sqrt();
        // Use a y-only density so the anchor offset matters only through y.
        let a = plane_average_finite(&f, &[0.013, 0.0], &nu, eps, 1.0, &q).unwrap();
        let b = plane_average_finite(&f, &[0.013 + shift * nu[0], shift * nu[1]], &nu, eps, 1.0, &q).unwrap();
        // Finite windows differ only through the clipped ends.
        assert_abs_diff_eq!(a, b, epsilon = 2e-2);
    }

    #[test]
    fn plane_average_in_space() {
        let q = OscillatoryQuadrature::default();
        let f = PeriodicField::parse("2 + 0*x1", 3).unwrap();
        let v = plane_average_finite(&f, &[0.0; 3], &[1.0, 2.0, 3.0], 0.5, 1.0, &q).unwrap();
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-12);
        let f = PeriodicField::parse("sin(2*pi*y1)^2", 3).unwrap();
        let v = plane_average_finite(&f, &[0.0; 3], &[1.0, 2f64.sqrt(), 3f64.sqrt()], 0.05, 1.0, &q).unwrap();
        assert!((v - 0.5).abs() < 2e-2, "{v}");
    }

    #[test]
    fn very_long_loops_hit_the_budget() {
        let v = [-7463.0, -264.0];
        let dir = classify_direction(&v, &ClassifyOptions::default()).unwrap();
        assert_eq!(dir.lattice_vector(), Some(&[-7463i64, -264][..]));
        let err = directional_triple(&field("sin(2*pi*y1)^2"), &[0.0, 0.0], &dir, &TripleOptions::default());
        assert!(matches!(err, Err(Error::Budget { .. })));
    }
}
