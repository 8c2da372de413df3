//! Rational/irrational classification of unit directions.
//!
//! A direction `nu` is rational when `nu = m/|m|` for an integer vector `m`.
//! In floating point this is only decidable relative to a height bound `Q`
//! (`max|m_i| <= Q`) and a distance tolerance. In the plane the search runs
//! over the two Farey neighbours of the slope, which bracket it among all
//! fractions of denominator `<= Q`; in three dimensions every height of the
//! dominant component is scanned.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

pub const DEFAULT_HEIGHT_BOUND: u64 = 10_000;
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_PROMOTION_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    /// Height bound `Q` on `max|m_i|`.
    pub height_bound: u64,
    /// Distance below which `nu` is identified with `m/|m|`.
    pub tol: f64,
    /// Band for `Undetermined`: an approximant `m` with
    /// `tol < |nu - m/|m|| <= promotion_margin / max|m_i|^2`.
    pub promotion_margin: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { height_bound: DEFAULT_HEIGHT_BOUND, tol: DEFAULT_TOLERANCE, promotion_margin: DEFAULT_PROMOTION_MARGIN }
    }
}

impl ClassifyOptions {
    pub fn new(height_bound: u64, tol: f64) -> Self {
        Self { height_bound, tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum DirectionClass {
    Rational {
        m: Vec<i64>,
    },
    Irrational,
    /// No admissible `m` within `tol`, but a low-height approximant sits
    /// suspiciously close; reported rather than promoted either way.
    Undetermined {
        approximant: Vec<i64>,
        distance: f64,
    },
}

/// A unit vector with its rationality class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub nu: Vec<f64>,
    pub class: DirectionClass,
    pub height_bound: u64,
    pub tol: f64,
}

impl Direction {
    pub fn dim(&self) -> usize {
        self.nu.len()
    }

    pub fn is_rational(&self) -> bool {
        matches!(self.class, DirectionClass::Rational { .. })
    }

    pub fn is_irrational(&self) -> bool {
        matches!(self.class, DirectionClass::Irrational)
    }

    /// The integer vector for rational directions.
    pub fn lattice_vector(&self) -> Option<&[i64]> {
        match &self.class {
            DirectionClass::Rational { m } => Some(m),
            _ => None,
        }
    }
}

/// Classifies `v` (normalized internally) against integer directions of
/// height at most `opts.height_bound`.
pub fn classify_direction(v: &[f64], opts: &ClassifyOptions) -> Result<Direction> {
    let dim = v.len();
    if !(2..=3).contains(&dim) {
        return Err(domain(format!("directions must have 2 or 3 components, got {dim}")));
    }
    if opts.height_bound < 1 {
        return Err(domain("height bound Q must be >= 1"));
    }
    if !(opts.tol >= 0.0) {
        return Err(domain("tolerance must be nonnegative"));
    }
    let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return Err(domain("cannot classify the zero (or non-finite) vector"));
    }
    let nu: Vec<f64> = v.iter().map(|c| c / norm).collect();

    let candidates =
        if dim == 2 { planar_candidates(&nu, opts.height_bound) } else { spatial_candidates(&nu, opts.height_bound) };

    let mut best: Option<(Vec<i64>, f64)> = None;
    let mut suspicious: Option<(Vec<i64>, f64)> = None;
    for m in candidates {
        let d = distance_to_lattice_direction(&nu, &m);
        if best.as_ref().is_none_or(|(_, bd)| d < *bd) {
            best = Some((m.clone(), d));
        }
        let h = height(&m) as f64;
        if d > opts.tol && d * h * h <= opts.promotion_margin && suspicious.as_ref().is_none_or(|(_, sd)| d < *sd) {
            suspicious = Some((m, d));
        }
    }

    let class = match best {
        Some((m, d)) if d <= opts.tol => DirectionClass::Rational { m },
        _ => match suspicious {
            Some((approximant, distance)) => DirectionClass::Undetermined { approximant, distance },
            None => DirectionClass::Irrational,
        },
    };
    Ok(Direction { nu, class, height_bound: opts.height_bound, tol: opts.tol })
}

/// `|nu - m/|m||` for a unit `nu`.
pub fn distance_to_lattice_direction(nu: &[f64], m: &[i64]) -> f64 {
    let mnorm = m.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt();
    nu.iter()
        .zip(m)
        .map(|(a, &b)| {
            let d = a - b as f64 / mnorm;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

pub fn height(m: &[i64]) -> u64 {
    m.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
}

pub fn gcd(a: u64, b: u64) -> u64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Divides out the common factor of the components.
pub fn primitive(m: &[i64]) -> Vec<i64> {
    let g = m.iter().fold(0u64, |g, &c| gcd(g, c.unsigned_abs()));
    if g <= 1 {
        return m.to_vec();
    }
    m.iter().map(|&c| c / g as i64).collect()
}

/// Candidate integer directions in the plane: every continued-fraction
/// convergent of the slope with denominator `<= q_max`, plus both Farey
/// neighbours of the slope in the Farey sequence of order `q_max`.
fn planar_candidates(nu: &[f64], q_max: u64) -> Vec<Vec<i64>> {
    // Work with the slope of the smaller component over the larger one so
    // that the ratio lies in [0, 1] and the height is the denominator.
    let (major, minor) = if nu[0].abs() >= nu[1].abs() { (0, 1) } else { (1, 0) };
    let ratio = nu[minor].abs() / nu[major].abs();
    let lift = |p: u64, q: u64| {
        let mut m = vec![0i64; 2];
        m[major] = q as i64 * if nu[major] < 0.0 { -1 } else { 1 };
        m[minor] = p as i64 * if nu[minor] < 0.0 { -1 } else { 1 };
        m
    };
    let mut out = Vec::new();
    let fractions = farey_neighbours(ratio, q_max);
    for (p, q) in fractions {
        out.push(lift(p, q));
    }
    out
}

/// Convergents of `x` in `[0, 1]` with denominator `<= q_max`, followed by the
/// two Farey neighbours bracketing `x`. Remainders are recomputed from `x`
/// at every step rather than iterated, which keeps the partial quotients
/// stable for the heights used here.
fn farey_neighbours(x: f64, q_max: u64) -> Vec<(u64, u64)> {
    let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
    let mut out = Vec::new();
    let mut a = x.floor();
    loop {
        let ai = a as u64;
        let q2 = q0 + ai * q1;
        if q2 > q_max {
            break;
        }
        let p2 = p0 + ai * p1;
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        out.push((p1, q1));
        // x - p1/q1 remainder in continued-fraction form.
        let num = q0 as f64 * x - p0 as f64;
        let den = q1 as f64 * x - p1 as f64;
        if den == 0.0 || (den.abs() / q1 as f64) < f64::EPSILON * x.max(1e-300) {
            return out;
        }
        let rem = -num / den;
        if !rem.is_finite() || rem > 1e17 {
            return out;
        }
        a = rem.floor();
    }
    if q1 == 0 {
        // x >= 1 cannot happen for normalized slopes, but keep the bracket sane.
        out.push((1, 1));
        return out;
    }
    let k = (q_max - q0) / q1;
    let lower = (p0 + k * p1, q0 + k * q1);
    out.push(lower);
    out.push((p1, q1));
    out
}

/// Candidates in three dimensions: for every height of the dominant
/// component, the nearest lattice point of the scaled direction.
fn spatial_candidates(nu: &[f64], q_max: u64) -> Vec<Vec<i64>> {
    let major = (0..nu.len()).max_by(|&a, &b| nu[a].abs().total_cmp(&nu[b].abs())).unwrap_or(0);
    let scale = 1.0 / nu[major].abs();
    let mut out = Vec::new();
    for q in 1..=q_max {
        let m: Vec<i64> = nu.iter().map(|&c| (c * scale * q as f64).round() as i64).collect();
        let g = m.iter().fold(0u64, |g, &c| gcd(g, c.unsigned_abs()));
        if g == 1 {
            out.push(m);
        }
    }
    out
}
