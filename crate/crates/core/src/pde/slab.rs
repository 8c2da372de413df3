//! The slab `{-R1 < x . nu < R2}` with constant data `M` on the lower face
//! and a layered density `g(x1/eps)` on the upper face.
//!
//! Limits are linear profiles `M + (A - M)(x . nu + R1)/(R1 + R2)`. When the
//! upper face is a torus loop along which `g` is not constant, every
//! `A` between the loop extremes is a subsequence limit; otherwise `A` is
//! forced to the average.

use serde::{Deserialize, Serialize};

use crate::averaging::{directional_triple, TripleOptions};
use crate::error::{domain, Result};
use crate::field::PeriodicField;
use crate::geometry::{Direction, Point};

/// Which member of the family of limits to return.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SlabLimit {
    /// `A = g*`, the limit superior.
    Upper,
    /// `A = g_*`, the limit inferior.
    Lower,
    /// `A = g-bar`, the cell average.
    Mean,
    /// `A = g(R, M)`: `M` clamped to `[g_*, g*]`, the least-energy limit.
    EnergyMinimizing,
    /// An explicit admissible value.
    Value(f64),
}

#[derive(Debug, Clone)]
pub struct Slab {
    pub nu: Direction,
    pub r1: f64,
    pub r2: f64,
    pub m: f64,
    pub g: PeriodicField,
}

/// The range of admissible `A` and the named members of the family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlabFamily {
    pub lower: f64,
    pub mean: f64,
    pub upper: f64,
    pub energy_minimizing: f64,
    /// False when the face data average out and `A = mean` is forced.
    pub is_family: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlabValue {
    pub value: f64,
    pub a: f64,
}

impl Slab {
    pub fn new(nu: Direction, r1: f64, r2: f64, m: f64, g: PeriodicField) -> Result<Self> {
        if nu.dim() != 2 || g.dim() != 2 {
            return Err(domain("the slab problem is planar"));
        }
        if !(r1 + r2 > 0.0) || !r1.is_finite() || !r2.is_finite() {
            return Err(domain(format!("need -R1 < R2, got R1 = {r1}, R2 = {r2}")));
        }
        if g.depends_on_x() || g.y_mask() & !1 != 0 {
            return Err(domain("slab data must depend on y1 only"));
        }
        if !m.is_finite() {
            return Err(domain("M must be finite"));
        }
        Ok(Self { nu, r1, r2, m, g })
    }

    /// Loop extremes of `g` on the face `x . nu = R2`.
    pub fn family(&self, opts: &TripleOptions) -> Result<SlabFamily> {
        let face_point = [self.r2 * self.nu.nu[0], self.r2 * self.nu.nu[1]];
        let triple = directional_triple(&self.g, &face_point, &self.nu, opts)?;
        let (mut lower, mut upper) = (triple.lower, triple.upper);
        // A face through the origin with normal e1 carries the single value g(0).
        let mut mean = triple.mean;
        let pinned = self.r2 == 0.0 && self.nu.lattice_vector().is_some_and(|m| m[1] == 0);
        if pinned {
            let g0 = self.g.eval(&[0.0, 0.0], &[0.0, 0.0])?;
            (lower, upper, mean) = (g0, g0, g0);
        }
        let is_family = upper - lower > 1e-12;
        if !is_family {
            (lower, upper) = (mean, mean);
        }
        Ok(SlabFamily { lower, mean, upper, energy_minimizing: self.m.clamp(lower, upper), is_family })
    }

    pub fn boundary_value(&self, choice: SlabLimit, opts: &TripleOptions) -> Result<f64> {
        let fam = self.family(opts)?;
        Ok(match choice {
            SlabLimit::Upper => fam.upper,
            SlabLimit::Lower => fam.lower,
            SlabLimit::Mean => fam.mean,
            SlabLimit::EnergyMinimizing => fam.energy_minimizing,
            SlabLimit::Value(a) => {
                if a < fam.lower - 1e-12 || a > fam.upper + 1e-12 {
                    return Err(domain(format!(
                        "A = {a} is not a subsequence limit; admissible range is [{}, {}]",
                        fam.lower, fam.upper
                    )));
                }
                a
            }
        })
    }
}

/// The limit profile selected by `choice`, evaluated at `x`.
pub fn solve_slab(slab: &Slab, choice: SlabLimit, x: Point, opts: &TripleOptions) -> Result<SlabValue> {
    let s = x[0] * slab.nu.nu[0] + x[1] * slab.nu.nu[1];
    if !(s > -slab.r1 && s < slab.r2) {
        return Err(domain(format!("point {x:?} is outside the slab (x . nu = {s})")));
    }
    let a = slab.boundary_value(choice, opts)?;
    Ok(SlabValue { value: linear_profile(slab.m, a, slab.r1, slab.r2, s), a })
}

/// `M + (A - M)(s + R1)/(R1 + R2)`.
pub fn linear_profile(m: f64, a: f64, r1: f64, r2: f64, s: f64) -> f64 {
    m + (a - m) * (s + r1) / (r1 + r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{classify_direction, ClassifyOptions};
    use approx::assert_abs_diff_eq;

    fn dir(v: [f64; 2]) -> Direction {
        classify_direction(&v, &ClassifyOptions::default()).unwrap()
    }

    fn slab(nu: [f64; 2], m: f64) -> Slab {
        Slab::new(dir(nu), 1.0, 1.0, m, PeriodicField::parse("sin(2*pi*y1)^2", 2).unwrap()).unwrap()
    }

    #[test]
    fn axis_normal_gives_the_full_family() {
        let s = slab([1.0, 0.0], 0.0);
        let o = TripleOptions::default();
        let fam = s.family(&o).unwrap();
        assert!(fam.is_family);
        assert_abs_diff_eq!(fam.upper, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fam.lower, 0.0, epsilon = 1e-12);
        let v = solve_slab(&s, SlabLimit::Upper, [0.0, 3.0], &o).unwrap();
        assert_abs_diff_eq!(v.value, 0.5, epsilon = 1e-10);
        let v = solve_slab(&s, SlabLimit::Lower, [0.0, 3.0], &o).unwrap();
        assert_abs_diff_eq!(v.value, 0.0, epsilon = 1e-10);
        let v = solve_slab(&s, SlabLimit::Mean, [0.5, 0.0], &o).unwrap();
        assert_abs_diff_eq!(v.value, 0.375, epsilon = 1e-9);
    }

    #[test]
    fn irrational_normal_forces_the_average() {
        let s = slab([1.0, 2f64.sqrt()], 0.0);
        let o = TripleOptions::default();
        let fam = s.family(&o).unwrap();
        assert!(!fam.is_family);
        let v = solve_slab(&s, SlabLimit::Upper, [0.0, 0.0], &o).unwrap();
        assert_abs_diff_eq!(v.value, 0.25, epsilon = 1e-9);
    }

    #[test]
    fn oblique_rational_normal_also_averages_layers() {
        let s = slab([1.0, 1.0], 0.0);
        let fam = s.family(&TripleOptions::default()).unwrap();
        assert!(!fam.is_family);
        assert_abs_diff_eq!(fam.mean, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn energy_minimizing_limit_clamps_m() {
        let o = TripleOptions::default();
        assert_abs_diff_eq!(slab([1.0, 0.0], 2.0).family(&o).unwrap().energy_minimizing, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(slab([1.0, 0.0], -1.0).family(&o).unwrap().energy_minimizing, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(slab([1.0, 0.0], 0.3).family(&o).unwrap().energy_minimizing, 0.3, epsilon = 1e-12);
        // With A = M the limit is constant.
        let s = slab([1.0, 0.0], 0.3);
        for x in [[-0.9, 0.0], [0.2, 5.0], [0.99, -1.0]] {
            assert_abs_diff_eq!(
                solve_slab(&s, SlabLimit::EnergyMinimizing, x, &o).unwrap().value,
                0.3,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn mean_boundary_data_give_constant_solution() {
        let s = slab([1.0, 2f64.sqrt()], 0.5);
        let o = TripleOptions::default();
        for x in [[-0.3, 0.1], [0.4, 0.2]] {
            assert_abs_diff_eq!(solve_slab(&s, SlabLimit::Mean, x, &o).unwrap().value, 0.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn face_through_origin_is_pinned() {
        let s = Slab::new(dir([1.0, 0.0]), 1.0, 0.0, 0.0, PeriodicField::parse("0.2 + sin(2*pi*y1)^2", 2).unwrap())
            .unwrap();
        let fam = s.family(&TripleOptions::default()).unwrap();
        assert!(!fam.is_family);
        assert_abs_diff_eq!(fam.upper, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_requests() {
        let s = slab([1.0, 0.0], 0.0);
        let o = TripleOptions::default();
        assert!(solve_slab(&s, SlabLimit::Upper, [1.5, 0.0], &o).is_err());
        assert!(solve_slab(&s, SlabLimit::Value(1.5), [0.0, 0.0], &o).is_err());
        assert!(Slab::new(dir([1.0, 0.0]), 1.0, 1.0, 0.0, PeriodicField::parse("sin(2*pi*y2)", 2).unwrap()).is_err());
    }
}
