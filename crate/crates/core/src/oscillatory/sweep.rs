//! Integrals over a curve for a decreasing sequence of scales and the
//! tail band `[min, max]` of the last few values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::field::{PeriodicField, TorusLoop};
use crate::geometry::{Curve, Point};

use super::integrator::{integrate_curve, IntegralEstimate, OscillatoryQuadrature};

pub const DEFAULT_WINDOW: usize = 6;
pub const DEFAULT_TOL_CONV: f64 = 1e-2;

/// `int_c f(y, y/eps) dsigma_y`.
pub fn surface_integral(
    c: &Curve,
    f: &PeriodicField,
    eps: f64,
    quad: &OscillatoryQuadrature,
) -> Result<IntegralEstimate> {
    if f.dim() != 2 {
        return Err(domain("curve integrals need a planar density (n = 2)"));
    }
    integrate_curve(c, eps, quad, f.y_mask(), |s| f.eval(&s.point, &[s.point[0] / eps, s.point[1] / eps]))
}

/// How the scales of a sweep are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    /// `eps_k = eps0 ratio^k`, `k < count`.
    Geometric {
        eps0: f64,
        ratio: f64,
        count: usize,
    },
    /// For every level of a geometric ladder and every requested phase, the
    /// nearest scale at which the line through `anchor / eps` with normal
    /// `m/|m|` sits at that loop phase.
    PhaseTargeted {
        anchor: Point,
        m: [i64; 2],
        phases: Vec<f64>,
        eps0: f64,
        ratio: f64,
        count: usize,
    },
    Explicit {
        epsilons: Vec<f64>,
    },
}

/// One scale of a sweep and the loop phase it was built to realize.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledScale {
    pub epsilon: f64,
    pub phase: Option<f64>,
}

impl Schedule {
    /// Strictly decreasing scales.
    pub fn scales(&self) -> Result<Vec<ScheduledScale>> {
        let mut out: Vec<ScheduledScale> = match self {
            Schedule::Geometric { eps0, ratio, count } => {
                check_ladder(*eps0, *ratio, *count)?;
                (0..*count).map(|k| ScheduledScale { epsilon: eps0 * ratio.powi(k as i32), phase: None }).collect()
            }
            Schedule::PhaseTargeted { anchor, m, phases, eps0, ratio, count } => {
                check_ladder(*eps0, *ratio, *count)?;
                if phases.is_empty() {
                    return Err(domain("phase-targeted schedule needs at least one phase"));
                }
                let mut v = Vec::new();
                for k in 0..*count {
                    let level = eps0 * ratio.powi(k as i32);
                    for &c in phases {
                        let epsilon = phase_targeted_epsilon(*anchor, *m, c, level)?;
                        v.push(ScheduledScale { epsilon, phase: Some(c) });
                    }
                }
                v
            }
            Schedule::Explicit { epsilons } => {
                epsilons.iter().map(|&e| ScheduledScale { epsilon: e, phase: None }).collect()
            }
        };
        if out.iter().any(|s| !(s.epsilon > 0.0) || !s.epsilon.is_finite()) {
            return Err(domain("every eps must be positive and finite"));
        }
        out.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
        out.dedup_by(|a, b| a.epsilon == b.epsilon);
        Ok(out)
    }
}

fn check_ladder(eps0: f64, ratio: f64, count: usize) -> Result<()> {
    if !(eps0 > 0.0) || !(ratio > 0.0 && ratio < 1.0) || count == 0 {
        return Err(domain(format!(
            "geometric ladder needs eps0 > 0, 0 < ratio < 1, count >= 1 (got {eps0}, {ratio}, {count})"
        )));
    }
    Ok(())
}

/// The scale nearest `near` at which `(anchor/eps) . m/|m|` equals `phase`
/// modulo the loop period `1/|m|`.
///
/// With `s = anchor . m` the admissible scales are `s / (phase |m| + j)` for
/// integers `j`. An anchor on a lattice line through the origin (`s = 0`)
/// only realizes phase 0.
pub fn phase_targeted_epsilon(anchor: Point, m: [i64; 2], phase: f64, near: f64) -> Result<f64> {
    let lp = TorusLoop::new(m, 0.0)?;
    let norm = lp.norm();
    let period = lp.phase_period();
    let c = phase.rem_euclid(period);
    let s = anchor[0] * m[0] as f64 + anchor[1] * m[1] as f64;
    if s == 0.0 {
        if c.min(period - c) > 1e-12 {
            return Err(domain(format!(
                "anchor {anchor:?} lies on a lattice line through the origin for m = {m:?}; \
                 only phase 0 is attainable, not {phase}"
            )));
        }
        return Ok(near);
    }
    let shift = c * norm;
    let mut j = (s / near - shift).round();
    // The denominator must share the sign of s.
    if s > 0.0 && shift + j <= 0.0 {
        j = (1.0 - shift).ceil();
    }
    if s < 0.0 && shift + j >= 0.0 {
        j = (-1.0 - shift).floor();
    }
    Ok(s / (shift + j))
}

/// Realized loop phase of the line through `anchor / eps`.
pub fn realized_phase(anchor: Point, m: [i64; 2], eps: f64) -> Result<f64> {
    let lp = TorusLoop::new(m, 0.0)?;
    let nu = lp.normal();
    Ok(((anchor[0] * nu[0] + anchor[1] * nu[1]) / eps).rem_euclid(lp.phase_period()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lower: f64,
    pub upper: f64,
}

impl Band {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    fn of(values: &[f64]) -> Band {
        let lower = values.iter().copied().fold(f64::INFINITY, f64::min);
        let upper = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Band { lower, upper }
    }
}

/// The tail band of the subsequence built for one phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseLimit {
    pub phase: f64,
    pub band: Band,
    /// Value at the smallest scale of the subsequence.
    pub last: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSweep {
    pub epsilons: Vec<f64>,
    pub values: Vec<f64>,
    pub phases: Vec<Option<f64>>,
    pub certified: Vec<bool>,
    pub tail_window: usize,
    pub band: Band,
    pub tol_conv: f64,
    pub converged: bool,
}

impl EpsilonSweep {
    /// Assembles a sweep from already computed values.
    pub fn from_values(
        scales: &[ScheduledScale],
        values: Vec<f64>,
        certified: Vec<bool>,
        tail_window: usize,
        tol_conv: f64,
    ) -> Result<Self> {
        if scales.len() != values.len() || values.len() != certified.len() {
            return Err(domain("sweep lengths disagree"));
        }
        if values.is_empty() || tail_window == 0 {
            return Err(domain("sweep needs at least one value and a positive window"));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(domain(format!("non-finite sweep value {bad}")));
        }
        if scales.windows(2).any(|w| w[1].epsilon >= w[0].epsilon) {
            return Err(domain("scales must be strictly decreasing"));
        }
        let w = tail_window.min(values.len());
        let band = Band::of(&values[values.len() - w..]);
        Ok(Self {
            epsilons: scales.iter().map(|s| s.epsilon).collect(),
            values,
            phases: scales.iter().map(|s| s.phase).collect(),
            certified,
            tail_window,
            band,
            tol_conv,
            converged: band.width() < tol_conv,
        })
    }

    /// Tail bands of the per-phase subsequences, in order of first appearance.
    pub fn phase_limits(&self) -> Vec<PhaseLimit> {
        let mut seen: Vec<f64> = Vec::new();
        for p in self.phases.iter().flatten() {
            if !seen.contains(p) {
                seen.push(*p);
            }
        }
        seen.into_iter()
            .map(|phase| {
                let sub: Vec<f64> =
                    self.phases.iter().zip(&self.values).filter(|(p, _)| **p == Some(phase)).map(|(_, v)| *v).collect();
                let w = self.tail_window.min(sub.len());
                PhaseLimit { phase, band: Band::of(&sub[sub.len() - w..]), last: *sub.last().unwrap() }
            })
            .collect()
    }

    pub fn all_certified(&self) -> bool {
        self.certified.iter().all(|c| *c)
    }
}

/// Runs `surface_integral` over every scale of `schedule`.
pub fn epsilon_sweep(
    c: &Curve,
    f: &PeriodicField,
    schedule: &Schedule,
    quad: &OscillatoryQuadrature,
    tail_window: usize,
    tol_conv: f64,
) -> Result<EpsilonSweep> {
    let scales = schedule.scales()?;
    let results = scales.par_iter().map(|s| surface_integral(c, f, s.epsilon, quad)).collect::<Result<Vec<_>>>()?;
    EpsilonSweep::from_values(
        &scales,
        results.iter().map(|r| r.value).collect(),
        results.iter().map(|r| r.certified).collect(),
        tail_window,
        tol_conv,
    )
}
