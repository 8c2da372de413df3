//! Integrated directional averages along a curve and the sandwich test
//! `int lower <= liminf <= limsup <= int upper`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::{
    directional_triple, plane_average_finite, scale_pair, AveragingTriple, Mechanism, TripleOptions,
};
use crate::error::{domain, Result};
use crate::field::PeriodicField;
use crate::geometry::{classify_direction, ClassifyOptions, Curve, DirectionClass, FlatPart, Point};
use crate::quadrature::pairwise_sum;

use super::integrator::OscillatoryQuadrature;
use super::sweep::{Band, EpsilonSweep};

/// Arclength of the sub-intervals used to integrate the averages.
const NODE_SPACING: f64 = 0.125;
const NODE_ORDER: usize = 8;

/// Pointwise homogenized data along a curve: the loop extremes on straight
/// parts with rational (or undecided) normals and the cell average elsewhere.
#[derive(Debug, Clone)]
pub struct HomogenizedData {
    field: PeriodicField,
    flats: Vec<FlatPart>,
    /// Index into `flats` for every piece that belongs to a loop-carrying flat.
    piece_flat: Vec<Option<usize>>,
    /// Per-flat triple when the density has no anchor dependence.
    flat_cache: Vec<Option<AveragingTriple>>,
    /// Cell average when the density has no anchor dependence.
    mean_cache: Option<f64>,
    triple_opts: TripleOptions,
    pub iddc_holds: bool,
}

impl HomogenizedData {
    pub fn new(c: &Curve, f: &PeriodicField, classify: &ClassifyOptions, triple_opts: &TripleOptions) -> Result<Self> {
        if f.dim() != 2 {
            return Err(domain("homogenized data along curves need a planar density"));
        }
        let decomposition = c.flat_decomposition(classify)?;
        let flats: Vec<FlatPart> = decomposition
            .flats
            .into_iter()
            .filter(|fp| !matches!(fp.direction.class, DirectionClass::Irrational))
            .collect();
        let mut piece_flat = vec![None; c.pieces().len()];
        for (k, fp) in flats.iter().enumerate() {
            for slot in &mut piece_flat[fp.pieces.0..=fp.pieces.1] {
                *slot = Some(k);
            }
        }
        let constant = !f.depends_on_x();
        let flat_cache = flats
            .iter()
            .map(|fp| {
                if constant {
                    directional_triple(f, &[0.0, 0.0], &fp.direction, triple_opts).map(Some)
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let mean_cache = if constant { Some(f.cell_average(&[0.0, 0.0], triple_opts.cell_grid)?) } else { None };
        Ok(Self {
            field: f.clone(),
            flats,
            piece_flat,
            flat_cache,
            mean_cache,
            triple_opts: *triple_opts,
            iddc_holds: decomposition.iddc_holds,
        })
    }

    /// Straight parts whose normal is rational or undecided.
    pub fn loop_flats(&self) -> &[FlatPart] {
        &self.flats
    }

    pub fn flat_of_piece(&self, piece: usize) -> Option<usize> {
        self.piece_flat.get(piece).copied().flatten()
    }

    /// The directional triple at `point` on `piece`.
    pub fn triple(&self, piece: usize, point: Point) -> Result<AveragingTriple> {
        match self.flat_of_piece(piece) {
            Some(k) => match &self.flat_cache[k] {
                Some(t) => Ok(t.clone()),
                None => directional_triple(&self.field, &point, &self.flats[k].direction, &self.triple_opts),
            },
            None => {
                let mean = match self.mean_cache {
                    Some(m) => m,
                    None => self.field.cell_average(&point, self.triple_opts.cell_grid)?,
                };
                Ok(AveragingTriple {
                    lower: mean,
                    mean,
                    upper: mean,
                    mechanism: Mechanism::Foliation,
                    phase_argmax: None,
                    phase_argmin: None,
                })
            }
        }
    }
}

/// Contribution of one part of the curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartBounds {
    /// `"flat"` for a straight part carrying loops, `"rest"` for everything else.
    pub kind: String,
    /// Inclusive piece range for flats.
    pub pieces: Option<(usize, usize)>,
    pub m: Option<[i64; 2]>,
    pub length: f64,
    pub lower: f64,
    pub mean: f64,
    pub upper: f64,
    /// Set when the normal could not be classified and the band is conservative.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogenizedBounds {
    pub lower: f64,
    pub mean: f64,
    pub upper: f64,
    pub parts: Vec<PartBounds>,
    pub iddc_holds: bool,
    pub flagged: bool,
}

/// `int_c lower`, `int_c mean` and `int_c upper` of the directional triple.
pub fn homogenized_bounds(
    c: &Curve,
    f: &PeriodicField,
    classify: &ClassifyOptions,
    triple_opts: &TripleOptions,
) -> Result<HomogenizedBounds> {
    let data = HomogenizedData::new(c, f, classify, triple_opts)?;
    let per_piece = (0..c.pieces().len())
        .into_par_iter()
        .map(|i| {
            let nodes = c.piece_nodes(i, NODE_SPACING, NODE_ORDER)?;
            let mut lo = Vec::with_capacity(nodes.len());
            let mut me = Vec::with_capacity(nodes.len());
            let mut up = Vec::with_capacity(nodes.len());
            let mut flagged = false;
            for n in &nodes {
                let t = data.triple(i, n.point)?;
                flagged |= t.is_flagged();
                lo.push(n.weight * t.lower);
                me.push(n.weight * t.mean);
                up.push(n.weight * t.upper);
            }
            Ok((pairwise_sum(&lo), pairwise_sum(&me), pairwise_sum(&up), flagged))
        })
        .collect::<Result<Vec<_>>>()?;

    let lengths = c.piece_lengths();
    let mut parts = Vec::new();
    let mut rest = PartBounds {
        kind: "rest".into(),
        pieces: None,
        m: None,
        length: 0.0,
        lower: 0.0,
        mean: 0.0,
        upper: 0.0,
        flagged: false,
    };
    for (k, fp) in data.loop_flats().iter().enumerate() {
        let (a, b) = fp.pieces;
        let range = &per_piece[a..=b];
        let m = match &fp.direction.class {
            DirectionClass::Rational { m } | DirectionClass::Undetermined { approximant: m, .. } => Some([m[0], m[1]]),
            DirectionClass::Irrational => None,
        };
        parts.push(PartBounds {
            kind: "flat".into(),
            pieces: Some(fp.pieces),
            m,
            length: fp.length,
            lower: range.iter().map(|r| r.0).sum(),
            mean: range.iter().map(|r| r.1).sum(),
            upper: range.iter().map(|r| r.2).sum(),
            flagged: range.iter().any(|r| r.3),
        });
        debug_assert!(data.flat_of_piece(a) == Some(k));
    }
    for (i, r) in per_piece.iter().enumerate() {
        if data.flat_of_piece(i).is_none() {
            rest.length += lengths[i];
            rest.lower += r.0;
            rest.mean += r.1;
            rest.upper += r.2;
        }
    }
    if rest.length > 0.0 {
        parts.push(rest);
    }
    let flagged = parts.iter().any(|p| p.flagged);
    Ok(HomogenizedBounds {
        lower: parts.iter().map(|p| p.lower).sum(),
        mean: parts.iter().map(|p| p.mean).sum(),
        upper: parts.iter().map(|p| p.upper).sum(),
        parts,
        iddc_holds: data.iddc_holds,
        flagged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichVerdict {
    pub pass: bool,
    pub band: Band,
    pub bounds: Band,
    pub slack: f64,
    /// `band.lower - (bounds.lower - slack)`; negative when violated.
    pub lower_margin: f64,
    /// `bounds.upper + slack - band.upper`; negative when violated.
    pub upper_margin: f64,
}

pub fn sandwich_check(sweep: &EpsilonSweep, bounds: &HomogenizedBounds, slack: f64) -> SandwichVerdict {
    let lower_margin = sweep.band.lower - (bounds.lower - slack);
    let upper_margin = bounds.upper + slack - sweep.band.upper;
    SandwichVerdict {
        pass: lower_margin >= 0.0 && upper_margin >= 0.0,
        band: sweep.band,
        bounds: Band { lower: bounds.lower, upper: bounds.upper },
        slack,
        lower_margin,
        upper_margin,
    }
}

/// Local comparison on one covering cube `Q_rho(z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeReport {
    pub center: Point,
    pub rho: f64,
    /// Mean of `g(z, y/eps)` over the tangent line through `z` inside the cube.
    pub local_average: f64,
    pub triple: AveragingTriple,
    /// `local_average` lies in `[lower, upper]` up to `tol`.
    pub inside: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoveringOptions {
    pub classify: ClassifyOptions,
    pub triple: TripleOptions,
    pub quad: OscillatoryQuadrature,
    pub max_cubes: usize,
    /// Allowed excursion of a local average outside its triple.
    pub tol: f64,
}

impl Default for CoveringOptions {
    fn default() -> Self {
        Self {
            classify: ClassifyOptions::default(),
            triple: TripleOptions::default(),
            quad: OscillatoryQuadrature::default(),
            max_cubes: 64,
            tol: 5e-2,
        }
    }
}

/// Covers `c` by cubes of half-side `rho_eps` centred on the curve (at most
/// `max_cubes`, evenly spaced in arclength) and compares the local tangent
/// average of each with the directional triple at its centre.
pub fn covering_diagnostic(c: &Curve, f: &PeriodicField, eps: f64, opts: &CoveringOptions) -> Result<Vec<CubeReport>> {
    let CoveringOptions { classify, triple: triple_opts, quad, max_cubes, tol } = *opts;
    if eps >= 1.0 {
        return Err(domain("the covering needs eps < 1"));
    }
    let rho = scale_pair(eps, c.modulus())?.rho;
    let count = ((c.length() / (2.0 * rho)).floor() as usize).clamp(1, max_cubes.max(1));
    let step = c.length() / count as f64;
    let centers: Vec<(usize, f64)> = (0..count).map(|k| locate(c, (k as f64 + 0.5) * step)).collect();
    centers
        .par_iter()
        .map(|&(piece, t)| {
            let p = &c.pieces()[piece];
            let z = p.point(t);
            let nu = c.normal(piece, t);
            let dir = classify_direction(&nu, &classify)?;
            let triple = directional_triple(f, &z, &dir, &triple_opts)?;
            let local_average = plane_average_finite(f, &z, &nu, eps, rho, &quad)?;
            let inside = local_average >= triple.lower - tol && local_average <= triple.upper + tol;
            Ok(CubeReport { center: z, rho, local_average, triple, inside })
        })
        .collect()
}

/// Piece index and parameter at arclength `s` (approximate inside graph pieces).
fn locate(c: &Curve, s: f64) -> (usize, f64) {
    let mut acc = 0.0;
    for (i, len) in c.piece_lengths().iter().enumerate() {
        if s <= acc + len || i + 1 == c.pieces().len() {
            return (i, ((s - acc) / len).clamp(0.0, 1.0));
        }
        acc += len;
    }
    (0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oscillatory::sweep::{epsilon_sweep, Schedule};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;

    const SINSIN: &str = "abs(sin(pi*y1)*sin(pi*y2))";

    fn field(src: &str) -> PeriodicField {
        PeriodicField::parse(src, 2).unwrap()
    }

    fn bounds(c: &Curve, src: &str) -> HomogenizedBounds {
        homogenized_bounds(c, &field(src), &ClassifyOptions::default(), &TripleOptions::default()).unwrap()
    }

    #[test]
    fn circle_bounds_collapse() {
        let b = bounds(&Curve::circle([0.0, 0.0], 1.0).unwrap(), SINSIN);
        let expect = 2.0 * PI * 4.0 / (PI * PI);
        assert!(b.iddc_holds);
        assert_relative_eq!(b.lower, expect, max_relative = 1e-8);
        assert_relative_eq!(b.upper, expect, max_relative = 1e-8);
        assert_eq!(b.parts.len(), 1);
    }

    #[test]
    fn stadium_upper_exceeds_mean() {
        let c = Curve::stadium(2.0).unwrap();
        let b = bounds(&c, SINSIN);
        let gbar = 4.0 / (PI * PI);
        assert!(!b.iddc_holds);
        assert_relative_eq!(b.mean, c.length() * gbar, max_relative = 1e-8);
        // Each flat has length 2 and loop extremes 2/pi, 0.
        assert_relative_eq!(b.upper, b.mean + 2.0 * 2.0 * (2.0 / PI - gbar), max_relative = 1e-8);
        assert_relative_eq!(b.lower, b.mean - 2.0 * 2.0 * gbar, max_relative = 1e-8);
        assert_eq!(b.parts.iter().filter(|p| p.kind == "flat").count(), 2);
    }

    #[test]
    fn slab_face_takes_extremes() {
        let face = Curve::segment([1.0, -0.5], [1.0, 0.5]).unwrap();
        let b = bounds(&face, "sin(2*pi*y1)^2");
        assert_abs_diff_eq!(b.upper, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(b.lower, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(b.mean, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn anchor_dependent_density_is_integrated_pointwise() {
        let face = Curve::segment([1.0, -0.5], [1.0, 0.5]).unwrap();
        let b = bounds(&face, "(1 + x2^2)*sin(2*pi*y1)^2");
        let weight = 1.0 + 1.0 / 12.0;
        assert_relative_eq!(b.upper, weight, max_relative = 1e-9);
        assert_relative_eq!(b.mean, 0.5 * weight, max_relative = 1e-8);
    }

    #[test]
    fn undetermined_flat_is_flagged() {
        let c = Curve::segment([0.0, 0.0], [-0.8, 0.6 + 2e-8]).unwrap();
        let b = bounds(&c, SINSIN);
        assert!(b.flagged);
    }

    #[test]
    fn constant_density_sandwich_is_tight() {
        let c = Curve::stadium(2.0).unwrap();
        let f = field("5");
        let s = epsilon_sweep(
            &c,
            &f,
            &Schedule::Geometric { eps0: 0.1, ratio: 0.7, count: 6 },
            &OscillatoryQuadrature::default(),
            6,
            1e-2,
        )
        .unwrap();
        let b = bounds(&c, "5");
        let v = sandwich_check(&s, &b, 0.0);
        assert!(v.pass || (v.lower_margin.abs() < 1e-10 && v.upper_margin.abs() < 1e-10));
        assert_relative_eq!(b.lower, s.band.lower, max_relative = 1e-12);
        assert_relative_eq!(b.upper, s.band.upper, max_relative = 1e-12);
    }

    #[test]
    fn covering_cubes_agree_with_local_triples() {
        let c = Curve::stadium(2.0).unwrap();
        let reports =
            covering_diagnostic(&c, &field(SINSIN), 1e-3, &CoveringOptions { max_cubes: 24, ..Default::default() })
                .unwrap();
        assert_eq!(reports.len(), 24);
        let rho = reports[0].rho;
        assert_abs_diff_eq!(rho, 1e-3 * (1.0 / 0.5e-3f64).min(1e3).sqrt(), epsilon = 1e-12);
        let inside = reports.iter().filter(|r| r.inside).count();
        assert!(inside >= 20, "{inside} of 24");
    }
}
