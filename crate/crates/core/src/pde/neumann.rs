//! Neumann problem through the single-layer potential
//! `u(x) = int F(x, y) phi(y) dsigma_y`, `F = -log|x - y| / (2 pi)`.
//!
//! The interior flux condition gives the second-kind equation
//! `phi/2 + K' phi = g`, `K'(x, y) = (y - x) . n_x / (2 pi |x - y|^2)`,
//! which is singular with a one-dimensional kernel; compatible data
//! (`int g = 0`) make it solvable. The direct solver borders the system with
//! `int phi = 0`; the iterative one runs GMRES on the singular system. In
//! both cases the solution is normalized to zero boundary mean.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, LU};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::field::PeriodicField;
use crate::geometry::{Curve, Point};
use crate::oscillatory::{integrate_curve, IntegralEstimate, OscillatoryQuadrature};
use crate::quadrature::pairwise_sum;

use super::bem::{piecewise_integral, pivot_condition, BoundaryMesh, HarmonicMeasure, MAX_CONDITION};
use super::gmres::gmres;

pub const COMPATIBILITY_TOL: f64 = 1e-8;

#[inline]
fn fundamental(x: Point, y: Point) -> f64 {
    -((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).ln() / (4.0 * PI)
}

#[derive(Debug, Clone)]
pub struct NeumannBem {
    pub mesh: BoundaryMesh,
    /// `I/2 + K'` with quadrature weights folded in.
    operator: DMatrix<f64>,
    /// Factored transpose of the bordered operator.
    bordered_adjoint: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    /// `sum_i w_i S_ij`: boundary integral of the single layer of node `j`.
    column_means: Vec<f64>,
    pub condition: f64,
}

/// Outcome of an iterative density solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterativeDensity {
    pub density: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl NeumannBem {
    pub fn new(curve: &Curve, panels: usize) -> Result<Self> {
        let mesh = BoundaryMesh::new(curve, panels)?;
        let n = mesh.len();
        let mut operator = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let (xi, ni) = (mesh.points[i], mesh.normals[i]);
            for j in 0..n {
                let k = if i == j {
                    -mesh.curvature[i] / (4.0 * PI)
                } else {
                    let d = [mesh.points[j][0] - xi[0], mesh.points[j][1] - xi[1]];
                    (d[0] * ni[0] + d[1] * ni[1]) / (2.0 * PI * (d[0] * d[0] + d[1] * d[1]))
                };
                operator[(i, j)] = k * mesh.weights[j] + if i == j { 0.5 } else { 0.0 };
            }
        }
        // Bordered transpose: [[A^T, w], [1^T, 0]].
        let mut bt = DMatrix::<f64>::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                bt[(j, i)] = operator[(i, j)];
            }
            bt[(i, n)] = mesh.weights[i];
            bt[(n, i)] = 1.0;
        }
        let bordered_adjoint = bt.lu();
        let condition = pivot_condition(&bordered_adjoint);
        if !(condition < MAX_CONDITION) {
            return Err(Error::Solver { message: "bordered single-layer system is singular".into(), condition });
        }
        let mut column_means = vec![0.0; n];
        for (j, cm) in column_means.iter_mut().enumerate() {
            let terms: Vec<f64> = (0..n)
                .map(|i| {
                    let s = if i == j {
                        let h = mesh.weights[j];
                        -h * ((0.5 * h).ln() - 1.0) / (2.0 * PI)
                    } else {
                        fundamental(mesh.points[i], mesh.points[j]) * mesh.weights[j]
                    };
                    mesh.weights[i] * s
                })
                .collect();
            *cm = pairwise_sum(&terms);
        }
        Ok(Self { mesh, operator, bordered_adjoint, column_means, condition })
    }

    /// `u(x) = sum_j l_j phi_j`, with the boundary-mean correction folded in.
    fn functional(&self, x: Point) -> Vec<f64> {
        let m = &self.mesh;
        let length: f64 = pairwise_sum(&m.weights);
        (0..m.len()).map(|j| fundamental(x, m.points[j]) * m.weights[j] - self.column_means[j] / length).collect()
    }

    /// Weights `psi` with `u(x) = sum_j psi_j g(y_j)` for compatible data.
    pub fn response(&self, x: Point) -> Result<HarmonicMeasure> {
        self.mesh.check_interior(x)?;
        let n = self.mesh.len();
        let mut rhs = DVector::<f64>::zeros(n + 1);
        for (j, l) in self.functional(x).into_iter().enumerate() {
            rhs[j] = l;
        }
        let psi = self.bordered_adjoint.solve(&rhs).ok_or_else(|| Error::Solver {
            message: "bordered adjoint solve failed".into(),
            condition: self.condition,
        })?;
        let weights: Vec<f64> = psi.iter().take(n).copied().collect();
        let density = weights.iter().zip(&self.mesh.weights).map(|(p, w)| p / w).collect();
        Ok(HarmonicMeasure { x, weights, density })
    }

    /// `int g(y, y/eps) dsigma_y`; must vanish for a solvable problem.
    pub fn flux_defect(&self, g: &PeriodicField, eps: f64, quad: &OscillatoryQuadrature) -> Result<f64> {
        Ok(integrate_curve(&self.mesh.curve, eps, quad, g.y_mask(), |s| {
            g.eval(&s.point, &[s.point[0] / eps, s.point[1] / eps])
        })?
        .value)
    }

    fn check_compatible(&self, defect: f64) -> Result<()> {
        if defect.abs() > COMPATIBILITY_TOL {
            return Err(domain(format!(
                "Neumann data are incompatible: boundary integral of the flux is {defect:.3e} (tolerance {COMPATIBILITY_TOL:e})"
            )));
        }
        Ok(())
    }

    /// `u_eps(x)` for flux data `g(y, y/eps)`.
    pub fn solve_oscillating(
        &self,
        resp: &HarmonicMeasure,
        g: &PeriodicField,
        eps: f64,
        quad: &OscillatoryQuadrature,
    ) -> Result<IntegralEstimate> {
        self.check_compatible(self.flux_defect(g, eps, quad)?)?;
        integrate_curve(&self.mesh.curve, eps, quad, g.y_mask(), |s| {
            let w = self.mesh.interpolate(&resp.density, s.piece, s.t);
            Ok(w * g.eval(&s.point, &[s.point[0] / eps, s.point[1] / eps])?)
        })
    }

    /// `u(x)` for `eps`-independent flux data.
    pub fn solve_piecewise<F>(&self, resp: &HarmonicMeasure, datum: F) -> Result<f64>
    where
        F: Fn(usize, Point) -> Result<f64>,
    {
        let defect = piecewise_integral(&self.mesh, &vec![1.0; self.mesh.len()], &datum)?;
        self.check_compatible(defect)?;
        piecewise_integral(&self.mesh, &resp.density, datum)
    }

    /// GMRES on the singular system `(I/2 + K') phi = g` from `initial`.
    pub fn density_iterative(&self, g: &[f64], initial: &[f64], tol: f64) -> Result<IterativeDensity> {
        let n = self.mesh.len();
        if g.len() != n || initial.len() != n {
            return Err(domain("nodal vectors must match the mesh"));
        }
        let defect: f64 = pairwise_sum(&g.iter().zip(&self.mesh.weights).map(|(a, w)| a * w).collect::<Vec<_>>());
        self.check_compatible(defect)?;
        let r = gmres(&self.operator, &DVector::from_column_slice(g), &DVector::from_column_slice(initial), tol, n);
        if !r.converged {
            return Err(Error::Solver {
                message: format!(
                    "GMRES stalled at relative residual {:.3e} after {} iterations",
                    r.residual, r.iterations
                ),
                condition: self.condition,
            });
        }
        Ok(IterativeDensity { density: r.x.iter().copied().collect(), iterations: r.iterations, residual: r.residual })
    }

    /// Normalized potential of a density.
    pub fn potential(&self, x: Point, density: &[f64]) -> Result<f64> {
        self.mesh.check_interior(x)?;
        let terms: Vec<f64> = self.functional(x).iter().zip(density).map(|(l, p)| l * p).collect();
        Ok(pairwise_sum(&terms))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn disk_solver(panels: usize) -> NeumannBem {
        NeumannBem::new(&Curve::circle([0.0, 0.0], 1.0).unwrap(), panels).unwrap()
    }

    #[test]
    fn zero_flux_gives_zero() {
        let s = disk_solver(128);
        let r = s.response([0.2, 0.1]).unwrap();
        assert_eq!(s.solve_piecewise(&r, |_, _| Ok(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn cosine_flux_on_the_unit_disk() {
        let s = disk_solver(512);
        for x in [[0.0, 0.0], [0.5, 0.2], [-0.3, -0.6]] {
            let r = s.response(x).unwrap();
            let u = s.solve_piecewise(&r, |_, y| Ok(y[0])).unwrap();
            assert_abs_diff_eq!(u, x[0], epsilon = 1e-4);
        }
    }

    #[test]
    fn stadium_linear_flux() {
        // u = x1 has flux n_1, which integrates to zero on a closed curve.
        let s = NeumannBem::new(&Curve::stadium(2.0).unwrap(), 1024).unwrap();
        let normals = |piece: usize, y: Point| -> Result<f64> {
            let p = &s.mesh.curve.pieces()[piece];
            // Recover the parameter only to read the normal; lines and arcs suffice here.
            let n = match p {
                crate::geometry::Piece::Line { .. } => s.mesh.outward_normal(piece, 0.5),
                crate::geometry::Piece::Arc { center, radius, .. } => {
                    [(y[0] - center[0]) / radius, (y[1] - center[1]) / radius]
                }
                _ => unreachable!(),
            };
            Ok(n[0])
        };
        let x = [0.5, 0.7];
        let u = s.solve_piecewise(&s.response(x).unwrap(), normals).unwrap();
        // Boundary mean of x1 on the symmetric stadium is zero.
        assert_abs_diff_eq!(u, 0.5, epsilon = 1e-3);
    }

    #[test]
    fn incompatible_flux_is_rejected() {
        let s = disk_solver(128);
        let r = s.response([0.0, 0.0]).unwrap();
        match s.solve_piecewise(&r, |_, _| Ok(1.0)) {
            Err(Error::Domain(msg)) => assert!(msg.contains("incompatible")),
            other => panic!("{other:?}"),
        }
        let g = PeriodicField::parse("1 + sin(2*pi*y1)", 2).unwrap();
        assert!(s.solve_oscillating(&r, &g, 0.1, &OscillatoryQuadrature::default()).is_err());
    }

    #[test]
    fn iterative_solution_ignores_constant_shift_of_initial_iterate() {
        let s = NeumannBem::new(&Curve::stadium(2.0).unwrap(), 256).unwrap();
        // Compatible nodal data: n_1 at the nodes.
        let g: Vec<f64> = s.mesh.normals.iter().map(|n| n[0]).collect();
        let zero = vec![0.0; g.len()];
        let shifted = vec![5.0; g.len()];
        let a = s.density_iterative(&g, &zero, 1e-13).unwrap();
        let b = s.density_iterative(&g, &shifted, 1e-13).unwrap();
        let x = [0.3, -0.4];
        let ua = s.potential(x, &a.density).unwrap();
        let ub = s.potential(x, &b.density).unwrap();
        assert_abs_diff_eq!(ua, ub, epsilon = 1e-6);
        assert_abs_diff_eq!(ua, 0.3, epsilon = 1e-2);
    }

    #[test]
    fn oscillating_compatible_flux_is_small() {
        let s = disk_solver(512);
        let g = PeriodicField::parse("sin(2*pi*y2)*x1", 2).unwrap();
        let r = s.response([0.2, 0.1]).unwrap();
        let u = s.solve_oscillating(&r, &g, 1e-3, &OscillatoryQuadrature::default()).unwrap();
        assert!(u.value.abs() < 2e-2, "{}", u.value);
    }
}
