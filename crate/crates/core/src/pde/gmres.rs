//! Unrestarted GMRES with modified Gram–Schmidt and Givens rotations.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct GmresResult {
    pub x: DVector<f64>,
    pub iterations: usize,
    /// Final residual norm relative to `|b|`.
    pub residual: f64,
    pub converged: bool,
}

/// Solves `a x = b` from the initial iterate `x0`.
pub fn gmres(a: &DMatrix<f64>, b: &DVector<f64>, x0: &DVector<f64>, tol: f64, max_iter: usize) -> GmresResult {
    let n = b.len();
    let bnorm = b.norm().max(f64::MIN_POSITIVE);
    let r0 = b - a * x0;
    let beta = r0.norm();
    if beta / bnorm <= tol {
        return GmresResult { x: x0.clone(), iterations: 0, residual: beta / bnorm, converged: true };
    }
    let m = max_iter.min(n);
    let mut v: Vec<DVector<f64>> = vec![r0 / beta];
    let mut h = DMatrix::<f64>::zeros(m + 1, m);
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = DVector::<f64>::zeros(m + 1);
    g[0] = beta;
    let mut k = 0;
    let mut residual = beta;
    while k < m {
        let mut w = a * &v[k];
        for (j, vj) in v.iter().enumerate() {
            let hj = w.dot(vj);
            h[(j, k)] = hj;
            w.axpy(-hj, vj, 1.0);
        }
        let wn = w.norm();
        h[(k + 1, k)] = wn;
        for j in 0..k {
            let t = cs[j] * h[(j, k)] + sn[j] * h[(j + 1, k)];
            h[(j + 1, k)] = -sn[j] * h[(j, k)] + cs[j] * h[(j + 1, k)];
            h[(j, k)] = t;
        }
        let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
        cs[k] = c;
        sn[k] = s;
        h[(k, k)] = c * h[(k, k)] + s * h[(k + 1, k)];
        h[(k + 1, k)] = 0.0;
        g[k + 1] = -s * g[k];
        g[k] *= c;
        residual = g[k + 1].abs();
        k += 1;
        if residual / bnorm <= tol || wn == 0.0 {
            break;
        }
        v.push(w / wn);
    }
    // Back substitution on the k x k triangle.
    let mut y = DVector::<f64>::zeros(k);
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in i + 1..k {
            s -= h[(i, j)] * y[j];
        }
        y[i] = s / h[(i, i)];
    }
    let mut x = x0.clone();
    for (i, yi) in y.iter().enumerate() {
        x.axpy(*yi, &v[i], 1.0);
    }
    GmresResult { x, iterations: k, residual: residual / bnorm, converged: residual / bnorm <= tol }
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_nonsymmetric_system() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 2.0, 5.0, 1.0, 0.0, -1.0, 3.0]);
        let xs = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let b = &a * &xs;
        let r = gmres(&a, &b, &DVector::zeros(3), 1e-14, 10);
        assert!(r.converged);
        assert!((r.x - xs).norm() < 1e-12);
    }

    #[test]
    fn singular_consistent_system_keeps_null_component() {
        // a has null vector (1, 1); b in its range.
        let a = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, -2.0]);
        let r = gmres(&a, &b, &DVector::from_vec(vec![5.0, 5.0]), 1e-14, 10);
        assert!(r.converged);
        assert!((r.x[0] - r.x[1] - 2.0).abs() < 1e-12);
        assert!((r.x[0] + r.x[1] - 10.0).abs() < 1e-12);
    }
}
