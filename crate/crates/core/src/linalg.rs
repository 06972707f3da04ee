//! Matrix-free solvers and Kronecker-with-identity block products.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Restarted GMRES for `A x = b` where `A` is given as a closure computing `out = A v`.
pub fn gmres<F>(
    apply: F,
    b: &DVector<f64>,
    restart: usize,
    tol: f64,
    max_restarts: usize,
) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = b.len();
    let b_norm = b.norm();
    let mut x = DVector::zeros(n);
    if b_norm == 0.0 {
        return Ok(x);
    }
    let m = restart.max(1).min(n.max(1));
    let mut last_rel = f64::INFINITY;
    for _ in 0..max_restarts {
        let r = b - apply(&x);
        let beta = r.norm();
        last_rel = beta / b_norm;
        if last_rel <= tol {
            return Ok(x);
        }
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(m + 1);
        basis.push(r / beta);
        let mut h = DMatrix::<f64>::zeros(m + 1, m);
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut used = 0;
        for j in 0..m {
            let mut w = apply(&basis[j]);
            // modified Gram-Schmidt, twice for stability
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = w.dot(v);
                    h[(i, j)] += c;
                    w.axpy(-c, v, 1.0);
                }
            }
            let hn = w.norm();
            h[(j + 1, j)] = hn;
            for i in 0..j {
                let t = cs[i] * h[(i, j)] + sn[i] * h[(i + 1, j)];
                h[(i + 1, j)] = -sn[i] * h[(i, j)] + cs[i] * h[(i + 1, j)];
                h[(i, j)] = t;
            }
            let (a, bb) = (h[(j, j)], h[(j + 1, j)]);
            let d = libm::hypot(a, bb);
            if d == 0.0 {
                return Err(Error::Singular("GMRES breakdown"));
            }
            cs[j] = a / d;
            sn[j] = bb / d;
            h[(j, j)] = d;
            h[(j + 1, j)] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            if g[j + 1].abs() / b_norm <= tol || hn == 0.0 {
                break;
            }
            basis.push(w / hn);
        }
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let s: f64 = (i + 1..used).map(|k| h[(i, k)] * y[k]).sum();
            y[i] = (g[i] - s) / h[(i, i)];
        }
        for (i, yi) in y.iter().enumerate() {
            x.axpy(*yi, &basis[i], 1.0);
        }
    }
    let rel = (b - apply(&x)).norm() / b_norm;
    if rel <= tol.max(1e-9) {
        Ok(x)
    } else {
        Err(Error::NoConvergence(rel.min(last_rel)))
    }
}

/// Spectral radius of a cone-preserving linear map by power iteration from `start`.
///
/// The growth ratio is measured with `gauge` (a functional positive on the cone, e.g. the
/// trace). Stops when successive ratios agree to `tol` or after `max_iter` steps.
pub fn power_radius<F, N>(apply: F, gauge: N, start: DVector<f64>, tol: f64, max_iter: usize) -> f64
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    N: Fn(&DVector<f64>) -> f64,
{
    let mut x = start;
    let s = gauge(&x);
    x /= s;
    let mut prev = f64::NAN;
    for _ in 0..max_iter {
        let y = apply(&x);
        let ratio = gauge(&y);
        if !ratio.is_finite() || ratio <= 0.0 {
            return if ratio.is_finite() {
                0.0
            } else {
                f64::INFINITY
            };
        }
        x = y / ratio;
        if (ratio - prev).abs() <= tol * ratio {
            return ratio;
        }
        prev = ratio;
    }
    prev
}

/// `(a ⊗ I_m) x` for square `a` (N×N) and `x` with `N m` rows.
pub fn kron_identity_left(a: &DMatrix<f64>, x: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for k in 0..n {
        for j in 0..n {
            let c = a[(k, j)];
            if c != 0.0 {
                let src = x.rows(j * m, m);
                let mut dst = out.rows_mut(k * m, m);
                dst += src * c;
            }
        }
    }
    out
}

/// `x (a ⊗ I_m)` for square `a` (N×N) and `x` with `N m` columns.
pub fn kron_identity_right(x: &DMatrix<f64>, a: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for k in 0..n {
        for j in 0..n {
            let c = a[(j, k)];
            if c != 0.0 {
                let src = x.columns(j * m, m);
                let mut dst = out.columns_mut(k * m, m);
                dst += src * c;
            }
        }
    }
    out
}

/// Dense Kronecker product.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Column-major `vec` of a matrix.
pub fn vec_of(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(x.as_slice())
}

pub fn unvec(v: &DVector<f64>, rows: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(rows, v.len() / rows, v.as_slice())
}
