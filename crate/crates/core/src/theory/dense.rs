//! Dense `N^2 M^2` versions of the second-order operators, for small networks and as an
//! independent check on the blockwise implementation.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::TheoryModel;
use crate::linalg::{kron, unvec, vec_of};
use crate::{Error, Result};

/// `E{B ⊗ B}` for block-diagonal `B` with mutually independent node blocks.
pub fn ebb_dense(model: &TheoryModel) -> DMatrix<f64> {
    let m = model.net.m;
    let eb = model.moments.eb_dense();
    let mut out = kron(&eb, &eb);
    let d = model.dim();
    for (a, ebb) in model.moments.ebb.iter().enumerate() {
        let base = a * m;
        for q1 in 0..m {
            for q2 in 0..m {
                for p1 in 0..m {
                    for p2 in 0..m {
                        let r = (base + q1) * d + base + p1;
                        let c = (base + q2) * d + base + p2;
                        out[(r, c)] = ebb[(q1 * m + p1, q2 * m + p2)];
                    }
                }
            }
        }
    }
    out
}

/// `E{Z ⊗ Z}` with `Z = B + eta Q`.
pub fn ezz_dense(model: &TheoryModel) -> DMatrix<f64> {
    let eta = model.net.eta;
    let mut out = ebb_dense(model);
    if eta != 0.0 {
        let eb = model.moments.eb_dense();
        let q = model.net.q_dense();
        out += (kron(&eb, &q) + kron(&q, &eb)) * eta + kron(&q, &q) * (eta * eta);
    }
    out
}

/// `F = (G ⊗ G)(I - mu (I ⊗ E{Z}) - mu (E{Z} ⊗ I) + mu^2 E{Z ⊗ Z})` acting on `vec(W)`.
pub fn f_dense(model: &TheoryModel, mu: f64) -> DMatrix<f64> {
    let d = model.dim();
    let id = DMatrix::identity(d, d);
    let ez = model.ez_dense();
    let g = model.net.g_dense();
    let inner = DMatrix::identity(d * d, d * d) - (kron(&id, &ez) + kron(&ez, &id)) * mu
        + ezz_dense(model) * (mu * mu);
    kron(&g, &g) * inner
}

fn forcing_dense(model: &TheoryModel, mu: f64, mean: &DVector<f64>) -> DMatrix<f64> {
    let d = model.dim();
    let g = model.net.g_dense();
    let zeta = &g * model.net.q_dense() * &model.net.w_star * (mu * model.net.eta);
    let a = &g * (DMatrix::identity(d, d) - model.ez_dense() * mu) * mean;
    &a * zeta.transpose()
        + &zeta * a.transpose()
        + &g * model.moments.ett_dense() * g.transpose() * (mu * mu)
        + &zeta * zeta.transpose()
}

/// Network MSD for `n = 0..=iterations` using the dense operator.
pub fn transient_msd_dense(model: &TheoryModel, mu: f64, iterations: usize) -> Vec<f64> {
    let d = model.dim();
    let n = model.net.nodes() as f64;
    let f = f_dense(model, mu);
    let g = model.net.g_dense();
    let mean_map = &g * (DMatrix::identity(d, d) - model.ez_dense() * mu);
    let zeta = &g * model.net.q_dense() * &model.net.w_star * (mu * model.net.eta);
    let mut mean = model.net.w_star.clone();
    let mut w = vec_of(&(&mean * mean.transpose()));
    let mut out = Vec::with_capacity(iterations + 1);
    out.push(unvec(&w, d).trace() / n);
    for _ in 0..iterations {
        w = &f * &w + vec_of(&forcing_dense(model, mu, &mean));
        mean = &mean_map * &mean + &zeta;
        out.push(unvec(&w, d).trace() / n);
    }
    out
}

/// Steady-state MSD by a direct LU solve of `(I - F) vec(W) = vec(R)`.
pub fn steady_state_msd_dense(model: &TheoryModel, mu: f64) -> Result<f64> {
    let d = model.dim();
    let g = model.net.g_dense();
    let zeta = &g * model.net.q_dense() * &model.net.w_star * (mu * model.net.eta);
    let mean = (DMatrix::identity(d, d) - &g * (DMatrix::identity(d, d) - model.ez_dense() * mu))
        .lu()
        .solve(&zeta)
        .ok_or(Error::Singular("I - G(I - mu E{Z})"))?;
    let r = vec_of(&forcing_dense(model, mu, &mean));
    let a = DMatrix::identity(d * d, d * d) - f_dense(model, mu);
    let x = a.lu().solve(&r).ok_or(Error::Singular("I - F"))?;
    Ok(unvec(&x, d).trace() / model.net.nodes() as f64)
}
