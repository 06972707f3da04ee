//! Mean and mean-square behaviour of MD-NMSAF under the independence assumptions.
//!
//! Second-order state is carried as the `NM x NM` matrix `W(n) = E{w~(n) w~(n)^T}` rather
//! than its `N^2 M^2` vectorization; the Kronecker operators are applied blockwise.
//! [`dense`] materializes the same operators for small networks.

mod bounds;
pub mod dense;
mod moments;

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::linalg::{gmres, kron_identity_left, kron_identity_right, power_radius, unvec, vec_of};
use crate::topology::{CombinationWeights, TargetSet};
use crate::{Error, Result};

pub use bounds::{mean_step_bound, MsStepBound, FORMULA_DIM_CAP};
pub use moments::{analytic_update_probability, estimate_moments, MomentConfig, UpdateProbability};

/// Default cap on `N^2 M^2` for the second-order recursions.
pub const THEORY_DIM_CAP: usize = 10_000;

/// Moment estimates feeding every theoretical formula.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    /// `E{B_k}` per node (`M x M`).
    pub eb: Vec<DMatrix<f64>>,
    /// `E{B_k ⊗ B_k}` per node (`M^2 x M^2`); nodes are mutually independent.
    pub ebb: Vec<DMatrix<f64>>,
    /// Diagonal blocks of `E{T T^T}` (`M x M`).
    pub ett: Vec<DMatrix<f64>>,
    /// `E{u u^T / ||u||^2}` per (node, subband); empty when not estimated.
    pub ea: Vec<Vec<DMatrix<f64>>>,
    /// Update probabilities per (node, subband).
    pub p_upd: Vec<Vec<f64>>,
    /// Largest relative standard error over the estimated statistics.
    pub max_rse: f64,
    pub samples: usize,
}

impl MomentSet {
    pub fn nodes(&self) -> usize {
        self.eb.len()
    }

    pub fn filter_len(&self) -> usize {
        self.eb.first().map_or(0, |b| b.nrows())
    }

    /// True when some estimator's relative standard error exceeds 5 %.
    pub fn undersampled(&self) -> bool {
        self.max_rse > 0.05
    }

    /// Block-diagonal `E{B}` as a dense `NM x NM` matrix.
    pub fn eb_dense(&self) -> DMatrix<f64> {
        block_diag(&self.eb)
    }

    pub fn ett_dense(&self) -> DMatrix<f64> {
        block_diag(&self.ett)
    }
}

pub(crate) fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let m = blocks.first().map_or(0, |b| b.nrows());
    let d = m * blocks.len();
    let mut out = DMatrix::zeros(d, d);
    for (a, b) in blocks.iter().enumerate() {
        out.view_mut((a * m, a * m), (m, m)).copy_from(b);
    }
    out
}

/// Network-level matrices: `G = C^T ⊗ I_M`, `Q = Q_s ⊗ I_M` and the stacked targets.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkMatrices {
    /// `[C]_{m,k} = alpha_{m,k}`
    pub c: DMatrix<f64>,
    /// `Q_s = diag(P 1) - P` with `[P]_{k,l} = gamma_{k,l}`; equals `I - P` when every node
    /// has an inter-cluster neighbor.
    pub q_small: DMatrix<f64>,
    pub w_star: DVector<f64>,
    pub eta: f64,
    pub m: usize,
}

impl NetworkMatrices {
    pub fn new(weights: &CombinationWeights, targets: &TargetSet, eta: f64) -> Result<Self> {
        let n = weights.alpha.nrows();
        if targets.w_star.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: targets.w_star.len(),
            });
        }
        let mut q_small = -weights.gamma.clone();
        for k in 0..n {
            q_small[(k, k)] += weights.gamma.row(k).sum();
        }
        Ok(NetworkMatrices {
            c: weights.alpha.clone(),
            q_small,
            w_star: DVector::from_vec(targets.stacked()),
            eta,
            m: targets.filter_len(),
        })
    }

    pub fn nodes(&self) -> usize {
        self.c.nrows()
    }

    pub fn dim(&self) -> usize {
        self.nodes() * self.m
    }

    pub fn g_dense(&self) -> DMatrix<f64> {
        self.c
            .transpose()
            .kronecker(&DMatrix::identity(self.m, self.m))
    }

    pub fn q_dense(&self) -> DMatrix<f64> {
        self.q_small.kronecker(&DMatrix::identity(self.m, self.m))
    }

    /// `G X`
    pub fn g_left(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        kron_identity_left(&self.c.transpose(), x, self.m)
    }

    /// `X G^T`
    pub fn g_right_t(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        kron_identity_right(x, &self.c, self.m)
    }

    /// `zeta = mu eta G Q w*`
    pub fn zeta(&self, mu: f64) -> DVector<f64> {
        let qw = kron_identity_left(
            &self.q_small,
            &DMatrix::from_column_slice(self.dim(), 1, self.w_star.as_slice()),
            self.m,
        );
        let gqw = self.g_left(&qw);
        DVector::from_column_slice(gqw.as_slice()) * (mu * self.eta)
    }
}

/// Theory model for one moment set, network and regularization strength.
#[derive(Debug, Clone)]
pub struct TheoryModel {
    pub moments: MomentSet,
    pub net: NetworkMatrices,
    pub cap: usize,
}

/// Transient prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct TransientCurve {
    /// Linear network MSD for `n = 0..=T`.
    pub msd: Vec<f64>,
    /// Iteration after which the recursion had converged (remaining points repeat it).
    pub converged_at: Option<usize>,
}

impl TheoryModel {
    pub fn new(moments: MomentSet, net: NetworkMatrices) -> Result<Self> {
        if moments.nodes() != net.nodes() {
            return Err(Error::DimensionMismatch {
                expected: net.nodes(),
                found: moments.nodes(),
            });
        }
        if moments.filter_len() != net.m {
            return Err(Error::DimensionMismatch {
                expected: net.m,
                found: moments.filter_len(),
            });
        }
        Ok(TheoryModel {
            moments,
            net,
            cap: THEORY_DIM_CAP,
        })
    }

    pub fn dim(&self) -> usize {
        self.net.dim()
    }

    fn check_cap(&self) -> Result<()> {
        let d2 = self.dim() * self.dim();
        if d2 > self.cap {
            return Err(Error::TheoryCapExceeded {
                dim: d2,
                cap: self.cap,
            });
        }
        Ok(())
    }

    /// `E{Z} = E{B} + eta Q`
    pub fn ez_dense(&self) -> DMatrix<f64> {
        self.moments.eb_dense() + self.net.q_dense() * self.net.eta
    }

    /// `E{B} X` with block-diagonal `E{B}`.
    fn eb_left(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.net.m;
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for (a, eb) in self.moments.eb.iter().enumerate() {
            out.rows_mut(a * m, m).copy_from(&(eb * x.rows(a * m, m)));
        }
        out
    }

    /// `X E{B}` (each `E{B_k}` is symmetric).
    fn eb_right(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.net.m;
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for (a, eb) in self.moments.eb.iter().enumerate() {
            out.columns_mut(a * m, m)
                .copy_from(&(x.columns(a * m, m) * eb));
        }
        out
    }

    /// `E{Z} X`
    fn ez_left(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = self.eb_left(x);
        if self.net.eta != 0.0 {
            out += kron_identity_left(&self.net.q_small, x, self.net.m) * self.net.eta;
        }
        out
    }

    /// `X E{Z}^T`
    fn ez_right_t(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = self.eb_right(x);
        if self.net.eta != 0.0 {
            out += kron_identity_right(x, &self.net.q_small.transpose(), self.net.m) * self.net.eta;
        }
        out
    }

    /// `E{Z X Z^T}` with node-wise independent `B_k`.
    fn ezxz(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.net.m;
        let bx = self.eb_left(x);
        let mut out = self.eb_right(&bx);
        for (a, ebb) in self.moments.ebb.iter().enumerate() {
            let blk = x.view((a * m, a * m), (m, m)).clone_owned();
            let v = ebb * DVector::from_column_slice(blk.as_slice());
            out.view_mut((a * m, a * m), (m, m))
                .copy_from_slice(v.as_slice());
        }
        let eta = self.net.eta;
        if eta != 0.0 {
            let q = &self.net.q_small;
            let qt = q.transpose();
            let bxqt = kron_identity_right(&bx, &qt, m);
            let qx = kron_identity_left(q, x, m);
            let qxb = self.eb_right(&qx);
            let qxqt = kron_identity_right(&qx, &qt, m);
            out += (bxqt + qxb) * eta + qxqt * (eta * eta);
        }
        out
    }

    /// Homogeneous part `F(X) = G [X - mu E{Z} X - mu X E{Z}^T + mu^2 E{Z X Z^T}] G^T`.
    pub fn apply_f(&self, x: &DMatrix<f64>, mu: f64) -> DMatrix<f64> {
        let inner = x - (self.ez_left(x) + self.ez_right_t(x)) * mu + self.ezxz(x) * (mu * mu);
        self.net.g_right_t(&self.net.g_left(&inner))
    }

    /// `G (I - mu E{Z}) v`
    fn mean_map(&self, v: &DVector<f64>, mu: f64) -> DVector<f64> {
        let x = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        let y = self.net.g_left(&(&x - self.ez_left(&x) * mu));
        DVector::from_column_slice(y.as_slice())
    }

    /// Driving term for a given mean weight error `mean`.
    fn forcing(
        &self,
        mu: f64,
        mean: &DVector<f64>,
        zeta: &DVector<f64>,
        gttg: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        let a = self.mean_map(mean, mu);
        let cross = &a * zeta.transpose();
        &cross + cross.transpose() + gttg * (mu * mu) + zeta * zeta.transpose()
    }

    fn gttg(&self) -> DMatrix<f64> {
        self.net
            .g_right_t(&self.net.g_left(&self.moments.ett_dense()))
    }

    /// `E{w~(n)}` from `E{w~(0)} = w*`.
    pub fn mean_weight_error(&self, mu: f64, n: usize) -> DVector<f64> {
        let zeta = self.net.zeta(mu);
        let mut v = self.net.w_star.clone();
        for _ in 0..n {
            v = self.mean_map(&v, mu) + &zeta;
        }
        v
    }

    /// `(I - G[I - mu E{Z}])^{-1} zeta`
    pub fn mean_fixed_point(&self, mu: f64) -> Result<DVector<f64>> {
        let d = self.dim();
        let g = self.net.g_dense();
        let a = DMatrix::identity(d, d) - &g * (DMatrix::identity(d, d) - self.ez_dense() * mu);
        a.lu()
            .solve(&self.net.zeta(mu))
            .ok_or(Error::Singular("I - G(I - mu E{Z})"))
    }

    /// Network MSD `(1/N) tr W(n)` for `n = 0..=iterations`, starting from zero weights.
    pub fn transient_msd(&self, mu: f64, iterations: usize) -> Result<TransientCurve> {
        self.check_cap()?;
        let n_nodes = self.net.nodes() as f64;
        let zeta = self.net.zeta(mu);
        let gttg = self.gttg();
        let mut mean = self.net.w_star.clone();
        let mut w = &self.net.w_star * self.net.w_star.transpose();
        let mut msd = Vec::with_capacity(iterations + 1);
        msd.push(w.trace() / n_nodes);
        let mut converged_at = None;
        for n in 0..iterations {
            let next = self.apply_f(&w, mu) + self.forcing(mu, &mean, &zeta, &gttg);
            mean = self.mean_map(&mean, mu) + &zeta;
            let change = (&next - &w).norm();
            let scale = next.norm();
            w = next;
            let value = w.trace() / n_nodes;
            if !value.is_finite() {
                msd.resize(iterations + 1, f64::INFINITY);
                return Ok(TransientCurve {
                    msd,
                    converged_at: None,
                });
            }
            msd.push(value);
            if change <= 1e-13 * scale {
                converged_at = Some(n + 1);
                msd.resize(iterations + 1, value);
                break;
            }
        }
        Ok(TransientCurve { msd, converged_at })
    }

    /// Whether the second-order recursion is stable at `mu`.
    ///
    /// `F` is a positive map, so `rho(F) < 1` exactly when `(I - F)^{-1}(I)` is positive
    /// definite.
    pub fn is_ms_stable(&self, mu: f64) -> Result<bool> {
        self.check_cap()?;
        let d = self.dim();
        let b = vec_of(&DMatrix::identity(d, d));
        let x = match gmres(
            |v| v - vec_of(&self.apply_f(&unvec(v, d), mu)),
            &b,
            80,
            1e-10,
            60,
        ) {
            Ok(x) => x,
            Err(Error::NoConvergence(_) | Error::Singular(_)) => return Ok(false),
            Err(e) => return Err(e),
        };
        let xm = unvec(&x, d);
        let sym = (&xm + xm.transpose()) * 0.5;
        Ok(sym.cholesky().is_some())
    }

    /// Spectral radius of `F` by power iteration from the identity.
    pub fn spectral_radius(&self, mu: f64, max_iter: usize) -> Result<f64> {
        self.check_cap()?;
        let d = self.dim();
        let start = vec_of(&DMatrix::identity(d, d));
        let trace = |v: &DVector<f64>| (0..d).map(|i| v[i * d + i]).sum::<f64>();
        Ok(power_radius(
            |v| vec_of(&self.apply_f(&unvec(v, d), mu)),
            trace,
            start,
            1e-10,
            max_iter,
        ))
    }

    /// Steady-state network MSD from the fixed point of the second-order recursion.
    pub fn steady_state_msd(&self, mu: f64) -> Result<f64> {
        self.check_cap()?;
        if !self.is_ms_stable(mu)? {
            return Err(Error::NotMeanSquareStable(mu));
        }
        let d = self.dim();
        let zeta = self.net.zeta(mu);
        let mean = self.mean_fixed_point(mu)?;
        let rhs = self.forcing(mu, &mean, &zeta, &self.gttg());
        let x = gmres(
            |v| v - vec_of(&self.apply_f(&unvec(v, d), mu)),
            &vec_of(&rhs),
            100,
            1e-12,
            200,
        )?;
        Ok(unvec(&x, d).trace() / self.net.nodes() as f64)
    }

    pub fn mean_step_bound(&self) -> f64 {
        mean_step_bound(&self.moments, self.net.eta)
    }
}

/// Stacks `v` per node for inspection: `[v_1, ..., v_N]`.
pub fn split_nodes(v: &DVector<f64>, m: usize) -> Vec<Vec<f64>> {
    v.as_slice().chunks(m).map(|c| c.to_vec()).collect()
}

/// Per-node `E{B_k ⊗ B_k}` for deterministic `B_k` (no fluctuation).
pub fn deterministic_ebb(eb: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    eb.iter().map(|b| b.kronecker(b)).collect()
}

/// Zero-noise, no-gating moment set from explicit `E{B_k}` matrices.
pub fn moments_from_eb(
    eb: Vec<DMatrix<f64>>,
    ebb: Vec<DMatrix<f64>>,
    ett: Vec<DMatrix<f64>>,
) -> MomentSet {
    let n = eb.len();
    MomentSet {
        eb,
        ebb,
        ett,
        ea: Vec::new(),
        p_upd: vec![vec![1.0]; n],
        max_rse: 0.0,
        samples: 0,
    }
}

#[cfg(test)]
mod tests;
