use nalgebra::DMatrix;

use super::{dense, MomentSet, TheoryModel};
use crate::linalg::kron;
use crate::{Error, Result};

/// Largest `N^2 M^2` for which the closed-form mean-square bound is evaluated.
pub const FORMULA_DIM_CAP: usize = 256;

/// `2 / (max_k lambda_max(E{B_k}) + 2 eta)`
pub fn mean_step_bound(moments: &MomentSet, eta: f64) -> f64 {
    let lmax = moments
        .eb
        .iter()
        .map(|b| b.clone().symmetric_eigen().eigenvalues.max())
        .fold(0.0f64, f64::max);
    2.0 / (lmax + 2.0 * eta)
}

/// Mean-square step-size bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsStepBound {
    /// Closed form from the eigenvalues of the Kronecker moment matrices; `None` above
    /// [`FORMULA_DIM_CAP`].
    pub formula: Option<f64>,
    /// Largest stable step found by bisection on the spectral radius of the recursion.
    pub empirical: f64,
}

/// Largest real positive eigenvalue, or 0 when there is none.
fn max_real_positive(a: DMatrix<f64>) -> f64 {
    let scale = a.amax().max(1e-300);
    a.complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= 1e-9 * scale && z.re > 0.0)
        .map(|z| z.re)
        .fold(0.0, f64::max)
}

impl TheoryModel {
    /// `min(1 / lambda_max(A^{-1} H), 1 / max lambda in R+ of [[A/2, -H/2], [I, 0]])` with
    /// `A = I ⊗ E{Z} + E{Z} ⊗ I` and `H = E{Z ⊗ Z}`.
    pub fn ms_formula_bound(&self) -> Result<f64> {
        let d = self.dim();
        let d2 = d * d;
        if d2 > FORMULA_DIM_CAP {
            return Err(Error::TheoryCapExceeded {
                dim: d2,
                cap: FORMULA_DIM_CAP,
            });
        }
        let id = DMatrix::identity(d, d);
        let ez = self.ez_dense();
        let a = kron(&id, &ez) + kron(&ez, &id);
        let h = dense::ezz_dense(self);
        let ainv_h = a
            .clone()
            .lu()
            .solve(&h)
            .ok_or(Error::Singular("I ⊗ E{Z} + E{Z} ⊗ I"))?;
        let l1 = max_real_positive(ainv_h);
        let mut phi = DMatrix::zeros(2 * d2, 2 * d2);
        phi.view_mut((0, 0), (d2, d2)).copy_from(&(&a * 0.5));
        phi.view_mut((0, d2), (d2, d2)).copy_from(&(&h * -0.5));
        phi.view_mut((d2, 0), (d2, d2)).fill_with_identity();
        let l2 = max_real_positive(phi);
        let b1 = if l1 > 0.0 { 1.0 / l1 } else { f64::INFINITY };
        let b2 = if l2 > 0.0 { 1.0 / l2 } else { f64::INFINITY };
        Ok(b1.min(b2))
    }

    /// Bisection for the largest `mu` with a stable second-order recursion, to relative
    /// precision `rel_tol`.
    pub fn empirical_ms_bound(&self, rel_tol: f64) -> Result<f64> {
        self.check_cap()?;
        let mut lo = 0.0;
        let mut hi = self.mean_step_bound();
        let mut doublings = 0;
        while self.is_ms_stable(hi)? {
            lo = hi;
            hi *= 2.0;
            doublings += 1;
            if doublings > 40 {
                return Ok(f64::INFINITY);
            }
        }
        while hi - lo > rel_tol * hi {
            let mid = 0.5 * (lo + hi);
            if self.is_ms_stable(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    pub fn ms_step_bound(&self) -> Result<MsStepBound> {
        let formula = match self.ms_formula_bound() {
            Ok(b) => Some(b),
            Err(Error::TheoryCapExceeded { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(MsStepBound {
            formula,
            empirical: self.empirical_ms_bound(1e-3)?,
        })
    }
}
