use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::MomentSet;
use crate::filterbank::{dot, AnalysisBank, StreamAnalyzer};
use crate::rng::{stream, StreamRole};
use crate::signal::{InputModel, InputSource, NoiseModel};
use crate::{Error, Result};

/// Where the per-subband update probabilities come from.
#[derive(Debug, Clone, PartialEq)]
pub enum UpdateProbability {
    /// `(1 - p_r) (2 Phi(k_xi) - 1)` for every node and subband.
    Analytic { k_xi: f64 },
    /// Measured values per (node, subband), e.g. from a pilot simulation.
    Given(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentConfig {
    /// Decimated regressor draws per node.
    pub samples: usize,
    pub seed: u64,
    pub update_probability: UpdateProbability,
}

impl Default for MomentConfig {
    fn default() -> Self {
        MomentConfig {
            samples: 20_000,
            seed: 0,
            update_probability: UpdateProbability::Analytic { k_xi: 2.576 },
        }
    }
}

/// Probability that a Gaussian error passes `|e| < k_xi sigma`, times the impulse-free rate.
pub fn analytic_update_probability(p_r: f64, k_xi: f64) -> f64 {
    (1.0 - p_r) * libm::erf(k_xi / core::f64::consts::SQRT_2)
}

const BATCHES: usize = 20;

/// Monte-Carlo estimates of `E{B_k}`, `E{B_k ⊗ B_k}` and `E{T T^T}` from steady-state
/// subband regressors of each node's input process.
pub fn estimate_moments(
    inputs: &[InputModel],
    noises: &[NoiseModel],
    bank: &AnalysisBank,
    m: usize,
    cfg: &MomentConfig,
) -> Result<MomentSet> {
    let n = inputs.len();
    if noises.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: noises.len(),
        });
    }
    if cfg.samples < BATCHES {
        return Err(Error::InvalidParameter(
            "at least 20 moment samples are required".into(),
        ));
    }
    let n_d = bank.subbands();
    let p_upd: Vec<Vec<f64>> = match &cfg.update_probability {
        UpdateProbability::Analytic { k_xi } => noises
            .iter()
            .map(|v| vec![analytic_update_probability(v.p_r, *k_xi); n_d])
            .collect(),
        UpdateProbability::Given(p) => {
            if p.len() != n || p.iter().any(|r| r.len() != n_d) {
                return Err(Error::DimensionMismatch {
                    expected: n * n_d,
                    found: p.iter().map(Vec::len).sum(),
                });
            }
            p.clone()
        }
    };
    if p_upd.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidParameter(
            "update probabilities must lie in [0, 1]".into(),
        ));
    }
    let h_energy: Vec<f64> = bank.filters().iter().map(|h| dot(h, h)).collect();
    let s = cfg.samples;
    let warmup = bank.filter_len() + m * n_d + 10 * m;
    let mut out = MomentSet {
        eb: Vec::new(),
        ebb: Vec::new(),
        ett: Vec::new(),
        ea: Vec::new(),
        p_upd,
        max_rse: 0.0,
        samples: s,
    };

    for k in 0..n {
        let mut src = InputSource::from_rng(
            inputs[k],
            stream(cfg.seed, 0, k as u64, StreamRole::Moments),
            10 * m,
        )?;
        let mut an = StreamAnalyzer::new(bank, m);
        for _ in 0..warmup {
            an.push_input(src.next_sample());
        }
        let p = &out.p_upd[k];
        let mut eb = DMatrix::<f64>::zeros(m, m);
        let mut ebb = DMatrix::<f64>::zeros(m * m, m * m);
        let mut ea: Vec<DMatrix<f64>> = vec![DMatrix::zeros(m, m); n_d];
        let mut ec: Vec<DMatrix<f64>> = vec![DMatrix::zeros(m, m); n_d];
        let mut batch = vec![vec![0.0f64; BATCHES]; n_d];
        let mut b = DMatrix::<f64>::zeros(m, m);
        let per_batch = s / BATCHES;
        let mut drawn = 0;
        while drawn < s {
            if !an.push_input(src.next_sample()) {
                continue;
            }
            b.fill(0.0);
            for i in 0..n_d {
                let u = DVector::from_column_slice(an.regressor(i));
                let norm = u.norm_squared();
                if norm == 0.0 {
                    continue;
                }
                let outer = &u * u.transpose();
                let a = &outer / norm;
                b += &a * p[i];
                ea[i] += a;
                ec[i] += &outer / (norm * norm);
                batch[i][(drawn / per_batch).min(BATCHES - 1)] += 1.0 / norm;
            }
            eb += &b;
            ebb += b.kronecker(&b);
            drawn += 1;
        }
        let inv = 1.0 / s as f64;
        eb *= inv;
        ebb *= inv;
        let mut ett = DMatrix::zeros(m, m);
        for i in 0..n_d {
            ec[i] *= inv;
            ea[i] *= inv;
            ett += &ec[i] * (p[i] * p[i] * noises[k].sigma_g_sq * h_energy[i]);
        }
        for sums in &batch {
            out.max_rse = out.max_rse.max(batch_rse(sums, per_batch, s));
        }
        // exact symmetry
        out.eb.push((&eb + eb.transpose()) * 0.5);
        out.ebb.push(ebb);
        out.ett.push((&ett + ett.transpose()) * 0.5);
        out.ea.push(ea);
    }
    Ok(out)
}

/// Relative standard error of a mean from batch sums.
fn batch_rse(sums: &[f64], per_batch: usize, total: usize) -> f64 {
    let nb = sums.len();
    // the last batch absorbs the remainder
    let counts: Vec<f64> = (0..nb)
        .map(|b| {
            if b + 1 == nb {
                (total - per_batch * (nb - 1)) as f64
            } else {
                per_batch as f64
            }
        })
        .collect();
    let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, c)| s / c).collect();
    let grand = sums.iter().sum::<f64>() / total as f64;
    if grand == 0.0 {
        return 0.0;
    }
    let var = means.iter().map(|x| (x - grand) * (x - grand)).sum::<f64>() / (nb - 1) as f64;
    libm::sqrt(var / nb as f64) / grand.abs()
}
