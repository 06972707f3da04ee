//! Diffusion adapt steps (MD-NMSAF and the baselines) and the intra-cluster combine step.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::filterbank::dot;
use crate::robust::{phi_score, ThresholdConfig, ThresholdState};
use crate::topology::{CombinationWeights, Topology};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlgorithmKind {
    MdNmsaf,
    MdLms,
    MdApa,
    MdApm,
    MdApmcc,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 5] = [
        AlgorithmKind::MdLms,
        AlgorithmKind::MdApa,
        AlgorithmKind::MdApm,
        AlgorithmKind::MdApmcc,
        AlgorithmKind::MdNmsaf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::MdNmsaf => "md-nmsaf",
            AlgorithmKind::MdLms => "md-lms",
            AlgorithmKind::MdApa => "md-apa",
            AlgorithmKind::MdApm => "md-apm",
            AlgorithmKind::MdApmcc => "md-apmcc",
        }
    }

    /// Whether the adapt step runs on decimated subband data.
    pub fn is_subband(self) -> bool {
        matches!(self, AlgorithmKind::MdNmsaf)
    }

    /// Rows of the data block used per update (1 for LMS, `p` for AP variants).
    pub fn block_rows(self, p: usize) -> usize {
        match self {
            AlgorithmKind::MdNmsaf | AlgorithmKind::MdLms => 1,
            _ => p,
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AlgorithmKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub mu: f64,
    pub eta: f64,
    pub eps_reg: f64,
    /// Subband count (subband algorithms).
    pub n_d: usize,
    /// Projection order (affine-projection algorithms).
    pub p: usize,
    /// Correntropy kernel width.
    pub sigma_mcc: f64,
    pub threshold: ThresholdConfig,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            mu: 0.01,
            eta: 0.01,
            eps_reg: 1e-6,
            n_d: 4,
            p: 2,
            sigma_mcc: 4.0,
            threshold: ThresholdConfig::default(),
        }
    }
}

impl StepConfig {
    pub fn validate(&self, kind: AlgorithmKind) -> Result<()> {
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "step size {} must be non-negative",
                self.mu
            )));
        }
        if !(self.eta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "regularization strength {} < 0",
                self.eta
            )));
        }
        if !(self.eps_reg > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "regularizer {} must be positive",
                self.eps_reg
            )));
        }
        match kind {
            AlgorithmKind::MdNmsaf if self.n_d == 0 => {
                Err(Error::InvalidParameter("n_d must be at least 1".into()))
            }
            AlgorithmKind::MdApa | AlgorithmKind::MdApm | AlgorithmKind::MdApmcc if self.p == 0 => {
                Err(Error::InvalidParameter(
                    "projection order must be at least 1".into(),
                ))
            }
            AlgorithmKind::MdApmcc if !(self.sigma_mcc > 0.0) => Err(Error::InvalidParameter(
                format!("kernel width {} must be positive", self.sigma_mcc),
            )),
            AlgorithmKind::MdNmsaf | AlgorithmKind::MdApm => self.threshold.validate(),
            _ => Ok(()),
        }
    }
}

/// Per-subband data seen by one node at one decimated instant.
pub trait SubbandView {
    fn subbands(&self) -> usize;
    fn regressor(&self, i: usize) -> &[f64];
    fn desired(&self, i: usize) -> f64;
}

/// Owned subband data, convenient for tests and one-off calls.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandFrame {
    pub regressors: Vec<Vec<f64>>,
    pub desired: Vec<f64>,
}

impl SubbandView for SubbandFrame {
    fn subbands(&self) -> usize {
        self.regressors.len()
    }
    fn regressor(&self, i: usize) -> &[f64] {
        &self.regressors[i]
    }
    fn desired(&self, i: usize) -> f64 {
        self.desired[i]
    }
}

/// The last `P` fullband data pairs of one node.
///
/// `u` holds `[u(t), u(t-1), ..., u(t-M-P+2)]` so regressor `j` is `u[j..j+M]`;
/// `d` holds `[d(t), ..., d(t-P+1)]`.
#[derive(Debug, Clone, Copy)]
pub struct BlockFrame<'a> {
    pub u: &'a [f64],
    pub d: &'a [f64],
    pub m: usize,
}

impl<'a> BlockFrame<'a> {
    pub fn rows(&self) -> usize {
        self.d.len()
    }

    #[inline]
    pub fn regressor(&self, j: usize) -> &'a [f64] {
        &self.u[j..j + self.m]
    }
}

/// Inter-cluster neighbors of one node with their `gamma` weights.
pub type InterLinks = [(usize, f64)];

/// Adds `mu eta sum_l gamma_{k,l} (w_l - w_k)` to `psi`.
#[inline]
pub fn add_inter_cluster(
    psi: &mut [f64],
    k: usize,
    all_w: &[Vec<f64>],
    links: &InterLinks,
    mu: f64,
    eta: f64,
) {
    let scale = mu * eta;
    if scale == 0.0 {
        return;
    }
    let wk = &all_w[k];
    for &(l, g) in links {
        let c = scale * g;
        for ((p, wl), wkj) in psi.iter_mut().zip(&all_w[l]).zip(wk) {
            *p += c * (wl - wkj);
        }
    }
}

/// MD-NMSAF adapt step for node `k`. Writes `psi_k` and the per-subband gate outcomes.
#[allow(clippy::too_many_arguments)]
pub fn mdnmsaf_adapt<V: SubbandView + ?Sized>(
    all_w: &[Vec<f64>],
    k: usize,
    data: &V,
    thresholds: &mut [ThresholdState],
    links: &InterLinks,
    cfg: &StepConfig,
    psi: &mut [f64],
    passed: &mut [bool],
) {
    let w = &all_w[k];
    psi.copy_from_slice(w);
    for i in 0..data.subbands() {
        let u = data.regressor(i);
        let e = data.desired(i) - dot(u, w);
        let xi = thresholds[i].update(e);
        let phi = phi_score(e, xi);
        passed[i] = e.abs() < xi;
        if phi != 0.0 {
            let g = cfg.mu * phi / (dot(u, u) + cfg.eps_reg);
            for (p, uj) in psi.iter_mut().zip(u) {
                *p += g * uj;
            }
        }
    }
    add_inter_cluster(psi, k, all_w, links, cfg.mu, cfg.eta);
}

/// MD-LMS adapt step: `psi = w + mu e u + inter-cluster term`.
pub fn mdlms_adapt(
    all_w: &[Vec<f64>],
    k: usize,
    data: &BlockFrame<'_>,
    links: &InterLinks,
    cfg: &StepConfig,
    psi: &mut [f64],
) {
    let w = &all_w[k];
    psi.copy_from_slice(w);
    let u = data.regressor(0);
    let e = data.d[0] - dot(u, w);
    let g = cfg.mu * e;
    for (p, uj) in psi.iter_mut().zip(u) {
        *p += g * uj;
    }
    add_inter_cluster(psi, k, all_w, links, cfg.mu, cfg.eta);
}

/// Error shaping applied before the affine-projection solve.
#[derive(Debug)]
pub enum ApShaping<'a> {
    None,
    /// Huber score with a fullband threshold driven by the newest error.
    MEstimate(&'a mut ThresholdState),
    /// Gaussian kernel weights `exp(-e^2 / (2 sigma^2))`.
    Correntropy(f64),
}

/// Shared affine-projection step: `psi = w + mu U (eps I + U^T U)^{-1} s(e) + inter term`.
///
/// Returns the shaped error vector.
pub fn ap_adapt(
    all_w: &[Vec<f64>],
    k: usize,
    data: &BlockFrame<'_>,
    shaping: ApShaping<'_>,
    links: &InterLinks,
    cfg: &StepConfig,
    psi: &mut [f64],
) -> Result<DVector<f64>> {
    let w = &all_w[k];
    let p = data.rows();
    let mut e = DVector::from_fn(p, |j, _| data.d[j] - dot(data.regressor(j), w));
    match shaping {
        ApShaping::None => {}
        ApShaping::MEstimate(state) => {
            let xi = state.update(e[0]);
            e.iter_mut().for_each(|v| *v = phi_score(*v, xi));
        }
        ApShaping::Correntropy(sigma) => {
            let s2 = 2.0 * sigma * sigma;
            e.iter_mut().for_each(|v| *v *= libm::exp(-*v * *v / s2));
        }
    }
    psi.copy_from_slice(w);
    if e.iter().any(|v| *v != 0.0) {
        let gram = DMatrix::from_fn(p, p, |a, b| {
            dot(data.regressor(a), data.regressor(b)) + if a == b { cfg.eps_reg } else { 0.0 }
        });
        let g = gram
            .cholesky()
            .ok_or(Error::Singular("regularized Gram matrix"))?
            .solve(&e);
        for j in 0..p {
            let c = cfg.mu * g[j];
            for (ps, uj) in psi.iter_mut().zip(data.regressor(j)) {
                *ps += c * uj;
            }
        }
    }
    add_inter_cluster(psi, k, all_w, links, cfg.mu, cfg.eta);
    Ok(e)
}

/// `w_k = sum_m alpha_{m,k} psi_m` over intra-cluster neighbors.
pub fn combine(psis: &[Vec<f64>], intra: &[(usize, f64)], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for &(m, a) in intra {
        for (o, p) in out.iter_mut().zip(&psis[m]) {
            *o += a * p;
        }
    }
}

/// Network-wide state for one algorithm instance.
#[derive(Debug, Clone)]
pub struct NetworkFilter {
    pub kind: AlgorithmKind,
    pub cfg: StepConfig,
    m: usize,
    intra: Vec<Vec<(usize, f64)>>,
    inter: Vec<Vec<(usize, f64)>>,
    pub w: Vec<Vec<f64>>,
    psi: Vec<Vec<f64>>,
    thresholds: Vec<Vec<ThresholdState>>,
    passed: Vec<Vec<bool>>,
}

impl NetworkFilter {
    /// Zero-initialized filters for every node.
    pub fn new(
        kind: AlgorithmKind,
        cfg: StepConfig,
        topo: &Topology,
        weights: &CombinationWeights,
        m: usize,
    ) -> Result<Self> {
        cfg.validate(kind)?;
        if m == 0 {
            return Err(Error::InvalidParameter(
                "filter length must be at least 1".into(),
            ));
        }
        let n = topo.nodes();
        if weights.alpha.nrows() != n || weights.gamma.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: weights.alpha.nrows(),
            });
        }
        let intra = (0..n)
            .map(|k| {
                (0..n)
                    .filter(|&m| weights.alpha[(m, k)] != 0.0)
                    .map(|m| (m, weights.alpha[(m, k)]))
                    .collect()
            })
            .collect();
        let inter = (0..n)
            .map(|k| {
                (0..n)
                    .filter(|&l| weights.gamma[(k, l)] != 0.0)
                    .map(|l| (l, weights.gamma[(k, l)]))
                    .collect()
            })
            .collect();
        let per_node = match kind {
            AlgorithmKind::MdNmsaf => cfg.n_d,
            AlgorithmKind::MdApm => 1,
            _ => 0,
        };
        let proto = ThresholdState::new(&cfg.threshold);
        let thresholds = (0..n)
            .map(|_| match &proto {
                Ok(s) => vec![s.clone(); per_node],
                Err(_) => Vec::new(),
            })
            .collect();
        Ok(NetworkFilter {
            kind,
            cfg,
            m,
            intra,
            inter,
            w: vec![vec![0.0; m]; n],
            psi: vec![vec![0.0; m]; n],
            thresholds,
            passed: vec![vec![false; per_node.max(1)]; n],
        })
    }

    pub fn nodes(&self) -> usize {
        self.w.len()
    }

    pub fn filter_len(&self) -> usize {
        self.m
    }

    pub fn thresholds(&self, k: usize) -> &[ThresholdState] {
        &self.thresholds[k]
    }

    /// Gate outcomes of the last adapt step of node `k` (robust algorithms).
    pub fn passed(&self, k: usize) -> &[bool] {
        &self.passed[k]
    }

    /// Adapt step of node `k` from subband data; the result is held until [`Self::combine_all`].
    pub fn adapt_subband<V: SubbandView + ?Sized>(&mut self, k: usize, data: &V) -> Result<()> {
        if self.kind != AlgorithmKind::MdNmsaf {
            return Err(Error::InvalidParameter(format!(
                "{} does not take subband data",
                self.kind
            )));
        }
        if data.subbands() != self.cfg.n_d {
            return Err(Error::DimensionMismatch {
                expected: self.cfg.n_d,
                found: data.subbands(),
            });
        }
        mdnmsaf_adapt(
            &self.w,
            k,
            data,
            &mut self.thresholds[k],
            &self.inter[k],
            &self.cfg,
            &mut self.psi[k],
            &mut self.passed[k],
        );
        Ok(())
    }

    /// Adapt step of node `k` from fullband block data.
    pub fn adapt_block(&mut self, k: usize, data: &BlockFrame<'_>) -> Result<()> {
        let cfg = self.cfg;
        match self.kind {
            AlgorithmKind::MdNmsaf => {
                return Err(Error::InvalidParameter(String::from(
                    "md-nmsaf takes subband data",
                )));
            }
            AlgorithmKind::MdLms => {
                mdlms_adapt(&self.w, k, data, &self.inter[k], &cfg, &mut self.psi[k])
            }
            AlgorithmKind::MdApa => {
                ap_adapt(
                    &self.w,
                    k,
                    data,
                    ApShaping::None,
                    &self.inter[k],
                    &cfg,
                    &mut self.psi[k],
                )?;
            }
            AlgorithmKind::MdApm => {
                let (thr, psi) = (&mut self.thresholds[k][0], &mut self.psi[k]);
                let e = ap_adapt(
                    &self.w,
                    k,
                    data,
                    ApShaping::MEstimate(thr),
                    &self.inter[k],
                    &cfg,
                    psi,
                )?;
                self.passed[k][0] = e[0] != 0.0;
            }
            AlgorithmKind::MdApmcc => {
                let shaping = ApShaping::Correntropy(cfg.sigma_mcc);
                ap_adapt(
                    &self.w,
                    k,
                    data,
                    shaping,
                    &self.inter[k],
                    &cfg,
                    &mut self.psi[k],
                )?;
            }
        }
        Ok(())
    }

    /// Combine step for every node; call after all adapt steps of the iteration.
    pub fn combine_all(&mut self) {
        for k in 0..self.w.len() {
            combine(&self.psi, &self.intra[k], &mut self.w[k]);
        }
    }

    /// One synchronous iteration over subband data (all adapts, then all combines).
    pub fn run_iteration_subband<V: SubbandView>(&mut self, data: &[V]) -> Result<()> {
        for (k, d) in data.iter().enumerate() {
            self.adapt_subband(k, d)?;
        }
        self.combine_all();
        Ok(())
    }

    /// One synchronous iteration over fullband block data.
    pub fn run_iteration_block(&mut self, data: &[BlockFrame<'_>]) -> Result<()> {
        for (k, d) in data.iter().enumerate() {
            self.adapt_block(k, d)?;
        }
        self.combine_all();
        Ok(())
    }

    /// `(1/N) sum_k ||w*_k - w_k||^2`
    pub fn msd(&self, targets: &[Vec<f64>]) -> f64 {
        network_msd(&self.w, targets)
    }
}

/// `(1/N) sum_k ||w*_k - w_k||^2`
pub fn network_msd(w: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    let total: f64 = w
        .iter()
        .zip(targets)
        .map(|(wk, tk)| {
            wk.iter()
                .zip(tk)
                .map(|(a, b)| (b - a) * (b - a))
                .sum::<f64>()
        })
        .sum();
    total / w.len() as f64
}
