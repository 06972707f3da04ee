//! Trial-parallel Monte-Carlo ensembles.
//!
//! Trials are summed in fixed chunks and the chunk sums are folded in trial order, so the
//! result does not depend on the number of worker threads.

use anyhow::Result;
use rayon::prelude::*;
use subdiff_core::sim::{simulate_trial, Scenario};

pub use subdiff_core::algorithms::network_msd as empirical_msd;

pub const DB_FLOOR: f64 = -300.0;
pub const DB_CEIL: f64 = 300.0;
/// Curves rising above this are flagged as diverged.
pub const DIVERGENCE_DB: f64 = 50.0;
/// Steady-state values average this many final points.
pub const STEADY_STATE_POINTS: usize = 100;

const CHUNK: u64 = 4;

/// `10 log10(x)` clamped to `[DB_FLOOR, DB_CEIL]`.
pub fn to_db(x: f64) -> f64 {
    if x.is_nan() {
        return DB_CEIL;
    }
    (10.0 * x.log10()).clamp(DB_FLOOR, DB_CEIL)
}

/// Mean of the final `STEADY_STATE_POINTS` values (all of them when shorter).
pub fn tail_mean(curve: &[f64]) -> f64 {
    let tail = &curve[curve.len().saturating_sub(STEADY_STATE_POINTS)..];
    tail.iter().sum::<f64>() / tail.len().max(1) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsdCurve {
    /// Ensemble-average linear MSD per point.
    pub msd: Vec<f64>,
    pub msd_db: Vec<f64>,
    pub trials: u64,
    pub config_hash: String,
    pub diverged: bool,
}

impl MsdCurve {
    pub fn from_linear(msd: Vec<f64>, trials: u64, config_hash: String) -> Self {
        let msd_db: Vec<f64> = msd.iter().map(|&x| to_db(x)).collect();
        let diverged = msd_db.iter().any(|&d| d > DIVERGENCE_DB);
        MsdCurve {
            msd,
            msd_db,
            trials,
            config_hash,
            diverged,
        }
    }

    pub fn steady_state(&self) -> f64 {
        tail_mean(&self.msd)
    }

    pub fn steady_state_db(&self) -> f64 {
        to_db(self.steady_state())
    }

    /// First point at or below `level_db`.
    pub fn first_below(&self, level_db: f64) -> Option<usize> {
        self.msd_db.iter().position(|&d| d <= level_db)
    }
}

/// Per-lane ensemble statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub trials: u64,
    /// Mean linear MSD per lane and point.
    pub mean: Vec<Vec<f64>>,
    /// Per lane, each trial's steady-state readout (linear).
    pub steady: Vec<Vec<f64>>,
    /// Per lane, number of trials that hit the simulator's divergence cap.
    pub diverged_trials: Vec<u64>,
}

impl Ensemble {
    pub fn curve(&self, lane: usize, config_hash: &str) -> MsdCurve {
        MsdCurve::from_linear(self.mean[lane].clone(), self.trials, config_hash.to_owned())
    }

    /// Standard error of the steady-state readout of `lane` across trials.
    pub fn steady_state_se(&self, lane: usize) -> f64 {
        let v = &self.steady[lane];
        let n = v.len() as f64;
        if n < 2.0 {
            return f64::NAN;
        }
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    }
}

struct Partial {
    sum: Vec<Vec<f64>>,
    steady: Vec<Vec<f64>>,
    diverged: Vec<u64>,
}

fn run_chunk(sc: &Scenario, trials: std::ops::Range<u64>) -> Result<Partial> {
    let lanes = sc.lanes.len();
    let mut p = Partial {
        sum: vec![vec![0.0; sc.length]; lanes],
        steady: vec![Vec::new(); lanes],
        diverged: vec![0; lanes],
    };
    for trial in trials {
        let out = simulate_trial(sc, trial)?;
        for (l, curve) in out.curves.iter().enumerate() {
            for (s, x) in p.sum[l].iter_mut().zip(curve) {
                *s += x;
            }
            p.steady[l].push(tail_mean(curve));
            p.diverged[l] += out.diverged[l] as u64;
        }
    }
    Ok(p)
}

/// Runs trials `0..trials` of `sc` in parallel.
pub fn run_ensemble(sc: &Scenario, trials: u64) -> Result<Ensemble> {
    sc.validate()?;
    let lanes = sc.lanes.len();
    let mut total = Partial {
        sum: vec![vec![0.0; sc.length]; lanes],
        steady: vec![Vec::new(); lanes],
        diverged: vec![0; lanes],
    };
    let chunks: Vec<std::ops::Range<u64>> = (0..trials.div_ceil(CHUNK))
        .map(|c| c * CHUNK..((c + 1) * CHUNK).min(trials))
        .collect();
    // bounded memory: a wave of chunks at a time, folded in order
    let wave = 2 * rayon::current_num_threads().max(1);
    for group in chunks.chunks(wave) {
        let parts: Vec<Partial> = group
            .par_iter()
            .map(|r| run_chunk(sc, r.clone()))
            .collect::<Result<_>>()?;
        for p in parts {
            for l in 0..lanes {
                for (s, x) in total.sum[l].iter_mut().zip(&p.sum[l]) {
                    *s += x;
                }
                total.steady[l].extend_from_slice(&p.steady[l]);
                total.diverged[l] += p.diverged[l];
            }
        }
    }
    let inv = 1.0 / trials.max(1) as f64;
    let mean = total
        .sum
        .into_iter()
        .map(|c| c.into_iter().map(|x| x * inv).collect())
        .collect();
    Ok(Ensemble {
        trials,
        mean,
        steady: total.steady,
        diverged_trials: total.diverged,
    })
}
