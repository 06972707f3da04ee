//! Input processes, contaminated-Gaussian measurement noise and linear-model references.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use crate::rng::StreamRng;
use crate::{Error, Result};

/// Input recursion driven by white Gaussian innovations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputKind {
    White,
    /// `u(t) = beta1 u(t-1) + delta(t)`
    Ar1 {
        beta1: f64,
    },
    /// `u(t) = beta2 u(t-1) + beta3 u(t-2) + delta(t)`
    Ar2 {
        beta2: f64,
        beta3: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputModel {
    pub kind: InputKind,
    /// Innovation variance.
    pub sigma_delta_sq: f64,
}

impl InputModel {
    pub fn new(kind: InputKind, sigma_delta_sq: f64) -> Result<Self> {
        let model = InputModel {
            kind,
            sigma_delta_sq,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_delta_sq >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "innovation variance {} must be non-negative",
                self.sigma_delta_sq
            )));
        }
        match self.kind {
            InputKind::White => Ok(()),
            InputKind::Ar1 { beta1 } if beta1.abs() < 1.0 => Ok(()),
            InputKind::Ar1 { beta1 } => Err(Error::UnstableInput(format!(
                "|beta1| = {} >= 1",
                beta1.abs()
            ))),
            // roots of z^2 - b2 z - b3 inside the unit circle (stationarity triangle)
            InputKind::Ar2 { beta2, beta3 }
                if beta3.abs() < 1.0 && beta2 + beta3 < 1.0 && beta3 - beta2 < 1.0 =>
            {
                Ok(())
            }
            InputKind::Ar2 { beta2, beta3 } => Err(Error::UnstableInput(format!(
                "AR(2) coefficients ({beta2}, {beta3}) outside the stationarity region"
            ))),
        }
    }

    /// Stationary variance of the process.
    pub fn variance(&self) -> f64 {
        let s = self.sigma_delta_sq;
        match self.kind {
            InputKind::White => s,
            InputKind::Ar1 { beta1 } => s / (1.0 - beta1 * beta1),
            InputKind::Ar2 { beta2, beta3 } => {
                (1.0 - beta3) * s
                    / ((1.0 + beta3) * ((1.0 - beta3) * (1.0 - beta3) - beta2 * beta2))
            }
        }
    }
}

/// Streaming input generator with a discarded burn-in prefix.
#[derive(Debug, Clone)]
pub struct InputSource {
    model: InputModel,
    sigma: f64,
    rng: StreamRng,
    prev1: f64,
    prev2: f64,
}

impl InputSource {
    pub fn new(model: InputModel, seed: u64, burn_in: usize) -> Result<Self> {
        Self::from_rng(model, StreamRng::seed_from_u64(seed), burn_in)
    }

    pub fn from_rng(model: InputModel, rng: StreamRng, burn_in: usize) -> Result<Self> {
        model.validate()?;
        let mut src = InputSource {
            model,
            sigma: libm::sqrt(model.sigma_delta_sq),
            rng,
            prev1: 0.0,
            prev2: 0.0,
        };
        if !matches!(model.kind, InputKind::White) {
            for _ in 0..burn_in {
                src.next_sample();
            }
        }
        Ok(src)
    }

    #[inline]
    pub fn next_sample(&mut self) -> f64 {
        let delta: f64 = self.rng.sample::<f64, _>(StandardNormal) * self.sigma;
        let u = match self.model.kind {
            InputKind::White => delta,
            InputKind::Ar1 { beta1 } => beta1 * self.prev1 + delta,
            InputKind::Ar2 { beta2, beta3 } => beta2 * self.prev1 + beta3 * self.prev2 + delta,
        };
        self.prev2 = self.prev1;
        self.prev1 = u;
        u
    }
}

/// Generates `length` input samples after discarding `burn_in` warm-up samples.
pub fn gen_input(model: &InputModel, length: usize, burn_in: usize, seed: u64) -> Result<Vec<f64>> {
    let mut src = InputSource::new(*model, seed, burn_in)?;
    Ok((0..length).map(|_| src.next_sample()).collect())
}

/// Contaminated-Gaussian noise: Gaussian background plus Bernoulli-gated Gaussian impulses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma_g_sq: f64,
    /// Impulse probability.
    pub p_r: f64,
    /// Impulse-to-background variance ratio.
    pub kappa: f64,
}

impl NoiseModel {
    pub fn new(sigma_g_sq: f64, p_r: f64, kappa: f64) -> Result<Self> {
        let m = NoiseModel {
            sigma_g_sq,
            p_r,
            kappa,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn gaussian(sigma_g_sq: f64) -> Self {
        NoiseModel {
            sigma_g_sq,
            p_r: 0.0,
            kappa: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_g_sq >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "background variance {} < 0",
                self.sigma_g_sq
            )));
        }
        if !(0.0..=1.0).contains(&self.p_r) {
            return Err(Error::InvalidParameter(format!(
                "impulse probability {} outside [0, 1]",
                self.p_r
            )));
        }
        if !(self.kappa >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "impulse variance ratio {} < 1",
                self.kappa
            )));
        }
        Ok(())
    }

    /// Variance of the mixture `sigma_g^2 (1 + p_r kappa)`.
    pub fn variance(&self) -> f64 {
        self.sigma_g_sq * (1.0 + self.p_r * self.kappa)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSample {
    pub background: f64,
    /// Impulse component `b(t) c(t)`; zero when `b(t) = 0`.
    pub impulse: f64,
    pub impulsive: bool,
}

impl NoiseSample {
    #[inline]
    pub fn total(&self) -> f64 {
        self.background + self.impulse
    }
}

#[derive(Debug, Clone)]
pub struct NoiseSource {
    sigma_g: f64,
    sigma_c: f64,
    p_r: f64,
    rng: StreamRng,
}

impl NoiseSource {
    pub fn new(model: NoiseModel, seed: u64) -> Result<Self> {
        Self::from_rng(model, StreamRng::seed_from_u64(seed))
    }

    pub fn from_rng(model: NoiseModel, rng: StreamRng) -> Result<Self> {
        model.validate()?;
        Ok(NoiseSource {
            sigma_g: libm::sqrt(model.sigma_g_sq),
            sigma_c: libm::sqrt(model.kappa * model.sigma_g_sq),
            p_r: model.p_r,
            rng,
        })
    }

    #[inline]
    pub fn next_sample(&mut self) -> NoiseSample {
        let background = self.rng.sample::<f64, _>(StandardNormal) * self.sigma_g;
        let impulsive = self.p_r > 0.0 && self.rng.random::<f64>() < self.p_r;
        let impulse = if impulsive {
            self.rng.sample::<f64, _>(StandardNormal) * self.sigma_c
        } else {
            0.0
        };
        NoiseSample {
            background,
            impulse,
            impulsive,
        }
    }
}

pub fn gen_noise(model: &NoiseModel, length: usize, seed: u64) -> Result<Vec<f64>> {
    let mut src = NoiseSource::new(*model, seed)?;
    Ok((0..length).map(|_| src.next_sample().total()).collect())
}

/// `d(t) = u(t)^T w* + v(t)` with the regressor `u(t) = [u(t), u(t-1), ..., u(t-M+1)]`
/// zero-padded before the start of the sequence.
pub fn gen_reference(u: &[f64], w_star: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    Ok((0..u.len())
        .map(|t| {
            let taps = w_star.len().min(t + 1);
            (0..taps).map(|j| u[t - j] * w_star[j]).sum::<f64>() + v[t]
        })
        .collect())
}
