//! Modified Huber cost, its score function and the median-based adaptive threshold.

use alloc::collections::VecDeque;
use alloc::format;

use crate::{Error, Result};

/// `e^2/2` inside the threshold, `xi^2/2` outside.
#[inline]
pub fn huber_cost(e: f64, xi: f64) -> f64 {
    if e.abs() < xi {
        0.5 * e * e
    } else {
        0.5 * xi * xi
    }
}

/// Passes `e` when `|e| < xi`; otherwise (ties included) returns 0.
#[inline]
pub fn phi_score(e: f64, xi: f64) -> f64 {
    if e.abs() < xi {
        e
    } else {
        0.0
    }
}

/// Finite-sample correction `1.483 (1 + 5/(n_w - 1))`.
pub fn correction_factor(n_w: usize) -> f64 {
    1.483 * (1.0 + 5.0 / (n_w as f64 - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdConfig {
    pub gamma: f64,
    pub k_xi: f64,
    pub n_w: usize,
    pub sigma0_sq: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            gamma: 0.99,
            k_xi: 2.576,
            n_w: 5,
            sigma0_sq: 1.0,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "forgetting factor {} outside (0, 1)",
                self.gamma
            )));
        }
        if self.n_w < 3 || self.n_w.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "median window {} must be odd and at least 3",
                self.n_w
            )));
        }
        if !(self.sigma0_sq > 0.0) || !self.sigma0_sq.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "initial error power {} must be positive",
                self.sigma0_sq
            )));
        }
        if !(self.k_xi > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold multiplier {} must be positive",
                self.k_xi
            )));
        }
        Ok(())
    }
}

/// Recursive robust estimate of the error power driving `xi = k_xi sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdState {
    pub sigma_sq: f64,
    window: VecDeque<f64>,
    gamma: f64,
    k_xi: f64,
    c_factor: f64,
    n_w: usize,
}

impl ThresholdState {
    pub fn new(cfg: &ThresholdConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(ThresholdState {
            sigma_sq: cfg.sigma0_sq,
            window: VecDeque::with_capacity(cfg.n_w),
            gamma: cfg.gamma,
            k_xi: cfg.k_xi,
            c_factor: correction_factor(cfg.n_w),
            n_w: cfg.n_w,
        })
    }

    pub fn c_factor(&self) -> f64 {
        self.c_factor
    }

    pub fn window(&self) -> &VecDeque<f64> {
        &self.window
    }

    /// Current threshold.
    #[inline]
    pub fn xi(&self) -> f64 {
        if self.k_xi == f64::INFINITY {
            return f64::INFINITY;
        }
        self.k_xi * libm::sqrt(self.sigma_sq)
    }

    /// Pushes `e^2`, updates the power estimate and returns the new threshold.
    #[inline]
    pub fn update(&mut self, e: f64) -> f64 {
        if self.window.len() == self.n_w {
            self.window.pop_front();
        }
        self.window.push_back(e * e);
        let med = self.median();
        self.sigma_sq = self.gamma * self.sigma_sq + self.c_factor * (1.0 - self.gamma) * med;
        self.xi()
    }

    /// Median of the entries currently in the window (mean of the middle two for an even count).
    pub fn median(&self) -> f64 {
        let mut buf = [0.0f64; 64];
        let n = self.window.len();
        if n == 0 {
            return 0.0;
        }
        if n > buf.len() {
            let mut v: alloc::vec::Vec<f64> = self.window.iter().copied().collect();
            return median_of(&mut v);
        }
        for (b, w) in buf.iter_mut().zip(&self.window) {
            *b = *w;
        }
        median_of(&mut buf[..n])
    }
}

fn median_of(v: &mut [f64]) -> f64 {
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn cost_branches() {
        assert_eq!(huber_cost(0.5, 1.0), 0.125);
        assert_eq!(huber_cost(3.0, 1.0), 0.5);
        assert_eq!(huber_cost(0.0, 0.7), 0.0);
        assert_eq!(huber_cost(1.0, 1.0), 0.5);
    }

    #[test]
    fn score_branches() {
        assert_eq!(phi_score(0.5, 1.0), 0.5);
        assert_eq!(phi_score(2.0, 1.0), 0.0);
        assert_eq!(phi_score(-0.3, 0.5), -0.3);
        assert_eq!(phi_score(1.0, 1.0), 0.0);
    }

    #[test]
    fn score_is_odd_and_derivative_of_cost() {
        let mut rng = crate::rng::StreamRng::seed_from_u64(1);
        let h = 1e-6;
        let mut checked = 0;
        while checked < 100 {
            let e: f64 = rng.random_range(-3.0..3.0);
            let xi: f64 = rng.random_range(0.1..2.0);
            assert_eq!(phi_score(-e, xi), -phi_score(e, xi));
            if (e.abs() - xi).abs() < 10.0 * h {
                continue;
            }
            let fd = (huber_cost(e + h, xi) - huber_cost(e - h, xi)) / (2.0 * h);
            assert!((fd - phi_score(e, xi)).abs() < 1e-4, "e={e} xi={xi}");
            checked += 1;
        }
    }

    #[test]
    fn correction_at_five() {
        assert!((correction_factor(5) - 1.483 * 2.25).abs() < 1e-12);
        assert!((correction_factor(5) - 3.33675).abs() < 1e-12);
    }

    #[test]
    fn init_validation() {
        let ok = ThresholdConfig::default();
        assert!(ThresholdState::new(&ok).is_ok());
        for bad in [
            ThresholdConfig { gamma: 1.0, ..ok },
            ThresholdConfig { gamma: 0.0, ..ok },
            ThresholdConfig { n_w: 4, ..ok },
            ThresholdConfig {
                sigma0_sq: 0.0,
                ..ok
            },
        ] {
            assert!(ThresholdState::new(&bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn first_zero_error_decays_prior() {
        let mut s = ThresholdState::new(&ThresholdConfig::default()).unwrap();
        let xi = s.update(0.0);
        assert!((s.sigma_sq - 0.99).abs() < 1e-15);
        assert!((xi - 2.576 * 0.99f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn window_median() {
        let mut s = ThresholdState::new(&ThresholdConfig::default()).unwrap();
        for e in [1.0, 2.0, 3.0, 4.0, 5.0] {
            s.update(e);
        }
        assert_eq!(
            s.window().iter().copied().collect::<alloc::vec::Vec<_>>(),
            [1.0, 4.0, 9.0, 16.0, 25.0]
        );
        assert_eq!(s.median(), 9.0);
        s.update(0.0);
        assert_eq!(s.window().len(), 5);
        assert_eq!(s.median(), 9.0);
    }

    #[test]
    fn partial_window_median() {
        let mut s = ThresholdState::new(&ThresholdConfig::default()).unwrap();
        s.update(1.0);
        s.update(3.0);
        assert_eq!(s.median(), 5.0);
    }

    #[test]
    fn constant_stream_fixed_point() {
        let mut s = ThresholdState::new(&ThresholdConfig::default()).unwrap();
        let c = 0.7;
        for _ in 0..5000 {
            s.update(c);
        }
        assert!((s.sigma_sq - s.c_factor() * c * c).abs() < 1e-9);
    }

    #[test]
    fn scale_equivariance() {
        let mut rng = crate::rng::StreamRng::seed_from_u64(2);
        let errs: alloc::vec::Vec<f64> = (0..20_000)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let run = |scale: f64| {
            let cfg = ThresholdConfig {
                sigma0_sq: scale * scale,
                ..Default::default()
            };
            let mut s = ThresholdState::new(&cfg).unwrap();
            for e in &errs {
                s.update(scale * e);
            }
            s.sigma_sq
        };
        let (a, b) = (run(1.0), run(3.0));
        assert!((b / (9.0 * a) - 1.0).abs() < 0.01);
    }
}
