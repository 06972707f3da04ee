//! Cosine-modulated analysis bank, critical decimation and subband regressors.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_4, PI};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisBank {
    filters: Vec<Vec<f64>>,
    prototype: Vec<f64>,
}

impl AnalysisBank {
    /// Pseudo-QMF bank of `n_d` filters of length `l_p` from a Hamming-windowed sinc prototype.
    ///
    /// The prototype has unit DC gain and its cutoff is tuned so that
    /// `|P(e^{j pi/(2 n_d)})|^2 = 1/2`, which keeps the summed power response flat.
    pub fn design(n_d: usize, l_p: usize) -> Result<Self> {
        if n_d == 0 {
            return Err(Error::InvalidParameter(
                "subband count must be at least 1".into(),
            ));
        }
        if l_p == 0 || !l_p.is_multiple_of(2 * n_d) {
            return Err(Error::BankLength {
                len: l_p,
                subbands: n_d,
            });
        }
        if n_d == 1 {
            return Ok(Self::identity());
        }
        let edge = PI / (2.0 * n_d as f64);
        let (mut lo, mut hi) = (0.5 * edge, 2.0 * edge);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            let g = magnitude_sq(&windowed_sinc(l_p, mid), edge);
            if g < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let prototype = windowed_sinc(l_p, 0.5 * (lo + hi));
        let center = (l_p as f64 - 1.0) / 2.0;
        let filters = (0..n_d)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                prototype
                    .iter()
                    .enumerate()
                    .map(|(m, p)| {
                        let arg = PI / n_d as f64 * (i as f64 + 0.5) * (m as f64 - center)
                            + sign * FRAC_PI_4;
                        2.0 * p * libm::cos(arg)
                    })
                    .collect()
            })
            .collect();
        Ok(AnalysisBank { filters, prototype })
    }

    /// Default design with `l_p = 8 n_d`.
    pub fn with_default_length(n_d: usize) -> Result<Self> {
        Self::design(n_d, 8 * n_d.max(1))
    }

    /// Single unit-impulse filter.
    pub fn identity() -> Self {
        AnalysisBank {
            filters: vec![vec![1.0]],
            prototype: vec![1.0],
        }
    }

    /// Wraps externally designed filters; all must share one non-zero length.
    pub fn from_filters(filters: Vec<Vec<f64>>) -> Result<Self> {
        let n_d = filters.len();
        if n_d == 0 {
            return Err(Error::InvalidParameter("bank has no filters".into()));
        }
        let len = filters[0].len();
        if len == 0 {
            return Err(Error::BankLength { len, subbands: n_d });
        }
        if let Some(f) = filters.iter().find(|f| f.len() != len) {
            return Err(Error::BankLength {
                len: f.len(),
                subbands: n_d,
            });
        }
        if filters.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite filter coefficient".into(),
            ));
        }
        Ok(AnalysisBank {
            filters,
            prototype: Vec::new(),
        })
    }

    pub fn subbands(&self) -> usize {
        self.filters.len()
    }

    pub fn filter_len(&self) -> usize {
        self.filters[0].len()
    }

    pub fn filters(&self) -> &[Vec<f64>] {
        &self.filters
    }

    pub fn filter(&self, i: usize) -> &[f64] {
        &self.filters[i]
    }

    /// Prototype lowpass; empty for banks loaded from coefficients.
    pub fn prototype(&self) -> &[f64] {
        &self.prototype
    }

    /// `sum_i |H_i(e^{jw})|^2` on `points` frequencies evenly spaced over `[0, pi]`.
    pub fn power_response(&self, points: usize) -> Vec<f64> {
        (0..points)
            .map(|p| {
                let w = if points > 1 {
                    PI * p as f64 / (points - 1) as f64
                } else {
                    0.0
                };
                self.filters.iter().map(|h| magnitude_sq(h, w)).sum()
            })
            .collect()
    }

    /// Peak-to-peak ripple of the summed power response, in dB.
    pub fn ripple_db(&self, points: usize) -> f64 {
        let r = self.power_response(points);
        let max = r.iter().copied().fold(f64::MIN, f64::max);
        let min = r.iter().copied().fold(f64::MAX, f64::min);
        10.0 * libm::log10(max / min)
    }

    /// Full-rate subband signals (zero initial state, same length as the input).
    pub fn analyze(&self, signal: &[f64]) -> Vec<Vec<f64>> {
        self.filters.iter().map(|h| convolve(signal, h)).collect()
    }
}

/// `|H(e^{jw})|^2` for an FIR filter.
pub fn magnitude_sq(h: &[f64], w: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (m, c) in h.iter().enumerate() {
        let (s, co) = libm::sincos(w * m as f64);
        re += c * co;
        im -= c * s;
    }
    re * re + im * im
}

fn windowed_sinc(l_p: usize, cutoff: f64) -> Vec<f64> {
    let center = (l_p as f64 - 1.0) / 2.0;
    let denom = (l_p - 1).max(1) as f64;
    let mut p: Vec<f64> = (0..l_p)
        .map(|m| {
            let x = m as f64 - center;
            let sinc = if x == 0.0 {
                cutoff / PI
            } else {
                libm::sin(cutoff * x) / (PI * x)
            };
            let window = 0.54 - 0.46 * libm::cos(2.0 * PI * m as f64 / denom);
            sinc * window
        })
        .collect();
    let dc: f64 = p.iter().sum();
    for c in &mut p {
        *c /= dc;
    }
    p
}

fn convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|t| {
            let taps = h.len().min(t + 1);
            (0..taps).map(|m| h[m] * x[t - m]).sum()
        })
        .collect()
}

/// Critical decimation: `out(n) = in(n n_d)`.
pub fn decimate(signals: &[Vec<f64>], n_d: usize) -> Vec<Vec<f64>> {
    signals
        .iter()
        .map(|s| s.iter().copied().step_by(n_d.max(1)).collect())
        .collect()
}

/// Regressors `[u_i(n n_d), u_i(n n_d - 1), ..., u_i(n n_d - M + 1)]`, zero before the start.
pub fn subband_regressors(
    u_subbands: &[Vec<f64>],
    n: usize,
    n_d: usize,
    m: usize,
) -> Vec<Vec<f64>> {
    let t = n * n_d;
    u_subbands
        .iter()
        .map(|s| {
            (0..m)
                .map(|j| {
                    if j <= t {
                        s.get(t - j).copied().unwrap_or(0.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Newest-first sliding window over a scalar stream, kept contiguous by writing each
/// sample twice into a buffer of double length.
#[derive(Debug, Clone)]
pub struct History {
    buf: Vec<f64>,
    pos: usize,
    len: usize,
}

impl History {
    pub fn new(len: usize) -> Self {
        History {
            buf: vec![0.0; 2 * len.max(1)],
            pos: 0,
            len: len.max(1),
        }
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.pos = if self.pos == 0 {
            self.len - 1
        } else {
            self.pos - 1
        };
        self.buf[self.pos] = x;
        self.buf[self.pos + self.len] = x;
    }

    /// `[x(t), x(t-1), ..., x(t-len+1)]`
    #[inline]
    pub fn window(&self) -> &[f64] {
        &self.buf[self.pos..self.pos + self.len]
    }

    pub fn clear(&mut self) {
        self.buf.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Sample-by-sample analysis of one node's input and reference.
///
/// The input side keeps, per subband, the newest `M` full-rate outputs; the reference is
/// filtered only at decimation instants.
#[derive(Debug, Clone)]
pub struct StreamAnalyzer {
    filters: Vec<Vec<f64>>,
    u_hist: History,
    d_hist: History,
    regressors: Vec<History>,
    phase: usize,
}

impl StreamAnalyzer {
    pub fn new(bank: &AnalysisBank, m: usize) -> Self {
        let l = bank.filter_len();
        StreamAnalyzer {
            filters: bank.filters.clone(),
            u_hist: History::new(l),
            d_hist: History::new(l),
            regressors: vec![History::new(m); bank.subbands()],
            phase: 0,
        }
    }

    /// Pushes one full-rate sample pair. Returns `true` when the sample lands on a
    /// decimation instant `t = n n_d`, after which [`Self::regressor`] and
    /// [`Self::desired`] describe decimated index `n`.
    #[inline]
    pub fn push(&mut self, u: f64, d: f64) -> bool {
        self.u_hist.push(u);
        self.d_hist.push(d);
        let win = self.u_hist.window();
        for (h, reg) in self.filters.iter().zip(self.regressors.iter_mut()) {
            reg.push(dot(h, win));
        }
        let hit = self.phase == 0;
        self.phase += 1;
        if self.phase == self.filters.len() {
            self.phase = 0;
        }
        hit
    }

    /// Pushes an input sample only (reference side untouched).
    #[inline]
    pub fn push_input(&mut self, u: f64) -> bool {
        self.push(u, 0.0)
    }

    pub fn subbands(&self) -> usize {
        self.filters.len()
    }

    /// Subband regressor `u_i(n)` at the last decimation instant.
    #[inline]
    pub fn regressor(&self, i: usize) -> &[f64] {
        self.regressors[i].window()
    }

    /// Decimated subband references `d_{i,D}(n)` at the last decimation instant.
    #[inline]
    pub fn desired(&self, out: &mut [f64]) {
        let win = self.d_hist.window();
        for (o, h) in out.iter_mut().zip(&self.filters) {
            *o = dot(h, win);
        }
    }
}

/// Dot product with four partial sums.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..n {
        s += a[i] * b[i];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    fn white(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::rng::StreamRng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn identity_bank() {
        let b = AnalysisBank::design(1, 8).unwrap();
        assert_eq!(b.filters(), &[vec![1.0]]);
        let x = white(50, 1);
        assert_eq!(b.analyze(&x), vec![x.clone()]);
        assert_eq!(decimate(&b.analyze(&x), 1), vec![x]);
    }

    #[test]
    fn rejects_bad_length() {
        assert_eq!(
            AnalysisBank::design(4, 20).unwrap_err(),
            Error::BankLength {
                len: 20,
                subbands: 4
            }
        );
        assert!(AnalysisBank::from_filters(vec![vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn ripple_within_one_db() {
        for (n_d, l_p) in [(2, 16), (4, 32), (8, 64), (4, 64)] {
            let b = AnalysisBank::design(n_d, l_p).unwrap();
            let r = b.ripple_db(1024);
            assert!(r <= 1.0, "N_D={n_d} L_p={l_p} ripple {r}");
        }
    }

    #[test]
    fn two_band_mirror() {
        let b = AnalysisBank::design(2, 16).unwrap();
        for p in 0..=256 {
            let w = PI * p as f64 / 256.0;
            let lo = magnitude_sq(b.filter(0), w);
            let hi = magnitude_sq(b.filter(1), PI - w);
            assert!((lo - hi).abs() < 1e-12, "w={w}: {lo} vs {hi}");
        }
        assert!(magnitude_sq(b.filter(0), 0.0) > magnitude_sq(b.filter(0), PI) * 100.0);
    }

    #[test]
    fn impulse_gives_coefficients() {
        let b = AnalysisBank::design(4, 32).unwrap();
        let mut x = vec![0.0; 40];
        x[0] = 1.0;
        for (i, s) in b.analyze(&x).iter().enumerate() {
            assert_eq!(&s[..32], b.filter(i));
            assert!(s[32..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn adjacent_subbands_nearly_uncorrelated() {
        let b = AnalysisBank::design(4, 32).unwrap();
        let s = b.analyze(&white(100_000, 3));
        let e = |a: &[f64], c: &[f64]| dot(a, c);
        for i in 0..3 {
            let cross = e(&s[i], &s[i + 1]).abs();
            let power = e(&s[i], &s[i]).min(e(&s[i + 1], &s[i + 1]));
            assert!(
                10.0 * (cross / power).log10() < -20.0,
                "bands {i},{}",
                i + 1
            );
        }
    }

    #[test]
    fn energy_preserved_on_white_input() {
        for n_d in [2, 4, 8] {
            let b = AnalysisBank::with_default_length(n_d).unwrap();
            let x = white(100_000, 4);
            let sub: f64 = b.analyze(&x).iter().map(|s| dot(s, s)).sum();
            let ratio = sub / dot(&x, &x);
            assert!((0.9..=1.1).contains(&ratio), "N_D={n_d}: {ratio}");
        }
    }

    #[test]
    fn decimation_indices() {
        let a: Vec<f64> = (0..6).map(|v| v as f64).collect();
        assert_eq!(decimate(&[a], 2), vec![vec![0.0, 2.0, 4.0]]);
        let b: Vec<f64> = (0..12).map(|v| v as f64).collect();
        assert_eq!(decimate(&[b], 4), vec![vec![0.0, 4.0, 8.0]]);
    }

    #[test]
    fn regressor_padding() {
        let s = vec![vec![3.0, 1.0, 4.0], vec![-1.0, 5.0, 9.0]];
        assert_eq!(
            subband_regressors(&s, 0, 2, 3),
            vec![vec![3.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0]]
        );
        assert_eq!(subband_regressors(&s, 1, 2, 1), vec![vec![4.0], vec![9.0]]);
    }

    #[test]
    fn regressors_match_reindexing_oracle() {
        let mut rng = crate::rng::StreamRng::seed_from_u64(7);
        let s: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..30).map(|_| rng.random()).collect())
            .collect();
        for n in 0..10 {
            let got = subband_regressors(&s, n, 3, 5);
            for i in 0..3 {
                for j in 0..5 {
                    let idx = 3 * n as isize - j as isize;
                    let want = if idx >= 0 { s[i][idx as usize] } else { 0.0 };
                    assert_eq!(got[i][j], want);
                }
            }
        }
    }

    #[test]
    fn streaming_matches_batch() {
        let b = AnalysisBank::design(4, 32).unwrap();
        let u = white(400, 5);
        let d = white(400, 6);
        let us = b.analyze(&u);
        let ds = decimate(&b.analyze(&d), 4);
        let mut a = StreamAnalyzer::new(&b, 6);
        let mut n = 0;
        let mut dd = vec![0.0; 4];
        for t in 0..400 {
            if a.push(u[t], d[t]) {
                let want = subband_regressors(&us, n, 4, 6);
                for i in 0..4 {
                    for j in 0..6 {
                        assert!((a.regressor(i)[j] - want[i][j]).abs() < 1e-12);
                    }
                }
                a.desired(&mut dd);
                for i in 0..4 {
                    assert!((dd[i] - ds[i][n]).abs() < 1e-12);
                }
                n += 1;
            }
        }
        assert_eq!(n, 100);
    }
}
