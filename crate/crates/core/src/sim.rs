//! Single-trial network simulation with several algorithm lanes sharing one data stream.
//!
//! Every lane sees the same inputs and noise (same seeds), so lanes differing only in step
//! size or algorithm are compared on common random numbers.

use alloc::vec;
use alloc::vec::Vec;

use crate::algorithms::{AlgorithmKind, BlockFrame, NetworkFilter, StepConfig, SubbandView};
use crate::filterbank::{dot, AnalysisBank, History, StreamAnalyzer};
use crate::rng::{stream, StreamRole};
use crate::signal::{InputModel, InputSource, NoiseModel, NoiseSource};
use crate::topology::{CombinationWeights, TargetSet, Topology};
use crate::{Error, Result};

/// Trials whose MSD exceeds this are stopped and reported as diverged.
pub const DIVERGENCE_CAP: f64 = 1e30;

/// What one curve point stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeAxis {
    /// One point per lane update (decimated index for subband lanes).
    Iterations,
    /// One point per fullband input sample.
    Samples,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaneSpec {
    pub kind: AlgorithmKind,
    pub step: StepConfig,
    /// Analysis bank for subband lanes; `None` designs the default bank for `step.n_d`.
    pub bank: Option<AnalysisBank>,
}

impl LaneSpec {
    pub fn new(kind: AlgorithmKind, step: StepConfig) -> Self {
        LaneSpec {
            kind,
            step,
            bank: None,
        }
    }

    pub fn resolved_bank(&self) -> Result<AnalysisBank> {
        match &self.bank {
            Some(b) => {
                if b.subbands() != self.step.n_d {
                    return Err(Error::DimensionMismatch {
                        expected: self.step.n_d,
                        found: b.subbands(),
                    });
                }
                Ok(b.clone())
            }
            None => AnalysisBank::with_default_length(self.step.n_d),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub topology: Topology,
    pub weights: CombinationWeights,
    pub targets: TargetSet,
    pub inputs: Vec<InputModel>,
    pub noises: Vec<NoiseModel>,
    pub lanes: Vec<LaneSpec>,
    pub axis: TimeAxis,
    /// Curve length in points of `axis`.
    pub length: usize,
    /// Fullband sample at which every target flips sign.
    pub flip_at: Option<usize>,
    pub seed: u64,
    pub burn_in: usize,
    /// Gate outcomes are counted over this many final updates of each lane.
    pub gate_window: usize,
}

impl Scenario {
    pub fn nodes(&self) -> usize {
        self.topology.nodes()
    }

    pub fn filter_len(&self) -> usize {
        self.targets.filter_len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nodes();
        if self.inputs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.inputs.len(),
            });
        }
        if self.noises.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.noises.len(),
            });
        }
        if self.targets.w_star.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.targets.w_star.len(),
            });
        }
        for m in &self.inputs {
            m.validate()?;
        }
        for v in &self.noises {
            v.validate()?;
        }
        for l in &self.lanes {
            l.step.validate(l.kind)?;
        }
        Ok(())
    }

    /// Number of updates lane `l` performs over the run.
    pub fn expected_updates(&self, l: usize) -> usize {
        let lane = &self.lanes[l];
        match (self.axis, lane.kind.is_subband()) {
            (TimeAxis::Iterations, _) | (TimeAxis::Samples, false) => self.length,
            (TimeAxis::Samples, true) => self.length.div_ceil(lane.step.n_d.max(1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutput {
    /// Per lane, linear network MSD per curve point (`inf` after divergence).
    pub curves: Vec<Vec<f64>>,
    pub diverged: Vec<bool>,
    /// Per lane, node and gate (subband, or the single fullband gate): passes counted
    /// over the final `gate_window` updates.
    pub gate_pass: Vec<Vec<Vec<u64>>>,
    pub gate_updates: Vec<u64>,
}

enum Frontend {
    Subband {
        bank: AnalysisBank,
        analyzers: Vec<StreamAnalyzer>,
        desired: Vec<Vec<f64>>,
    },
    Block {
        rows: usize,
        u: Vec<History>,
        d: Vec<History>,
    },
}

struct View<'a> {
    an: &'a StreamAnalyzer,
    d: &'a [f64],
}

impl SubbandView for View<'_> {
    #[inline]
    fn subbands(&self) -> usize {
        self.an.subbands()
    }
    #[inline]
    fn regressor(&self, i: usize) -> &[f64] {
        self.an.regressor(i)
    }
    #[inline]
    fn desired(&self, i: usize) -> f64 {
        self.d[i]
    }
}

struct LaneState {
    net: NetworkFilter,
    frontend: usize,
    updates: usize,
    expected: usize,
    curve: Vec<f64>,
    diverged: bool,
    gate_pass: Vec<Vec<u64>>,
    gate_updates: u64,
}

fn build_frontends(sc: &Scenario) -> Result<(Vec<Frontend>, Vec<usize>)> {
    let n = sc.nodes();
    let m = sc.filter_len();
    let mut fronts: Vec<Frontend> = Vec::new();
    let mut index = Vec::with_capacity(sc.lanes.len());
    for lane in &sc.lanes {
        let found = if lane.kind.is_subband() {
            let bank = lane.resolved_bank()?;
            let pos = fronts
                .iter()
                .position(|f| matches!(f, Frontend::Subband { bank: b, .. } if *b == bank));
            pos.unwrap_or_else(|| {
                let analyzers = vec![StreamAnalyzer::new(&bank, m); n];
                let desired = vec![vec![0.0; bank.subbands()]; n];
                fronts.push(Frontend::Subband {
                    bank,
                    analyzers,
                    desired,
                });
                fronts.len() - 1
            })
        } else {
            let rows = lane.kind.block_rows(lane.step.p);
            let pos = fronts
                .iter()
                .position(|f| matches!(f, Frontend::Block { rows: r, .. } if *r == rows));
            pos.unwrap_or_else(|| {
                fronts.push(Frontend::Block {
                    rows,
                    u: vec![History::new(m + rows - 1); n],
                    d: vec![History::new(rows); n],
                });
                fronts.len() - 1
            })
        };
        index.push(found);
    }
    Ok((fronts, index))
}

/// Runs trial `trial` of the scenario.
pub fn simulate_trial(sc: &Scenario, trial: u64) -> Result<TrialOutput> {
    sc.validate()?;
    let n = sc.nodes();
    let m = sc.filter_len();
    let (mut fronts, front_of) = build_frontends(sc)?;
    let mut lanes: Vec<LaneState> = Vec::with_capacity(sc.lanes.len());
    for (l, spec) in sc.lanes.iter().enumerate() {
        let net = NetworkFilter::new(spec.kind, spec.step, &sc.topology, &sc.weights, m)?;
        let gates = match spec.kind {
            AlgorithmKind::MdNmsaf => spec.step.n_d,
            _ => 1,
        };
        lanes.push(LaneState {
            net,
            frontend: front_of[l],
            updates: 0,
            expected: sc.expected_updates(l),
            curve: Vec::with_capacity(sc.length),
            diverged: false,
            gate_pass: vec![vec![0; gates]; n],
            gate_updates: 0,
        });
    }

    let mut inputs = Vec::with_capacity(n);
    let mut noises = Vec::with_capacity(n);
    for k in 0..n {
        inputs.push(InputSource::from_rng(
            sc.inputs[k],
            stream(sc.seed, trial, k as u64, StreamRole::Input),
            sc.burn_in,
        )?);
        noises.push(NoiseSource::from_rng(
            sc.noises[k],
            stream(sc.seed, trial, k as u64, StreamRole::Noise),
        )?);
    }
    let mut u_full = vec![History::new(m); n];
    let original = &sc.targets.w_star;
    let flipped: Vec<Vec<f64>> = original
        .iter()
        .map(|w| w.iter().map(|x| -x).collect())
        .collect();
    let mut hits = vec![false; fronts.len()];

    let mut t = 0usize;
    loop {
        let done = match sc.axis {
            TimeAxis::Samples => t >= sc.length,
            TimeAxis::Iterations => lanes.iter().all(|l| l.updates >= l.expected || l.diverged),
        };
        if done {
            break;
        }
        let targets = if sc.flip_at.is_some_and(|f| t >= f) {
            &flipped
        } else {
            original
        };
        if sc.axis == TimeAxis::Samples {
            for lane in &mut lanes {
                record(lane, targets);
            }
        }

        // data for sample t
        for k in 0..n {
            let u = inputs[k].next_sample();
            u_full[k].push(u);
            let d = dot(u_full[k].window(), &targets[k]) + noises[k].next_sample().total();
            for (f, hit) in fronts.iter_mut().zip(hits.iter_mut()) {
                match f {
                    Frontend::Subband {
                        analyzers, desired, ..
                    } => {
                        *hit = analyzers[k].push(u, d);
                        if *hit {
                            analyzers[k].desired(&mut desired[k]);
                        }
                    }
                    Frontend::Block { u: uh, d: dh, .. } => {
                        uh[k].push(u);
                        dh[k].push(d);
                        *hit = true;
                    }
                }
            }
        }

        for lane in &mut lanes {
            if !hits[lane.frontend] || lane.diverged || lane.updates >= lane.expected {
                continue;
            }
            if sc.axis == TimeAxis::Iterations {
                record(lane, targets);
                if lane.diverged {
                    continue;
                }
            }
            match &fronts[lane.frontend] {
                Frontend::Subband {
                    analyzers, desired, ..
                } => {
                    for k in 0..n {
                        lane.net.adapt_subband(
                            k,
                            &View {
                                an: &analyzers[k],
                                d: &desired[k],
                            },
                        )?;
                    }
                }
                Frontend::Block { u, d, .. } => {
                    for k in 0..n {
                        lane.net.adapt_block(
                            k,
                            &BlockFrame {
                                u: u[k].window(),
                                d: d[k].window(),
                                m,
                            },
                        )?;
                    }
                }
            }
            lane.net.combine_all();
            let counting = lane.updates + sc.gate_window >= lane.expected;
            lane.updates += 1;
            if counting && matches!(lane.net.kind, AlgorithmKind::MdNmsaf | AlgorithmKind::MdApm) {
                lane.gate_updates += 1;
                for k in 0..n {
                    for (c, p) in lane.gate_pass[k].iter_mut().zip(lane.net.passed(k)) {
                        *c += *p as u64;
                    }
                }
            }
        }
        t += 1;
    }

    let mut out = TrialOutput {
        curves: Vec::with_capacity(lanes.len()),
        diverged: Vec::with_capacity(lanes.len()),
        gate_pass: Vec::with_capacity(lanes.len()),
        gate_updates: Vec::with_capacity(lanes.len()),
    };
    for mut lane in lanes {
        lane.curve.resize(sc.length, f64::INFINITY);
        out.curves.push(lane.curve);
        out.diverged.push(lane.diverged);
        out.gate_pass.push(lane.gate_pass);
        out.gate_updates.push(lane.gate_updates);
    }
    Ok(out)
}

fn record(lane: &mut LaneState, targets: &[Vec<f64>]) {
    let v = if lane.diverged {
        f64::INFINITY
    } else {
        lane.net.msd(targets)
    };
    if !v.is_finite() || v > DIVERGENCE_CAP {
        lane.diverged = true;
    }
    lane.curve
        .push(if lane.diverged { f64::INFINITY } else { v });
}

/// Raw per-node sequences of one trial, generated exactly as [`simulate_trial`] does.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSignals {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub d: Vec<f64>,
}

pub fn trial_signals(sc: &Scenario, trial: u64, samples: usize) -> Result<Vec<NodeSignals>> {
    sc.validate()?;
    let m = sc.filter_len();
    (0..sc.nodes())
        .map(|k| {
            let mut input = InputSource::from_rng(
                sc.inputs[k],
                stream(sc.seed, trial, k as u64, StreamRole::Input),
                sc.burn_in,
            )?;
            let mut noise = NoiseSource::from_rng(
                sc.noises[k],
                stream(sc.seed, trial, k as u64, StreamRole::Noise),
            )?;
            let mut hist = History::new(m);
            let mut sig = NodeSignals {
                u: Vec::new(),
                v: Vec::new(),
                d: Vec::new(),
            };
            for t in 0..samples {
                let w = &sc.targets.w_star[k];
                let sign = if sc.flip_at.is_some_and(|f| t >= f) {
                    -1.0
                } else {
                    1.0
                };
                let u = input.next_sample();
                hist.push(u);
                let v = noise.next_sample().total();
                sig.u.push(u);
                sig.v.push(v);
                sig.d.push(sign * dot(hist.window(), w) + v);
            }
            Ok(sig)
        })
        .collect()
}

/// Empirical gate pass frequency per (node, gate) of every lane, averaged over `trials`
/// pilot trials. Lanes without a gate report an empty table.
pub fn pilot_update_probability(sc: &Scenario, trials: u64) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut pass: Vec<Vec<Vec<u64>>> = Vec::new();
    let mut total = vec![0u64; sc.lanes.len()];
    for trial in 0..trials {
        let out = simulate_trial(sc, trial)?;
        if pass.is_empty() {
            pass = out
                .gate_pass
                .iter()
                .map(|l| l.iter().map(|g| vec![0; g.len()]).collect())
                .collect();
        }
        for (l, lane) in out.gate_pass.iter().enumerate() {
            total[l] += out.gate_updates[l];
            for (acc, node) in pass[l].iter_mut().zip(lane) {
                for (a, c) in acc.iter_mut().zip(node) {
                    *a += c;
                }
            }
        }
    }
    Ok(pass
        .into_iter()
        .zip(total)
        .map(|(lane, t)| {
            if t == 0 {
                return Vec::new();
            }
            lane.into_iter()
                .map(|node| node.into_iter().map(|c| c as f64 / t as f64).collect())
                .collect()
        })
        .collect())
}

/// Convenience constructor for a scenario with homogeneous node statistics.
#[allow(clippy::too_many_arguments)]
pub fn uniform_scenario(
    topology: Topology,
    targets: TargetSet,
    input: InputModel,
    noise: NoiseModel,
    lanes: Vec<LaneSpec>,
    axis: TimeAxis,
    length: usize,
    seed: u64,
) -> Scenario {
    let n = topology.nodes();
    let burn_in = 10 * targets.filter_len();
    Scenario {
        weights: CombinationWeights::new(&topology),
        topology,
        targets,
        inputs: vec![input; n],
        noises: vec![noise; n],
        lanes,
        axis,
        length,
        flip_at: None,
        seed,
        burn_in,
        gate_window: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robust::ThresholdConfig;
    use crate::signal::InputKind;
    use crate::topology::generate_targets;

    fn single_node(m: usize) -> (Topology, TargetSet) {
        let t = Topology::from_adjacency(&[vec![]], &[0]).unwrap();
        let ts = generate_targets(&t, m, &[0.0], 1).unwrap();
        (t, ts)
    }

    #[test]
    fn zero_step_curve_is_flat() {
        let (t, ts) = single_node(4);
        let init: f64 = ts.base.iter().map(|x| x * x).sum();
        let lane = LaneSpec::new(
            AlgorithmKind::MdNmsaf,
            StepConfig {
                mu: 0.0,
                n_d: 2,
                ..Default::default()
            },
        );
        let sc = uniform_scenario(
            t,
            ts,
            InputModel::new(InputKind::White, 1.0).unwrap(),
            NoiseModel::gaussian(0.1),
            vec![lane],
            TimeAxis::Iterations,
            50,
            3,
        );
        let out = simulate_trial(&sc, 0).unwrap();
        assert!(out.curves[0].iter().all(|&v| (v - init).abs() < 1e-15));
    }

    #[test]
    fn nlms_lane_converges() {
        let (t, ts) = single_node(8);
        let step = StepConfig {
            mu: 0.5,
            eta: 0.0,
            n_d: 1,
            ..Default::default()
        };
        let sc = uniform_scenario(
            t,
            ts,
            InputModel::new(InputKind::White, 1.0).unwrap(),
            NoiseModel::gaussian(1e-4),
            vec![LaneSpec::new(AlgorithmKind::MdNmsaf, step)],
            TimeAxis::Iterations,
            400,
            3,
        );
        let c = &simulate_trial(&sc, 0).unwrap().curves[0];
        assert!(c[399] < 1e-3 * c[0]);
    }

    #[test]
    fn deterministic_and_trial_dependent() {
        let (t, ts) = single_node(4);
        let lanes = vec![
            LaneSpec::new(
                AlgorithmKind::MdNmsaf,
                StepConfig {
                    mu: 0.1,
                    n_d: 2,
                    ..Default::default()
                },
            ),
            LaneSpec::new(
                AlgorithmKind::MdApm,
                StepConfig {
                    mu: 0.1,
                    p: 2,
                    ..Default::default()
                },
            ),
        ];
        let sc = uniform_scenario(
            t,
            ts,
            InputModel::new(InputKind::Ar1 { beta1: 0.5 }, 1.0).unwrap(),
            NoiseModel::new(0.01, 0.01, 100.0).unwrap(),
            lanes,
            TimeAxis::Samples,
            200,
            9,
        );
        let a = simulate_trial(&sc, 0).unwrap();
        assert_eq!(a, simulate_trial(&sc, 0).unwrap());
        assert_ne!(a.curves, simulate_trial(&sc, 1).unwrap().curves);
        assert_eq!(a.curves[0].len(), 200);
    }

    #[test]
    fn lanes_do_not_interact() {
        let (t, ts) = single_node(4);
        let a = LaneSpec::new(
            AlgorithmKind::MdNmsaf,
            StepConfig {
                mu: 0.1,
                n_d: 2,
                ..Default::default()
            },
        );
        let b = LaneSpec::new(
            AlgorithmKind::MdLms,
            StepConfig {
                mu: 0.01,
                ..Default::default()
            },
        );
        let mk = |lanes| {
            uniform_scenario(
                t.clone(),
                ts.clone(),
                InputModel::new(InputKind::White, 1.0).unwrap(),
                NoiseModel::gaussian(0.01),
                lanes,
                TimeAxis::Samples,
                100,
                4,
            )
        };
        let both = simulate_trial(&mk(vec![a.clone(), b]), 0).unwrap();
        let alone = simulate_trial(&mk(vec![a]), 0).unwrap();
        assert_eq!(both.curves[0], alone.curves[0]);
    }

    #[test]
    fn signals_match_linear_model() {
        let (t, ts) = single_node(3);
        let sc = uniform_scenario(
            t,
            ts.clone(),
            InputModel::new(InputKind::White, 1.0).unwrap(),
            NoiseModel::gaussian(0.5),
            vec![],
            TimeAxis::Samples,
            10,
            1,
        );
        let s = &trial_signals(&sc, 0, 10).unwrap()[0];
        let again = crate::signal::gen_reference(&s.u, &ts.w_star[0], &s.v).unwrap();
        for (a, b) in s.d.iter().zip(&again) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn flip_doubles_error() {
        let (t, ts) = single_node(4);
        let step = StepConfig {
            mu: 0.5,
            eta: 0.0,
            n_d: 1,
            ..Default::default()
        };
        let mut sc = uniform_scenario(
            t,
            ts.clone(),
            InputModel::new(InputKind::White, 1.0).unwrap(),
            NoiseModel::gaussian(1e-6),
            vec![LaneSpec::new(AlgorithmKind::MdNmsaf, step)],
            TimeAxis::Samples,
            600,
            2,
        );
        sc.flip_at = Some(300);
        let c = &simulate_trial(&sc, 0).unwrap().curves[0];
        let jump: f64 = ts.base.iter().map(|x| 4.0 * x * x).sum();
        assert!((c[300] / jump - 1.0).abs() < 1e-2);
        assert!(c[599] < 1e-3 * jump);
    }

    #[test]
    fn pilot_pass_rate_near_gaussian_value() {
        let (t, ts) = single_node(4);
        let step = StepConfig {
            mu: 0.05,
            eta: 0.0,
            n_d: 2,
            threshold: ThresholdConfig::default(),
            ..Default::default()
        };
        let mut sc = uniform_scenario(
            t,
            ts,
            InputModel::new(InputKind::White, 1.0).unwrap(),
            NoiseModel::gaussian(0.5),
            vec![LaneSpec::new(AlgorithmKind::MdNmsaf, step)],
            TimeAxis::Iterations,
            2000,
            5,
        );
        sc.gate_window = 500;
        let p = pilot_update_probability(&sc, 4).unwrap();
        assert_eq!(p[0].len(), 1);
        assert_eq!(p[0][0].len(), 2);
        for v in &p[0][0] {
            assert!((0.95..=1.0).contains(v), "{v}");
        }
    }

    #[test]
    fn divergence_is_flagged() {
        let (t, ts) = single_node(4);
        let step = StepConfig {
            mu: 50.0,
            eta: 0.0,
            ..Default::default()
        };
        let sc = uniform_scenario(
            t,
            ts,
            InputModel::new(InputKind::White, 1.0).unwrap(),
            NoiseModel::gaussian(0.1),
            vec![LaneSpec::new(AlgorithmKind::MdLms, step)],
            TimeAxis::Iterations,
            2000,
            5,
        );
        let out = simulate_trial(&sc, 0).unwrap();
        assert!(out.diverged[0]);
        assert_eq!(out.curves[0].len(), 2000);
        assert!(out.curves[0][1999].is_infinite());
    }
}
