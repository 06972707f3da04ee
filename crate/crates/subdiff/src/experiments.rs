//! Experiment drivers: single runs, tracking, steady-state sweeps, stability brackets,
//! algorithm comparisons and theoretical predictions.

use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Result};
use sha2::{Digest, Sha256};
use subdiff_core::algorithms::{AlgorithmKind, StepConfig};
use subdiff_core::sim::{pilot_update_probability, trial_signals, NodeSignals, TimeAxis};
use subdiff_core::theory::{
    estimate_moments, MomentConfig, MomentSet, MsStepBound, NetworkMatrices, TheoryModel,
    UpdateProbability,
};
use subdiff_core::Error as CoreError;

use crate::config::{Axis, ExperimentConfig, InputConfig, Network, NoiseConfig, SweepConfig};
use crate::io::{load_moments, save_moments, LabeledCurve, SweepRow};
use crate::mc::{run_ensemble, to_db, Ensemble, MsdCurve};
use crate::presets::{comparison_impulse_probability, comparison_step, InputFamily};

/// Monte-Carlo ensemble of the configured algorithm.
pub fn run_monte_carlo(cfg: &ExperimentConfig) -> Result<MsdCurve> {
    cfg.validate()?;
    let net = cfg.network()?;
    let kind = cfg.algorithm_kind()?;
    let sc = cfg.scenario(&net, vec![cfg.lane(kind, cfg.step.to_step())?]);
    Ok(run_ensemble(&sc, cfg.trials)?.curve(0, &cfg.hash()))
}

/// Fullband sample index corresponding to curve point `point` of the configured lane.
pub fn flip_sample(cfg: &ExperimentConfig, point: usize) -> Result<usize> {
    let kind = cfg.algorithm_kind()?;
    Ok(match cfg.axis {
        Axis::Iterations if kind.is_subband() => point * cfg.step.n_d,
        _ => point,
    })
}

/// Targets flip sign at curve point `flip_point`; `None` keeps `cfg.flip_at` as is.
pub fn tracking_experiment(cfg: &ExperimentConfig, flip_point: Option<usize>) -> Result<MsdCurve> {
    let mut c = cfg.clone();
    if let Some(p) = flip_point {
        c.flip_at = Some(flip_sample(cfg, p)?);
    }
    run_monte_carlo(&c)
}

/// Gate pass probabilities for each MD-NMSAF step configuration, from a pilot run or the
/// Gaussian formula.
pub fn update_probabilities(
    cfg: &ExperimentConfig,
    net: &Network,
    steps: &[StepConfig],
) -> Result<Vec<UpdateProbability>> {
    if cfg.theory.analytic_p {
        return Ok(steps
            .iter()
            .map(|s| UpdateProbability::Analytic {
                k_xi: s.threshold.k_xi,
            })
            .collect());
    }
    let lanes = steps
        .iter()
        .map(|s| cfg.lane(AlgorithmKind::MdNmsaf, *s))
        .collect::<Result<Vec<_>>>()?;
    let mut sc = cfg.scenario(net, lanes);
    sc.axis = TimeAxis::Iterations;
    sc.length = cfg.theory.pilot_iterations;
    sc.gate_window = cfg.theory.pilot_window.min(sc.length);
    sc.flip_at = None;
    let p = pilot_update_probability(&sc, cfg.theory.pilot_trials)?;
    Ok(p.into_iter().map(UpdateProbability::Given).collect())
}

fn moment_key(cfg: &ExperimentConfig, step: &StepConfig, p: &UpdateProbability) -> String {
    let digest = Sha256::digest(format!("{}|{step:?}|{p:?}", cfg.hash()));
    format!("{digest:x}")[..16].to_owned()
}

/// Moment estimates for one MD-NMSAF step configuration, read from or written to
/// `cache_dir` when given.
pub fn moments(
    cfg: &ExperimentConfig,
    net: &Network,
    step: &StepConfig,
    p: UpdateProbability,
    cache_dir: Option<&Path>,
) -> Result<MomentSet> {
    let path = cache_dir.map(|d| d.join(format!("moments-{}.csv", moment_key(cfg, step, &p))));
    if let Some(path) = &path {
        if path.exists() {
            return load_moments(path);
        }
    }
    let bank = cfg.bank(step.n_d)?;
    let mcfg = MomentConfig {
        samples: cfg.theory.moment_samples,
        seed: cfg.seed,
        update_probability: p,
    };
    let mom = estimate_moments(&net.inputs, &net.noises, &bank, cfg.m, &mcfg)?;
    if let Some(path) = &path {
        std::fs::create_dir_all(path.parent().unwrap_or(Path::new(".")))?;
        save_moments(path, &mom)?;
    }
    Ok(mom)
}

pub fn theory_model(
    cfg: &ExperimentConfig,
    net: &Network,
    step: &StepConfig,
    p: UpdateProbability,
    cache_dir: Option<&Path>,
) -> Result<TheoryModel> {
    let mom = moments(cfg, net, step, p, cache_dir)?;
    if mom.undersampled() {
        eprintln!(
            "warning: moment estimates have relative standard error {:.1}% (> 5%)",
            100.0 * mom.max_rse
        );
    }
    Ok(TheoryModel::new(
        mom,
        NetworkMatrices::new(&net.weights, &net.targets, step.eta)?,
    )?)
}

/// Steady-state theory in dB; `None` when the point is not mean-square stable or the
/// network is too large for the recursion.
pub fn theory_steady_db(model: &TheoryModel, mu: f64) -> Result<Option<f64>> {
    match model.steady_state_msd(mu) {
        Ok(v) => Ok(Some(to_db(v))),
        Err(CoreError::NotMeanSquareStable(_) | CoreError::TheoryCapExceeded { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Simulated curves, one per row.
    pub curves: Vec<LabeledCurve>,
    pub sim: Vec<MsdCurve>,
    /// Theory models, one per row, when theory was requested and the network is small enough.
    pub models: Vec<Option<TheoryModel>>,
}

/// Simulated (and optionally theoretical) steady state over the `mu x n_d` grid. Every
/// `mu` of one `n_d` runs on common random numbers.
pub fn sweep_steady_state(
    cfg: &ExperimentConfig,
    with_theory: bool,
    cache_dir: Option<&Path>,
) -> Result<SweepResult> {
    cfg.validate()?;
    let grid = cfg.sweep.clone().unwrap_or_default();
    let kind = cfg.algorithm_kind()?;
    let net = cfg.network()?;
    let hash = cfg.hash();
    let mut out = SweepResult {
        rows: Vec::new(),
        curves: Vec::new(),
        sim: Vec::new(),
        models: Vec::new(),
    };
    for &n_d in &grid.n_d {
        let steps: Vec<StepConfig> = grid
            .mu
            .iter()
            .map(|&mu| StepConfig {
                mu,
                n_d,
                ..cfg.step.to_step()
            })
            .collect();
        let lanes = steps
            .iter()
            .map(|s| cfg.lane(kind, *s))
            .collect::<Result<Vec<_>>>()?;
        let ens = run_ensemble(&cfg.scenario(&net, lanes), cfg.trials)?;
        let models = if with_theory && kind == AlgorithmKind::MdNmsaf {
            let probs = update_probabilities(cfg, &net, &steps)?;
            steps
                .iter()
                .zip(probs)
                .map(|(s, p)| theory_model(cfg, &net, s, p, cache_dir).map(Some))
                .collect::<Result<Vec<_>>>()?
        } else {
            vec![None; steps.len()]
        };
        for (l, (step, model)) in steps.iter().zip(models).enumerate() {
            let curve = ens.curve(l, &hash);
            let theory_db = match &model {
                Some(m) => theory_steady_db(m, step.mu)?,
                None => None,
            };
            out.rows.push(SweepRow {
                mu: step.mu,
                n_d,
                sim_db: curve.steady_state_db(),
                theory_db,
                diverged: curve.diverged,
            });
            out.curves.push(LabeledCurve {
                msd_db: curve.msd_db.clone(),
                algorithm: None,
                mu: Some(step.mu),
                n_d: Some(n_d),
            });
            out.sim.push(curve);
            out.models.push(model);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct StabilityResult {
    /// `(n_d, bounds)` per subband count.
    pub bounds: Vec<(usize, MsStepBound)>,
    pub rows: Vec<SweepRow>,
    pub sim: Vec<MsdCurve>,
}

/// Runs MD-NMSAF at `factor x` the mean-square step bound of each `n_d` in the sweep grid.
pub fn stability_sweep(
    cfg: &ExperimentConfig,
    factors: &[f64],
    cache_dir: Option<&Path>,
) -> Result<StabilityResult> {
    cfg.validate()?;
    let grid = cfg.sweep.clone().unwrap_or_default();
    let net = cfg.network()?;
    let hash = cfg.hash();
    let mut out = StabilityResult {
        bounds: Vec::new(),
        rows: Vec::new(),
        sim: Vec::new(),
    };
    for &n_d in &grid.n_d {
        let base = StepConfig {
            n_d,
            ..cfg.step.to_step()
        };
        let p = update_probabilities(cfg, &net, &[base])?.remove(0);
        let model = theory_model(cfg, &net, &base, p, cache_dir)?;
        let bound = model.ms_step_bound()?;
        let steps: Vec<StepConfig> = factors
            .iter()
            .map(|f| StepConfig {
                mu: f * bound.empirical,
                ..base
            })
            .collect();
        let lanes = steps
            .iter()
            .map(|s| cfg.lane(AlgorithmKind::MdNmsaf, *s))
            .collect::<Result<Vec<_>>>()?;
        let ens = run_ensemble(&cfg.scenario(&net, lanes), cfg.trials)?;
        for (l, step) in steps.iter().enumerate() {
            let curve = ens.curve(l, &hash);
            out.rows.push(SweepRow {
                mu: step.mu,
                n_d,
                sim_db: curve.steady_state_db(),
                theory_db: theory_steady_db(&model, step.mu)?,
                diverged: curve.diverged,
            });
            out.sim.push(curve);
        }
        out.bounds.push((n_d, bound));
    }
    Ok(out)
}

/// The two comparison studies on the 15-node network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    Convergence,
    /// Targets flip sign halfway through.
    Tracking,
}

impl FromStr for Study {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convergence" => Ok(Study::Convergence),
            "tracking" => Ok(Study::Tracking),
            _ => bail!("unknown study '{s}' (convergence, tracking)"),
        }
    }
}

/// Base configuration of the comparison studies.
pub fn comparison_config(study: Study, input: InputFamily) -> ExperimentConfig {
    let iterations = 20_000;
    ExperimentConfig {
        topology: "net15".into(),
        input: InputConfig {
            family: input,
            beta1: 0.9,
            beta2: 0.1,
            beta3: 0.8,
        },
        noise: NoiseConfig {
            p_r: comparison_impulse_probability(input),
            kappa: 1e4,
        },
        m: 16,
        iterations,
        axis: Axis::Samples,
        trials: 100,
        flip_at: (study == Study::Tracking).then_some(iterations / 2),
        ..ExperimentConfig::default()
    }
}

/// Configuration of the steady-state and transient validation on the 7-node network.
pub fn sweep_config(input: InputFamily) -> ExperimentConfig {
    ExperimentConfig {
        input: InputConfig {
            family: input,
            ..InputConfig::default()
        },
        sweep: Some(SweepConfig::default()),
        ..ExperimentConfig::default()
    }
}

/// Runs every algorithm with its tabulated step parameters on common random numbers.
pub fn comparison_experiment(cfg: &ExperimentConfig) -> Result<Vec<(AlgorithmKind, MsdCurve)>> {
    cfg.validate()?;
    let net = cfg.network()?;
    let kinds = AlgorithmKind::ALL;
    let lanes = kinds
        .iter()
        .map(|&k| cfg.lane(k, comparison_step(k, cfg.input.family)))
        .collect::<Result<Vec<_>>>()?;
    let ens: Ensemble = run_ensemble(&cfg.scenario(&net, lanes), cfg.trials)?;
    let hash = cfg.hash();
    Ok(kinds
        .iter()
        .enumerate()
        .map(|(l, &k)| (k, ens.curve(l, &hash)))
        .collect())
}

#[derive(Debug, Clone)]
pub struct TheoryReport {
    pub mean_bound: f64,
    pub ms_bound: MsStepBound,
    /// Linear network MSD for `n = 0..=iterations`.
    pub transient: Vec<f64>,
    pub steady_state: Option<f64>,
    pub rse: f64,
}

/// Bounds and predicted curves of the configured MD-NMSAF step.
pub fn theory_report(
    cfg: &ExperimentConfig,
    iterations: usize,
    cache_dir: Option<&Path>,
) -> Result<TheoryReport> {
    cfg.validate()?;
    let net = cfg.network()?;
    let step = cfg.step.to_step();
    let p = update_probabilities(cfg, &net, &[step])?.remove(0);
    let model = theory_model(cfg, &net, &step, p, cache_dir)?;
    let steady_state = match model.steady_state_msd(step.mu) {
        Ok(v) => Some(v),
        Err(CoreError::NotMeanSquareStable(_)) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(TheoryReport {
        mean_bound: model.mean_step_bound(),
        ms_bound: model.ms_step_bound()?,
        transient: model.transient_msd(step.mu, iterations)?.msd,
        steady_state,
        rse: model.moments.max_rse,
    })
}

/// Raw sequences of trial 0.
pub fn dump_signals(cfg: &ExperimentConfig, samples: usize) -> Result<Vec<NodeSignals>> {
    let net = cfg.network()?;
    let lane = cfg.lane(cfg.algorithm_kind()?, cfg.step.to_step())?;
    Ok(trial_signals(&cfg.scenario(&net, vec![lane]), 0, samples)?)
}
