//! JSON experiment configuration.

use std::fmt;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use subdiff_core::algorithms::{AlgorithmKind, StepConfig};
use subdiff_core::filterbank::AnalysisBank;
use subdiff_core::robust::ThresholdConfig;
use subdiff_core::signal::{InputKind, InputModel, NoiseModel};
use subdiff_core::sim::{LaneSpec, Scenario, TimeAxis};
use subdiff_core::topology::{generate_targets, CombinationWeights, TargetSet, Topology};

use crate::io::read_bank_file;
use crate::presets::{self, InputFamily, NodeProfile};

/// Invalid or unresolvable configuration (CLI exit code 3).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(e: impl fmt::Display) -> anyhow::Error {
    anyhow!(ConfigError(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputConfig {
    pub family: InputFamily,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig {
            family: InputFamily::White,
            beta1: 0.95,
            beta2: 0.1,
            beta3: 0.8,
        }
    }
}

impl InputConfig {
    pub fn kind(&self) -> InputKind {
        match self.family {
            InputFamily::White => InputKind::White,
            InputFamily::Ar1 => InputKind::Ar1 { beta1: self.beta1 },
            InputFamily::Ar2 => InputKind::Ar2 {
                beta2: self.beta2,
                beta3: self.beta3,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub p_r: f64,
    /// Impulse-to-background variance ratio.
    pub kappa: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            p_r: 0.001,
            kappa: 1e3,
        }
    }
}

/// Every [`StepConfig`] and [`ThresholdConfig`] field. `k_xi: null` disables the gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepParams {
    pub mu: f64,
    pub eta: f64,
    pub n_d: usize,
    pub p: usize,
    pub sigma_mcc: f64,
    pub eps_reg: f64,
    pub gamma: f64,
    pub k_xi: Option<f64>,
    pub n_w: usize,
    pub sigma0_sq: f64,
}

impl Default for StepParams {
    fn default() -> Self {
        StepParams::from_step(&StepConfig {
            mu: 0.005,
            ..StepConfig::default()
        })
    }
}

impl StepParams {
    pub fn from_step(s: &StepConfig) -> Self {
        StepParams {
            mu: s.mu,
            eta: s.eta,
            n_d: s.n_d,
            p: s.p,
            sigma_mcc: s.sigma_mcc,
            eps_reg: s.eps_reg,
            gamma: s.threshold.gamma,
            k_xi: s.threshold.k_xi.is_finite().then_some(s.threshold.k_xi),
            n_w: s.threshold.n_w,
            sigma0_sq: s.threshold.sigma0_sq,
        }
    }

    pub fn to_step(&self) -> StepConfig {
        StepConfig {
            mu: self.mu,
            eta: self.eta,
            eps_reg: self.eps_reg,
            n_d: self.n_d,
            p: self.p,
            sigma_mcc: self.sigma_mcc,
            threshold: ThresholdConfig {
                gamma: self.gamma,
                k_xi: self.k_xi.unwrap_or(f64::INFINITY),
                n_w: self.n_w,
                sigma0_sq: self.sigma0_sq,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub mu: Vec<f64>,
    pub n_d: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            mu: vec![0.005, 0.01, 0.02, 0.03, 0.05],
            n_d: vec![2, 4, 8],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Iterations,
    Samples,
}

impl From<Axis> for TimeAxis {
    fn from(a: Axis) -> Self {
        match a {
            Axis::Iterations => TimeAxis::Iterations,
            Axis::Samples => TimeAxis::Samples,
        }
    }
}

/// Settings of the theoretical predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TheoryConfig {
    /// Regressor draws per node for the moment estimates.
    pub moment_samples: usize,
    /// Use `(1 - p_r) erf(k_xi / sqrt 2)` instead of a pilot simulation for the update
    /// probabilities.
    pub analytic_p: bool,
    pub pilot_iterations: usize,
    pub pilot_trials: u64,
    /// Gate outcomes are counted over this many final pilot iterations.
    pub pilot_window: usize,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        TheoryConfig {
            moment_samples: 20_000,
            analytic_p: false,
            pilot_iterations: 2000,
            pilot_trials: 20,
            pilot_window: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Preset name or topology file path.
    pub topology: String,
    /// Preset name or profile file path; `None` uses the topology preset's profile.
    pub profile: Option<String>,
    pub input: InputConfig,
    pub noise: NoiseConfig,
    pub algorithm: String,
    pub step: StepParams,
    /// Filter length `M`.
    pub m: usize,
    pub iterations: usize,
    pub axis: Axis,
    pub trials: u64,
    pub seed: u64,
    /// Fullband sample index at which all targets flip sign.
    pub flip_at: Option<usize>,
    pub sweep: Option<SweepConfig>,
    /// Analysis-bank coefficient file replacing the designed bank.
    pub bank_file: Option<String>,
    pub theory: TheoryConfig,
    pub output: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            topology: "net7".into(),
            profile: None,
            input: InputConfig::default(),
            noise: NoiseConfig::default(),
            algorithm: AlgorithmKind::MdNmsaf.name().into(),
            step: StepParams::default(),
            m: 8,
            iterations: 50_000,
            axis: Axis::Iterations,
            trials: 200,
            seed: 1,
            flip_at: None,
            sweep: None,
            bank_file: None,
            theory: TheoryConfig::default(),
            output: None,
        }
    }
}

/// Resolved network: topology, weights, targets and per-node statistics.
#[derive(Debug, Clone)]
pub struct Network {
    pub topology: Topology,
    pub weights: CombinationWeights,
    pub targets: TargetSet,
    pub inputs: Vec<InputModel>,
    pub noises: Vec<NoiseModel>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(config_err)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `key=value` with a dotted key path; the value is parsed as JSON when
    /// possible and taken as a string otherwise.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| config_err(format!("expected key=value, got '{assignment}'")))?;
        let value: Value =
            serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
        let mut root = serde_json::to_value(&*self)?;
        let mut slot = &mut root;
        for part in key.split('.') {
            // unset optional sections start empty; serde rejects unknown keys inside them
            let fresh = slot.is_null();
            if fresh {
                *slot = Value::Object(Default::default());
            }
            let obj = slot
                .as_object_mut()
                .ok_or_else(|| config_err(format!("'{key}' does not name a field")))?;
            if !fresh && !obj.contains_key(part) {
                return Err(config_err(format!("unknown config key '{key}'")));
            }
            slot = obj.entry(part).or_insert(Value::Null);
        }
        *slot = value;
        *self = serde_json::from_value(root).map_err(|e| config_err(format!("{key}: {e}")))?;
        Ok(())
    }

    /// Short hex digest of the configuration, ignoring the output path.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        let digest = Sha256::digest(serde_json::to_vec(&c).expect("config serializes"));
        format!("{digest:x}")[..16].to_owned()
    }

    pub fn algorithm_kind(&self) -> Result<AlgorithmKind> {
        self.algorithm.parse().map_err(config_err)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(config_err("trials must be at least 1"));
        }
        if self.m == 0 {
            return Err(config_err("filter length m must be at least 1"));
        }
        if self.iterations == 0 {
            return Err(config_err("iterations must be at least 1"));
        }
        let kind = self.algorithm_kind()?;
        self.step.to_step().validate(kind).map_err(config_err)?;
        if let Some(s) = &self.sweep {
            if s.mu.is_empty() || s.n_d.is_empty() {
                return Err(config_err("sweep grids must be non-empty"));
            }
        }
        self.network()?;
        Ok(())
    }

    pub fn network(&self) -> Result<Network> {
        let file = presets::load_topology(&self.topology).map_err(config_err)?;
        let topology = file.build().map_err(config_err)?;
        let profile = match (&self.profile, presets::is_builtin(&self.topology)) {
            (Some(p), _) => presets::load_profile(p).map_err(config_err)?,
            (None, true) => presets::load_profile(&self.topology).map_err(config_err)?,
            (None, false) => NodeProfile::uniform(file.nodes, 1.0, 1.0),
        };
        let n = topology.nodes();
        if profile.input_variance.len() != n || profile.noise_variance.len() != n {
            return Err(config_err(format!("profile does not have {n} entries")));
        }
        let inputs = profile
            .input_variance
            .iter()
            .map(|&v| InputModel::new(self.input.kind(), v))
            .collect::<subdiff_core::Result<Vec<_>>>()
            .map_err(config_err)?;
        let noises = profile
            .noise_variance
            .iter()
            .map(|&v| NoiseModel::new(v, self.noise.p_r, self.noise.kappa))
            .collect::<subdiff_core::Result<Vec<_>>>()
            .map_err(config_err)?;
        let targets =
            generate_targets(&topology, self.m, &file.offsets, self.seed).map_err(config_err)?;
        Ok(Network {
            weights: CombinationWeights::new(&topology),
            topology,
            targets,
            inputs,
            noises,
        })
    }

    /// Bank for `n_d` subbands: the coefficient file when configured, else the default design.
    pub fn bank(&self, n_d: usize) -> Result<AnalysisBank> {
        match &self.bank_file {
            Some(path) => {
                let bank = read_bank_file(Path::new(path)).map_err(config_err)?;
                if bank.subbands() != n_d {
                    return Err(config_err(format!(
                        "bank file has {} subbands, expected {n_d}",
                        bank.subbands()
                    )));
                }
                Ok(bank)
            }
            None => AnalysisBank::with_default_length(n_d).map_err(config_err),
        }
    }

    pub fn lane(&self, kind: AlgorithmKind, step: StepConfig) -> Result<LaneSpec> {
        let mut lane = LaneSpec::new(kind, step);
        if kind.is_subband() {
            lane.bank = Some(self.bank(step.n_d)?);
        }
        Ok(lane)
    }

    /// Scenario over this configuration's network with the given lanes.
    pub fn scenario(&self, net: &Network, lanes: Vec<LaneSpec>) -> Scenario {
        Scenario {
            topology: net.topology.clone(),
            weights: net.weights.clone(),
            targets: net.targets.clone(),
            inputs: net.inputs.clone(),
            noises: net.noises.clone(),
            lanes,
            axis: self.axis.into(),
            length: self.iterations,
            flip_at: self.flip_at,
            seed: self.seed,
            burn_in: 10 * self.m,
            gate_window: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip() {
        let mut c = ExperimentConfig {
            sweep: Some(SweepConfig {
                mu: vec![0.01, 0.02],
                n_d: vec![2],
            }),
            ..Default::default()
        };
        c.step.k_xi = None;
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.step.to_step().threshold.k_xi, f64::INFINITY);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c = ExperimentConfig::from_json(r#"{"m": 16, "step": {"mu": 0.1}}"#).unwrap();
        assert_eq!(c.m, 16);
        assert_eq!(c.step.mu, 0.1);
        assert_eq!(c.step.n_d, 4);
        assert_eq!(c.topology, "net7");
    }

    #[test]
    fn unknown_fields_rejected() {
        let e = ExperimentConfig::from_json(r#"{"mm": 16}"#).unwrap_err();
        assert!(e.downcast_ref::<ConfigError>().is_some());
    }

    #[test]
    fn overrides() {
        let mut c = ExperimentConfig::default();
        c.set("step.mu=0.02").unwrap();
        c.set("input.family=ar2").unwrap();
        c.set("topology=net15").unwrap();
        c.set("sweep.mu=[0.1,0.2]").unwrap();
        c.set("sweep.n_d=[2]").unwrap();
        c.set("flip_at=100").unwrap();
        assert_eq!(c.step.mu, 0.02);
        assert_eq!(c.input.family, InputFamily::Ar2);
        assert_eq!(c.topology, "net15");
        assert_eq!(c.sweep.as_ref().unwrap().mu, vec![0.1, 0.2]);
        assert_eq!(c.flip_at, Some(100));
        assert!(c.set("step.nope=1").is_err());
        assert!(c.set("trials=lots").is_err());
        assert!(c.set("missing-equals").is_err());
    }

    #[test]
    fn hash_ignores_output_only() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.output = Some("x.csv".into());
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn network_resolves_presets() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let net = c.network().unwrap();
        assert_eq!(net.inputs.len(), 7);
        assert_eq!(net.noises[0].p_r, 0.001);
        assert_eq!(net.targets.filter_len(), 8);
        let mut bad = c.clone();
        bad.topology = "no-such-network".into();
        assert!(bad
            .validate()
            .unwrap_err()
            .downcast_ref::<ConfigError>()
            .is_some());
    }
}
