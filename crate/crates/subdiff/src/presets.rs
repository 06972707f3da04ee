//! Shipped networks and per-node variance profiles.
//!
//! Topology files are JSON with 1-based node and cluster labels:
//!
//! ```json
//! { "nodes": 3, "edges": [[1, 2], [2, 3]], "clusters": [1, 1, 2], "offsets": [0.0, 0.1] }
//! ```
//!
//! Profile files hold one `input_variance` and one `noise_variance` entry per node.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use subdiff_core::algorithms::{AlgorithmKind, StepConfig};
use subdiff_core::topology::Topology;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyFile {
    pub nodes: usize,
    pub edges: Vec<[usize; 2]>,
    pub clusters: Vec<usize>,
    pub offsets: Vec<f64>,
}

impl TopologyFile {
    pub fn build(&self) -> Result<Topology> {
        if self.clusters.len() != self.nodes {
            bail!(
                "{} cluster labels for {} nodes",
                self.clusters.len(),
                self.nodes
            );
        }
        let one_based = |x: usize, what: &str| -> Result<usize> {
            if x == 0 {
                bail!("{what} labels are 1-based, found 0");
            }
            Ok(x - 1)
        };
        let edges = self
            .edges
            .iter()
            .map(|[a, b]| Ok((one_based(*a, "node")?, one_based(*b, "node")?)))
            .collect::<Result<Vec<_>>>()?;
        let clusters = self
            .clusters
            .iter()
            .map(|c| one_based(*c, "cluster"))
            .collect::<Result<Vec<_>>>()?;
        let t = Topology::from_edges(self.nodes, &edges, &clusters)?;
        if self.offsets.len() != t.clusters() {
            bail!(
                "{} offsets for {} clusters",
                self.offsets.len(),
                t.clusters()
            );
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeProfile {
    pub input_variance: Vec<f64>,
    pub noise_variance: Vec<f64>,
}

impl NodeProfile {
    pub fn uniform(n: usize, input_variance: f64, noise_variance: f64) -> Self {
        NodeProfile {
            input_variance: vec![input_variance; n],
            noise_variance: vec![noise_variance; n],
        }
    }
}

struct Builtin {
    name: &'static str,
    about: &'static str,
    topology: &'static str,
    profile: &'static str,
}

const BUILTINS: &[Builtin] = &[
    Builtin {
        name: "net7",
        about: "7 nodes, 3 clusters; theory validation network",
        topology: include_str!("../presets/net7.json"),
        profile: include_str!("../presets/net7-profile.json"),
    },
    Builtin {
        name: "net15",
        about: "15 nodes, 3 clusters; algorithm comparison network",
        topology: include_str!("../presets/net15.json"),
        profile: include_str!("../presets/net15-profile.json"),
    },
];

/// `(name, description)` of every shipped network.
pub fn list() -> Vec<(&'static str, &'static str)> {
    BUILTINS.iter().map(|b| (b.name, b.about)).collect()
}

fn builtin(name: &str) -> Option<&'static Builtin> {
    BUILTINS.iter().find(|b| b.name == name)
}

/// Loads a shipped network by name, or a topology file by path.
pub fn load_topology(name_or_path: &str) -> Result<TopologyFile> {
    let text = match builtin(name_or_path) {
        Some(b) => b.topology.to_owned(),
        None => std::fs::read_to_string(name_or_path)
            .with_context(|| format!("'{name_or_path}' is neither a preset nor a readable file"))?,
    };
    serde_json::from_str(&text).with_context(|| format!("parsing topology '{name_or_path}'"))
}

/// Loads the profile of a shipped network by name, or a profile file by path.
pub fn load_profile(name_or_path: &str) -> Result<NodeProfile> {
    let text = match builtin(name_or_path) {
        Some(b) => b.profile.to_owned(),
        None => std::fs::read_to_string(Path::new(name_or_path))
            .with_context(|| format!("'{name_or_path}' is neither a preset nor a readable file"))?,
    };
    serde_json::from_str(&text).with_context(|| format!("parsing profile '{name_or_path}'"))
}

pub fn is_builtin(name: &str) -> bool {
    builtin(name).is_some()
}

/// Input families of the comparison experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFamily {
    White,
    Ar1,
    Ar2,
}

impl std::str::FromStr for InputFamily {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "white" | "gaussian" => Ok(InputFamily::White),
            "ar1" => Ok(InputFamily::Ar1),
            "ar2" => Ok(InputFamily::Ar2),
            _ => bail!("unknown input family '{s}' (white, ar1, ar2)"),
        }
    }
}

/// Median window for subband lanes: an impulse in `d(t)` leaks into about `L_p / N_D`
/// consecutive decimated errors, so the window must be long enough for the median to
/// outvote such a burst.
pub fn burst_window(filter_len: usize, n_d: usize) -> usize {
    2 * filter_len.div_ceil(n_d.max(1)) + 1
}

/// Step parameters of the comparison experiments for one algorithm and input family.
/// MD-LMS is not tabulated; its values were picked to give a comparable initial slope.
pub fn comparison_step(kind: AlgorithmKind, input: InputFamily) -> StepConfig {
    use AlgorithmKind::*;
    use InputFamily::*;
    let mut c = StepConfig {
        eta: 0.01,
        p: 2,
        n_d: 4,
        sigma_mcc: 4.0,
        ..StepConfig::default()
    };
    c.mu = match (kind, input) {
        (MdApa, _) => 0.008,
        (MdApm, Ar2) => 0.0065,
        (MdApm, _) => 0.009,
        (MdApmcc, _) => 0.008,
        (MdNmsaf, White) => 0.017,
        (MdNmsaf, Ar1) => 0.015,
        (MdNmsaf, Ar2) => 0.018,
        (MdLms, _) => 0.002,
    };
    if kind == MdNmsaf {
        // default bank length is 8 N_D
        c.threshold.n_w = burst_window(8 * c.n_d, c.n_d);
    }
    c
}

/// Impulse probability of the comparison experiments.
pub fn comparison_impulse_probability(input: InputFamily) -> f64 {
    match input {
        InputFamily::Ar1 => 0.001,
        _ => 0.01,
    }
}
