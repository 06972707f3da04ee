//! Clustered multitask network: topology, combination weights and cluster targets.
//!
//! Nodes and clusters are zero-based throughout the API. Every neighbor set contains the
//! node itself.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng;

use crate::rng::{stream, StreamRole};
use crate::{Error, Result};

/// Validated network topology.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    neighbors: Vec<Vec<usize>>,
    cluster: Vec<usize>,
    n_clusters: usize,
}

impl Topology {
    /// Builds a topology from per-node adjacency lists (self-loops optional) and cluster
    /// labels in `0..L`.
    ///
    /// Fails if the adjacency is asymmetric, a label in `0..=max` is unused, or a cluster's
    /// intra-cluster subgraph is disconnected.
    pub fn from_adjacency(adjacency: &[Vec<usize>], clusters: &[usize]) -> Result<Self> {
        let n = adjacency.len();
        if n == 0 {
            return Err(Error::InvalidTopology("network has no nodes".into()));
        }
        if clusters.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: clusters.len(),
            });
        }
        for (k, adj) in adjacency.iter().enumerate() {
            for &l in adj {
                if l >= n {
                    return Err(Error::InvalidTopology(format!(
                        "node {k} lists unknown node {l}"
                    )));
                }
                if l != k && !adjacency[l].contains(&k) {
                    return Err(Error::AsymmetricAdjacency(k, l));
                }
            }
        }
        let n_clusters = clusters.iter().copied().max().unwrap_or(0) + 1;
        for c in 0..n_clusters {
            if !clusters.contains(&c) {
                return Err(Error::EmptyCluster(c));
            }
        }
        let neighbors: Vec<Vec<usize>> = adjacency
            .iter()
            .enumerate()
            .map(|(k, adj)| {
                let mut v = adj.clone();
                v.push(k);
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect();
        let topo = Topology {
            neighbors,
            cluster: clusters.to_vec(),
            n_clusters,
        };
        for c in 0..n_clusters {
            if !topo.cluster_connected(c) {
                return Err(Error::DisconnectedCluster(c));
            }
        }
        Ok(topo)
    }

    /// Builds a topology from an undirected edge list.
    pub fn from_edges(nodes: usize, edges: &[(usize, usize)], clusters: &[usize]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); nodes];
        for &(a, b) in edges {
            if a >= nodes || b >= nodes {
                return Err(Error::InvalidTopology(format!(
                    "edge ({a}, {b}) out of range"
                )));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        Self::from_adjacency(&adjacency, clusters)
    }

    fn cluster_connected(&self, c: usize) -> bool {
        let members: Vec<usize> = (0..self.nodes())
            .filter(|&k| self.cluster[k] == c)
            .collect();
        let mut seen = vec![false; self.nodes()];
        let mut queue = VecDeque::from([members[0]]);
        seen[members[0]] = true;
        let mut count = 1;
        while let Some(k) = queue.pop_front() {
            for &l in &self.neighbors[k] {
                if !seen[l] && self.cluster[l] == c {
                    seen[l] = true;
                    count += 1;
                    queue.push_back(l);
                }
            }
        }
        count == members.len()
    }

    pub fn nodes(&self) -> usize {
        self.neighbors.len()
    }

    pub fn clusters(&self) -> usize {
        self.n_clusters
    }

    /// Neighbor set of node `k`, sorted, including `k`.
    pub fn neighbors(&self, k: usize) -> &[usize] {
        &self.neighbors[k]
    }

    pub fn cluster_of(&self, k: usize) -> usize {
        self.cluster[k]
    }

    /// Neighbors of `k` in its own cluster, including `k`.
    pub fn intra_neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let c = self.cluster[k];
        self.neighbors[k]
            .iter()
            .copied()
            .filter(move |&l| self.cluster[l] == c)
    }

    /// Neighbors of `k` outside its cluster.
    pub fn inter_neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let c = self.cluster[k];
        self.neighbors[k]
            .iter()
            .copied()
            .filter(move |&l| self.cluster[l] != c)
    }
}

/// Intra-cluster combination weights `alpha` (column-stochastic, `[C]_{m,k} = alpha_{m,k}`)
/// and inter-cluster regularization weights `gamma` (`[P]_{k,l} = gamma_{k,l}`).
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationWeights {
    pub alpha: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
}

impl CombinationWeights {
    pub fn new(t: &Topology) -> Self {
        CombinationWeights {
            alpha: uniform_combination_weights(t),
            gamma: inter_cluster_weights(t),
        }
    }
}

/// Uniform rule: `alpha_{m,k} = 1/|N_k ∩ C(k)|` for every intra-cluster neighbor `m`
/// (including `k`).
pub fn uniform_combination_weights(t: &Topology) -> DMatrix<f64> {
    let n = t.nodes();
    let mut alpha = DMatrix::zeros(n, n);
    for k in 0..n {
        let intra: Vec<usize> = t.intra_neighbors(k).collect();
        let w = 1.0 / intra.len() as f64;
        for m in intra {
            alpha[(m, k)] = w;
        }
    }
    alpha
}

/// `gamma_{k,l} = 1/|N_k \ C(k)|` for inter-cluster neighbors; rows of nodes without such
/// neighbors are zero.
pub fn inter_cluster_weights(t: &Topology) -> DMatrix<f64> {
    let n = t.nodes();
    let mut gamma = DMatrix::zeros(n, n);
    for k in 0..n {
        let inter: Vec<usize> = t.inter_neighbors(k).collect();
        if inter.is_empty() {
            continue;
        }
        let w = 1.0 / inter.len() as f64;
        for l in inter {
            gamma[(k, l)] = w;
        }
    }
    gamma
}

/// Per-node true parameter vectors built from one shared base vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSet {
    pub base: Vec<f64>,
    pub offsets: Vec<f64>,
    pub w_star: Vec<Vec<f64>>,
}

impl TargetSet {
    /// Cluster targets `(1 + h_c) * base`, assigned to nodes by cluster label.
    pub fn from_base(t: &Topology, base: Vec<f64>, offsets: &[f64]) -> Result<Self> {
        if offsets.len() != t.clusters() {
            return Err(Error::DimensionMismatch {
                expected: t.clusters(),
                found: offsets.len(),
            });
        }
        if base.is_empty() {
            return Err(Error::InvalidParameter(
                "filter length must be at least 1".into(),
            ));
        }
        let per_cluster: Vec<Vec<f64>> = offsets
            .iter()
            .map(|h| base.iter().map(|b| (1.0 + h) * b).collect())
            .collect();
        let w_star = (0..t.nodes())
            .map(|k| per_cluster[t.cluster_of(k)].clone())
            .collect();
        Ok(TargetSet {
            base,
            offsets: offsets.to_vec(),
            w_star,
        })
    }

    pub fn filter_len(&self) -> usize {
        self.base.len()
    }

    /// The same network with every target sign-flipped.
    pub fn negated(&self) -> Self {
        TargetSet {
            base: self.base.iter().map(|b| -b).collect(),
            offsets: self.offsets.clone(),
            w_star: self
                .w_star
                .iter()
                .map(|w| w.iter().map(|x| -x).collect())
                .collect(),
        }
    }

    /// Stacked network target `col[w*_1, ..., w*_N]`.
    pub fn stacked(&self) -> Vec<f64> {
        self.w_star.iter().flatten().copied().collect()
    }
}

/// Draws the base vector uniformly on `[0, 1)` from `seed` and builds the cluster targets.
pub fn generate_targets(t: &Topology, m: usize, offsets: &[f64], seed: u64) -> Result<TargetSet> {
    let mut rng = stream(seed, 0, 0, StreamRole::Targets);
    let base: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    TargetSet::from_base(t, base, offsets)
}
