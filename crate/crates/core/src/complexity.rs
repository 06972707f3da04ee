//! Per-iteration multiplication/addition counts of the network algorithms.

use crate::algorithms::AlgorithmKind;
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpCounts {
    pub multiplications: u64,
    pub additions: u64,
    /// Order of the direct matrix inversion (0 when none is needed).
    pub dmi_order: u32,
}

/// Network-wide counts, summing the per-node expressions with
/// `m_k = |N_k \ C(k)|` and `n_k = |N_k ∩ C(k)|`.
pub fn complexity_report(kind: AlgorithmKind, t: &Topology, m: u64, n_d: u64, p: u64) -> OpCounts {
    let mut mult = 0i64;
    let mut add = 0i64;
    let (m, n_d, p) = (m as i64, n_d as i64, p as i64);
    for k in 0..t.nodes() {
        let mk = t.inter_neighbors(k).count() as i64;
        let nk = t.intra_neighbors(k).count() as i64;
        let (a, b) = match kind {
            AlgorithmKind::MdLms => ((mk + nk + 1) * m + 1, (mk + nk) * m),
            AlgorithmKind::MdApa | AlgorithmKind::MdApm => (
                (p * p + 2 * p + mk + nk) * m + p * p * p + p * p,
                (p * p + 2 * p + 2 * mk + nk - 1) * m + p * p * p,
            ),
            AlgorithmKind::MdApmcc => (
                (p * p + 2 * p + mk + nk) * m + p * p * p + p * p + 6 * p,
                (p * p + 2 * p + 2 * mk + nk - 1) * m + p * p * p,
            ),
            AlgorithmKind::MdNmsaf => (
                (mk + nk + n_d + 2) * m + 2,
                (mk + nk + 2 * n_d - 1) * m - n_d,
            ),
        };
        mult += a;
        add += b;
    }
    let dmi_order = match kind {
        AlgorithmKind::MdApa | AlgorithmKind::MdApm | AlgorithmKind::MdApmcc => 3,
        _ => 0,
    };
    OpCounts {
        multiplications: mult.max(0) as u64,
        additions: add.max(0) as u64,
        dmi_order,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_network_by_hand() {
        // two connected nodes in different clusters: m_k = 1, n_k = 1
        let t = Topology::from_edges(2, &[(0, 1)], &[0, 1]).unwrap();
        let c = complexity_report(AlgorithmKind::MdNmsaf, &t, 4, 2, 0);
        assert_eq!(c.multiplications, 2 * ((1 + 1 + 2 + 2) * 4 + 2));
        assert_eq!(c.additions, 2 * ((1 + 1 + 4 - 1) * 4 - 2));
        let l = complexity_report(AlgorithmKind::MdLms, &t, 4, 2, 0);
        assert_eq!(l.multiplications, 2 * (3 * 4 + 1));
        assert_eq!(l.dmi_order, 0);
    }

    #[test]
    fn ap_counts_grow_cubically() {
        let t = Topology::from_adjacency(&[vec![]], &[0]).unwrap();
        let c2 = complexity_report(AlgorithmKind::MdApm, &t, 16, 0, 2).multiplications;
        let c8 = complexity_report(AlgorithmKind::MdApm, &t, 16, 0, 8).multiplications;
        assert_eq!(c2, (4 + 4 + 1) * 16 + 8 + 4);
        assert_eq!(c8, (64 + 16 + 1) * 16 + 512 + 64);
        let cc = complexity_report(AlgorithmKind::MdApmcc, &t, 16, 0, 2).multiplications;
        assert_eq!(cc, c2 + 12);
    }
}
