use serde::{Deserialize, Serialize};

use super::embed::Embedding;

/// Hardware cost of an NQAC encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceCount {
    /// `CN(CN-1)/2 + CN(L-1)`.
    pub formula: usize,
    /// Physical qubits of a concrete embedding.
    pub qubits: Option<usize>,
    /// Inter-chain plus intra-chain physical couplers of a concrete embedding.
    pub couplers: Option<usize>,
}

/// Lower-bound cost for `C` copies of `N` logical qubits with chains of length `L`.
///
/// The expression counts one coupler per pair of code qubits plus the
/// `L - 1` links along each chain.
pub fn resource_count(c: usize, n: usize, l: usize, embedding: Option<&Embedding>) -> ResourceCount {
    let cn = c * n;
    ResourceCount {
        formula: cn * cn.saturating_sub(1) / 2 + cn * l.saturating_sub(1),
        qubits: embedding.map(Embedding::n_physical),
        couplers: embedding.map(|e| e.n_chain_edges() + e.n_inter_chain_edges()),
    }
}

/// Qubits used by the clique embedding of `K_n` on a Chimera lattice with
/// shore size `shore`.
pub fn clique_qubits(n: usize, shore: usize) -> usize {
    n * (n.div_ceil(shore) + 1)
}

/// Number of classical replicas matching the qubit budget of a `C`-level
/// encoding of `N` logical qubits: the ratio of clique-embedding qubit
/// counts, rounded to the nearest integer.
pub fn replica_count(c: usize, n: usize, shore: usize) -> usize {
    let ratio = clique_qubits(c * n, shore) as f64 / clique_qubits(n, shore) as f64;
    (ratio.round() as usize).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nqac::{chimera, clique_chains};

    #[test]
    fn formula_examples() {
        assert_eq!(resource_count(1, 2, 1, None).formula, 1);
        let base = resource_count(1, 16, 5, None).formula;
        for (c, n, l) in [(2, 16, 5), (1, 17, 5), (1, 16, 6)] {
            assert!(resource_count(c, n, l, None).formula > base);
        }
    }

    #[test]
    fn replicas_match_sixteen_variable_budget() {
        assert_eq!(replica_count(1, 16, 4), 1);
        assert_eq!(replica_count(2, 16, 4), 4);
        assert_eq!(replica_count(3, 16, 4), 8);
    }

    #[test]
    fn formula_counts_couplers_of_clique_embedding() {
        let hw = chimera(16, 16, 4, []).unwrap();
        for c in 1..=3 {
            let chains = clique_chains(16 * c, &hw).unwrap();
            let emb = Embedding::new(chains, 1.0, &hw).unwrap();
            let l = emb.max_chain_len();
            let r = resource_count(c, 16, l, Some(&emb));
            assert_eq!(r.qubits, Some(clique_qubits(16 * c, 4)));
            // Each chain pair is joined by at least one edge, and each chain
            // is at least a path, so the formula bounds the coupler count.
            assert!(r.couplers.unwrap() >= r.formula);
        }
    }
}
