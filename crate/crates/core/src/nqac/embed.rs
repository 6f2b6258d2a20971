use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::ising::{HardwareLimits, IsingProblem};

use super::chimera::HardwareGraph;
use super::nest::NestedProblem;

/// Chains of physical qubits representing each code qubit.
///
/// The physical problem produced alongside an embedding is indexed
/// compactly: variable `k` is hardware qubit `physical_ids()[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    chains: Vec<Vec<usize>>,
    chain_penalty: f64,
    physical_ids: Vec<usize>,
    compact_chains: Vec<Vec<usize>>,
    /// Hardware edges inside each chain, compact indices.
    chain_edges: Vec<(usize, usize)>,
    /// Hardware edges between two chains, keyed by code-qubit pair.
    support: BTreeMap<(usize, usize), Vec<(usize, usize)>>,
}

impl Embedding {
    /// Validate chains against the hardware graph and index their edges.
    pub fn new(chains: Vec<Vec<usize>>, chain_penalty: f64, hw: &HardwareGraph) -> Result<Self> {
        if !(chain_penalty > 0.0 && chain_penalty <= 1.0) {
            return Err(Error::domain(format!(
                "chain penalty gamma2 must lie in (0, 1], got {chain_penalty}"
            )));
        }
        let mut owner: BTreeMap<usize, usize> = BTreeMap::new();
        for (code, chain) in chains.iter().enumerate() {
            if chain.is_empty() {
                return Err(Error::domain(format!("chain for code qubit {code} is empty")));
            }
            for &q in chain {
                if !hw.is_active(q) {
                    return Err(Error::domain(format!(
                        "chain {code} uses inactive or missing qubit {q}"
                    )));
                }
                if let Some(other) = owner.insert(q, code) {
                    return Err(Error::domain(format!(
                        "qubit {q} appears in chains {other} and {code}"
                    )));
                }
            }
            if !is_connected(chain, hw) {
                return Err(Error::domain(format!("chain {code} is not connected")));
            }
        }

        let physical_ids: Vec<usize> = owner.keys().copied().collect();
        let compact_of: BTreeMap<usize, usize> = physical_ids
            .iter()
            .enumerate()
            .map(|(k, &q)| (q, k))
            .collect();
        let compact_chains = chains
            .iter()
            .map(|c| c.iter().map(|q| compact_of[q]).collect())
            .collect();

        let mut chain_edges = Vec::new();
        let mut support: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
        for &u in &physical_ids {
            for &v in hw.neighbors(u) {
                if u >= v {
                    continue;
                }
                let Some(&cv) = owner.get(&v) else { continue };
                let cu = owner[&u];
                let edge = (compact_of[&u], compact_of[&v]);
                if cu == cv {
                    chain_edges.push(edge);
                } else {
                    support.entry((cu.min(cv), cu.max(cv))).or_default().push(edge);
                }
            }
        }
        Ok(Embedding {
            chains,
            chain_penalty,
            physical_ids,
            compact_chains,
            chain_edges,
            support,
        })
    }

    pub fn chains(&self) -> &[Vec<usize>] {
        &self.chains
    }

    /// Chains in the compact indexing of the physical problem.
    pub fn compact_chains(&self) -> &[Vec<usize>] {
        &self.compact_chains
    }

    pub fn chain_penalty(&self) -> f64 {
        self.chain_penalty
    }

    pub fn with_chain_penalty(&self, chain_penalty: f64) -> Result<Self> {
        if !(chain_penalty > 0.0 && chain_penalty <= 1.0) {
            return Err(Error::domain(format!(
                "chain penalty gamma2 must lie in (0, 1], got {chain_penalty}"
            )));
        }
        Ok(Embedding {
            chain_penalty,
            ..self.clone()
        })
    }

    /// Hardware id of each physical-problem variable.
    pub fn physical_ids(&self) -> &[usize] {
        &self.physical_ids
    }

    pub fn n_physical(&self) -> usize {
        self.physical_ids.len()
    }

    pub fn n_code(&self) -> usize {
        self.chains.len()
    }

    /// Longest chain, `L`.
    pub fn max_chain_len(&self) -> usize {
        self.chains.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn n_chain_edges(&self) -> usize {
        self.chain_edges.len()
    }

    /// Physical edges between the chains of code qubits `a` and `b`.
    pub fn supporting_edges(&self, a: usize, b: usize) -> &[(usize, usize)] {
        self.support
            .get(&(a.min(b), a.max(b)))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn n_inter_chain_edges(&self) -> usize {
        self.support.values().map(Vec::len).sum()
    }

    /// Distribute a code-level problem over the chains.
    ///
    /// Each field is split equally along its chain, each coupler equally over
    /// its supporting edges, and every intra-chain edge gets `-gamma2`.
    /// Parameters outside the hardware limits are clipped with a warning.
    pub fn physical_problem(&self, code: &IsingProblem) -> Result<IsingProblem> {
        if code.n_vars() != self.n_code() {
            return Err(Error::Dimension {
                expected: self.n_code(),
                actual: code.n_vars(),
            });
        }
        let mut fields = vec![0.0; self.n_physical()];
        for (chain, &h) in self.compact_chains.iter().zip(code.fields()) {
            let share = h / chain.len() as f64;
            for &q in chain {
                fields[q] = share;
            }
        }
        let mut couplers: BTreeMap<(usize, usize), f64> = self
            .chain_edges
            .iter()
            .map(|&e| (e, -self.chain_penalty))
            .collect();
        for (a, b, w) in code.couplers() {
            let edges = self.supporting_edges(a, b);
            if edges.is_empty() {
                return Err(Error::Capacity(format!(
                    "no physical edge supports the coupler between code qubits {a} and {b}"
                )));
            }
            let share = w / edges.len() as f64;
            for &e in edges {
                couplers.insert(e, share);
            }
        }
        let problem =
            IsingProblem::from_parts(fields, couplers.into_iter().map(|((u, v), w)| (u, v, w)))?;
        let (problem, clipped) = problem.clip_to_limits(HardwareLimits::default());
        if clipped > 0 {
            log::warn!("clipped {clipped} physical parameters to the hardware limits");
        }
        Ok(problem)
    }

    /// `code_id: p1 p2 ...` per line.
    pub fn chains_to_text(&self) -> String {
        let mut out = String::new();
        for (code, chain) in self.chains.iter().enumerate() {
            let _ = write!(out, "{code}:");
            for q in chain {
                let _ = write!(out, " {q}");
            }
            out.push('\n');
        }
        out
    }

    /// Parse the chain file format; `#` starts a comment.
    pub fn chains_from_text(text: &str) -> Result<Vec<Vec<usize>>> {
        const SRC: &str = "embedding file";
        let mut by_code: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let loc = format!("line {}", k + 1);
            let (head, tail) = line
                .split_once(':')
                .ok_or_else(|| Error::parse(SRC, &loc, "expected `code_id: qubits...`"))?;
            let code: usize = head
                .trim()
                .parse()
                .map_err(|_| Error::parse(SRC, &loc, "bad code id"))?;
            let qubits = tail
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::parse(SRC, &loc, "bad physical qubit id"))?;
            if by_code.insert(code, qubits).is_some() {
                return Err(Error::parse(SRC, &loc, format!("code qubit {code} listed twice")));
            }
        }
        let n = by_code.len();
        if by_code.keys().copied().ne(0..n) {
            return Err(Error::parse(SRC, "end of file", "code ids must be 0..n without gaps"));
        }
        Ok(by_code.into_values().collect())
    }
}

fn is_connected(chain: &[usize], hw: &HardwareGraph) -> bool {
    let mut seen = vec![false; chain.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(k) = queue.pop_front() {
        for (j, &q) in chain.iter().enumerate() {
            if !seen[j] && hw.has_edge(chain[k], q) {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Deterministic clique embedding of `K_n` on a Chimera lattice.
///
/// Variable `v = a*k + b` gets an L-shaped chain: shore-0 qubit `b` in column
/// `a` of rows `0..=a`, then shore-1 qubit `b` in row `a` of columns
/// `a..m`, with `m = ceil(n/k)`. Every chain has length `m + 1`. If dead
/// qubits block the canonical position, every offset of the `m x m` block is
/// tried in row-major order.
pub fn clique_chains(n: usize, hw: &HardwareGraph) -> Result<Vec<Vec<usize>>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let k = hw.shore();
    let m = n.div_ceil(k);
    if m > hw.rows() || m > hw.cols() {
        return Err(Error::Capacity(format!(
            "K_{n} needs a {m}x{m} block of cells, lattice is {}x{}",
            hw.rows(),
            hw.cols()
        )));
    }
    for r0 in 0..=hw.rows() - m {
        for c0 in 0..=hw.cols() - m {
            let chains: Vec<Vec<usize>> = (0..n)
                .map(|v| {
                    let (a, b) = (v / k, v % k);
                    let vertical = (0..=a).map(|r| hw.id(r0 + r, c0 + a, 0, b));
                    let horizontal = (a..m).map(|c| hw.id(r0 + a, c0 + c, 1, b));
                    vertical.chain(horizontal).collect()
                })
                .collect();
            if chains.iter().flatten().all(|&q| hw.is_active(q)) {
                return Ok(chains);
            }
        }
    }
    Err(Error::Capacity(format!(
        "no {m}x{m} block of fully active cells can host K_{n}"
    )))
}

/// Embed a nested problem with the deterministic clique embedding.
pub fn minor_embed(
    nested: &NestedProblem,
    hw: &HardwareGraph,
    chain_penalty: f64,
) -> Result<(IsingProblem, Embedding)> {
    let chains = clique_chains(nested.code_vars(), hw)?;
    embed_with_chains(nested.problem(), chains, hw, chain_penalty)
}

/// Embed any code-level problem with user-supplied chains.
pub fn embed_with_chains(
    code: &IsingProblem,
    chains: Vec<Vec<usize>>,
    hw: &HardwareGraph,
    chain_penalty: f64,
) -> Result<(IsingProblem, Embedding)> {
    let embedding = Embedding::new(chains, chain_penalty, hw)?;
    let physical = embedding.physical_problem(code)?;
    Ok((physical, embedding))
}
