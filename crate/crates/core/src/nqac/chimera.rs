use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position of a qubit inside a Chimera lattice. Shore 0 couples vertically
/// between cells, shore 1 horizontally.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChimeraCoord {
    pub row: usize,
    pub col: usize,
    pub shore: usize,
    pub index: usize,
}

/// A Chimera lattice of `rows x cols` unit cells, each a complete bipartite
/// `K_{k,k}`, with some qubits possibly disabled.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HardwareGraph {
    rows: usize,
    cols: usize,
    shore: usize,
    inactive: BTreeSet<usize>,
    #[serde(skip)]
    adjacency: Vec<Vec<usize>>,
}

pub fn chimera(
    rows: usize,
    cols: usize,
    shore: usize,
    inactive: impl IntoIterator<Item = usize>,
) -> Result<HardwareGraph> {
    if rows == 0 || cols == 0 || shore == 0 {
        return Err(Error::domain("Chimera dimensions must all be at least 1"));
    }
    let mut graph = HardwareGraph {
        rows,
        cols,
        shore,
        inactive: inactive.into_iter().collect(),
        adjacency: Vec::new(),
    };
    if let Some(&bad) = graph.inactive.iter().find(|&&q| q >= graph.n_nodes()) {
        return Err(Error::domain(format!("inactive qubit {bad} is not in the lattice")));
    }
    graph.build_adjacency();
    Ok(graph)
}

impl HardwareGraph {
    fn build_adjacency(&mut self) {
        let mut adj = vec![Vec::new(); self.n_nodes()];
        for (u, v) in self.lattice_edges() {
            if !self.inactive.contains(&u) && !self.inactive.contains(&v) {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        adj.iter_mut().for_each(|l| l.sort_unstable());
        self.adjacency = adj;
    }

    /// Rebuild derived data after deserialization.
    pub fn restored(mut self) -> Self {
        self.build_adjacency();
        self
    }

    fn lattice_edges(&self) -> Vec<(usize, usize)> {
        let k = self.shore;
        let mut edges = Vec::new();
        for row in 0..self.rows {
            for col in 0..self.cols {
                for i in 0..k {
                    for j in 0..k {
                        edges.push((self.id(row, col, 0, i), self.id(row, col, 1, j)));
                    }
                    if row + 1 < self.rows {
                        edges.push((self.id(row, col, 0, i), self.id(row + 1, col, 0, i)));
                    }
                    if col + 1 < self.cols {
                        edges.push((self.id(row, col, 1, i), self.id(row, col + 1, 1, i)));
                    }
                }
            }
        }
        edges
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shore(&self) -> usize {
        self.shore
    }

    /// Qubit count of the full lattice, active or not.
    pub fn n_nodes(&self) -> usize {
        self.rows * self.cols * 2 * self.shore
    }

    pub fn n_active(&self) -> usize {
        self.n_nodes() - self.inactive.len()
    }

    pub fn is_active(&self, q: usize) -> bool {
        q < self.n_nodes() && !self.inactive.contains(&q)
    }

    pub fn inactive(&self) -> &BTreeSet<usize> {
        &self.inactive
    }

    pub fn id(&self, row: usize, col: usize, shore: usize, index: usize) -> usize {
        ((row * self.cols + col) * 2 + shore) * self.shore + index
    }

    pub fn coord(&self, q: usize) -> ChimeraCoord {
        let index = q % self.shore;
        let rest = q / self.shore;
        let shore = rest % 2;
        let cell = rest / 2;
        ChimeraCoord {
            row: cell / self.cols,
            col: cell % self.cols,
            shore,
            index,
        }
    }

    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.adjacency[q]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.adjacency.len() && self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Active edges as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, l)| l.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    pub fn n_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_is_k44() {
        let g = chimera(1, 1, 4, []).unwrap();
        assert_eq!(g.n_nodes(), 8);
        assert_eq!(g.n_edges(), 16);
        assert!(g.edges().all(|(u, v)| g.coord(u).shore != g.coord(v).shore));
    }

    #[test]
    fn full_sixteen_by_sixteen_counts() {
        let g = chimera(16, 16, 4, []).unwrap();
        assert_eq!(g.n_nodes(), 2048);
        assert_eq!(g.n_edges(), 256 * 16 + 2 * (16 * 15 * 4));
        assert_eq!(g.n_edges(), 6016);
    }

    #[test]
    fn inactive_node_removes_only_its_edges() {
        let full = chimera(2, 2, 4, []).unwrap();
        let q = full.id(0, 1, 1, 2);
        let degree = full.neighbors(q).len();
        let cut = chimera(2, 2, 4, [q]).unwrap();
        assert_eq!(cut.n_edges(), full.n_edges() - degree);
        assert!(cut.neighbors(q).is_empty());
        for (u, v) in full.edges().filter(|&(u, v)| u != q && v != q) {
            assert!(cut.has_edge(u, v));
        }
    }

    #[test]
    fn edges_respect_chimera_rules() {
        let g = chimera(3, 2, 2, []).unwrap();
        for (u, v) in g.edges() {
            let (a, b) = (g.coord(u), g.coord(v));
            let same_cell = a.row == b.row && a.col == b.col;
            if same_cell {
                assert_ne!(a.shore, b.shore);
            } else {
                assert_eq!(a.shore, b.shore);
                assert_eq!(a.index, b.index);
                let dr = a.row.abs_diff(b.row);
                let dc = a.col.abs_diff(b.col);
                assert_eq!(dr + dc, 1);
                assert_eq!(a.shore == 0, dr == 1);
            }
        }
    }

    #[test]
    fn coord_round_trip() {
        let g = chimera(3, 5, 4, []).unwrap();
        for q in 0..g.n_nodes() {
            let c = g.coord(q);
            assert_eq!(g.id(c.row, c.col, c.shore, c.index), q);
        }
        assert!(chimera(0, 1, 4, []).is_err());
        assert!(chimera(1, 1, 4, [8]).is_err());
    }
}
