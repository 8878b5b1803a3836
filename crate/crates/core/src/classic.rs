//! Clique, star and line expansion.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::graph::WeightedGraph;
use crate::hypergraph::Hypergraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightRule {
    /// Each hyperedge contributes 1 per pair.
    #[default]
    Unit,
    /// Each hyperedge contributes `1/|e|` per pair.
    InverseSize,
}

/// Clique expansion: `A[i][j] = sum_e H[i,e] H[j,e] w_e`.
pub fn clique_expand(h: &Hypergraph, rule: WeightRule) -> WeightedGraph {
    let contributions = h.hyperedges().iter().flat_map(|edge| {
        let w = match rule {
            WeightRule::Unit => 1.0,
            WeightRule::InverseSize => 1.0 / edge.len() as f64,
        };
        edge.iter().enumerate().flat_map(move |(i, &a)| {
            edge[i + 1..].iter().map(move |&b| (a, b, w))
        })
    });
    WeightedGraph::accumulate(h.num_nodes(), contributions)
        .expect("hyperedge members are distinct and in range")
}

/// Star expansion: one extra vertex per hyperedge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteGraph {
    pub num_nodes: usize,
    pub num_hyperedges: usize,
    /// `(node, hyperedge)` incidence pairs, in hyperedge order.
    pub edges: Vec<(usize, usize)>,
}

impl BipartiteGraph {
    /// Recovers the hyperedge membership lists.
    pub fn hyperedges(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_hyperedges];
        for &(v, e) in &self.edges {
            out[e].push(v);
        }
        out
    }

    /// `v<TAB>h<e><TAB>1` lines.
    pub fn write_tsv(&self, mut out: impl Write) -> std::io::Result<()> {
        for &(v, e) in &self.edges {
            writeln!(out, "{v}\th{e}\t1")?;
        }
        Ok(())
    }
}

pub fn star_expand(h: &Hypergraph) -> BipartiteGraph {
    let edges = h
        .hyperedges()
        .iter()
        .enumerate()
        .flat_map(|(e, members)| members.iter().map(move |&v| (v, e)))
        .collect();
    BipartiteGraph {
        num_nodes: h.num_nodes(),
        num_hyperedges: h.num_hyperedges(),
        edges,
    }
}

/// Line expansion: vertices are incidence pairs `(v, e)`; two are adjacent
/// when they share the node or the hyperedge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineGraph {
    pub vertices: Vec<(usize, usize)>,
    /// Index pairs into `vertices`, `a < b`, sorted.
    pub edges: Vec<(usize, usize)>,
}

impl LineGraph {
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.vertices.len()];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    pub fn write_tsv(&self, mut out: impl Write) -> std::io::Result<()> {
        for &(a, b) in &self.edges {
            writeln!(out, "{a}\t{b}\t1")?;
        }
        Ok(())
    }

    /// `id<TAB>v<TAB>e` lines describing each line-vertex.
    pub fn write_vertices(&self, mut out: impl Write) -> std::io::Result<()> {
        for (i, &(v, e)) in self.vertices.iter().enumerate() {
            writeln!(out, "{i}\t{v}\t{e}")?;
        }
        Ok(())
    }
}

pub fn line_expand(h: &Hypergraph) -> LineGraph {
    let mut vertices = Vec::with_capacity(h.num_incidences());
    let mut by_edge: Vec<Vec<usize>> = Vec::with_capacity(h.num_hyperedges());
    let mut by_node: Vec<Vec<usize>> = vec![Vec::new(); h.num_nodes()];
    for (e, members) in h.hyperedges().iter().enumerate() {
        let mut ids = Vec::with_capacity(members.len());
        for &v in members {
            let id = vertices.len();
            vertices.push((v, e));
            ids.push(id);
            by_node[v].push(id);
        }
        by_edge.push(ids);
    }
    // A pair sharing the node cannot also share the hyperedge, since members
    // are distinct, so the two groups never emit the same edge twice.
    let mut edges = Vec::new();
    for group in by_edge.iter().chain(by_node.iter()) {
        for (i, &a) in group.iter().enumerate() {
            for &b in &group[i + 1..] {
                edges.push((a.min(b), a.max(b)));
            }
        }
    }
    edges.sort_unstable();
    LineGraph { vertices, edges }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn structure(n: usize, edges: &[&[usize]]) -> Hypergraph {
        Hypergraph::from_structure(n, edges.iter().map(|e| e.to_vec()).collect()).unwrap()
    }

    #[test]
    fn clique_triangle() {
        let g = clique_expand(&structure(3, &[&[0, 1, 2]]), WeightRule::Unit);
        assert_eq!(g.num_edges(), 3);
        assert!(g.edges().iter().all(|e| e.w == 1.0));
    }

    #[test]
    fn clique_sums_over_hyperedges() {
        let g = clique_expand(&structure(3, &[&[0, 1, 2], &[0, 1]]), WeightRule::Unit);
        assert_eq!(g.weight(0, 1), 2.0);
        assert_eq!(g.weight(1, 2), 1.0);
    }

    #[test]
    fn clique_inverse_size() {
        let g = clique_expand(&structure(4, &[&[0, 1, 2, 3]]), WeightRule::InverseSize);
        assert_eq!(g.num_edges(), 6);
        assert!(g.edges().iter().all(|e| e.w == 0.25));
    }

    #[test]
    fn star_counts_and_reconstructs() {
        let h = structure(6, &[&[0, 1, 2], &[3, 4, 5]]);
        let s = star_expand(&h);
        assert_eq!(s.edges.len(), 6);
        assert_eq!(s.hyperedges(), h.hyperedges());
        let mut buf = Vec::new();
        s.write_tsv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("0\th0\t1\n"));
    }

    #[test]
    fn line_small_cases() {
        let one = line_expand(&structure(2, &[&[0, 1]]));
        assert_eq!((one.vertices.len(), one.edges.len()), (2, 1));
        let shared = line_expand(&structure(1, &[&[0], &[0]]));
        assert_eq!(shared.vertices, vec![(0, 0), (0, 1)]);
        assert_eq!(shared.edges, vec![(0, 1)]);
    }
}
