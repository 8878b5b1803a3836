//! Weighted undirected graphs.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use ndarray::Array2;

use crate::numfmt::fmt_g17;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedEdge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

/// Undirected graph stored as a canonical edge list: `u < v`, sorted by
/// `(u, v)`, no duplicates, strictly positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    num_nodes: usize,
    edges: Vec<WeightedEdge>,
}

impl WeightedGraph {
    /// Validates and sorts. Fails on self-loops, duplicates, out-of-range
    /// endpoints and non-positive or non-finite weights.
    pub fn new(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut list: Vec<WeightedEdge> = Vec::new();
        for (a, b, w) in edges {
            let bad = |reason| Error::InvalidEdge { u: a, v: b, w, reason };
            if a == b {
                return Err(bad("self-loop"));
            }
            if a.max(b) >= num_nodes {
                return Err(bad("endpoint out of range"));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(bad("weight must be positive and finite"));
            }
            list.push(WeightedEdge { u: a.min(b), v: a.max(b), w });
        }
        list.sort_by_key(|e| (e.u, e.v));
        if let Some(pair) = list.windows(2).find(|p| (p[0].u, p[0].v) == (p[1].u, p[1].v)) {
            return Err(Error::InvalidEdge {
                u: pair[1].u,
                v: pair[1].v,
                w: pair[1].w,
                reason: "duplicate edge",
            });
        }
        Ok(Self { num_nodes, edges: list })
    }

    /// Sums the weights of repeated pairs, in input order, then builds the
    /// canonical graph.
    pub fn accumulate(
        num_nodes: usize,
        contributions: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (a, b, w) in contributions {
            *acc.entry((a.min(b), a.max(b))).or_insert(0.0) += w;
        }
        Self::new(num_nodes, acc.into_iter().map(|((u, v), w)| (u, v, w)))
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[WeightedEdge] {
        &self.edges
    }

    pub fn weight(&self, a: usize, b: usize) -> f64 {
        let key = (a.min(b), a.max(b));
        self.edges
            .binary_search_by_key(&key, |e| (e.u, e.v))
            .map_or(0.0, |i| self.edges[i].w)
    }

    pub fn edge_set(&self) -> BTreeSet<(usize, usize)> {
        self.edges.iter().map(|e| (e.u, e.v)).collect()
    }

    /// Neighbour lists, each sorted.
    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for e in &self.edges {
            adj[e.u].push(e.v);
            adj[e.v].push(e.u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes];
        for e in &self.edges {
            deg[e.u] += 1;
            deg[e.v] += 1;
        }
        deg
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.num_nodes, self.num_nodes));
        for e in &self.edges {
            a[[e.u, e.v]] = e.w;
            a[[e.v, e.u]] = e.w;
        }
        a
    }

    /// `u<TAB>v<TAB>w` lines, weights at 17 significant digits.
    pub fn write_tsv(&self, mut out: impl Write) -> std::io::Result<()> {
        for e in &self.edges {
            writeln!(out, "{}\t{}\t{}", e.u, e.v, fmt_g17(e.w))?;
        }
        Ok(())
    }

    pub fn read_tsv(num_nodes: usize, input: impl BufRead) -> Result<Self> {
        let mut edges = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [u, v, w] = fields.as_slice() else {
                return Err(Error::Parse { line: i + 1, message: "expected u<TAB>v<TAB>w".into() });
            };
            let num = |t: &str| Error::NonNumeric { line: i + 1, token: t.to_string() };
            edges.push((
                u.parse().map_err(|_| num(u))?,
                v.parse().map_err(|_| num(v))?,
                w.parse().map_err(|_| num(w))?,
            ));
        }
        Self::new(num_nodes, edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulate_sums_duplicates() {
        let g = WeightedGraph::accumulate(3, [(1, 0, 0.2), (0, 1, 0.5), (2, 1, 1.0)]).unwrap();
        assert_eq!(g.num_edges(), 2);
        assert!((g.weight(0, 1) - 0.7).abs() < 1e-15);
        assert_eq!(g.weight(0, 2), 0.0);
        let a = g.to_dense();
        assert_eq!(a, a.t());
        assert_eq!(a.diag().sum(), 0.0);
    }

    #[test]
    fn invariants_enforced() {
        assert!(WeightedGraph::new(2, [(0, 0, 1.0)]).is_err());
        assert!(WeightedGraph::new(2, [(0, 1, 0.0)]).is_err());
        assert!(WeightedGraph::new(2, [(0, 1, 1.0), (1, 0, 1.0)]).is_err());
        assert!(WeightedGraph::new(2, [(0, 2, 1.0)]).is_err());
    }

    #[test]
    fn tsv_round_trip() {
        let g = WeightedGraph::new(4, [(3, 1, 1.0 / 3.0), (0, 2, 0.25)]).unwrap();
        let mut buf = Vec::new();
        g.write_tsv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "0\t2\t0.25\n1\t3\t0.33333333333333331\n");
        assert_eq!(WeightedGraph::read_tsv(4, buf.as_slice()).unwrap(), g);
    }
}
