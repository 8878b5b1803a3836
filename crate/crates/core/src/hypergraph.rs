//! Attributed hypergraphs.
//!
//! A [`Hypergraph`] owns its hyperedge membership lists, a dense `N x b`
//! feature matrix and one class label per node. Construction validates every
//! invariant, so downstream code can index without checks.
//!
//! The text format is three files sharing a prefix:
//!
//! ```text
//! <prefix>.hg      N M b C
//!                  e0: 0 1 2
//!                  e1: 2 3
//! <prefix>.feat    N lines of b whitespace-separated reals
//! <prefix>.labels  N lines, one class index each
//! ```

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::numfmt::fmt_g17;
use crate::rng::{self, Seed};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Hypergraph {
    num_nodes: usize,
    hyperedges: Vec<Vec<usize>>,
    features: Array2<f64>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Hypergraph {
    pub fn new(
        num_nodes: usize,
        hyperedges: Vec<Vec<usize>>,
        features: Array2<f64>,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        for (k, edge) in hyperedges.iter().enumerate() {
            if edge.is_empty() {
                return Err(Error::EmptyHyperedge(k));
            }
            let mut seen = HashSet::with_capacity(edge.len());
            for &v in edge {
                if v >= num_nodes {
                    return Err(Error::NodeOutOfRange {
                        hyperedge: k,
                        node: v,
                        num_nodes,
                    });
                }
                if !seen.insert(v) {
                    return Err(Error::DuplicateNode { hyperedge: k, node: v });
                }
            }
        }
        if features.nrows() != num_nodes {
            return Err(Error::RowCountMismatch {
                what: "features",
                expected: num_nodes,
                found: features.nrows(),
            });
        }
        if labels.len() != num_nodes {
            return Err(Error::RowCountMismatch {
                what: "labels",
                expected: num_nodes,
                found: labels.len(),
            });
        }
        if let Some((node, &label)) = labels.iter().enumerate().find(|(_, &y)| y >= num_classes) {
            return Err(Error::LabelOutOfRange {
                node,
                label,
                num_classes,
            });
        }
        Ok(Self {
            num_nodes,
            hyperedges,
            features,
            labels,
            num_classes,
        })
    }

    /// Structure-only hypergraph: one constant feature column, all labels 0.
    pub fn from_structure(num_nodes: usize, hyperedges: Vec<Vec<usize>>) -> Result<Self> {
        Self::new(
            num_nodes,
            hyperedges,
            Array2::ones((num_nodes, 1)),
            vec![0; num_nodes],
            1,
        )
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_hyperedges(&self) -> usize {
        self.hyperedges.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn hyperedges(&self) -> &[Vec<usize>] {
        &self.hyperedges
    }

    pub fn hyperedge(&self, k: usize) -> &[usize] {
        &self.hyperedges[k]
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Number of incidence pairs, `E = sum_e d(e)`.
    pub fn num_incidences(&self) -> usize {
        self.hyperedges.iter().map(Vec::len).sum()
    }

    pub fn with_features(&self, features: Array2<f64>) -> Result<Self> {
        Self::new(
            self.num_nodes,
            self.hyperedges.clone(),
            features,
            self.labels.clone(),
            self.num_classes,
        )
    }

    /// Relabels node `v` as `node_perm[v]` and moves hyperedge `k` to
    /// position `edge_perm[k]`. Member order inside a hyperedge is kept.
    pub fn permuted(&self, node_perm: &[usize], edge_perm: &[usize]) -> Result<Self> {
        check_permutation(node_perm, self.num_nodes, "node")?;
        check_permutation(edge_perm, self.hyperedges.len(), "hyperedge")?;
        let mut hyperedges = vec![Vec::new(); self.hyperedges.len()];
        for (k, edge) in self.hyperedges.iter().enumerate() {
            hyperedges[edge_perm[k]] = edge.iter().map(|&v| node_perm[v]).collect();
        }
        let mut features = Array2::zeros(self.features.raw_dim());
        let mut labels = vec![0; self.num_nodes];
        for v in 0..self.num_nodes {
            features.row_mut(node_perm[v]).assign(&self.features.row(v));
            labels[node_perm[v]] = self.labels[v];
        }
        Self::new(self.num_nodes, hyperedges, features, labels, self.num_classes)
    }
}

fn check_permutation(perm: &[usize], n: usize, what: &str) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::config(format!("{what} permutation has length {}, expected {n}", perm.len())));
    }
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::config(format!("{what} permutation is not a bijection")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeStats {
    pub node_degrees: Vec<usize>,
    pub edge_degrees: Vec<usize>,
    pub avg_node_degree: f64,
    pub avg_edge_degree: f64,
    /// Nodes with `d(v) = 0`.
    pub isolated: Vec<usize>,
}

pub fn degree_stats(h: &Hypergraph) -> DegreeStats {
    let mut node_degrees = vec![0usize; h.num_nodes()];
    for edge in h.hyperedges() {
        for &v in edge {
            node_degrees[v] += 1;
        }
    }
    let edge_degrees: Vec<usize> = h.hyperedges().iter().map(Vec::len).collect();
    let total = h.num_incidences() as f64;
    let isolated = (0..h.num_nodes()).filter(|&v| node_degrees[v] == 0).collect();
    DegreeStats {
        avg_node_degree: if h.num_nodes() == 0 { 0.0 } else { total / h.num_nodes() as f64 },
        avg_edge_degree: if edge_degrees.is_empty() { 0.0 } else { total / edge_degrees.len() as f64 },
        node_degrees,
        edge_degrees,
        isolated,
    }
}

/// Binary `N x M` incidence matrix in compressed-column form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    pub num_rows: usize,
    pub num_cols: usize,
    pub col_ptr: Vec<usize>,
    /// Row (node) indices of each column, sorted.
    pub row_idx: Vec<usize>,
}

impl IncidenceMatrix {
    pub fn get(&self, v: usize, e: usize) -> bool {
        self.row_idx[self.col_ptr[e]..self.col_ptr[e + 1]]
            .binary_search(&v)
            .is_ok()
    }

    pub fn col_sums(&self) -> Vec<usize> {
        self.col_ptr.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn row_sums(&self) -> Vec<usize> {
        let mut sums = vec![0; self.num_rows];
        for &v in &self.row_idx {
            sums[v] += 1;
        }
        sums
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn to_dense(&self) -> Array2<u8> {
        let mut dense = Array2::zeros((self.num_rows, self.num_cols));
        for e in 0..self.num_cols {
            for &v in &self.row_idx[self.col_ptr[e]..self.col_ptr[e + 1]] {
                dense[[v, e]] = 1;
            }
        }
        dense
    }
}

pub fn incidence_matrix(h: &Hypergraph) -> IncidenceMatrix {
    let mut col_ptr = Vec::with_capacity(h.num_hyperedges() + 1);
    let mut row_idx = Vec::with_capacity(h.num_incidences());
    col_ptr.push(0);
    for edge in h.hyperedges() {
        let start = row_idx.len();
        row_idx.extend_from_slice(edge);
        row_idx[start..].sort_unstable();
        col_ptr.push(row_idx.len());
    }
    IncidenceMatrix {
        num_rows: h.num_nodes(),
        num_cols: h.num_hyperedges(),
        col_ptr,
        row_idx,
    }
}

// ---------------------------------------------------------------------------
// Text I/O

/// Paths of the three files that make up a hypergraph on disk.
#[derive(Debug, Clone)]
pub struct FileSet {
    pub hyperedges: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
}

impl FileSet {
    pub fn from_prefix(prefix: impl AsRef<Path>) -> Self {
        let p = prefix.as_ref().as_os_str().to_owned();
        let with = |ext: &str| {
            let mut s = p.clone();
            s.push(ext);
            PathBuf::from(s)
        };
        FileSet {
            hyperedges: with(".hg"),
            features: with(".feat"),
            labels: with(".labels"),
        }
    }
}

pub fn parse_hypergraph(
    hyperedge_stream: impl BufRead,
    feature_stream: impl BufRead,
    label_stream: impl BufRead,
) -> Result<Hypergraph> {
    let mut lines = numbered_lines(hyperedge_stream);
    let (line_no, header) = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Parse { line: 1, message: "missing `N M b C` header".into() })?;
    let header: Vec<usize> = header
        .split_whitespace()
        .map(|t| parse_int(t, line_no))
        .collect::<Result<_>>()?;
    let &[num_nodes, num_edges, num_features, num_classes] = header.as_slice() else {
        return Err(Error::Parse {
            line: line_no,
            message: format!("header needs 4 integers, found {}", header.len()),
        });
    };

    let mut hyperedges = Vec::with_capacity(num_edges);
    for line in lines {
        let (line_no, text) = line?;
        let (tag, members) = text.split_once(':').ok_or_else(|| Error::Parse {
            line: line_no,
            message: "expected `e<k>: v1 v2 ...`".into(),
        })?;
        let k = hyperedges.len();
        if tag.trim() != format!("e{k}") {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected tag `e{k}`, found `{}`", tag.trim()),
            });
        }
        let members = members
            .split_whitespace()
            .map(|t| parse_int(t, line_no))
            .collect::<Result<Vec<_>>>()?;
        hyperedges.push(members);
    }
    if hyperedges.len() != num_edges {
        return Err(Error::RowCountMismatch {
            what: "hyperedges",
            expected: num_edges,
            found: hyperedges.len(),
        });
    }

    let mut data = Vec::with_capacity(num_nodes * num_features);
    let mut rows = 0;
    for line in numbered_lines(feature_stream) {
        let (line_no, text) = line?;
        let before = data.len();
        for token in text.split_whitespace() {
            let value: f64 = token.parse().map_err(|_| Error::NonNumeric {
                line: line_no,
                token: token.to_string(),
            })?;
            data.push(value);
        }
        if data.len() - before != num_features {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {num_features} features, found {}", data.len() - before),
            });
        }
        rows += 1;
    }
    if rows != num_nodes {
        return Err(Error::RowCountMismatch {
            what: "features",
            expected: num_nodes,
            found: rows,
        });
    }
    let features = Array2::from_shape_vec((num_nodes, num_features), data)
        .expect("row lengths were checked");

    let labels = numbered_lines(label_stream)
        .map(|line| {
            let (line_no, text) = line?;
            parse_int(text.trim(), line_no)
        })
        .collect::<Result<Vec<_>>>()?;

    Hypergraph::new(num_nodes, hyperedges, features, labels, num_classes)
}

pub fn read_hypergraph(prefix: impl AsRef<Path>) -> Result<Hypergraph> {
    let files = FileSet::from_prefix(prefix);
    let open = |p: &PathBuf| File::open(p).map(BufReader::new).map_err(|e| Error::io(p, e));
    parse_hypergraph(open(&files.hyperedges)?, open(&files.features)?, open(&files.labels)?)
}

pub fn write_hyperedges(h: &Hypergraph, mut out: impl Write) -> std::io::Result<()> {
    writeln!(
        out,
        "{} {} {} {}",
        h.num_nodes(),
        h.num_hyperedges(),
        h.num_features(),
        h.num_classes()
    )?;
    for (k, edge) in h.hyperedges().iter().enumerate() {
        write!(out, "e{k}:")?;
        for v in edge {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_features(h: &Hypergraph, mut out: impl Write) -> std::io::Result<()> {
    for row in h.features().rows() {
        let line: Vec<String> = row.iter().map(|&x| fmt_g17(x)).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn write_labels(h: &Hypergraph, mut out: impl Write) -> std::io::Result<()> {
    for y in h.labels() {
        writeln!(out, "{y}")?;
    }
    Ok(())
}

pub fn write_hypergraph(h: &Hypergraph, prefix: impl AsRef<Path>) -> Result<()> {
    let files = FileSet::from_prefix(prefix);
    let write = |p: &PathBuf, f: &dyn Fn(&mut BufWriter<File>) -> std::io::Result<()>| {
        let mut w = File::create(p).map(BufWriter::new).map_err(|e| Error::io(p, e))?;
        f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(p, e))
    };
    write(&files.hyperedges, &|w| write_hyperedges(h, w))?;
    write(&files.features, &|w| write_features(h, w))?;
    write(&files.labels, &|w| write_labels(h, w))
}

fn numbered_lines(r: impl BufRead) -> impl Iterator<Item = Result<(usize, String)>> {
    r.lines().enumerate().filter_map(|(i, line)| match line {
        Ok(text) if text.trim().is_empty() => None,
        Ok(text) => Some(Ok((i + 1, text))),
        Err(e) => Some(Err(Error::Parse { line: i + 1, message: e.to_string() })),
    })
}

fn parse_int(token: &str, line: usize) -> Result<usize> {
    token.parse().map_err(|_| Error::NonNumeric {
        line,
        token: token.to_string(),
    })
}

// ---------------------------------------------------------------------------
// Synthetic generation

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "scheme")]
pub enum FeatureScheme {
    /// `x_i = mu_{y_i} + noise * eps_i`, class means and noise unit-normal.
    LabelGaussian { noise: f64 },
    /// Every feature equals 1.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_nodes: usize,
    pub num_hyperedges: usize,
    /// Inclusive hyperedge size range.
    pub size_range: (usize, usize),
    pub num_classes: usize,
    pub num_features: usize,
    pub features: FeatureScheme,
    /// Probability that a hyperedge draws its members from a single class.
    pub homophily: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_nodes: 200,
            num_hyperedges: 120,
            size_range: (2, 6),
            num_classes: 2,
            num_features: 16,
            features: FeatureScheme::LabelGaussian { noise: 0.6 },
            homophily: 0.8,
            seed: 0,
        }
    }
}

/// Per-class feature means used by the label-gaussian scheme (`C x b`).
pub fn class_means(seed: u64, num_classes: usize, num_features: usize) -> Array2<f64> {
    let mut rng = Seed(seed).derive(rng::CLASS_MEANS).rng();
    Array2::from_shape_simple_fn((num_classes, num_features), || rng.sample(StandardNormal))
}

pub fn synth_hypergraph(cfg: &SynthConfig) -> Result<Hypergraph> {
    let (min_size, max_size) = cfg.size_range;
    if min_size == 0 || min_size > max_size {
        return Err(Error::config(format!("bad size range {min_size}..={max_size}")));
    }
    if max_size > cfg.num_nodes {
        return Err(Error::config(format!(
            "hyperedge size {max_size} exceeds node count {}",
            cfg.num_nodes
        )));
    }
    if cfg.num_classes == 0 || cfg.num_classes > cfg.num_nodes {
        return Err(Error::config("need 1 <= classes <= nodes"));
    }
    if !(0.0..=1.0).contains(&cfg.homophily) {
        return Err(Error::config("homophily must lie in [0, 1]"));
    }
    if let FeatureScheme::LabelGaussian { noise } = cfg.features {
        if noise.is_nan() || noise < 0.0 {
            return Err(Error::config("noise must be non-negative"));
        }
    }
    let seed = Seed(cfg.seed);
    let n = cfg.num_nodes;

    // Balanced labels, shuffled.
    let mut labels: Vec<usize> = (0..n).map(|i| i % cfg.num_classes).collect();
    labels.shuffle(&mut seed.derive(rng::LABELS).rng());

    let mut by_class = vec![Vec::new(); cfg.num_classes];
    for (v, &y) in labels.iter().enumerate() {
        by_class[y].push(v);
    }

    let mut rng = seed.derive(rng::STRUCTURE).rng();
    let mut hyperedges = Vec::with_capacity(cfg.num_hyperedges);
    for _ in 0..cfg.num_hyperedges {
        let size = rng.random_range(min_size..=max_size);
        let pool = &by_class[rng.random_range(0..cfg.num_classes)];
        let edge: Vec<usize> = if rng.random_bool(cfg.homophily) && pool.len() >= size {
            index::sample(&mut rng, pool.len(), size).iter().map(|i| pool[i]).collect()
        } else {
            index::sample(&mut rng, n, size).into_vec()
        };
        hyperedges.push(edge);
    }

    let b = cfg.num_features;
    let features = match cfg.features {
        FeatureScheme::Constant => Array2::ones((n, b)),
        FeatureScheme::LabelGaussian { noise } => {
            let means = class_means(cfg.seed, cfg.num_classes, b);
            let mut rng = seed.derive(rng::FEATURE_NOISE).rng();
            let mut x = Array2::zeros((n, b));
            for (v, mut row) in x.axis_iter_mut(Axis(0)).enumerate() {
                for (d, value) in row.iter_mut().enumerate() {
                    let eps: f64 = rng.sample(StandardNormal);
                    *value = means[[labels[v], d]] + noise * eps;
                }
            }
            x
        }
    };
    Hypergraph::new(n, hyperedges, features, labels, cfg.num_classes)
}
