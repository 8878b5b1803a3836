//! Two-layer GCN on a weighted graph and the masked cross-entropy loss.
//!
//! `Z = P ReLU(P X W1) W2`, where `P` is either the raw adjacency or
//! `D^-1/2 (A + I) D^-1/2`. Both a plain evaluator and a tape builder are
//! provided; the tape version takes the edge weights as a differentiable
//! input so gradients reach the expansion parameters.

use std::rc::Rc;

use ndarray::{Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::graph::WeightedGraph;
use crate::rng::glorot_uniform;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropagationMode {
    /// `D^-1/2 (A + I) D^-1/2`.
    #[default]
    Normalized,
    /// The adjacency as is, no self-loops.
    PaperLiteral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    /// `b x h_g`
    pub w1: Array2<f64>,
    /// `h_g x C`
    pub w2: Array2<f64>,
}

impl GcnParams {
    pub fn glorot(num_features: usize, hidden: usize, num_classes: usize, rng: &mut impl Rng) -> Self {
        Self {
            w1: glorot_uniform(num_features, hidden, rng),
            w2: glorot_uniform(hidden, num_classes, rng),
        }
    }

    fn check(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.w1.nrows() {
            return Err(Error::Shape { op: "gcn input", lhs: x.dim(), rhs: self.w1.dim() });
        }
        if self.w1.ncols() != self.w2.nrows() {
            return Err(Error::Shape { op: "gcn layers", lhs: self.w1.dim(), rhs: self.w2.dim() });
        }
        Ok(())
    }
}

/// `P m` for a plain graph.
pub fn propagate(graph: &WeightedGraph, mode: PropagationMode, m: &Array2<f64>) -> Array2<f64> {
    let n = graph.num_nodes();
    assert_eq!(m.nrows(), n, "one row per node");
    match mode {
        PropagationMode::PaperLiteral => {
            let mut out = Array2::zeros(m.raw_dim());
            for e in graph.edges() {
                out.row_mut(e.u).scaled_add(e.w, &m.row(e.v));
                out.row_mut(e.v).scaled_add(e.w, &m.row(e.u));
            }
            out
        }
        PropagationMode::Normalized => {
            let mut deg = vec![1.0; n];
            for e in graph.edges() {
                deg[e.u] += e.w;
                deg[e.v] += e.w;
            }
            let dinv: Vec<f64> = deg.iter().map(|d| d.powf(-0.5)).collect();
            let mut out = m.clone();
            for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
                row *= dinv[i] * dinv[i];
            }
            for e in graph.edges() {
                let w = e.w * dinv[e.u] * dinv[e.v];
                out.row_mut(e.u).scaled_add(w, &m.row(e.v));
                out.row_mut(e.v).scaled_add(w, &m.row(e.u));
            }
            out
        }
    }
}

/// Inference-time forward pass (no dropout).
pub fn gcn_forward(
    graph: &WeightedGraph,
    x_a: &Array2<f64>,
    p: &GcnParams,
    mode: PropagationMode,
) -> Result<Array2<f64>> {
    p.check(x_a)?;
    if x_a.nrows() != graph.num_nodes() {
        return Err(Error::Shape { op: "gcn nodes", lhs: x_a.dim(), rhs: (graph.num_nodes(), 0) });
    }
    let h = propagate(graph, mode, &x_a.dot(&p.w1)).mapv(|z| z.max(0.0));
    Ok(propagate(graph, mode, &h.dot(&p.w2)))
}

/// Propagation operator on a tape, built from per-pair weights.
#[derive(Debug, Clone)]
pub struct TapePropagation {
    pairs: Rc<[(usize, usize)]>,
    weights: Var,
    diag: Option<Var>,
}

impl TapePropagation {
    /// `pair_weights` is `P x 1`, aligned with `pairs`.
    pub fn new(
        tape: &mut Tape,
        num_nodes: usize,
        pairs: Rc<[(usize, usize)]>,
        pair_weights: Var,
        mode: PropagationMode,
    ) -> Result<Self> {
        match mode {
            PropagationMode::PaperLiteral => Ok(Self { pairs, weights: pair_weights, diag: None }),
            PropagationMode::Normalized => {
                let twice: Vec<usize> = (0..pairs.len()).flat_map(|k| [k, k]).collect();
                let ends: Vec<usize> = pairs.iter().flat_map(|&(u, v)| [u, v]).collect();
                let spread = tape.gather_rows(pair_weights, twice)?;
                let incident = tape.segment_sum(spread, ends, num_nodes)?;
                let deg = tape.add_scalar(incident, 1.0);
                let dinv = tape.powf(deg, -0.5);
                let du = tape.gather_rows(dinv, pairs.iter().map(|p| p.0).collect::<Vec<_>>())?;
                let dv = tape.gather_rows(dinv, pairs.iter().map(|p| p.1).collect::<Vec<_>>())?;
                let scale = tape.mul(du, dv)?;
                let weights = tape.mul(pair_weights, scale)?;
                let diag = tape.mul(dinv, dinv)?;
                Ok(Self { pairs, weights, diag: Some(diag) })
            }
        }
    }

    pub fn apply(&self, tape: &mut Tape, m: Var) -> Result<Var> {
        tape.spmm_sym(self.pairs.clone(), self.weights, self.diag, m)
    }
}

/// Builds the logits `Z`. `dropout` is an optional `N x h_g` mask already
/// scaled by `1 / (1 - p)`.
pub fn gcn_tape(
    tape: &mut Tape,
    prop: &TapePropagation,
    x_a: Var,
    w1: Var,
    w2: Var,
    dropout: Option<Array2<f64>>,
) -> Result<Var> {
    let xw = tape.matmul(x_a, w1)?;
    let ax = prop.apply(tape, xw)?;
    let mut h = tape.relu(ax);
    if let Some(mask) = dropout {
        let mask = tape.constant(mask);
        h = tape.mul(h, mask)?;
    }
    let hw = tape.matmul(h, w2)?;
    prop.apply(tape, hw)
}

/// Inverted dropout mask: each entry is `0` with probability `p`, else
/// `1 / (1 - p)`.
pub fn dropout_mask(rows: usize, cols: usize, p: f64, rng: &mut impl Rng) -> Array2<f64> {
    assert!((0.0..1.0).contains(&p), "dropout rate must lie in [0, 1)");
    let keep = 1.0 / (1.0 - p);
    Array2::from_shape_simple_fn((rows, cols), || if rng.random::<f64>() < p { 0.0 } else { keep })
}

/// `(node, label)` positions for the masked mean.
pub fn label_positions(labels: &[usize], nodes: &[usize]) -> Vec<(usize, usize)> {
    nodes.iter().map(|&i| (i, labels[i])).collect()
}

/// `-mean_{i in mask} log softmax(Z_i)[y_i]` on the tape.
pub fn cross_entropy(tape: &mut Tape, logits: Var, labels: &[usize], mask: &[usize]) -> Result<Var> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let classes = tape.shape(logits).1;
    if let Some(&i) = mask.iter().find(|&&i| labels[i] >= classes) {
        return Err(Error::LabelOutOfRange { node: i, label: labels[i], num_classes: classes });
    }
    let ls = tape.log_softmax(logits);
    let mean = tape.masked_mean(ls, label_positions(labels, mask))?;
    Ok(tape.neg(mean))
}

/// Plain-array version of [`cross_entropy`].
pub fn cross_entropy_value(logits: &Array2<f64>, labels: &[usize], mask: &[usize]) -> Result<f64> {
    let mut tape = Tape::new();
    let z = tape.constant(logits.clone());
    let loss = cross_entropy(&mut tape, z, labels, mask)?;
    Ok(tape.scalar(loss))
}

/// Row-wise argmax, lowest index on ties.
pub fn predict(logits: &Array2<f64>) -> Vec<usize> {
    logits
        .axis_iter(Axis(0))
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Fraction of `nodes` whose prediction matches the label; 0 when empty.
pub fn accuracy(predictions: &[usize], labels: &[usize], nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let hits = nodes.iter().filter(|&&i| predictions[i] == labels[i]).count();
    hits as f64 / nodes.len() as f64
}
