//! Adaptive hypergraph expansion and node classification.
//!
//! The crate converts attributed hypergraphs into weighted graphs. The
//! adaptive expansion picks one representative node pair per hyperedge from a
//! learned feature gate, wires the remaining members to both representatives,
//! and weights every edge with a distance-aware kernel. A two-layer GCN is
//! trained end-to-end on the expanded graph, with gradients flowing back into
//! the gate and the kernel bandwidths.
//!
//! Module map:
//!
//! * [`hypergraph`]: data model, validation, text I/O, synthetic generators
//! * [`graph`]: weighted undirected graphs and the edge-list format
//! * [`classic`]: clique, star and line expansion
//! * [`ade`]: the adaptive expansion pipeline
//! * [`autodiff`] and [`optim`]: dense reverse-mode AD and Adam
//! * [`gcn`] and [`train`]: the encoder, the loss and the training loop
//! * [`wl`]: 1-WL / 1-GWL colour refinement and the expressiveness harness
//! * [`bench`]: the expansion scaling ladder
//!
//! Work that is data-parallel (per-hyperedge selection, distance filling,
//! trials, grid cells) goes through [`par::Exec`]; the `parallel` feature
//! enables rayon, and without it every path runs sequentially with identical
//! results.

pub mod ade;
pub mod autodiff;
pub mod bench;
pub mod classic;
pub mod error;
pub mod gcn;
pub mod graph;
pub mod hypergraph;
pub mod numfmt;
pub mod optim;
pub mod par;
pub mod rng;
pub mod train;
pub mod wl;

pub use error::{Error, Result};
pub use graph::WeightedGraph;
pub use hypergraph::Hypergraph;
