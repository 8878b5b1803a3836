//! Adaptive expansion: gate the features, pick a representative pair per
//! hyperedge, connect mediators to both representatives and weight every
//! edge with the distance-aware kernel.
//!
//! [`expand`] runs the whole pipeline with plain arrays. The training loop
//! rebuilds the same computation on an autodiff tape (see
//! [`crate::train`]) and shares [`ExpansionPlan`] and [`DistanceCache`] with
//! this module.

pub mod gsi;
pub mod kernel;
pub mod select;

use std::io::Write;

use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};

use crate::graph::WeightedGraph;
use crate::hypergraph::Hypergraph;
use crate::par::{self, Exec};
use crate::rng::{self, Seed};
use crate::Result;

pub use gsi::{compute_signal, default_hidden, global_pool, scale_features, si_net_forward, GsiNetParams};
pub use kernel::{
    kernel_weight, normalize_in_place, normalize_weights, pair_distance, DistanceCache, KernelParams, DENOM_FLOOR, EXPONENT_MAX,
    THETA_EPS,
};
pub use select::{select_pair, ExpansionPlan, HyperedgeSelection, Topology};

/// Switches for the ablated variants. The default is the full method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpandOptions {
    /// When false, `W_g` is fixed to ones and `X_a = X`.
    pub gate: bool,
    /// When false, every edge of `E_e` gets `1 / |E_e|`.
    pub kernel: bool,
    pub topology: Topology,
    pub exec: Exec,
}

impl Default for ExpandOptions {
    fn default() -> Self {
        Self { gate: true, kernel: true, topology: Topology::Mediator, exec: Exec::Parallel }
    }
}

#[derive(Debug, Clone)]
pub struct Expansion {
    pub graph: WeightedGraph,
    pub w_g: Array1<f64>,
    pub x_a: Array2<f64>,
    pub signal: Array1<f64>,
    pub plan: ExpansionPlan,
    /// Normalised weight of every edge instance, aligned with
    /// [`ExpansionPlan::instances`].
    pub weights: Vec<f64>,
}

/// Kernel weight of every instance, normalised per hyperedge.
///
/// Uses `X_a[i] - X_a[j] = W_g ⊙ (X[i] - X[j])`, so the distance prior and
/// the kernel come from one read of the two rows of `X`. Each distinct pair
/// is evaluated once; its distance is recorded in `cache`.
pub fn instance_weights(
    plan: &ExpansionPlan,
    x: &Array2<f64>,
    w_g: &Array1<f64>,
    theta: &Array1<f64>,
    cache: &mut DistanceCache,
    exec: Exec,
) -> Vec<f64> {
    let scale: Vec<f64> = w_g.iter().zip(theta).map(|(w, t)| w * w / (t * t)).collect();
    let b = x.ncols() as f64;
    let terms = par::map_slice(exec, plan.pairs(), |_, &(i, j)| {
        let (mut sq, mut acc) = (0.0, 0.0);
        for ((a, c), s) in x.row(i).iter().zip(x.row(j)).zip(&scale) {
            let d = a - c;
            sq += d * d;
            acc += s * d * d;
        }
        let u = sq.sqrt();
        (u, (-(u * acc / b)).max(-EXPONENT_MAX).exp())
    });
    let distances: Vec<f64> = terms.iter().map(|t| t.0).collect();
    cache.store_sorted(plan.pairs(), &distances);

    let mut out: Vec<f64> = plan.instance_pair().iter().map(|&p| terms[p].1).collect();
    for k in 0..plan.num_hyperedges() {
        normalize_in_place(&mut out[plan.instance_range(k)]);
    }
    out
}

/// `A_a[i][j] = Σ_e 1[{i,j} ∈ E_e] w_ij^(e)`, summed in hyperedge order.
pub fn assemble_adjacency(plan: &ExpansionPlan, weights: &[f64]) -> Result<WeightedGraph> {
    assert_eq!(weights.len(), plan.instances().len(), "one weight per instance");
    let mut sums = vec![0.0; plan.pairs().len()];
    for (&p, &w) in plan.instance_pair().iter().zip(weights) {
        sums[p] += w;
    }
    WeightedGraph::new(
        plan.num_nodes(),
        plan.pairs().iter().zip(sums).map(|(&(u, v), w)| (u, v, w)),
    )
}

/// Full method with default options and a fresh distance cache.
pub fn expand(h: &Hypergraph, gsi: &GsiNetParams, kernel: &KernelParams, seed: u64) -> Result<Expansion> {
    expand_with(h, gsi, kernel, seed, ExpandOptions::default(), &mut DistanceCache::new())
}

pub fn expand_with(
    h: &Hypergraph,
    gsi: &GsiNetParams,
    kernel: &KernelParams,
    seed: u64,
    opts: ExpandOptions,
    cache: &mut DistanceCache,
) -> Result<Expansion> {
    let x = h.features();
    let w_g = if opts.gate {
        si_net_forward(&global_pool(x)?, gsi)?
    } else {
        Array1::ones(x.ncols())
    };
    let x_a = scale_features(x, &w_g)?;
    let signal = compute_signal(&x_a);
    let plan = match opts.topology {
        Topology::Mediator => ExpansionPlan::mediator(h, signal.view(), seed, opts.exec),
        Topology::Clique => ExpansionPlan::clique(h),
    };
    let weights = if opts.kernel {
        instance_weights(&plan, x, &w_g, &kernel.effective(), cache, opts.exec)
    } else {
        plan.uniform_weights()
    };
    let graph = assemble_adjacency(&plan, &weights)?;
    Ok(Expansion { graph, w_g, x_a, signal, plan, weights })
}

/// `ξ ~ N(0, I_b)` drawn from `seed`.
pub fn random_projection(num_features: usize, seed: u64) -> Array1<f64> {
    let mut rng = Seed(seed).derive(rng::XI).rng();
    Array1::from_shape_fn(num_features, |_| StandardNormal.sample(&mut rng))
}

/// Mediator topology driven by `S = X ξ`, every instance weighted
/// `1 / (2|e| - 3)`.
pub fn hypergcn_fixed_plan(h: &Hypergraph, seed: u64, exec: Exec) -> ExpansionPlan {
    let signal = h.features().dot(&random_projection(h.num_features(), seed));
    ExpansionPlan::mediator(h, signal.view(), seed, exec)
}

pub fn expand_hypergcn_fixed(h: &Hypergraph, seed: u64) -> Result<WeightedGraph> {
    let plan = hypergcn_fixed_plan(h, seed, Exec::Parallel);
    assemble_adjacency(&plan, &plan.uniform_weights())
}

/// One line per hyperedge: `e_id v_minus v_plus mediators...`. Hyperedges
/// without a pair print only their id.
pub fn write_selections(plan: &ExpansionPlan, mut out: impl Write) -> std::io::Result<()> {
    for sel in &plan.selections {
        write!(out, "{}", sel.hyperedge)?;
        if let Some((a, b)) = sel.pair {
            write!(out, " {a} {b}")?;
            for m in &sel.mediators {
                write!(out, " {m}")?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}
