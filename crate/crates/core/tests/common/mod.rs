//! Generators and invariant checkers shared by the property tests and the
//! acceptance harness. Checkers return a description of the first broken
//! invariant instead of panicking.

#![allow(dead_code)]

use std::collections::BTreeSet;

use hyperx::ade::{self, Expansion, GsiNetParams, KernelParams};
use hyperx::hypergraph::Hypergraph;
use hyperx::rng::Seed;
use hyperx::ade::DistanceCache;
use hyperx::gcn::PropagationMode;
use hyperx::par::Exec;
use hyperx::train::{flatten, forward, param_gradients, unflatten, ModelParams, Selection, TrainConfig};
use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

pub type Check = Result<(), String>;

/// Random hypergraph with `2..=max_nodes` nodes, `1..=max_edges` hyperedges
/// of size `1..=max_size`, unit-normal features (`b` in `1..=6`) and two
/// classes.
pub fn random_hypergraph(seed: u64, max_nodes: usize, max_edges: usize, max_size: usize) -> Hypergraph {
    let mut rng = Seed(seed).rng();
    let n = rng.random_range(2..=max_nodes);
    let m = rng.random_range(1..=max_edges);
    let edges: Vec<Vec<usize>> = (0..m)
        .map(|_| {
            let size = rng.random_range(1..=max_size.min(n));
            sample(&mut rng, n, size).into_vec()
        })
        .collect();
    let b = rng.random_range(1..=6);
    let x = Array2::from_shape_simple_fn((n, b), || rng.sample(StandardNormal));
    let labels = (0..n).map(|i| i % 2).collect();
    Hypergraph::new(n, edges, x, labels, 2).unwrap()
}

/// Random gate weights and bandwidths for `h`.
pub fn random_params(h: &Hypergraph, seed: u64) -> (GsiNetParams, KernelParams) {
    let b = h.num_features();
    let mut rng = Seed(seed).derive(7).rng();
    let gsi = GsiNetParams::glorot(b, ade::default_hidden(b), &mut rng);
    let theta = rng.random_range(0.3..3.0);
    (gsi, KernelParams::with_bandwidth(b, theta))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Structural and numeric invariants of one adaptive expansion.
pub fn check_expansion(h: &Hypergraph, ex: &Expansion, kernel: &KernelParams) -> Check {
    let plan = &ex.plan;
    let mut expected_edges = 0;
    for (k, members) in h.hyperedges().iter().enumerate() {
        let sel = &plan.selections[k];
        let range = plan.instance_range(k);
        if members.len() == 1 {
            ensure(range.is_empty() && sel.pair.is_none(), || format!("singleton {k} produced edges"))?;
            continue;
        }
        expected_edges += 2 * members.len() - 3;
        ensure(range.len() == 2 * members.len() - 3, || format!("hyperedge {k}: |E_e| = {}", range.len()))?;

        let (lo, hi) = sel.pair.ok_or_else(|| format!("hyperedge {k} has no pair"))?;
        ensure(lo != hi, || format!("hyperedge {k}: degenerate pair"))?;
        ensure(ex.signal[hi] >= ex.signal[lo], || format!("hyperedge {k}: v_plus has the smaller signal"))?;
        let gap = (ex.signal[hi] - ex.signal[lo]).abs();
        for &a in members.iter() {
            for &b in members.iter() {
                ensure((ex.signal[a] - ex.signal[b]).abs() <= gap, || format!("hyperedge {k}: pair is not a max-gap pair"))?;
            }
        }
        ensure(sel.edges.contains(&(lo, hi)), || format!("hyperedge {k}: pair edge missing"))?;
        for &m in &sel.mediators {
            let count = sel.edges.iter().filter(|&&(a, b)| a == m || b == m).count();
            ensure(count == 2, || format!("hyperedge {k}: mediator {m} in {count} edges"))?;
        }

        let sum: f64 = ex.weights[range.clone()].iter().sum();
        ensure((sum - 1.0).abs() <= 1e-12, || format!("hyperedge {k}: weights sum to {sum}"))?;
        for &w in &ex.weights[range] {
            ensure(w > 0.0 && w <= 1.0, || format!("hyperedge {k}: weight {w} outside (0, 1]"))?;
        }
    }
    ensure(plan.instances().len() == expected_edges, || "edge-count identity broken".into())?;

    let theta = kernel.effective();
    for &(i, j) in plan.instances() {
        let u = ade::pair_distance(h.features(), i, j, &mut ade::DistanceCache::new());
        let w_ij = ade::kernel_weight(&ex.x_a, u, theta.view(), i, j);
        let w_ji = ade::kernel_weight(&ex.x_a, u, theta.view(), j, i);
        ensure(w_ij == w_ji, || format!("kernel asymmetric on ({i}, {j})"))?;
        ensure(w_ij > 0.0 && w_ij <= 1.0, || format!("kernel {w_ij} outside (0, 1]"))?;
    }

    let a = ex.graph.to_dense();
    for i in 0..a.nrows() {
        ensure(a[[i, i]] == 0.0, || format!("diagonal entry {i} is non-zero"))?;
        for j in 0..i {
            ensure(a[[i, j]] == a[[j, i]], || format!("adjacency asymmetric at ({i}, {j})"))?;
        }
    }
    let nonfinite = ex.weights.iter().chain(ex.x_a.iter()).any(|v| !v.is_finite());
    ensure(!nonfinite, || "non-finite value in expansion".into())
}

/// Kernel monotonicity on a constructed dominating pair: rows `k, g` differ
/// by a per-dimension stretch (factor ≥ 1) of the `i, j` difference and
/// carry at least the same distance prior.
pub fn check_monotonicity(seed: u64) -> Check {
    let mut rng = Seed(seed).derive(11).rng();
    let b = rng.random_range(1..=6);
    let row_i: Vec<f64> = (0..b).map(|_| rng.sample(StandardNormal)).collect();
    let row_j: Vec<f64> = (0..b).map(|_| rng.sample(StandardNormal)).collect();
    let stretch: Vec<f64> = (0..b).map(|_| rng.random_range(1.0..3.0)).collect();
    let mut x_a = Array2::zeros((4, b));
    for d in 0..b {
        x_a[[0, d]] = row_i[d];
        x_a[[1, d]] = row_j[d];
        x_a[[2, d]] = row_i[d];
        x_a[[3, d]] = row_i[d] + stretch[d] * (row_j[d] - row_i[d]);
    }
    let u_ij = rng.random_range(0.0..2.0);
    let u_kg = u_ij + rng.random_range(0.0..2.0);
    let theta = KernelParams::with_bandwidth(b, rng.random_range(0.2..2.0)).effective();
    let near = ade::kernel_weight(&x_a, u_ij, theta.view(), 0, 1);
    let far = ade::kernel_weight(&x_a, u_kg, theta.view(), 2, 3);
    ensure(near >= far, || format!("kernel not monotone: {near} < {far}"))
}

/// Every instance weight equals `1 / (2|e| - 3)` within `1e-12`.
pub fn check_inverse_size_weights(h: &Hypergraph, ex: &Expansion) -> Check {
    for (k, members) in h.hyperedges().iter().enumerate() {
        if members.len() < 2 {
            continue;
        }
        let want = 1.0 / (2 * members.len() - 3) as f64;
        for &w in &ex.weights[ex.plan.instance_range(k)] {
            ensure((w - want).abs() <= 1e-12, || format!("hyperedge {k}: weight {w}, want {want}"))?;
        }
    }
    Ok(())
}

/// Random 3-uniform hypergraph with random features.
pub fn random_three_uniform(seed: u64) -> Hypergraph {
    let mut rng = Seed(seed).derive(3).rng();
    let n = rng.random_range(3..=40);
    let m = rng.random_range(1..=30);
    let edges = (0..m).map(|_| sample(&mut rng, n, 3).into_vec()).collect();
    let b = rng.random_range(1..=5);
    let x = Array2::from_shape_simple_fn((n, b), || rng.sample(StandardNormal));
    Hypergraph::new(n, edges, x, vec![0; n], 1).unwrap()
}

pub fn clique_pairs(h: &Hypergraph) -> BTreeSet<(usize, usize)> {
    hyperx::classic::clique_expand(h, hyperx::classic::WeightRule::Unit).edge_set()
}

/// Central-difference step and relative-error denominator floor.
pub const FD_STEP: f64 = 1e-5;
pub const FD_FLOOR: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

pub fn normal(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

pub fn twelve_nodes(seed: u64) -> Hypergraph {
    let mut rng = Seed(seed).rng();
    let edges = vec![
        vec![0, 1, 2, 3],
        vec![2, 4, 5],
        vec![5, 6, 7, 8, 9],
        vec![9, 10, 11],
        vec![1, 6, 11],
        vec![3, 7],
        vec![0, 10, 4, 8],
        vec![6],
    ];
    let features = normal(12, 4, &mut rng);
    let labels = (0..12).map(|i| i % 3).collect();
    Hypergraph::new(12, edges, features, labels, 3).unwrap()
}

/// Loss of the whole model with the expansion instances held fixed.
fn pipeline_loss(h: &Hypergraph, params: &ModelParams, cfg: &TrainConfig, plan: &ade::ExpansionPlan) -> f64 {
    let mut fwd = forward(h, params, cfg, Selection::Fixed(plan), None, &mut DistanceCache::new(), Exec::Sequential).unwrap();
    let train: Vec<usize> = (0..12).collect();
    let loss = fwd.loss(h.labels(), &train).unwrap();
    fwd.tape.scalar(loss)
}

/// Worst relative error between analytic and central-difference gradients
/// over every entry of the gate, bandwidth and GCN weights, and the number
/// of entries checked. The expansion instances are held fixed while
/// perturbing, since selection is not differentiated.
pub fn pipeline_gradient_error(mode: PropagationMode, seed: u64) -> (f64, usize) {
    let h = twelve_nodes(seed);
    let cfg = TrainConfig { mode, hidden: 6, dropout: 0.0, ..TrainConfig::default() };
    let mut params = ModelParams::init(&h, &cfg, seed);
    // Move the bandwidths away from the symmetric start.
    params.kernel.theta_raw = Array1::from(vec![0.3, -0.2, 0.8, 0.1]);

    let mut fwd = forward(&h, &params, &cfg, Selection::Seeded(seed), None, &mut DistanceCache::new(), Exec::Sequential)
        .unwrap();
    let train: Vec<usize> = (0..12).collect();
    let loss = fwd.loss(h.labels(), &train).unwrap();
    let grads = fwd.tape.backward(loss).unwrap();
    let analytic = flatten(&param_gradients(&params, &fwd.vars, &grads));
    let plan = fwd.plan.clone();

    let base = flatten(&params);
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        let mut plus = base.clone();
        plus[i] += FD_STEP;
        let mut minus = base.clone();
        minus[i] -= FD_STEP;
        let numeric = (pipeline_loss(&h, &unflatten(&plus, &params), &cfg, &plan)
            - pipeline_loss(&h, &unflatten(&minus, &params), &cfg, &plan))
            / (2.0 * FD_STEP);
        worst = worst.max(rel_err(analytic[i], numeric));
    }
    if analytic.iter().all(|&g| g == 0.0) {
        return (f64::INFINITY, base.len());
    }
    (worst, base.len())
}

