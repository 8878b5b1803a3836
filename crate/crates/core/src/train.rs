//! Training loop: every epoch re-expands the hypergraph on a fresh tape,
//! runs the GCN, and takes one Adam step on all parameters.
//!
//! Pair selection reads the current signal values but is not differentiated;
//! gradients reach the gate through `X_a` (kernel and GCN input) and the
//! bandwidths through the kernel.

use std::rc::Rc;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::ade::{
    default_hidden, hypergcn_fixed_plan, DistanceCache, ExpansionPlan, GsiNetParams, KernelParams, Topology,
    DENOM_FLOOR, EXPONENT_MAX,
};
use crate::autodiff::{Gradients, Tape, Var};
use crate::gcn::{self, cross_entropy, dropout_mask, gcn_tape, GcnParams, PropagationMode, TapePropagation};
use crate::hypergraph::Hypergraph;
use crate::optim::{adam_step, AdamConfig, AdamState};
use crate::par::{self, Exec};
use crate::rng::{self, Seed};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Adaptive expansion, optionally with the gate or the kernel removed.
    #[default]
    Ade,
    /// Clique expansion, `1 / |E_e|` per edge, raw features.
    Ce,
    /// Mediator expansion from a random projection, fixed weights.
    HypergcnFixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub method: Method,
    pub mode: PropagationMode,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    /// GCN hidden width.
    pub hidden: usize,
    /// Gate hidden width; `max(16, ceil(b / 4))` when absent.
    pub gate_hidden: Option<usize>,
    /// Train / validation / test proportions.
    pub splits: [f64; 3],
    /// Ade only. Without the gate, `X_a = X` and the clique topology is used.
    pub gate: bool,
    /// Ade only. Without the kernel, edges get `1 / |E_e|`.
    pub kernel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Ade,
            mode: PropagationMode::Normalized,
            epochs: 500,
            lr: 0.01,
            weight_decay: 5e-4,
            dropout: 0.5,
            hidden: 64,
            gate_hidden: None,
            splits: [0.2, 0.2, 0.6],
            gate: true,
            kernel: true,
        }
    }
}

impl TrainConfig {
    fn uses_gate(&self) -> bool {
        self.method == Method::Ade && self.gate
    }

    fn uses_kernel(&self) -> bool {
        self.method == Method::Ade && self.kernel
    }

    fn topology(&self) -> Topology {
        if self.method == Method::Ce || !self.uses_gate() {
            Topology::Clique
        } else {
            Topology::Mediator
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.hidden == 0 || self.gate_hidden == Some(0) {
            return Err(Error::config("hidden widths must be positive"));
        }
        if !(self.lr >= 0.0 && self.weight_decay >= 0.0) {
            return Err(Error::config("lr and weight decay must be non-negative"));
        }
        Ok(())
    }
}

/// Every trainable matrix of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub gsi: GsiNetParams,
    pub kernel: KernelParams,
    pub gcn: GcnParams,
}

impl ModelParams {
    /// Glorot weights from the `INIT` child of `seed`, unit bandwidths.
    pub fn init(h: &Hypergraph, cfg: &TrainConfig, seed: u64) -> Self {
        let b = h.num_features();
        let mut rng = Seed(seed).derive(rng::INIT).rng();
        let gsi = GsiNetParams::glorot(b, cfg.gate_hidden.unwrap_or_else(|| default_hidden(b)), &mut rng);
        let gcn = GcnParams::glorot(b, cfg.hidden, h.num_classes(), &mut rng);
        Self { gsi, kernel: KernelParams::unit(b), gcn }
    }
}

/// Tape handles of the parameters present in a forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ParamVars {
    pub gate_w1: Option<Var>,
    pub gate_w2: Option<Var>,
    pub theta: Option<Var>,
    pub gcn_w1: Var,
    pub gcn_w2: Var,
}

/// Where the expansion's edge instances come from.
#[derive(Debug, Clone, Copy)]
pub enum Selection<'a> {
    /// Select from the current signal, ties broken with this seed.
    Seeded(u64),
    /// Reuse a plan (its instances and grouping; weights are recomputed).
    Fixed(&'a ExpansionPlan),
}

pub struct Forward {
    pub tape: Tape,
    pub vars: ParamVars,
    pub x_a: Var,
    /// Normalised instance weights, `I x 1`.
    pub weights: Var,
    pub logits: Var,
    pub plan: ExpansionPlan,
}

/// Builds the whole model on a new tape.
pub fn forward(
    h: &Hypergraph,
    params: &ModelParams,
    cfg: &TrainConfig,
    selection: Selection,
    dropout: Option<Array2<f64>>,
    cache: &mut DistanceCache,
    exec: Exec,
) -> Result<Forward> {
    let mut tape = Tape::new();
    let x = h.features();
    let xv = tape.constant(x.clone());

    let (x_a, gate_w1, gate_w2) = if cfg.uses_gate() {
        let w1 = tape.param(params.gsi.w1.clone());
        let w2 = tape.param(params.gsi.w2.clone());
        let pooled = tape.col_mean(xv)?;
        let w1t = tape.transpose(w1);
        let z1 = tape.matmul(pooled, w1t)?;
        let hidden = tape.relu(z1);
        let w2t = tape.transpose(w2);
        let z2 = tape.matmul(hidden, w2t)?;
        let gate = tape.sigmoid(z2);
        (tape.row_broadcast_mul(xv, gate)?, Some(w1), Some(w2))
    } else {
        (xv, None, None)
    };

    let plan = match selection {
        Selection::Fixed(plan) => plan.clone(),
        Selection::Seeded(seed) => match (cfg.method, cfg.topology()) {
            (Method::HypergcnFixed, _) => hypergcn_fixed_plan(h, seed, exec),
            (_, Topology::Clique) => ExpansionPlan::clique(h),
            (_, Topology::Mediator) => {
                let signal = tape.value(x_a).sum_axis(Axis(1));
                ExpansionPlan::mediator(h, signal.view(), seed, exec)
            }
        },
    };

    let (weights, theta) = if cfg.uses_kernel() && !plan.instances().is_empty() {
        let theta = tape.param(params.kernel.theta_raw.clone().insert_axis(Axis(0)));
        let w = kernel_on_tape(&mut tape, &plan, x, x_a, theta, params.kernel.epsilon, cache, exec)?;
        (w, Some(theta))
    } else {
        let uniform = Array2::from_shape_vec((plan.instances().len(), 1), plan.uniform_weights())
            .expect("column shape");
        (tape.constant(uniform), None)
    };

    let pair_weights = tape.segment_sum(weights, plan.instance_pair().to_vec(), plan.pairs().len())?;
    let pairs: Rc<[(usize, usize)]> = plan.pairs().into();
    let prop = TapePropagation::new(&mut tape, h.num_nodes(), pairs, pair_weights, cfg.mode)?;
    let gcn_w1 = tape.param(params.gcn.w1.clone());
    let gcn_w2 = tape.param(params.gcn.w2.clone());
    let logits = gcn_tape(&mut tape, &prop, x_a, gcn_w1, gcn_w2, dropout)?;

    let vars = ParamVars { gate_w1, gate_w2, theta, gcn_w1, gcn_w2 };
    Ok(Forward { tape, vars, x_a, weights, logits, plan })
}

/// Normalised kernel weights of every instance, `I x 1`.
#[allow(clippy::too_many_arguments)]
fn kernel_on_tape(
    tape: &mut Tape,
    plan: &ExpansionPlan,
    x: &Array2<f64>,
    x_a: Var,
    theta_raw: Var,
    epsilon: f64,
    cache: &mut DistanceCache,
    exec: Exec,
) -> Result<Var> {
    let b = x.ncols() as f64;
    let pair_dist = cache.distances(x, plan.pairs(), exec);
    let dist = Array2::from_shape_fn((plan.instances().len(), 1), |(k, _)| pair_dist[plan.instance_pair()[k]]);

    let sp = tape.softplus(theta_raw);
    let theta = tape.add_scalar(sp, epsilon);
    let inv_sq = tape.powf(theta, -2.0);
    let left = tape.gather_rows(x_a, plan.instances().iter().map(|p| p.0).collect::<Vec<_>>())?;
    let right = tape.gather_rows(x_a, plan.instances().iter().map(|p| p.1).collect::<Vec<_>>())?;
    let diff = tape.sub(left, right)?;
    let sq = tape.mul(diff, diff)?;
    let scaled = tape.row_broadcast_mul(sq, inv_sq)?;
    let summed = tape.row_sum(scaled);
    let dist = tape.constant(dist);
    let weighted = tape.mul(summed, dist)?;
    let exponent = tape.scale(weighted, -1.0 / b);
    let exponent = tape.clamp_min(exponent, -EXPONENT_MAX);
    let raw = tape.exp(exponent);

    let groups: Rc<[usize]> = plan.instance_edge().into();
    let totals = tape.segment_sum(raw, groups.clone(), plan.num_hyperedges())?;
    let totals = tape.clamp_min(totals, DENOM_FLOOR);
    let spread = tape.gather_rows(totals, groups)?;
    tape.div(raw, spread)
}

impl Forward {
    /// Masked cross-entropy on `nodes`; returns the loss handle.
    pub fn loss(&mut self, labels: &[usize], nodes: &[usize]) -> Result<Var> {
        cross_entropy(&mut self.tape, self.logits, labels, nodes)
    }
}

/// Gradients in the same layout as [`ModelParams`]; absent parts are zero.
pub fn param_gradients(params: &ModelParams, vars: &ParamVars, grads: &Gradients) -> ModelParams {
    let pick = |v: Option<Var>, like: &Array2<f64>| match v.and_then(|v| grads.get(v)) {
        Some(g) => g.clone(),
        None => Array2::zeros(like.raw_dim()),
    };
    let theta = pick(vars.theta, &params.kernel.theta_raw.clone().insert_axis(Axis(0)));
    ModelParams {
        gsi: GsiNetParams { w1: pick(vars.gate_w1, &params.gsi.w1), w2: pick(vars.gate_w2, &params.gsi.w2) },
        kernel: KernelParams { theta_raw: theta.row(0).to_owned(), epsilon: params.kernel.epsilon },
        gcn: GcnParams { w1: pick(Some(vars.gcn_w1), &params.gcn.w1), w2: pick(Some(vars.gcn_w2), &params.gcn.w2) },
    }
}

fn apply_step(params: &mut ModelParams, vars: &ParamVars, grads: &Gradients, state: &mut AdamState, cfg: &AdamConfig) {
    let g = param_gradients(params, vars, grads);
    let mut theta = params.kernel.theta_raw.clone().insert_axis(Axis(0));
    let theta_grad = g.kernel.theta_raw.clone().insert_axis(Axis(0));
    let mut ps: Vec<&mut Array2<f64>> = Vec::new();
    let mut gs: Vec<&Array2<f64>> = Vec::new();
    if vars.gate_w1.is_some() {
        ps.push(&mut params.gsi.w1);
        gs.push(&g.gsi.w1);
        ps.push(&mut params.gsi.w2);
        gs.push(&g.gsi.w2);
    }
    if vars.theta.is_some() {
        ps.push(&mut theta);
        gs.push(&theta_grad);
    }
    ps.push(&mut params.gcn.w1);
    gs.push(&g.gcn.w1);
    ps.push(&mut params.gcn.w2);
    gs.push(&g.gcn.w2);
    adam_step(&mut ps, &gs, state, cfg);
    drop(ps);
    if vars.theta.is_some() {
        params.kernel.theta_raw = theta.row(0).to_owned();
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMask {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded random partition. Sizes are `round(N p_train)`, `round(N p_val)`
/// and the remainder.
pub fn make_splits(n: usize, proportions: [f64; 3], seed: u64) -> Result<SplitMask> {
    let total: f64 = proportions.iter().sum();
    if proportions.iter().any(|&p| p.is_nan() || p < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("split proportions {proportions:?} must be non-negative and sum to 1")));
    }
    let n_train = (n as f64 * proportions[0]).round() as usize;
    let n_val = (n as f64 * proportions[1]).round() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(Error::config(format!("splits {proportions:?} leave an empty set for {n} nodes")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut Seed(seed).derive(rng::SPLITS).rng());
    let part = |range: std::ops::Range<usize>| {
        let mut v = perm[range].to_vec();
        v.sort_unstable();
        v
    };
    Ok(SplitMask { train: part(0..n_train), val: part(n_train..n_train + n_val), test: part(n_train + n_val..n) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub config: TrainConfig,
    pub num_nodes: usize,
    pub num_hyperedges: usize,
    pub split_sizes: [usize; 3],
    pub curve: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    /// Test accuracy of the best-validation snapshot.
    pub test_acc: f64,
    pub final_train_acc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_ms: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: RunReport,
    pub params: ModelParams,
    /// Logits of the best-validation snapshot.
    pub best_logits: Array2<f64>,
    pub elapsed: Duration,
}

pub fn train(h: &Hypergraph, cfg: &TrainConfig, seed: u64, exec: Exec) -> Result<TrainOutcome> {
    let start = Instant::now();
    cfg.validate()?;
    let splits = make_splits(h.num_nodes(), cfg.splits, seed)?;
    let labels = h.labels();
    let root = Seed(seed);
    let fixed = (cfg.method == Method::HypergcnFixed).then(|| hypergcn_fixed_plan(h, seed, exec));
    let adam = AdamConfig { lr: cfg.lr, weight_decay: cfg.weight_decay, ..AdamConfig::default() };

    let mut params = ModelParams::init(h, cfg, seed);
    let mut state = AdamState::new();
    let mut cache = DistanceCache::new();
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, f64, Array2<f64>)> = None;
    let mut final_train_acc = 0.0;

    for epoch in 0..cfg.epochs {
        let select_seed = root.derive(rng::EPOCH).derive(epoch as u64).0;
        let selection = fixed.as_ref().map_or(Selection::Seeded(select_seed), Selection::Fixed);
        let mask = (cfg.dropout > 0.0).then(|| {
            let mut rng = root.derive(rng::DROPOUT).stream(epoch as u64);
            dropout_mask(h.num_nodes(), cfg.hidden, cfg.dropout, &mut rng)
        });

        let mut fwd = forward(h, &params, cfg, selection, mask, &mut cache, exec)?;
        let loss = fwd.loss(labels, &splits.train)?;
        let loss_value = fwd.tape.scalar(loss);
        let grads = fwd.tape.backward(loss)?;
        apply_step(&mut params, &fwd.vars, &grads, &mut state, &adam);

        let eval = forward(h, &params, cfg, selection, None, &mut cache, exec)?;
        let logits = eval.tape.value(eval.logits);
        let pred = gcn::predict(logits);
        let train_acc = gcn::accuracy(&pred, labels, &splits.train);
        let val_acc = gcn::accuracy(&pred, labels, &splits.val);
        if best.as_ref().is_none_or(|b| val_acc > b.1) {
            let test_acc = gcn::accuracy(&pred, labels, &splits.test);
            best = Some((epoch, val_acc, test_acc, logits.clone()));
        }
        final_train_acc = train_acc;
        curve.push(EpochRecord { epoch, loss: loss_value, train_acc, val_acc });
    }

    let (best_epoch, best_val_acc, test_acc, best_logits) = match best {
        Some(b) => b,
        None => {
            // Zero epochs: report the initial model.
            let eval = forward(h, &params, cfg, Selection::Seeded(seed), None, &mut cache, exec)?;
            let logits = eval.tape.value(eval.logits).clone();
            let pred = gcn::predict(&logits);
            (0, gcn::accuracy(&pred, labels, &splits.val), gcn::accuracy(&pred, labels, &splits.test), logits)
        }
    };
    let report = RunReport {
        seed,
        config: cfg.clone(),
        num_nodes: h.num_nodes(),
        num_hyperedges: h.num_hyperedges(),
        split_sizes: [splits.train.len(), splits.val.len(), splits.test.len()],
        curve,
        best_epoch,
        best_val_acc,
        test_acc,
        final_train_acc,
        wall_clock_ms: None,
    };
    Ok(TrainOutcome { report, params, best_logits, elapsed: start.elapsed() })
}

/// Seeds of the repeated runs under `seed`.
pub fn repeat_seeds(seed: u64, repeats: usize) -> Vec<u64> {
    let root = Seed(seed).derive(rng::REPEAT);
    (0..repeats as u64).map(|r| root.derive(r).0).collect()
}

/// Mean and sample standard deviation (`n - 1`; zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub lr: f64,
    pub weight_decay: f64,
}

/// `lr ∈ {0.01, 0.001}` × `weight_decay ∈ {5e-4, 0}`.
pub fn default_grid() -> Vec<GridCell> {
    let mut cells = Vec::new();
    for lr in [0.01, 0.001] {
        for weight_decay in [5e-4, 0.0] {
            cells.push(GridCell { lr, weight_decay });
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: GridCell,
    pub val_mean: f64,
    pub test_mean: f64,
    pub test_std: f64,
    pub runs: Vec<RunReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub cells: Vec<CellSummary>,
    /// Index into `cells` with the highest mean validation accuracy (first
    /// one on ties).
    pub best: usize,
}

/// Trains every `(cell, seed)` combination and picks the cell by mean
/// validation accuracy.
pub fn grid_search(
    h: &Hypergraph,
    base: &TrainConfig,
    grid: &[GridCell],
    seeds: &[u64],
    exec: Exec,
) -> Result<GridReport> {
    if grid.is_empty() || seeds.is_empty() {
        return Err(Error::config("grid search needs at least one cell and one seed"));
    }
    let jobs: Vec<(usize, u64)> = (0..grid.len()).flat_map(|c| seeds.iter().map(move |&s| (c, s))).collect();
    let outcomes = par::map_slice(exec, &jobs, |_, &(c, seed)| {
        let cfg = TrainConfig { lr: grid[c].lr, weight_decay: grid[c].weight_decay, ..base.clone() };
        let inner = if exec.is_parallel() { Exec::Sequential } else { exec };
        train(h, &cfg, seed, inner).map(|o| {
            let mut report = o.report;
            report.wall_clock_ms = Some(o.elapsed.as_secs_f64() * 1e3);
            report
        })
    });
    let mut runs = outcomes.into_iter();
    let mut cells = Vec::with_capacity(grid.len());
    for &cell in grid {
        let reports = runs.by_ref().take(seeds.len()).collect::<Result<Vec<_>>>()?;
        let val: Vec<f64> = reports.iter().map(|r| r.best_val_acc).collect();
        let test: Vec<f64> = reports.iter().map(|r| r.test_acc).collect();
        let (test_mean, test_std) = mean_std(&test);
        cells.push(CellSummary { cell, val_mean: mean_std(&val).0, test_mean, test_std, runs: reports });
    }
    let mut best = 0;
    for (i, c) in cells.iter().enumerate() {
        if c.val_mean > cells[best].val_mean {
            best = i;
        }
    }
    Ok(GridReport { cells, best })
}

/// Logits of a trained model under a given selection seed, no dropout.
pub fn predict_logits(h: &Hypergraph, params: &ModelParams, cfg: &TrainConfig, seed: u64) -> Result<Array2<f64>> {
    let fwd = forward(h, params, cfg, Selection::Seeded(seed), None, &mut DistanceCache::new(), Exec::Parallel)?;
    Ok(fwd.tape.value(fwd.logits).clone())
}

/// Flattens the values of the given parameters (gate, theta, GCN) in a fixed
/// order; used by finite-difference checks.
pub fn flatten(params: &ModelParams) -> Array1<f64> {
    let mut out = Vec::new();
    out.extend(params.gsi.w1.iter());
    out.extend(params.gsi.w2.iter());
    out.extend(params.kernel.theta_raw.iter());
    out.extend(params.gcn.w1.iter());
    out.extend(params.gcn.w2.iter());
    Array1::from(out)
}

/// Inverse of [`flatten`], shaped like `like`.
pub fn unflatten(values: &Array1<f64>, like: &ModelParams) -> ModelParams {
    let mut it = values.iter().copied();
    let mut take = |shape: (usize, usize)| {
        Array2::from_shape_simple_fn(shape, || it.next().expect("enough values"))
    };
    let gw1 = take(like.gsi.w1.dim());
    let gw2 = take(like.gsi.w2.dim());
    let theta = take((1, like.kernel.theta_raw.len()));
    let cw1 = take(like.gcn.w1.dim());
    let cw2 = take(like.gcn.w2.dim());
    ModelParams {
        gsi: GsiNetParams { w1: gw1, w2: gw2 },
        kernel: KernelParams { theta_raw: theta.row(0).to_owned(), epsilon: like.kernel.epsilon },
        gcn: GcnParams { w1: cw1, w2: cw2 },
    }
}
