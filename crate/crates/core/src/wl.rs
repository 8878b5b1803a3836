//! 1-WL and 1-GWL colour refinement, plus a randomized harness comparing
//! the two tests on hypergraphs and their adaptive expansions.
//!
//! Colours are small integers handed out by a [`ColorDict`], which maps each
//! distinct signature to a fresh id. Refining two inputs against the same
//! dictionary makes their colours directly comparable.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ade::{self, ExpansionPlan, GsiNetParams, HyperedgeSelection, KernelParams};
use crate::graph::WeightedGraph;
use crate::hypergraph::Hypergraph;
use crate::par::{self, Exec};
use crate::rng::{self, Seed};
use crate::{Error, Result};

const INIT_NODE: usize = 0;
const INIT_EDGE: usize = 1;
const NODE_SIG: usize = 2;
const EDGE_SIG: usize = 3;

/// Injective map from signatures to colour ids.
#[derive(Debug, Clone, Default)]
pub struct ColorDict {
    map: BTreeMap<Vec<usize>, usize>,
}

impl ColorDict {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, signature: Vec<usize>) -> usize {
        let next = self.map.len();
        *self.map.entry(signature).or_insert(next)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Node colours per iteration (`node_colors[0]` is the initial colouring),
/// plus hyperedge colours for 1-GWL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorHistory {
    pub node_colors: Vec<Vec<usize>>,
    pub edge_colors: Vec<Vec<usize>>,
}

impl ColorHistory {
    pub fn iterations(&self) -> usize {
        self.node_colors.len() - 1
    }

    /// Sorted node colours at iteration `t`.
    pub fn histogram(&self, t: usize) -> Vec<usize> {
        let mut h = self.node_colors[t].clone();
        h.sort_unstable();
        h
    }
}

fn num_classes(colors: &[usize]) -> usize {
    let mut c = colors.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

fn wl_run(adj: &[Vec<usize>], iters: usize, dict: &mut ColorDict, stop_early: bool) -> ColorHistory {
    let init = dict.intern(vec![INIT_NODE]);
    let mut colors = vec![vec![init; adj.len()]];
    for _ in 0..iters {
        let prev = colors.last().expect("initial colouring");
        let next: Vec<usize> = adj
            .iter()
            .enumerate()
            .map(|(i, nbrs)| {
                let mut sig: Vec<usize> = nbrs.iter().map(|&j| prev[j]).collect();
                sig.sort_unstable();
                sig.splice(0..0, [NODE_SIG, prev[i]]);
                dict.intern(sig)
            })
            .collect();
        let stable = num_classes(&next) == num_classes(prev);
        colors.push(next);
        if stop_early && stable {
            break;
        }
    }
    ColorHistory { node_colors: colors, edge_colors: Vec::new() }
}

/// 1-WL on the graph structure (weights ignored). Stops after `iters`
/// rounds or once the partition no longer splits.
pub fn wl_refine(g: &WeightedGraph, iters: usize, dict: &mut ColorDict) -> ColorHistory {
    wl_run(&g.adjacency_lists(), iters, dict, true)
}

/// 1-WL for exactly `iters` rounds.
pub fn wl_colors(g: &WeightedGraph, iters: usize, dict: &mut ColorDict) -> ColorHistory {
    wl_run(&g.adjacency_lists(), iters, dict, false)
}

fn gwl_run(h: &Hypergraph, iters: usize, dict: &mut ColorDict, stop_early: bool) -> ColorHistory {
    let mut incident = vec![Vec::new(); h.num_nodes()];
    for (k, e) in h.hyperedges().iter().enumerate() {
        for &v in e {
            incident[v].push(k);
        }
    }
    let init_node = dict.intern(vec![INIT_NODE]);
    let init_edge = dict.intern(vec![INIT_EDGE]);
    let mut nodes = vec![vec![init_node; h.num_nodes()]];
    let mut edges = vec![vec![init_edge; h.num_hyperedges()]];
    for _ in 0..iters {
        let prev = nodes.last().expect("initial colouring");
        let edge_now: Vec<usize> = h
            .hyperedges()
            .iter()
            .map(|e| {
                let mut sig: Vec<usize> = e.iter().map(|&v| prev[v]).collect();
                sig.sort_unstable();
                sig.insert(0, EDGE_SIG);
                dict.intern(sig)
            })
            .collect();
        let next: Vec<usize> = (0..h.num_nodes())
            .map(|v| {
                let mut sig: Vec<usize> = incident[v].iter().map(|&k| edge_now[k]).collect();
                sig.sort_unstable();
                sig.splice(0..0, [NODE_SIG, prev[v]]);
                dict.intern(sig)
            })
            .collect();
        let stable = num_classes(&next) == num_classes(prev);
        nodes.push(next);
        edges.push(edge_now);
        if stop_early && stable {
            break;
        }
    }
    ColorHistory { node_colors: nodes, edge_colors: edges }
}

/// 1-GWL on the hypergraph structure, identical initial colours, early stop.
pub fn gwl_refine(h: &Hypergraph, iters: usize, dict: &mut ColorDict) -> ColorHistory {
    gwl_run(h, iters, dict, true)
}

/// 1-GWL for exactly `iters` rounds.
pub fn gwl_colors(h: &Hypergraph, iters: usize, dict: &mut ColorDict) -> ColorHistory {
    gwl_run(h, iters, dict, false)
}

/// True iff the node-colour multisets differ at some iteration. Both
/// histories must come from the same dictionary.
pub fn distinguish(a: &ColorHistory, b: &ColorHistory) -> Result<bool> {
    if a.node_colors.len() != b.node_colors.len() {
        return Err(Error::IterationMismatch(a.iterations(), b.iterations()));
    }
    Ok((0..a.node_colors.len()).any(|t| a.histogram(t) != b.histogram(t)))
}

pub fn wl_distinguishes(a: &WeightedGraph, b: &WeightedGraph, iters: usize) -> bool {
    let mut dict = ColorDict::new();
    let (ca, cb) = (wl_colors(a, iters, &mut dict), wl_colors(b, iters, &mut dict));
    distinguish(&ca, &cb).expect("same iteration count")
}

pub fn gwl_distinguishes(a: &Hypergraph, b: &Hypergraph, iters: usize) -> bool {
    let mut dict = ColorDict::new();
    let (ca, cb) = (gwl_colors(a, iters, &mut dict), gwl_colors(b, iters, &mut dict));
    distinguish(&ca, &cb).expect("same iteration count")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialKind {
    /// `H' = π(H)` with the tie choices carried over through `π`.
    Coupled,
    /// `H' = π(H)` with independent tie choices.
    Uncoupled,
    /// `π(H)` with one membership changed, independent tie choices.
    Rewired,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub kind: TrialKind,
    pub seed: u64,
    pub num_nodes: usize,
    pub num_hyperedges: usize,
    pub gwl_distinguished: bool,
    pub wl_distinguished: bool,
    /// GWL could not tell the inputs apart but WL on the expansions could.
    /// Only meaningful (and asserted) for coupled trials.
    pub violation: bool,
}

/// Adaptive expansion of the bare structure: every feature is 1, so every
/// pair ties and the choice comes from `seed`.
pub fn structural_expansion(h: &Hypergraph, seed: u64) -> Result<ade::Expansion> {
    let h = Hypergraph::from_structure(h.num_nodes(), h.hyperedges().to_vec())?;
    ade::expand(&h, &GsiNetParams::zeros(1, 1), &KernelParams::unit(1), seed)
}

/// Carries the selections of `plan` (built on `h`) over to `permuted`, the
/// image of `h` under `(node_perm, edge_perm)`.
pub fn couple_plan(plan: &ExpansionPlan, permuted: &Hypergraph, node_perm: &[usize], edge_perm: &[usize]) -> ExpansionPlan {
    let mut selections: Vec<Option<HyperedgeSelection>> = vec![None; plan.selections.len()];
    for sel in &plan.selections {
        let k = edge_perm[sel.hyperedge];
        let members = permuted.hyperedge(k);
        let mapped = match sel.pair {
            Some((a, b)) => HyperedgeSelection::from_pair(k, members, node_perm[a], node_perm[b]),
            None => HyperedgeSelection { hyperedge: k, pair: None, mediators: Vec::new(), edges: Vec::new() },
        };
        selections[k] = Some(mapped);
    }
    let selections = selections.into_iter().map(|s| s.expect("edge_perm is a bijection")).collect();
    ExpansionPlan::from_selections(permuted.num_nodes(), selections)
}

fn plan_graph(plan: &ExpansionPlan) -> Result<WeightedGraph> {
    ade::assemble_adjacency(plan, &plan.uniform_weights())
}

/// Runs both tests on `h` and `other` (plus their expansions).
fn compare(h: &Hypergraph, g: &WeightedGraph, other: &Hypergraph, g_other: &WeightedGraph, iters: usize) -> (bool, bool) {
    (gwl_distinguishes(h, other, iters), wl_distinguishes(g, g_other, iters))
}

/// One coupled isomorphic trial: `H' = π(H)` with the permutation applied to
/// both nodes and hyperedges.
pub fn expressiveness_trial(
    h: &Hypergraph,
    node_perm: &[usize],
    edge_perm: &[usize],
    iters: usize,
    seed: u64,
) -> Result<(bool, bool)> {
    let permuted = h.permuted(node_perm, edge_perm)?;
    let ex = structural_expansion(h, seed)?;
    let coupled = couple_plan(&ex.plan, &permuted, node_perm, edge_perm);
    Ok(compare(h, &ex.graph, &permuted, &plan_graph(&coupled)?, iters))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub trials: usize,
    pub max_nodes: usize,
    pub max_hyperedges: usize,
    pub max_size: usize,
    pub iters: usize,
    pub seed: u64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self { trials: 500, max_nodes: 30, max_hyperedges: 20, max_size: 8, iters: 10, seed: 0 }
    }
}

/// Random structure with `2..=max_nodes` nodes, `1..=max_hyperedges`
/// hyperedges and sizes in `1..=max_size`.
pub fn random_structure(cfg: &HarnessConfig, rng: &mut impl Rng) -> Result<Hypergraph> {
    let n = rng.random_range(2..=cfg.max_nodes.max(2));
    let m = rng.random_range(1..=cfg.max_hyperedges.max(1));
    let top = cfg.max_size.clamp(1, n);
    let edges = (0..m)
        .map(|_| {
            let size = rng.random_range(1..=top);
            rand::seq::index::sample(rng, n, size).into_vec()
        })
        .collect();
    Hypergraph::from_structure(n, edges)
}

fn random_perm(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// Moves one membership of `h`: a member of some hyperedge is swapped for a
/// node outside it. `None` when every hyperedge already spans all nodes.
fn rewire(h: &Hypergraph, rng: &mut impl Rng) -> Result<Option<Hypergraph>> {
    let candidates: Vec<usize> =
        (0..h.num_hyperedges()).filter(|&k| h.hyperedge(k).len() < h.num_nodes()).collect();
    let Some(&k) = candidates.choose(rng) else {
        return Ok(None);
    };
    let mut edges = h.hyperedges().to_vec();
    let outside: Vec<usize> = (0..h.num_nodes()).filter(|v| !edges[k].contains(v)).collect();
    let slot = rng.random_range(0..edges[k].len());
    edges[k][slot] = *outside.choose(rng).expect("hyperedge is not full");
    Ok(Some(Hypergraph::from_structure(h.num_nodes(), edges)?))
}

/// Trial `index`: one coupled, one uncoupled and (when possible) one
/// rewired comparison.
pub fn run_trial(cfg: &HarnessConfig, index: usize) -> Result<Vec<TrialReport>> {
    let seed = Seed(cfg.seed).derive(rng::TRIAL).derive(index as u64).0;
    let mut rng = Seed(seed).rng();
    let h = random_structure(cfg, &mut rng)?;
    let node_perm = random_perm(h.num_nodes(), &mut rng);
    let edge_perm = random_perm(h.num_hyperedges(), &mut rng);
    let permuted = h.permuted(&node_perm, &edge_perm)?;
    let ex = structural_expansion(&h, seed)?;
    let other_seed = Seed(seed).derive(1).0;

    let report = |kind, (gwl, wl): (bool, bool)| TrialReport {
        trial: index,
        kind,
        seed,
        num_nodes: h.num_nodes(),
        num_hyperedges: h.num_hyperedges(),
        gwl_distinguished: gwl,
        wl_distinguished: wl,
        violation: !gwl && wl,
    };

    let coupled = plan_graph(&couple_plan(&ex.plan, &permuted, &node_perm, &edge_perm))?;
    let mut out = vec![report(TrialKind::Coupled, compare(&h, &ex.graph, &permuted, &coupled, cfg.iters))];

    let uncoupled = structural_expansion(&permuted, other_seed)?.graph;
    out.push(report(TrialKind::Uncoupled, compare(&h, &ex.graph, &permuted, &uncoupled, cfg.iters)));

    if let Some(rewired) = rewire(&permuted, &mut rng)? {
        let g = structural_expansion(&rewired, other_seed)?.graph;
        out.push(report(TrialKind::Rewired, compare(&h, &ex.graph, &rewired, &g, cfg.iters)));
    }
    Ok(out)
}

pub fn run_trials(cfg: &HarnessConfig, exec: Exec) -> Result<Vec<TrialReport>> {
    let per_trial = par::map_range(exec, cfg.trials, |i| run_trial(cfg, i));
    let mut out = Vec::new();
    for r in per_trial {
        out.extend(r?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub trials: usize,
    pub gwl_rate: f64,
    pub wl_rate: f64,
    pub violations: usize,
}

/// Per-kind counts and distinguishing rates.
pub fn summarize(reports: &[TrialReport], kind: TrialKind) -> KindSummary {
    let sel: Vec<&TrialReport> = reports.iter().filter(|r| r.kind == kind).collect();
    let n = sel.len();
    let rate = |f: fn(&TrialReport) -> bool| {
        if n == 0 {
            0.0
        } else {
            sel.iter().filter(|r| f(r)).count() as f64 / n as f64
        }
    };
    KindSummary {
        trials: n,
        gwl_rate: rate(|r| r.gwl_distinguished),
        wl_rate: rate(|r| r.wl_distinguished),
        violations: sel.iter().filter(|r| r.violation).count(),
    }
}
