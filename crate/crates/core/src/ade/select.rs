//! Representative pair selection and the per-hyperedge edge sets it induces.

use ndarray::ArrayView1;
use rand::Rng;
use serde::Serialize;

use crate::hypergraph::Hypergraph;
use crate::par::{self, Exec};
use crate::rng::{self, Seed};

/// Outcome of selecting a representative pair inside one hyperedge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HyperedgeSelection {
    pub hyperedge: usize,
    /// `(v_minus, v_plus)`, with `S(v_plus) >= S(v_minus)`. `None` for
    /// singletons and for clique topology.
    pub pair: Option<(usize, usize)>,
    pub mediators: Vec<usize>,
    /// The hyperedge's edge set: the pair first, then `(m, v_minus)` and
    /// `(m, v_plus)` for every mediator `m`.
    pub edges: Vec<(usize, usize)>,
}

impl HyperedgeSelection {
    /// Edge set for a given representative pair.
    pub fn from_pair(hyperedge: usize, members: &[usize], v_minus: usize, v_plus: usize) -> Self {
        debug_assert!(v_minus != v_plus);
        let mediators: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&m| m != v_minus && m != v_plus)
            .collect();
        let mut edges = Vec::with_capacity(1 + 2 * mediators.len());
        edges.push((v_minus, v_plus));
        for &m in &mediators {
            edges.push((m, v_minus));
            edges.push((m, v_plus));
        }
        Self { hyperedge, pair: Some((v_minus, v_plus)), mediators, edges }
    }

    fn singleton(hyperedge: usize) -> Self {
        Self { hyperedge, pair: None, mediators: Vec::new(), edges: Vec::new() }
    }
}

/// Picks the pair maximising `|S_i - S_j|` inside `members`.
///
/// The maximal gap is `max S - min S`, attained exactly by the pairs joining
/// a minimiser to a maximiser (or by every pair when `S` is constant on the
/// hyperedge). When more than one pair attains it, one is drawn uniformly
/// with `rng`; otherwise `rng` is not touched.
pub fn select_pair(
    hyperedge: usize,
    members: &[usize],
    signal: ArrayView1<f64>,
    rng: &mut impl Rng,
) -> HyperedgeSelection {
    if members.len() < 2 {
        return HyperedgeSelection::singleton(hyperedge);
    }
    let (lo, hi) = members.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(signal[v]), hi.max(signal[v]))
    });

    let (a, b) = if hi > lo {
        let lows: Vec<usize> = members.iter().copied().filter(|&v| signal[v] == lo).collect();
        let highs: Vec<usize> = members.iter().copied().filter(|&v| signal[v] == hi).collect();
        let count = lows.len() * highs.len();
        let r = if count > 1 { rng.random_range(0..count) } else { 0 };
        (lows[r / highs.len()], highs[r % highs.len()])
    } else {
        let k = members.len();
        let r = rng.random_range(0..k * (k - 1) / 2);
        let (i, j) = unrank_pair(r, k);
        let (x, y) = (members[i], members[j]);
        (x.min(y), x.max(y))
    };
    HyperedgeSelection::from_pair(hyperedge, members, a, b)
}

/// Maps `r` in `0..k(k-1)/2` to the `r`-th pair `(i, j)`, `i < j`, in
/// lexicographic order.
fn unrank_pair(mut r: usize, k: usize) -> (usize, usize) {
    for i in 0..k {
        let row = k - 1 - i;
        if r < row {
            return (i, i + 1 + r);
        }
        r -= row;
    }
    unreachable!("rank out of range")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    /// Representative pair plus mediators, `2|e| - 3` edges.
    #[default]
    Mediator,
    /// Every pair inside the hyperedge.
    Clique,
}

/// Flattened edge instances of an expansion, grouped by hyperedge, plus the
/// map from instances to distinct node pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionPlan {
    num_nodes: usize,
    pub selections: Vec<HyperedgeSelection>,
    /// Instances of hyperedge `k` are `offsets[k]..offsets[k + 1]`.
    offsets: Vec<usize>,
    /// `(u, v)` with `u < v`, one per edge instance.
    instances: Vec<(usize, usize)>,
    /// Hyperedge of each instance.
    instance_edge: Vec<usize>,
    /// Distinct pairs, sorted.
    pairs: Vec<(usize, usize)>,
    instance_pair: Vec<usize>,
}

impl ExpansionPlan {
    pub fn from_selections(num_nodes: usize, selections: Vec<HyperedgeSelection>) -> Self {
        let mut offsets = Vec::with_capacity(selections.len() + 1);
        let mut instances = Vec::new();
        let mut instance_edge = Vec::new();
        offsets.push(0);
        for (k, sel) in selections.iter().enumerate() {
            for &(a, b) in &sel.edges {
                instances.push((a.min(b), a.max(b)));
                instance_edge.push(k);
            }
            offsets.push(instances.len());
        }
        let mut keyed: Vec<((usize, usize), usize)> = instances.iter().copied().zip(0..).collect();
        keyed.sort_unstable();
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        let mut instance_pair = vec![0; instances.len()];
        for (pair, k) in keyed {
            if pairs.last() != Some(&pair) {
                pairs.push(pair);
            }
            instance_pair[k] = pairs.len() - 1;
        }
        Self { num_nodes, selections, offsets, instances, instance_edge, pairs, instance_pair }
    }

    /// Mediator topology: one selection per hyperedge, ties broken with the
    /// hyperedge's own substream of `seed`.
    pub fn mediator(h: &Hypergraph, signal: ArrayView1<f64>, seed: u64, exec: Exec) -> Self {
        let root = Seed(seed).derive(rng::SELECT);
        let selections = par::map_slice(exec, h.hyperedges(), |k, members| {
            select_pair(k, members, signal, &mut root.stream(k as u64))
        });
        Self::from_selections(h.num_nodes(), selections)
    }

    pub fn clique(h: &Hypergraph) -> Self {
        let selections = h
            .hyperedges()
            .iter()
            .enumerate()
            .map(|(k, members)| {
                let mut edges = Vec::new();
                for (i, &a) in members.iter().enumerate() {
                    for &b in &members[i + 1..] {
                        edges.push((a, b));
                    }
                }
                HyperedgeSelection { hyperedge: k, pair: None, mediators: Vec::new(), edges }
            })
            .collect();
        Self::from_selections(h.num_nodes(), selections)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_hyperedges(&self) -> usize {
        self.selections.len()
    }

    pub fn instances(&self) -> &[(usize, usize)] {
        &self.instances
    }

    pub fn instance_edge(&self) -> &[usize] {
        &self.instance_edge
    }

    pub fn instance_range(&self, hyperedge: usize) -> std::ops::Range<usize> {
        self.offsets[hyperedge]..self.offsets[hyperedge + 1]
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn instance_pair(&self) -> &[usize] {
        &self.instance_pair
    }

    /// `1 / |E_e|` for every instance.
    pub fn uniform_weights(&self) -> Vec<f64> {
        self.instance_edge
            .iter()
            .map(|&k| 1.0 / self.instance_range(k).len() as f64)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn rng() -> rand_chacha::ChaCha8Rng {
        Seed(9).rng()
    }

    #[test]
    fn picks_widest_gap() {
        let s = array![0.0, 1.0, 0.4];
        let sel = select_pair(0, &[0, 1, 2], s.view(), &mut rng());
        assert_eq!(sel.pair, Some((0, 1)));
        assert_eq!(sel.mediators, vec![2]);
        assert_eq!(sel.edges, vec![(0, 1), (2, 0), (2, 1)]);
    }

    #[test]
    fn plus_carries_larger_signal() {
        let s = array![5.0, -1.0, 2.0];
        let sel = select_pair(0, &[0, 1, 2], s.view(), &mut rng());
        assert_eq!(sel.pair, Some((1, 0)));
    }

    #[test]
    fn two_members_forced() {
        let s = array![0.0, 0.0, 3.0];
        let sel = select_pair(4, &[2, 0], s.view(), &mut rng());
        assert_eq!(sel.pair, Some((0, 2)));
        assert!(sel.mediators.is_empty());
        assert_eq!(sel.edges.len(), 1);
    }

    #[test]
    fn singleton_has_no_edges() {
        let sel = select_pair(0, &[3], array![0.0, 0.0, 0.0, 1.0].view(), &mut rng());
        assert_eq!(sel.pair, None);
        assert!(sel.edges.is_empty());
    }

    #[test]
    fn constant_signal_ties_are_seeded() {
        let s = ndarray::Array1::<f64>::zeros(6);
        let members = [0, 1, 2, 3, 4, 5];
        let pick = |stream| select_pair(0, &members, s.view(), &mut Seed(1).stream(stream)).pair;
        assert_eq!(pick(0), pick(0));
        let distinct: std::collections::BTreeSet<_> = (0..64).map(pick).collect();
        assert!(distinct.len() > 5, "ties should spread over many pairs");
        for (a, b) in distinct.into_iter().flatten() {
            assert!(a < b, "equal signals put the smaller index first");
        }
    }

    #[test]
    fn tie_draw_is_uniform() {
        // 4 equal members: 6 candidate pairs.
        let s = ndarray::Array1::<f64>::zeros(4);
        let mut counts = std::collections::BTreeMap::new();
        for stream in 0..6000 {
            let p = select_pair(0, &[0, 1, 2, 3], s.view(), &mut Seed(2).stream(stream)).pair;
            *counts.entry(p).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        for &c in counts.values() {
            assert!((850..1150).contains(&c), "count {c}");
        }
    }

    #[test]
    fn unrank_covers_all_pairs() {
        let k = 5;
        let pairs: Vec<_> = (0..10).map(|r| unrank_pair(r, k)).collect();
        let mut want = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                want.push((i, j));
            }
        }
        assert_eq!(pairs, want);
    }

    #[test]
    fn plan_groups_and_dedups() {
        let sels = vec![
            HyperedgeSelection::from_pair(0, &[0, 1, 2], 0, 1),
            HyperedgeSelection::from_pair(1, &[1, 0], 1, 0),
        ];
        let plan = ExpansionPlan::from_selections(3, sels);
        assert_eq!(plan.instances(), &[(0, 1), (0, 2), (1, 2), (0, 1)]);
        assert_eq!(plan.pairs(), &[(0, 1), (0, 2), (1, 2)]);
        assert_eq!(plan.instance_pair(), &[0, 1, 2, 0]);
        assert_eq!(plan.instance_range(1), 3..4);
        assert_eq!(plan.uniform_weights(), vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0]);
    }
}
