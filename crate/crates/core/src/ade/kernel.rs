//! Distance-aware kernel weights and per-hyperedge normalisation.

use ndarray::{Array1, Array2, ArrayView1};

use crate::autodiff::{softplus, softplus_inv};
use crate::par::{self, Exec};

/// Floor added to the softplus-mapped bandwidths.
pub const THETA_EPS: f64 = 1e-4;
/// Kernel exponents are clamped to `>= -EXPONENT_MAX` before `exp`.
pub const EXPONENT_MAX: f64 = 60.0;
/// Lower bound for the per-hyperedge normalising sum.
pub const DENOM_FLOOR: f64 = 1e-30;

/// Bandwidths, stored unconstrained. The effective value is
/// `softplus(raw) + epsilon`, so it never drops below `epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    pub theta_raw: Array1<f64>,
    pub epsilon: f64,
}

impl KernelParams {
    /// Every effective bandwidth equal to 1.
    pub fn unit(num_features: usize) -> Self {
        Self::with_bandwidth(num_features, 1.0)
    }

    pub fn with_bandwidth(num_features: usize, theta: f64) -> Self {
        assert!(theta > THETA_EPS, "bandwidth must exceed the floor");
        Self {
            theta_raw: Array1::from_elem(num_features, softplus_inv(theta - THETA_EPS)),
            epsilon: THETA_EPS,
        }
    }

    pub fn effective(&self) -> Array1<f64> {
        self.theta_raw.mapv(|r| softplus(r) + self.epsilon)
    }
}

/// Memoised Euclidean distances between rows of the original features,
/// kept as a list sorted by `(min, max)` pair. Batches of sorted pairs (the
/// plan's distinct pairs) are answered with a single merge walk.
#[derive(Debug, Clone, Default)]
pub struct DistanceCache {
    entries: Vec<((usize, usize), f64)>,
}

fn canonical((i, j): (usize, usize)) -> (usize, usize) {
    (i.min(j), i.max(j))
}

impl DistanceCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        if i == j {
            return Some(0.0);
        }
        let key = canonical((i, j));
        self.entries.binary_search_by_key(&key, |e| e.0).ok().map(|k| self.entries[k].1)
    }

    /// Computes every missing pair of `pairs` (possibly in parallel).
    pub fn fill(&mut self, x: &Array2<f64>, pairs: &[(usize, usize)], exec: Exec) {
        self.distances(x, pairs, exec);
    }

    /// Distance of every pair in `pairs`, computing and storing the missing
    /// ones (possibly in parallel). Linear in `pairs` plus the cache size
    /// when `pairs` is sorted, with an extra sort otherwise.
    pub fn distances(&mut self, x: &Array2<f64>, pairs: &[(usize, usize)], exec: Exec) -> Vec<f64> {
        let keys: Vec<(usize, usize)> = pairs.iter().copied().map(canonical).collect();
        let mut order: Vec<usize> = (0..keys.len()).collect();
        if !keys.windows(2).all(|w| w[0] <= w[1]) {
            order.sort_by_key(|&k| keys[k]);
        }

        let mut out = vec![0.0; keys.len()];
        // Distinct missing keys in sorted order, and the slot each one fills.
        let mut missing: Vec<(usize, usize)> = Vec::new();
        let mut pending: Vec<(usize, usize)> = Vec::new();
        let mut c = 0;
        for &k in &order {
            let key = keys[k];
            if key.0 == key.1 {
                continue;
            }
            while c < self.entries.len() && self.entries[c].0 < key {
                c += 1;
            }
            if c < self.entries.len() && self.entries[c].0 == key {
                out[k] = self.entries[c].1;
            } else {
                if missing.last() != Some(&key) {
                    missing.push(key);
                }
                pending.push((k, missing.len() - 1));
            }
        }
        if missing.is_empty() {
            return out;
        }

        let values = par::map_slice(exec, &missing, |_, &(i, j)| euclidean(x, i, j));
        for (k, m) in pending {
            out[k] = values[m];
        }
        self.merge(missing.into_iter().zip(values).collect());
        out
    }

    /// Records distances of sorted, distinct `(min, max)` pairs; pairs
    /// already present keep their stored value.
    pub fn store_sorted(&mut self, pairs: &[(usize, usize)], values: &[f64]) {
        debug_assert!(pairs.windows(2).all(|w| w[0] < w[1]));
        let fresh = if self.entries.is_empty() {
            pairs.iter().copied().zip(values.iter().copied()).filter(|(p, _)| p.0 != p.1).collect()
        } else {
            pairs
                .iter()
                .zip(values)
                .filter(|(p, _)| p.0 != p.1 && self.get(p.0, p.1).is_none())
                .map(|(&p, &v)| (p, v))
                .collect()
        };
        self.merge(fresh);
    }

    /// Merges sorted entries whose keys are absent from the cache.
    fn merge(&mut self, fresh: Vec<((usize, usize), f64)>) {
        if self.entries.is_empty() {
            self.entries = fresh;
            return;
        }
        let old = std::mem::take(&mut self.entries);
        let mut merged = Vec::with_capacity(old.len() + fresh.len());
        let mut fresh = fresh.into_iter().peekable();
        for entry in old {
            while let Some(next) = fresh.next_if(|f| f.0 < entry.0) {
                merged.push(next);
            }
            merged.push(entry);
        }
        merged.extend(fresh);
        self.entries = merged;
    }
}

pub(crate) fn euclidean(x: &Array2<f64>, i: usize, j: usize) -> f64 {
    x.row(i)
        .iter()
        .zip(x.row(j))
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// `‖X_i - X_j‖₂`, memoised in `cache`.
pub fn pair_distance(x: &Array2<f64>, i: usize, j: usize, cache: &mut DistanceCache) -> f64 {
    if let Some(d) = cache.get(i, j) {
        return d;
    }
    cache.distances(x, &[(i, j)], Exec::Sequential)[0]
}

/// `exp(-(1/b) Σ_d U_ij (Xa[i,d] - Xa[j,d])² / θ_d²)`, exponent clamped.
pub fn kernel_weight(x_a: &Array2<f64>, distance: f64, theta: ArrayView1<f64>, i: usize, j: usize) -> f64 {
    let b = x_a.ncols();
    let mut acc = 0.0;
    for d in 0..b {
        let diff = x_a[[i, d]] - x_a[[j, d]];
        acc += distance * diff * diff / (theta[d] * theta[d]);
    }
    (-(acc / b as f64)).max(-EXPONENT_MAX).exp()
}

/// Divides by the sum (floored at [`DENOM_FLOOR`]).
pub fn normalize_weights(raw: &[f64]) -> Vec<f64> {
    let mut out = raw.to_vec();
    normalize_in_place(&mut out);
    out
}

/// [`normalize_weights`] without the allocation.
pub fn normalize_in_place(weights: &mut [f64]) {
    let total = weights.iter().sum::<f64>().max(DENOM_FLOOR);
    for w in weights {
        *w /= total;
    }
}
