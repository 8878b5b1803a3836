//! Seed hierarchy.
//!
//! Every stochastic step draws from a [`Seed`] derived from the run's global
//! seed through fixed labels, so results never depend on thread scheduling or
//! on how many draws an unrelated component made. Indexed substreams (one per
//! hyperedge, per trial, ...) use ChaCha's stream counter.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STRUCTURE: u64 = 0x5354_5255;
pub const LABELS: u64 = 0x4c41_4245;
pub const CLASS_MEANS: u64 = 0x4d45_414e;
pub const FEATURE_NOISE: u64 = 0x4e4f_4953;
pub const SELECT: u64 = 0x5345_4c45;
pub const XI: u64 = 0x5849_0000;
pub const INIT: u64 = 0x494e_4954;
pub const DROPOUT: u64 = 0x4452_4f50;
pub const SPLITS: u64 = 0x5350_4c49;
pub const EPOCH: u64 = 0x4550_4f43;
pub const EVAL: u64 = 0x4556_414c;
pub const REPEAT: u64 = 0x5245_5045;
pub const TRIAL: u64 = 0x5452_4941;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed(pub u64);

impl Seed {
    pub fn new(seed: u64) -> Self {
        Seed(seed)
    }

    /// Child seed for `label`. Distinct labels give unrelated children.
    pub fn derive(self, label: u64) -> Seed {
        Seed(splitmix64(self.0 ^ splitmix64(label.wrapping_add(0x9e37_79b9_7f4a_7c15))))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Independent generator number `index` under this seed.
    pub fn stream(self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(index);
        rng
    }
}

/// Glorot-uniform `rows x cols` matrix, limit `sqrt(6 / (rows + cols))`.
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    let limit = (6.0 / (rows + cols).max(1) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..=limit))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
