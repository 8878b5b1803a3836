//! Global feature gate: mean pooling followed by a two-layer sigmoid gate
//! that rescales every feature dimension.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::autodiff::sigmoid;
use crate::rng::glorot_uniform;
use crate::{Error, Result};

/// Gate weights: `w1` is `h x b`, `w2` is `b x h`.
#[derive(Debug, Clone, PartialEq)]
pub struct GsiNetParams {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
}

impl GsiNetParams {
    pub fn new(w1: Array2<f64>, w2: Array2<f64>) -> Result<Self> {
        if w1.nrows() != w2.ncols() || w1.ncols() != w2.nrows() {
            return Err(Error::Shape { op: "gsi params", lhs: w1.dim(), rhs: w2.dim() });
        }
        Ok(Self { w1, w2 })
    }

    pub fn zeros(num_features: usize, hidden: usize) -> Self {
        Self {
            w1: Array2::zeros((hidden, num_features)),
            w2: Array2::zeros((num_features, hidden)),
        }
    }

    pub fn glorot(num_features: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Self {
            w1: glorot_uniform(hidden, num_features, rng),
            w2: glorot_uniform(num_features, hidden, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w1.nrows()
    }

    pub fn num_features(&self) -> usize {
        self.w1.ncols()
    }
}

/// `max(16, ceil(b / 4))`.
pub fn default_hidden(num_features: usize) -> usize {
    num_features.div_ceil(4).max(16)
}

/// Column-wise mean of `x`.
pub fn global_pool(x: &Array2<f64>) -> Result<Array1<f64>> {
    x.mean_axis(Axis(0)).ok_or(Error::Shape { op: "global_pool", lhs: x.dim(), rhs: (1, x.ncols()) })
}

/// `sigmoid(W2 relu(W1 x_g))`, one gate value per feature in `(0, 1)`.
pub fn si_net_forward(x_g: &Array1<f64>, p: &GsiNetParams) -> Result<Array1<f64>> {
    if p.w1.ncols() != x_g.len() {
        return Err(Error::Shape { op: "si_net_forward", lhs: p.w1.dim(), rhs: (x_g.len(), 1) });
    }
    let hidden = p.w1.dot(x_g).mapv(|z| z.max(0.0));
    Ok(p.w2.dot(&hidden).mapv(sigmoid))
}

/// Row-broadcast product `X ⊙ w_g`.
pub fn scale_features(x: &Array2<f64>, w_g: &Array1<f64>) -> Result<Array2<f64>> {
    if x.ncols() != w_g.len() {
        return Err(Error::Shape { op: "scale_features", lhs: x.dim(), rhs: (1, w_g.len()) });
    }
    Ok(x * w_g)
}

/// Per-node row sum of the scaled features.
pub fn compute_signal(x_a: &Array2<f64>) -> Array1<f64> {
    x_a.sum_axis(Axis(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;
    use ndarray::array;

    #[test]
    fn pool_is_column_mean() {
        assert_eq!(global_pool(&array![[1.0, 3.0], [3.0, 5.0]]).unwrap(), array![2.0, 4.0]);
        assert_eq!(global_pool(&array![[7.0, -1.0]]).unwrap(), array![7.0, -1.0]);
        assert!(global_pool(&Array2::zeros((0, 3))).is_err());
    }

    #[test]
    fn zero_gate_is_one_half() {
        let w_g = si_net_forward(&array![1.0, -2.0, 3.0], &GsiNetParams::zeros(3, 4)).unwrap();
        assert!(w_g.iter().all(|&w| w == 0.5));
    }

    #[test]
    fn relu_kills_negative_pool() {
        let p = GsiNetParams::new(array![[1.0]], array![[1.0]]).unwrap();
        assert_eq!(si_net_forward(&array![-3.0], &p).unwrap(), array![0.5]);
    }

    #[test]
    fn gate_matches_elementwise_evaluation() {
        let mut rng = Seed(3).rng();
        let (b, h) = (5, 7);
        let p = GsiNetParams::glorot(b, h, &mut rng);
        let x_g = array![0.3, -1.2, 2.0, 0.0, 0.7];
        let got = si_net_forward(&x_g, &p).unwrap();
        for d in 0..b {
            let mut z = 0.0;
            for k in 0..h {
                let mut a = 0.0;
                for j in 0..b {
                    a += p.w1[[k, j]] * x_g[j];
                }
                z += p.w2[[d, k]] * a.max(0.0);
            }
            let want = 1.0 / (1.0 + (-z).exp());
            assert!((got[d] - want).abs() < 1e-14);
            assert!(got[d] > 0.0 && got[d] < 1.0);
        }
    }

    #[test]
    fn shape_checks() {
        assert!(GsiNetParams::new(Array2::zeros((2, 3)), Array2::zeros((2, 3))).is_err());
        assert!(si_net_forward(&array![1.0], &GsiNetParams::zeros(2, 2)).is_err());
        assert!(scale_features(&Array2::zeros((2, 2)), &array![1.0]).is_err());
    }

    #[test]
    fn scaling_and_signal() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(scale_features(&x, &array![1.0, 1.0]).unwrap(), x);
        assert_eq!(scale_features(&x, &array![0.0, 0.0]).unwrap(), Array2::zeros((2, 2)));
        assert_eq!(scale_features(&x, &array![0.5, 2.0]).unwrap(), array![[0.5, 4.0], [1.5, 8.0]]);
        assert_eq!(compute_signal(&x), array![3.0, 7.0]);
        assert_eq!(compute_signal(&Array2::zeros((3, 2))), array![0.0, 0.0, 0.0]);
        assert_eq!(default_hidden(8), 16);
        assert_eq!(default_hidden(1433), 359);
    }
}
