//! Tape-based reverse-mode automatic differentiation over dense `f64`
//! matrices.
//!
//! Every operation appends a node to the [`Tape`] and returns a [`Var`]
//! handle; the tape is therefore always in topological order. Leaves are
//! either parameters (gradients wanted) or constants. [`Tape::backward`]
//! walks the nodes in reverse and returns a [`Gradients`] table.
//!
//! Column vectors are `n x 1` matrices and scalars are `1 x 1`. Sparse
//! adjacency products go through [`Tape::spmm_sym`], which takes the edge
//! weights as a differentiable `E x 1` input.
//!
//! ```
//! use hyperx::autodiff::Tape;
//! use ndarray::array;
//!
//! let mut tape = Tape::new();
//! let x = tape.param(array![[1.0, 2.0]]);
//! let sq = tape.mul(x, x).unwrap();
//! let loss = tape.sum(sq);
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(x).unwrap(), &array![[2.0, 4.0]]);
//! ```

use std::rc::Rc;

use ndarray::{Array2, Axis, Zip};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    /// `n x k` times a `1 x k` row, broadcast down the rows.
    RowBroadcastMul(Var, Var),
    /// `n x k` times an `n x 1` column, broadcast across the columns.
    ColBroadcastMul(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Exp(Var),
    Neg(Var),
    Scale(Var, f64),
    AddScalar(Var),
    Softplus(Var),
    Powf(Var, f64),
    ClampMin(Var, f64),
    RowSum(Var),
    ColMean(Var),
    Sum(Var),
    LogSoftmax(Var),
    MaskedMean(Var, Rc<[(usize, usize)]>),
    GatherRows(Var, Rc<[usize]>),
    SegmentSum(Var, Rc<[usize]>),
    SpmmSym {
        pairs: Rc<[(usize, usize)]>,
        weights: Var,
        diag: Option<Var>,
        x: Var,
    },
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf whose gradient is reported by [`Tape::backward`].
    pub fn param(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// Scalar value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    fn push(&mut self, value: Array2<f64>, op: Op, leaf_grad: bool) -> Var {
        let needs_grad = match &op {
            Op::Leaf => leaf_grad,
            op => inputs(op).iter().any(|v| self.nodes[v.0].needs_grad),
        };
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::Shape { op, lhs: sa, rhs: sb });
        }
        Ok(())
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let value = self.value(a).mapv(f);
        self.push(value, op, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(Error::Shape { op: "matmul", lhs: sa, rhs: sb });
        }
        let value = self.value(a).dot(self.value(b));
        Ok(self.push(value, Op::MatMul(a, b), false))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).t().to_owned();
        self.push(value, Op::Transpose(a), false)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let value = self.value(a) + self.value(b);
        Ok(self.push(value, Op::Add(a, b), false))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let value = self.value(a) - self.value(b);
        Ok(self.push(value, Op::Sub(a, b), false))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let value = self.value(a) * self.value(b);
        Ok(self.push(value, Op::Mul(a, b), false))
    }

    /// Elementwise quotient.
    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("div", a, b)?;
        let value = self.value(a) / self.value(b);
        Ok(self.push(value, Op::Div(a, b), false))
    }

    pub fn row_broadcast_mul(&mut self, a: Var, row: Var) -> Result<Var> {
        let (sa, sr) = (self.shape(a), self.shape(row));
        if sr != (1, sa.1) {
            return Err(Error::Shape { op: "row_broadcast_mul", lhs: sa, rhs: sr });
        }
        let value = self.value(a) * self.value(row);
        Ok(self.push(value, Op::RowBroadcastMul(a, row), false))
    }

    pub fn col_broadcast_mul(&mut self, a: Var, col: Var) -> Result<Var> {
        let (sa, sc) = (self.shape(a), self.shape(col));
        if sc != (sa.0, 1) {
            return Err(Error::Shape { op: "col_broadcast_mul", lhs: sa, rhs: sc });
        }
        let value = self.value(a) * self.value(col);
        Ok(self.push(value, Op::ColBroadcastMul(a, col), false))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Op::Exp(a), f64::exp)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(a, Op::Neg(a), |x| -x)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::Scale(a, c), |x| c * x)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::AddScalar(a), |x| x + c)
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, Op::Softplus(a), softplus)
    }

    pub fn powf(&mut self, a: Var, p: f64) -> Var {
        self.unary(a, Op::Powf(a, p), |x| x.powf(p))
    }

    /// `max(a, lo)`; the gradient is zero where the floor is active.
    pub fn clamp_min(&mut self, a: Var, lo: f64) -> Var {
        self.unary(a, Op::ClampMin(a, lo), |x| x.max(lo))
    }

    /// `n x k -> n x 1`.
    pub fn row_sum(&mut self, a: Var) -> Var {
        let value = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.push(value, Op::RowSum(a), false)
    }

    /// `n x k -> 1 x k`. Needs `n >= 1`.
    pub fn col_mean(&mut self, a: Var) -> Result<Var> {
        let s = self.shape(a);
        if s.0 == 0 {
            return Err(Error::Shape { op: "col_mean", lhs: s, rhs: (1, s.1) });
        }
        let value = self.value(a).sum_axis(Axis(0)).insert_axis(Axis(0)) / s.0 as f64;
        Ok(self.push(value, Op::ColMean(a), false))
    }

    /// Sum of all entries as a `1 x 1`.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(value, Op::Sum(a), false)
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        let mut value = self.value(a).clone();
        for mut row in value.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
            row.mapv_inplace(|x| x - lse);
        }
        self.push(value, Op::LogSoftmax(a), false)
    }

    /// Mean of the entries at `(row, col)` positions, as a `1 x 1`.
    pub fn masked_mean(&mut self, a: Var, positions: impl Into<Rc<[(usize, usize)]>>) -> Result<Var> {
        let positions = positions.into();
        if positions.is_empty() {
            return Err(Error::EmptyMask);
        }
        let s = self.shape(a);
        if let Some(&p) = positions.iter().find(|&&(r, c)| r >= s.0 || c >= s.1) {
            return Err(Error::Shape { op: "masked_mean", lhs: s, rhs: p });
        }
        let v = self.value(a);
        let mean = positions.iter().map(|&p| v[p]).sum::<f64>() / positions.len() as f64;
        Ok(self.push(Array2::from_elem((1, 1), mean), Op::MaskedMean(a, positions), false))
    }

    /// `out[r] = a[index[r]]`.
    pub fn gather_rows(&mut self, a: Var, index: impl Into<Rc<[usize]>>) -> Result<Var> {
        let index = index.into();
        let s = self.shape(a);
        if let Some(&bad) = index.iter().find(|&&i| i >= s.0) {
            return Err(Error::Shape { op: "gather_rows", lhs: s, rhs: (bad, 0) });
        }
        let value = self.value(a).select(Axis(0), &index);
        Ok(self.push(value, Op::GatherRows(a, index), false))
    }

    /// `out[segment[r]] += a[r]`, with `num_segments` output rows. Rows are
    /// added in input order.
    pub fn segment_sum(
        &mut self,
        a: Var,
        segment: impl Into<Rc<[usize]>>,
        num_segments: usize,
    ) -> Result<Var> {
        let segment = segment.into();
        let s = self.shape(a);
        if segment.len() != s.0 || segment.iter().any(|&g| g >= num_segments) {
            return Err(Error::Shape { op: "segment_sum", lhs: s, rhs: (segment.len(), num_segments) });
        }
        let src = self.value(a);
        let mut value = Array2::zeros((num_segments, s.1));
        for (r, &g) in segment.iter().enumerate() {
            let mut dst = value.row_mut(g);
            dst += &src.row(r);
        }
        Ok(self.push(value, Op::SegmentSum(a, segment), false))
    }

    /// Symmetric sparse product `Y = A X` where `A[u][v] = A[v][u] = w_k` for
    /// `pairs[k] = (u, v)` and `A[i][i] = diag[i]` when given. Repeated pairs
    /// add up.
    pub fn spmm_sym(
        &mut self,
        pairs: impl Into<Rc<[(usize, usize)]>>,
        weights: Var,
        diag: Option<Var>,
        x: Var,
    ) -> Result<Var> {
        let pairs = pairs.into();
        let (sw, sx) = (self.shape(weights), self.shape(x));
        if sw != (pairs.len(), 1) {
            return Err(Error::Shape { op: "spmm_sym weights", lhs: sw, rhs: (pairs.len(), 1) });
        }
        if let Some(&(u, v)) = pairs.iter().find(|&&(u, v)| u.max(v) >= sx.0) {
            return Err(Error::Shape { op: "spmm_sym pair", lhs: sx, rhs: (u, v) });
        }
        if let Some(d) = diag {
            let sd = self.shape(d);
            if sd != (sx.0, 1) {
                return Err(Error::Shape { op: "spmm_sym diag", lhs: sd, rhs: (sx.0, 1) });
            }
        }
        let xv = self.value(x);
        let wv = self.value(weights);
        let mut value = match diag {
            Some(d) => xv * self.value(d),
            None => Array2::zeros(sx),
        };
        for (k, &(u, v)) in pairs.iter().enumerate() {
            let w = wv[[k, 0]];
            value.row_mut(u).scaled_add(w, &xv.row(v));
            value.row_mut(v).scaled_add(w, &xv.row(u));
        }
        Ok(self.push(value, Op::SpmmSym { pairs, weights, diag, x }, false))
    }

    /// Reverse pass from a `1 x 1` loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let s = self.shape(loss);
        if s != (1, 1) {
            return Err(Error::NonScalarLoss(s));
        }
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Array2::ones((1, 1)));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }

        let params = self
            .nodes
            .iter()
            .enumerate()
            .take(loss.0 + 1)
            .map(|(i, n)| match n.op {
                Op::Leaf if n.needs_grad => grads[i]
                    .take()
                    .or_else(|| Some(Array2::zeros(n.value.raw_dim()))),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads: params })
    }

    fn propagate(&self, node: &Node, g: &Array2<f64>, grads: &mut [Option<Array2<f64>>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        let wants = |v: Var| self.nodes[v.0].needs_grad;
        let mut acc = |v: Var, delta: Array2<f64>| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => *existing += &delta,
                slot => *slot = Some(delta),
            }
        };
        let y = &node.value;

        match &node.op {
            Op::Leaf => {}
            &Op::MatMul(a, b) => {
                if wants(a) {
                    acc(a, g.dot(&val(b).t()));
                }
                if wants(b) {
                    acc(b, val(a).t().dot(g));
                }
            }
            &Op::Transpose(a) => acc(a, g.t().to_owned()),
            &Op::Add(a, b) => {
                acc(a, g.clone());
                acc(b, g.clone());
            }
            &Op::Sub(a, b) => {
                acc(a, g.clone());
                acc(b, -g);
            }
            &Op::Mul(a, b) => {
                if wants(a) {
                    acc(a, g * val(b));
                }
                if wants(b) {
                    acc(b, g * val(a));
                }
            }
            &Op::Div(a, b) => {
                if wants(a) {
                    acc(a, g / val(b));
                }
                if wants(b) {
                    let mut d = g * y;
                    d /= val(b);
                    acc(b, -d);
                }
            }
            &Op::RowBroadcastMul(a, r) => {
                if wants(a) {
                    acc(a, g * val(r));
                }
                if wants(r) {
                    acc(r, (g * val(a)).sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
            }
            &Op::ColBroadcastMul(a, c) => {
                if wants(a) {
                    acc(a, g * val(c));
                }
                if wants(c) {
                    acc(c, (g * val(a)).sum_axis(Axis(1)).insert_axis(Axis(1)));
                }
            }
            &Op::Relu(a) => {
                let mut d = g.clone();
                Zip::from(&mut d).and(val(a)).for_each(|d, &x| {
                    if x <= 0.0 {
                        *d = 0.0
                    }
                });
                acc(a, d);
            }
            &Op::Sigmoid(a) => acc(a, g * &y.mapv(|s| s * (1.0 - s))),
            &Op::Exp(a) => acc(a, g * y),
            &Op::Neg(a) => acc(a, -g),
            &Op::Scale(a, c) => acc(a, g * c),
            &Op::AddScalar(a) => acc(a, g.clone()),
            &Op::Softplus(a) => acc(a, g * &val(a).mapv(sigmoid)),
            &Op::Powf(a, p) => acc(a, g * &val(a).mapv(|x| p * x.powf(p - 1.0))),
            &Op::ClampMin(a, lo) => {
                let mut d = g.clone();
                Zip::from(&mut d).and(val(a)).for_each(|d, &x| {
                    if x < lo {
                        *d = 0.0
                    }
                });
                acc(a, d);
            }
            &Op::RowSum(a) => {
                let k = val(a).ncols();
                acc(a, g.broadcast((g.nrows(), k)).unwrap().to_owned());
            }
            &Op::ColMean(a) => {
                let n = val(a).nrows();
                acc(a, g.broadcast((n, g.ncols())).unwrap().to_owned() / n as f64);
            }
            &Op::Sum(a) => acc(a, Array2::from_elem(val(a).raw_dim(), g[[0, 0]])),
            &Op::LogSoftmax(a) => {
                // d = g - softmax * rowsum(g)
                let mut d = g.clone();
                for ((mut drow, grow), yrow) in d.rows_mut().into_iter().zip(g.rows()).zip(y.rows()) {
                    let total = grow.sum();
                    Zip::from(&mut drow).and(&yrow).for_each(|d, &ly| *d -= ly.exp() * total);
                }
                acc(a, d);
            }
            Op::MaskedMean(a, positions) => {
                let mut d = Array2::zeros(val(*a).raw_dim());
                let share = g[[0, 0]] / positions.len() as f64;
                for &p in positions.iter() {
                    d[p] += share;
                }
                acc(*a, d);
            }
            Op::GatherRows(a, index) => {
                let mut d = Array2::zeros(val(*a).raw_dim());
                for (r, &i) in index.iter().enumerate() {
                    let mut dst = d.row_mut(i);
                    dst += &g.row(r);
                }
                acc(*a, d);
            }
            Op::SegmentSum(a, segment) => acc(*a, g.select(Axis(0), segment)),
            Op::SpmmSym { pairs, weights, diag, x } => {
                let xv = val(*x);
                if wants(*x) {
                    let mut dx = match diag {
                        Some(d) => g * val(*d),
                        None => Array2::zeros(xv.raw_dim()),
                    };
                    let wv = val(*weights);
                    for (k, &(u, v)) in pairs.iter().enumerate() {
                        let w = wv[[k, 0]];
                        dx.row_mut(v).scaled_add(w, &g.row(u));
                        dx.row_mut(u).scaled_add(w, &g.row(v));
                    }
                    acc(*x, dx);
                }
                if wants(*weights) {
                    let dw = pairs
                        .iter()
                        .map(|&(u, v)| g.row(u).dot(&xv.row(v)) + g.row(v).dot(&xv.row(u)))
                        .collect::<Vec<_>>();
                    acc(*weights, Array2::from_shape_vec((pairs.len(), 1), dw).unwrap());
                }
                if let Some(d) = *diag {
                    if wants(d) {
                        acc(d, (g * xv).sum_axis(Axis(1)).insert_axis(Axis(1)));
                    }
                }
            }
        }
    }
}

fn inputs(op: &Op) -> Vec<Var> {
    match op {
        Op::Leaf => vec![],
        Op::MatMul(a, b)
        | Op::Add(a, b)
        | Op::Sub(a, b)
        | Op::Mul(a, b)
        | Op::Div(a, b)
        | Op::RowBroadcastMul(a, b)
        | Op::ColBroadcastMul(a, b) => vec![*a, *b],
        Op::Transpose(a)
        | Op::Relu(a)
        | Op::Sigmoid(a)
        | Op::Exp(a)
        | Op::Neg(a)
        | Op::Scale(a, _)
        | Op::AddScalar(a)
        | Op::Softplus(a)
        | Op::Powf(a, _)
        | Op::ClampMin(a, _)
        | Op::RowSum(a)
        | Op::ColMean(a)
        | Op::Sum(a)
        | Op::LogSoftmax(a)
        | Op::MaskedMean(a, _)
        | Op::GatherRows(a, _)
        | Op::SegmentSum(a, _) => vec![*a],
        Op::SpmmSym { weights, diag, x, .. } => {
            let mut v = vec![*weights, *x];
            v.extend(diag);
            v
        }
    }
}

/// Gradients of the loss with respect to every parameter leaf.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    /// `None` for constants and for nodes created after the loss.
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Inverse of [`softplus`] for `y > 0`.
pub fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}
