//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records every operation of one forward pass; vectors are 1×d
//! rows and node sets are N×d matrices. Parameters are read from a borrowed
//! [`ParameterStore`] and their gradients land in a separate [`Gradients`]
//! buffer, so many tapes can run against one store concurrently.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis, Zip};

use super::params::{Gradients, ParamId, ParameterStore};

/// Handle to a node on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    /// `x · w[start..start + x.cols, ..]`
    MatMulRows {
        x: Var,
        w: Var,
        start: usize,
    },
    Add(Var, Var),
    /// Adds a 1×d row to every row of an N×d matrix.
    AddRow(Var, Var),
    Mul(Var, Var),
    Affine(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Exp(Var),
    Ln {
        x: Var,
        floor: f64,
    },
    Concat(Vec<Var>),
    Stack(Vec<Var>),
    SliceCols {
        x: Var,
        start: usize,
    },
    GatherRows {
        x: Var,
        idx: Vec<usize>,
    },
    ScatterAddRows {
        x: Var,
        idx: Vec<usize>,
    },
    Sum(Var),
    MeanRows(Var),
    SoftmaxRows(Var),
    Transpose(Var),
    Element {
        x: Var,
        row: usize,
        col: usize,
    },
}

struct Node {
    value: Array2<f64>,
    op: Op,
    /// Depends on a parameter or a variable; gradients flow only here.
    tracked: bool,
}

pub struct Tape<'s> {
    store: &'s ParameterStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

/// Gradients of one backward pass with respect to every tape node.
pub struct NodeGrads {
    grads: Vec<Option<Array2<f64>>>,
}

impl NodeGrads {
    /// Gradient for `v`, or `None` when `v` did not influence the output.
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads[v.0].as_ref()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'s> Tape<'s> {
    pub fn new(store: &'s ParameterStore) -> Self {
        Self {
            store,
            nodes: Vec::new(),
            param_vars: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &'s ParameterStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        let tracked = match &op {
            Op::Leaf => false,
            Op::Param(_) => true,
            Op::MatMul(a, b) | Op::Add(a, b) | Op::AddRow(a, b) | Op::Mul(a, b) => {
                self.tracked(*a) || self.tracked(*b)
            }
            Op::MatMulRows { x, w, .. } => self.tracked(*x) || self.tracked(*w),
            Op::Affine(x, _)
            | Op::Relu(x)
            | Op::Sigmoid(x)
            | Op::Tanh(x)
            | Op::Exp(x)
            | Op::Ln { x, .. }
            | Op::SliceCols { x, .. }
            | Op::GatherRows { x, .. }
            | Op::ScatterAddRows { x, .. }
            | Op::Sum(x)
            | Op::MeanRows(x)
            | Op::SoftmaxRows(x)
            | Op::Transpose(x)
            | Op::Element { x, .. } => self.tracked(*x),
            Op::Concat(parts) | Op::Stack(parts) => parts.iter().any(|&p| self.tracked(p)),
        };
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    pub fn value(&self, v: Var) -> ArrayView2<'_, f64> {
        match self.nodes[v.0].op {
            Op::Param(id) => self.store.value(id).view(),
            _ => self.nodes[v.0].value.view(),
        }
    }

    /// Value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        let x = self.value(v);
        assert_eq!(x.dim(), (1, 1), "scalar() on a non-scalar node");
        x[[0, 0]]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).dim()
    }

    /// Input without gradient.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Input whose gradient is reported by [`Tape::backward`].
    pub fn variable(&mut self, value: Array2<f64>) -> Var {
        let v = self.push(value, Op::Leaf);
        self.nodes[v.0].tracked = true;
        v
    }

    pub fn row(&mut self, values: &[f64]) -> Var {
        self.constant(Array2::from_shape_vec((1, values.len()), values.to_vec()).expect("row"))
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        self.constant(Array2::zeros((rows, cols)))
    }

    /// Tape node for a stored parameter; one node per parameter per tape.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        let v = self.push(Array2::zeros((0, 0)), Op::Param(id));
        self.param_vars[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(&self.value(b));
        self.push(value, Op::MatMul(a, b))
    }

    /// Product of `x` with the row block of `w` starting at `start`; lets a
    /// linear layer over a concatenated input skip materializing the concat.
    pub fn matmul_rows(&mut self, x: Var, w: Var, start: usize) -> Var {
        let k = self.shape(x).1;
        let value = {
            let wv = self.value(w);
            assert!(start + k <= wv.nrows(), "row block out of range");
            self.value(x).dot(&wv.slice(s![start..start + k, ..]))
        };
        self.push(value, Op::MatMulRows { x, w, start })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add: shape mismatch");
        let value = &self.value(a) + &self.value(b);
        self.push(value, Op::Add(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(
            self.shape(row).0,
            1,
            "add_row: second operand must be one row"
        );
        assert_eq!(
            self.shape(a).1,
            self.shape(row).1,
            "add_row: width mismatch"
        );
        let value = &self.value(a) + &self.value(row);
        self.push(value, Op::AddRow(a, row))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul: shape mismatch");
        let value = &self.value(a) * &self.value(b);
        self.push(value, Op::Mul(a, b))
    }

    /// `alpha * x + beta`.
    pub fn affine(&mut self, x: Var, alpha: f64, beta: f64) -> Var {
        let value = self.value(x).mapv(|v| alpha * v + beta);
        self.push(value, Op::Affine(x, alpha))
    }

    pub fn scale(&mut self, x: Var, alpha: f64) -> Var {
        self.affine(x, alpha, 0.0)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).mapv(|v| v.max(0.0));
        self.push(value, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).mapv(sigmoid);
        self.push(value, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.value(x).mapv(f64::tanh);
        self.push(value, Op::Tanh(x))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let value = self.value(x).mapv(f64::exp);
        self.push(value, Op::Exp(x))
    }

    /// Natural log of `max(x, floor)`; the gradient is zero where clamped.
    pub fn ln_clamped(&mut self, x: Var, floor: f64) -> Var {
        let value = self.value(x).mapv(|v| v.max(floor).ln());
        self.push(value, Op::Ln { x, floor })
    }

    pub fn ln(&mut self, x: Var) -> Var {
        self.ln_clamped(x, 0.0)
    }

    /// Horizontal concatenation of matrices with equal row counts.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat of nothing");
        let value = {
            let views: Vec<ArrayView2<f64>> = parts.iter().map(|&p| self.value(p)).collect();
            concatenate(Axis(1), &views).expect("concat: row counts differ")
        };
        self.push(value, Op::Concat(parts.to_vec()))
    }

    /// Vertical concatenation of matrices with equal column counts.
    pub fn stack(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "stack of nothing");
        let value = {
            let views: Vec<ArrayView2<f64>> = parts.iter().map(|&p| self.value(p)).collect();
            concatenate(Axis(0), &views).expect("stack: column counts differ")
        };
        self.push(value, Op::Stack(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Var {
        let value = self.value(x).slice(s![.., start..start + len]).to_owned();
        self.push(value, Op::SliceCols { x, start })
    }

    /// Row `i` of the output is row `idx[i]` of `x`.
    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Var {
        let value = self.value(x).select(Axis(0), idx);
        self.push(
            value,
            Op::GatherRows {
                x,
                idx: idx.to_vec(),
            },
        )
    }

    /// `rows`×d output where row `idx[i]` accumulates row `i` of `x`.
    pub fn scatter_add_rows(&mut self, x: Var, idx: &[usize], rows: usize) -> Var {
        let xv = self.value(x);
        assert_eq!(xv.nrows(), idx.len(), "scatter: index length mismatch");
        let mut value = Array2::zeros((rows, xv.ncols()));
        for (i, &t) in idx.iter().enumerate() {
            let mut dst = value.row_mut(t);
            dst += &xv.row(i);
        }
        self.push(
            value,
            Op::ScatterAddRows {
                x,
                idx: idx.to_vec(),
            },
        )
    }

    /// Sum of all entries, as 1×1.
    pub fn sum(&mut self, x: Var) -> Var {
        let value = Array2::from_elem((1, 1), self.value(x).sum());
        self.push(value, Op::Sum(x))
    }

    /// Column means (1×d).
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        assert!(xv.nrows() > 0, "mean over zero rows");
        let value = xv
            .mean_axis(Axis(0))
            .expect("nonempty")
            .insert_axis(Axis(0));
        self.push(value, Op::MeanRows(x))
    }

    /// Row-wise softmax.
    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        assert!(xv.ncols() > 0, "softmax of an empty vector");
        let mut value = xv.to_owned();
        for mut row in value.rows_mut() {
            let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            row.mapv_inplace(|v| (v - m).exp());
            let z = row.sum();
            row.mapv_inplace(|v| v / z);
        }
        self.push(value, Op::SoftmaxRows(x))
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let value = self.value(x).t().to_owned();
        self.push(value, Op::Transpose(x))
    }

    /// Single entry as 1×1.
    pub fn element(&mut self, x: Var, row: usize, col: usize) -> Var {
        let value = Array2::from_elem((1, 1), self.value(x)[[row, col]]);
        self.push(value, Op::Element { x, row, col })
    }

    /// Backpropagates from the 1×1 node `out`, adding parameter gradients to
    /// `params` and returning gradients for every node.
    pub fn backward(&self, out: Var, params: &mut Gradients) -> NodeGrads {
        assert_eq!(self.shape(out), (1, 1), "backward from a non-scalar");
        let mut grads: Vec<Option<Array2<f64>>> = Vec::with_capacity(out.0 + 1);
        grads.resize_with(out.0 + 1, || None);
        grads[out.0] = Some(Array2::ones((1, 1)));
        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else {
                continue;
            };
            if !self.nodes[i].tracked {
                continue;
            }
            self.backprop_node(i, &g, &mut grads, params);
            grads[i] = Some(g);
        }
        NodeGrads { grads }
    }

    fn backprop_node(
        &self,
        i: usize,
        g: &Array2<f64>,
        grads: &mut [Option<Array2<f64>>],
        params: &mut Gradients,
    ) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::Param(id) => params.accumulate(*id, g),
            Op::MatMul(a, b) => {
                if self.tracked(*a) {
                    acc(grads, *a, g.dot(&self.value(*b).t()));
                }
                if self.tracked(*b) {
                    acc(grads, *b, self.value(*a).t().dot(g));
                }
            }
            Op::MatMulRows { x, w, start } => {
                let xv = self.value(*x);
                let k = xv.ncols();
                let wv = self.value(*w);
                if self.tracked(*x) {
                    acc(grads, *x, g.dot(&wv.slice(s![*start..*start + k, ..]).t()));
                }
                if self.tracked(*w) {
                    let slot = grads[w.0].get_or_insert_with(|| Array2::zeros(wv.dim()));
                    ndarray::linalg::general_mat_mul(
                        1.0,
                        &xv.t(),
                        g,
                        1.0,
                        &mut slot.slice_mut(s![*start..*start + k, ..]),
                    );
                }
            }
            Op::Add(a, b) => {
                acc(grads, *a, g.clone());
                acc(grads, *b, g.clone());
            }
            Op::AddRow(a, row) => {
                acc(grads, *a, g.clone());
                acc(grads, *row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }
            Op::Mul(a, b) => {
                if self.tracked(*a) {
                    acc(grads, *a, g * &self.value(*b));
                }
                if self.tracked(*b) {
                    acc(grads, *b, g * &self.value(*a));
                }
            }
            Op::Affine(x, alpha) => acc(grads, *x, g * *alpha),
            Op::Relu(x) => {
                let mut gx = g.clone();
                Zip::from(&mut gx).and(&self.value(*x)).for_each(|d, &v| {
                    if v <= 0.0 {
                        *d = 0.0
                    }
                });
                acc(grads, *x, gx);
            }
            Op::Sigmoid(x) => {
                let mut gx = g.clone();
                Zip::from(&mut gx)
                    .and(&node.value)
                    .for_each(|d, &y| *d *= y * (1.0 - y));
                acc(grads, *x, gx);
            }
            Op::Tanh(x) => {
                let mut gx = g.clone();
                Zip::from(&mut gx)
                    .and(&node.value)
                    .for_each(|d, &y| *d *= 1.0 - y * y);
                acc(grads, *x, gx);
            }
            Op::Exp(x) => acc(grads, *x, g * &node.value),
            Op::Ln { x, floor } => {
                let mut gx = g.clone();
                Zip::from(&mut gx).and(&self.value(*x)).for_each(|d, &v| {
                    *d = if v > *floor { *d / v } else { 0.0 };
                });
                acc(grads, *x, gx);
            }
            Op::Concat(parts) => {
                let mut start = 0;
                for &p in parts {
                    let w = self.shape(p).1;
                    acc(grads, p, g.slice(s![.., start..start + w]).to_owned());
                    start += w;
                }
            }
            Op::Stack(parts) => {
                let mut start = 0;
                for &p in parts {
                    let h = self.shape(p).0;
                    acc(grads, p, g.slice(s![start..start + h, ..]).to_owned());
                    start += h;
                }
            }
            Op::SliceCols { x, start } => {
                let mut gx = Array2::zeros(self.shape(*x));
                let w = g.ncols();
                gx.slice_mut(s![.., *start..*start + w]).assign(g);
                acc(grads, *x, gx);
            }
            Op::GatherRows { x, idx } => {
                let mut gx = Array2::zeros(self.shape(*x));
                for (r, &src) in idx.iter().enumerate() {
                    let mut dst = gx.row_mut(src);
                    dst += &g.row(r);
                }
                acc(grads, *x, gx);
            }
            Op::ScatterAddRows { x, idx } => acc(grads, *x, g.select(Axis(0), idx)),
            Op::Sum(x) => acc(grads, *x, Array2::from_elem(self.shape(*x), g[[0, 0]])),
            Op::MeanRows(x) => {
                let (n, d) = self.shape(*x);
                let row = g / n as f64;
                acc(
                    grads,
                    *x,
                    row.broadcast((n, d)).expect("row broadcast").to_owned(),
                );
            }
            Op::SoftmaxRows(x) => {
                let y = &node.value;
                let mut gx = g * y;
                for (mut r, yr) in gx.rows_mut().into_iter().zip(y.rows()) {
                    let dot = r.sum();
                    Zip::from(&mut r).and(&yr).for_each(|d, &p| *d -= p * dot);
                }
                acc(grads, *x, gx);
            }
            Op::Transpose(x) => acc(grads, *x, g.t().to_owned()),
            Op::Element { x, row, col } => {
                let mut gx = Array2::zeros(self.shape(*x));
                gx[[*row, *col]] = g[[0, 0]];
                acc(grads, *x, gx);
            }
        }
    }
}

/// Adds `g` to the gradient slot of `v`. Slots of untracked nodes are
/// skipped in [`Tape::backward`], so stray contributions are harmless.
fn acc(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
    match &mut grads[v.0] {
        Some(existing) => *existing += &g,
        slot @ None => *slot = Some(g),
    }
}
