use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Local gradient of a user-defined op: `(upstream, inputs, output) -> one
/// gradient per input`.
pub type BackwardFn = Box<dyn Fn(&Tensor, &[&Tensor], &Tensor) -> Vec<Tensor> + Send + Sync>;

enum Op {
    Leaf,
    Param,
    MatMul { a: Var, b: Var, m: usize, n: usize, p: usize },
    Add(Var, Var),
    AddRows(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Concat(Vec<Var>),
    StackRows(Vec<Var>),
    Slice { input: Var, start: usize },
    Tanh(Var),
    Sigmoid(Var),
    Softmax { input: Var, axis: usize },
    Ln(Var),
    Select { input: Var, index: usize },
    Sum(Var),
    Dropout { input: Var, mask: Vec<f64> },
    Embedding { table: Var, row: usize },
    Gather { table: Var, rows: Vec<usize> },
    CrossEntropy { logits: Var, class: usize, probs: Vec<f64> },
    Custom { inputs: Vec<Var>, backward: BackwardFn },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Records operations in execution order; backward replays them in exact
/// reverse.
///
/// A tape is single-owner. Each worker builds its own tape against a shared
/// (read-only) [`ParamStore`].
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

/// Per-node gradients produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<(ParamId, Var, Vec<usize>)>,
}

impl Gradients {
    /// Gradient of the loss with respect to `var`, if the loss depends on it.
    pub fn wrt(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// The gradient of every parameter recorded on the tape, zeros where the
    /// loss does not depend on it. Lets workers hand gradients back for a
    /// serial, ordered reduction.
    pub fn into_param_grads(mut self) -> Vec<(ParamId, Tensor)> {
        let params = std::mem::take(&mut self.params);
        params
            .into_iter()
            .map(|(id, var, shape)| {
                let g = self.grads.get_mut(var.0).and_then(Option::take);
                (id, g.unwrap_or_else(|| Tensor::zeros(&shape)))
            })
            .collect()
    }

    /// Adds the gradient of every parameter recorded on the tape into `store`.
    /// Parameters the loss does not depend on receive zeros.
    pub fn accumulate(&self, store: &mut ParamStore) {
        for (id, var, shape) in &self.params {
            match self.wrt(*var) {
                Some(g) => store.accumulate_grad(*id, g),
                None => store.accumulate_grad(*id, &Tensor::zeros(shape)),
            }
        }
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
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

/// `(outer, len, stride)` lanes for a softmax over `axis`.
fn lanes(shape: &[usize], axis: usize) -> Vec<(usize, usize, usize)> {
    match (shape.len(), axis) {
        (1, 0) => vec![(0, shape[0], 1)],
        (2, 1) => (0..shape[0]).map(|r| (r * shape[1], shape[1], 1)).collect(),
        (2, 0) => (0..shape[1]).map(|c| (c, shape[0], shape[1])).collect(),
        _ => unreachable!(),
    }
}

fn softmax_lane(x: &[f64], out: &mut [f64], start: usize, len: usize, stride: usize) {
    let mut max = f64::NEG_INFINITY;
    for i in 0..len {
        max = max.max(x[start + i * stride]);
    }
    let mut total = 0.0;
    for i in 0..len {
        let e = (x[start + i * stride] - max).exp();
        out[start + i * stride] = e;
        total += e;
    }
    for i in 0..len {
        out[start + i * stride] /= total;
    }
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, n: usize, p: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * p];
    for i in 0..m {
        let row = &mut out[i * p..(i + 1) * p];
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b[k * p..(k + 1) * p];
            for (o, bv) in row.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    }
    out
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

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    /// A leaf that is not a parameter. Its gradient is still reported by
    /// [`Gradients::wrt`].
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Places parameter `id` on the tape. Repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(v) = self.params.get(&id) {
            return *v;
        }
        let v = self.push(store.value(id).clone(), Op::Param);
        self.params.insert(id, v);
        v
    }

    /// Matrix product with 1-D promotion: a vector on the left acts as a row,
    /// a vector on the right as a column, and the promoted axis is dropped
    /// from the result.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let (m, n) = match av.shape() {
            [n] => (1, *n),
            [m, n] => (*m, *n),
            _ => return Err(shape_err("matmul", av, bv)),
        };
        let (n2, p) = match bv.shape() {
            [n] => (*n, 1),
            [n, p] => (*n, *p),
            _ => return Err(shape_err("matmul", av, bv)),
        };
        if n != n2 {
            return Err(shape_err("matmul", av, bv));
        }
        let shape = match (av.rank(), bv.rank()) {
            (2, 2) => vec![m, p],
            (2, 1) => vec![m],
            (1, 2) => vec![p],
            _ => vec![],
        };
        let out = matmul_raw(av.data(), bv.data(), m, n, p);
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::MatMul { a, b, m, n, p }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err("add", av, bv));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x + y).collect();
        let value = Tensor::new(av.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    /// Adds vector `v` (length `cols`) to every row of matrix `m`.
    pub fn add_rows(&mut self, m: Var, v: Var) -> Result<Var> {
        let (mv, vv) = (self.value(m), self.value(v));
        let cols = match (mv.shape(), vv.shape()) {
            ([_, c], [n]) if c == n => *c,
            _ => return Err(shape_err("add_rows", mv, vv)),
        };
        let data = mv
            .data()
            .iter()
            .enumerate()
            .map(|(i, x)| x + vv.data()[i % cols])
            .collect();
        let value = Tensor::new(mv.shape().to_vec(), data)?;
        Ok(self.push(value, Op::AddRows(m, v)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err("mul", av, bv));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        let value = Tensor::new(av.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let av = self.value(a);
        let value = Tensor::new(av.shape().to_vec(), av.data().iter().map(|x| x * factor).collect())
            .expect("same length");
        self.push(value, Op::Scale(a, factor))
    }

    /// Concatenates vectors end to end.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let mut data = Vec::new();
        for &p in parts {
            let pv = self.value(p);
            if pv.rank() != 1 {
                return Err(Error::Shape {
                    op: "concat",
                    left: pv.shape().to_vec(),
                    right: vec![],
                });
            }
            data.extend_from_slice(pv.data());
        }
        Ok(self.push(Tensor::vector(data), Op::Concat(parts.to_vec())))
    }

    /// Stacks equal-length vectors as the rows of a matrix.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var> {
        let first = rows.first().ok_or(Error::Axis {
            op: "stack_rows",
            axis: 0,
            shape: vec![0],
        })?;
        let cols = self.value(*first).len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for &r in rows {
            let rv = self.value(r);
            if rv.shape() != [cols] {
                return Err(shape_err("stack_rows", self.value(*first), rv));
            }
            data.extend_from_slice(rv.data());
        }
        let value = Tensor::matrix(rows.len(), cols, data)?;
        Ok(self.push(value, Op::StackRows(rows.to_vec())))
    }

    /// `input[start..end]` of a vector.
    pub fn slice(&mut self, input: Var, start: usize, end: usize) -> Result<Var> {
        let iv = self.value(input);
        if iv.rank() != 1 || start > end || end > iv.len() {
            return Err(Error::Index {
                op: "slice",
                index: end,
                len: iv.len(),
            });
        }
        let value = Tensor::vector(iv.data()[start..end].to_vec());
        Ok(self.push(value, Op::Slice { input, start }))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let value = Tensor::new(av.shape().to_vec(), av.data().iter().map(|x| x.tanh()).collect())
            .expect("same length");
        self.push(value, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let value = Tensor::new(av.shape().to_vec(), av.data().iter().map(|&x| sigmoid(x)).collect())
            .expect("same length");
        self.push(value, Op::Sigmoid(a))
    }

    /// Max-shifted softmax along `axis` of a vector or matrix.
    pub fn softmax(&mut self, input: Var, axis: usize) -> Result<Var> {
        let iv = self.value(input);
        let valid = matches!((iv.rank(), axis), (1, 0) | (2, 0) | (2, 1));
        if !valid || iv.shape()[axis] == 0 {
            return Err(Error::Axis {
                op: "softmax",
                axis,
                shape: iv.shape().to_vec(),
            });
        }
        let mut out = vec![0.0; iv.len()];
        for (start, len, stride) in lanes(iv.shape(), axis) {
            softmax_lane(iv.data(), &mut out, start, len, stride);
        }
        let value = Tensor::new(iv.shape().to_vec(), out)?;
        Ok(self.push(value, Op::Softmax { input, axis }))
    }

    /// Natural logarithm, elementwise.
    pub fn ln(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let value = Tensor::new(av.shape().to_vec(), av.data().iter().map(|x| x.ln()).collect())
            .expect("same length");
        self.push(value, Op::Ln(a))
    }

    /// Element `index` of a vector, as a scalar.
    pub fn select(&mut self, input: Var, index: usize) -> Result<Var> {
        let iv = self.value(input);
        if iv.rank() != 1 || index >= iv.len() {
            return Err(Error::Index {
                op: "select",
                index,
                len: iv.len(),
            });
        }
        let value = Tensor::scalar(iv.data()[index]);
        Ok(self.push(value, Op::Select { input, index }))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(total), Op::Sum(a))
    }

    /// Inverted dropout: kept activations are scaled by `1 / keep_prob`.
    /// Returns `input` unchanged when `train` is false or `keep_prob == 1`.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        input: Var,
        keep_prob: f64,
        rng: &mut R,
        train: bool,
    ) -> Result<Var> {
        if !(keep_prob > 0.0 && keep_prob <= 1.0) {
            return Err(Error::KeepProb(keep_prob));
        }
        if !train || keep_prob == 1.0 {
            return Ok(input);
        }
        let iv = self.value(input);
        let scale = 1.0 / keep_prob;
        let mask: Vec<f64> = (0..iv.len())
            .map(|_| if rng.random::<f64>() < keep_prob { scale } else { 0.0 })
            .collect();
        let data = iv.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let value = Tensor::new(iv.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Dropout { input, mask }))
    }

    /// Row `row` of an embedding matrix.
    pub fn embedding(&mut self, table: Var, row: usize) -> Result<Var> {
        let tv = self.value(table);
        if tv.rank() != 2 || row >= tv.shape()[0] {
            return Err(Error::Index {
                op: "embedding",
                index: row,
                len: tv.shape().first().copied().unwrap_or(0),
            });
        }
        let value = Tensor::vector(tv.row(row).to_vec());
        Ok(self.push(value, Op::Embedding { table, row }))
    }

    /// Rows `rows` of a matrix, stacked in order. Repeated rows are allowed.
    pub fn gather(&mut self, table: Var, rows: &[usize]) -> Result<Var> {
        let tv = self.value(table);
        let len = tv.shape().first().copied().unwrap_or(0);
        if tv.rank() != 2 {
            return Err(Error::Index { op: "gather", index: 0, len });
        }
        let mut data = Vec::with_capacity(rows.len() * tv.shape()[1]);
        for &r in rows {
            if r >= len {
                return Err(Error::Index { op: "gather", index: r, len });
            }
            data.extend_from_slice(tv.row(r));
        }
        let value = Tensor::matrix(rows.len(), tv.shape()[1], data)?;
        Ok(self.push(value, Op::Gather { table, rows: rows.to_vec() }))
    }

    /// `-log softmax(logits)[class]`, computed through log-sum-exp.
    pub fn cross_entropy(&mut self, logits: Var, class: usize) -> Result<Var> {
        let lv = self.value(logits);
        if lv.rank() != 1 || lv.is_empty() {
            return Err(Error::Axis {
                op: "cross_entropy",
                axis: 0,
                shape: lv.shape().to_vec(),
            });
        }
        if class >= lv.len() {
            return Err(Error::Index {
                op: "cross_entropy",
                index: class,
                len: lv.len(),
            });
        }
        let x = lv.data();
        let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let probs: Vec<f64> = x.iter().map(|v| (v - lse).exp()).collect();
        let value = Tensor::scalar(lse - x[class]);
        Ok(self.push(value, Op::CrossEntropy { logits, class, probs }))
    }

    /// Records a user-defined op whose forward value was computed by the
    /// caller.
    pub fn custom(&mut self, inputs: &[Var], value: Tensor, backward: BackwardFn) -> Var {
        self.push(
            value,
            Op::Custom {
                inputs: inputs.to_vec(),
                backward,
            },
        )
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::NotScalar(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Tensor::filled(lv.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }

        let mut params: Vec<_> = self
            .params
            .iter()
            .map(|(id, v)| (*id, *v, self.value(*v).shape().to_vec()))
            .collect();
        params.sort_by_key(|(id, _, _)| *id);
        Ok(Gradients { grads, params })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let gd = g.data();
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::MatMul { a, b, m, n, p } => {
                let (m, n, p) = (*m, *n, *p);
                let av = self.value(*a).data();
                let bv = self.value(*b).data();
                // dA = G B^T
                let mut da = vec![0.0; m * n];
                for i in 0..m {
                    for k in 0..n {
                        let brow = &bv[k * p..(k + 1) * p];
                        let grow = &gd[i * p..(i + 1) * p];
                        da[i * n + k] = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
                    }
                }
                // dB = A^T G
                let mut db = vec![0.0; n * p];
                for i in 0..m {
                    let grow = &gd[i * p..(i + 1) * p];
                    for k in 0..n {
                        let aik = av[i * n + k];
                        if aik == 0.0 {
                            continue;
                        }
                        for (o, gv) in db[k * p..(k + 1) * p].iter_mut().zip(grow) {
                            *o += aik * gv;
                        }
                    }
                }
                accumulate(grads, *a, self.shaped(*a, da));
                accumulate(grads, *b, self.shaped(*b, db));
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::AddRows(m, v) => {
                let cols = self.value(*v).len();
                let mut dv = vec![0.0; cols];
                for (i, x) in gd.iter().enumerate() {
                    dv[i % cols] += x;
                }
                accumulate(grads, *m, g.clone());
                accumulate(grads, *v, Tensor::vector(dv));
            }
            Op::Mul(a, b) => {
                let av = self.value(*a).data();
                let bv = self.value(*b).data();
                let da = gd.iter().zip(bv).map(|(x, y)| x * y).collect();
                let db = gd.iter().zip(av).map(|(x, y)| x * y).collect();
                accumulate(grads, *a, self.shaped(*a, da));
                accumulate(grads, *b, self.shaped(*b, db));
            }
            Op::Scale(a, s) => {
                accumulate(grads, *a, self.shaped(*a, gd.iter().map(|x| x * s).collect()));
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    accumulate(grads, p, Tensor::vector(gd[offset..offset + len].to_vec()));
                    offset += len;
                }
            }
            Op::StackRows(rows) => {
                let cols = node.value.shape()[1];
                for (r, &v) in rows.iter().enumerate() {
                    accumulate(grads, v, Tensor::vector(gd[r * cols..(r + 1) * cols].to_vec()));
                }
            }
            Op::Slice { input, start } => {
                let mut d = vec![0.0; self.value(*input).len()];
                d[*start..*start + gd.len()].copy_from_slice(gd);
                accumulate(grads, *input, Tensor::vector(d));
            }
            Op::Tanh(a) => {
                let y = node.value.data();
                let d = gd.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect();
                accumulate(grads, *a, self.shaped(*a, d));
            }
            Op::Sigmoid(a) => {
                let y = node.value.data();
                let d = gd.iter().zip(y).map(|(g, y)| g * y * (1.0 - y)).collect();
                accumulate(grads, *a, self.shaped(*a, d));
            }
            Op::Softmax { input, axis } => {
                let y = node.value.data();
                let mut d = vec![0.0; y.len()];
                for (start, len, stride) in lanes(node.value.shape(), *axis) {
                    let dot: f64 = (0..len).map(|i| gd[start + i * stride] * y[start + i * stride]).sum();
                    for i in 0..len {
                        let j = start + i * stride;
                        d[j] = y[j] * (gd[j] - dot);
                    }
                }
                accumulate(grads, *input, self.shaped(*input, d));
            }
            Op::Ln(a) => {
                let x = self.value(*a).data();
                let d = gd.iter().zip(x).map(|(g, x)| g / x).collect();
                accumulate(grads, *a, self.shaped(*a, d));
            }
            Op::Select { input, index } => {
                let mut d = vec![0.0; self.value(*input).len()];
                d[*index] = gd[0];
                accumulate(grads, *input, Tensor::vector(d));
            }
            Op::Sum(a) => {
                let shape = self.value(*a).shape().to_vec();
                accumulate(grads, *a, Tensor::filled(&shape, gd[0]));
            }
            Op::Dropout { input, mask } => {
                let d = gd.iter().zip(mask).map(|(g, m)| g * m).collect();
                accumulate(grads, *input, self.shaped(*input, d));
            }
            Op::Embedding { table, row } => {
                let tv = self.value(*table);
                let cols = tv.shape()[1];
                let mut d = vec![0.0; tv.len()];
                d[row * cols..(row + 1) * cols].copy_from_slice(gd);
                accumulate(grads, *table, self.shaped(*table, d));
            }
            Op::Gather { table, rows } => {
                let tv = self.value(*table);
                let cols = tv.shape()[1];
                let mut d = vec![0.0; tv.len()];
                for (i, &r) in rows.iter().enumerate() {
                    for (dst, src) in d[r * cols..(r + 1) * cols].iter_mut().zip(&gd[i * cols..(i + 1) * cols]) {
                        *dst += src;
                    }
                }
                accumulate(grads, *table, self.shaped(*table, d));
            }
            Op::CrossEntropy { logits, class, probs } => {
                let mut d: Vec<f64> = probs.iter().map(|p| p * gd[0]).collect();
                d[*class] -= gd[0];
                accumulate(grads, *logits, Tensor::vector(d));
            }
            Op::Custom { inputs, backward } => {
                let values: Vec<&Tensor> = inputs.iter().map(|v| self.value(*v)).collect();
                let local = backward(g, &values, &node.value);
                for (v, d) in inputs.iter().zip(local) {
                    accumulate(grads, *v, d);
                }
            }
        }
    }

    fn shaped(&self, like: Var, data: Vec<f64>) -> Tensor {
        Tensor::new(self.value(like).shape().to_vec(), data).expect("gradient matches input shape")
    }
}

fn accumulate(grads: &mut [Option<Tensor>], var: Var, g: Tensor) {
    match &mut grads[var.0] {
        Some(existing) => existing.add_assign(&g),
        slot => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn approx(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![0.0; 3]));
        let y = tape.softmax(x, 0).unwrap();
        assert!(approx(tape.value(y).data(), &[1.0 / 3.0; 3], 1e-15));
    }

    #[test]
    fn softmax_survives_large_inputs() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![1000.0, 1000.0, -1000.0]));
        let y = tape.softmax(x, 0).unwrap();
        assert!(approx(tape.value(y).data(), &[0.5, 0.5, 0.0], 1e-15));
    }

    #[test]
    fn softmax_over_matrix_axes() {
        let mut tape = Tape::new();
        let m = tape.constant(Tensor::matrix(2, 2, vec![0.0, 0.0, 1.0, 1.0]).unwrap());
        let rows = tape.softmax(m, 1).unwrap();
        assert!(approx(tape.value(rows).data(), &[0.5; 4], 1e-15));
        let cols = tape.softmax(m, 0).unwrap();
        let e = 1.0 / (1.0 + 1.0_f64.exp());
        assert!(approx(tape.value(cols).data(), &[e, e, 1.0 - e, 1.0 - e], 1e-15));
    }

    #[test]
    fn softmax_empty_axis_errors() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![]));
        assert!(matches!(tape.softmax(x, 0), Err(Error::Axis { .. })));
        let m = tape.constant(Tensor::matrix(2, 1, vec![0.0, 0.0]).unwrap());
        assert!(tape.softmax(m, 2).is_err());
    }

    #[test]
    fn matmul_two_by_three_times_three_by_two() {
        // [[1,2,3],[4,5,6]] x [[7,8],[9,10],[11,12]] = [[58,64],[139,154]]
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::matrix(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap());
        let b = tape.constant(Tensor::matrix(3, 2, vec![7., 8., 9., 10., 11., 12.]).unwrap());
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).shape(), &[2, 2]);
        assert_eq!(tape.value(c).data(), &[58., 64., 139., 154.]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[2, 2]));
        let err = tape.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[2, 2]"), "{msg}");
    }

    #[test]
    fn matmul_vector_promotion() {
        let mut tape = Tape::new();
        let m = tape.constant(Tensor::matrix(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap());
        let v3 = tape.constant(Tensor::vector(vec![1., 0., -1.]));
        let v2 = tape.constant(Tensor::vector(vec![1., 1.]));
        let mv = tape.matmul(m, v3).unwrap();
        assert_eq!(tape.value(mv).data(), &[-2., -2.]);
        let vm = tape.matmul(v2, m).unwrap();
        assert_eq!(tape.value(vm).data(), &[5., 7., 9.]);
        let dot = tape.matmul(v3, v3).unwrap();
        assert_eq!(tape.value(dot).shape(), &[] as &[usize]);
        assert_eq!(tape.value(dot).item(), 2.0);
    }

    #[test]
    fn gather_stacks_rows_and_checks_bounds() {
        let mut tape = Tape::new();
        let t = tape.constant(Tensor::matrix(3, 2, vec![1., 2., 3., 4., 5., 6.]).unwrap());
        let g = tape.gather(t, &[2, 0, 2]).unwrap();
        assert_eq!(tape.value(g).shape(), &[3, 2]);
        assert_eq!(tape.value(g).data(), &[5., 6., 1., 2., 5., 6.]);
        assert!(tape.gather(t, &[3]).is_err());
    }

    #[test]
    fn cross_entropy_is_zero_at_certainty() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![0.0, 800.0, 0.0]));
        let l = tape.cross_entropy(x, 1).unwrap();
        assert_eq!(tape.value(l).item(), 0.0);
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![1.0, -2.0, 5.0]));
        let s = tape.sum(x);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn dot_gradient_is_other_operand() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let y = tape.constant(Tensor::vector(vec![-1.0, 0.5, 4.0]));
        let d = tape.matmul(x, y).unwrap();
        let g = tape.backward(d).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[-1.0, 0.5, 4.0]);
        assert_eq!(g.wrt(y).unwrap().data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![1.0, 2.0]));
        let y = tape.tanh(x);
        assert!(matches!(tape.backward(y), Err(Error::NotScalar(_))));
    }

    #[test]
    fn reused_node_accumulates_both_paths() {
        // loss = sum(x * x) -> d/dx = 2x
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![3.0, -1.0]));
        let sq = tape.mul(x, x).unwrap();
        let s = tape.sum(sq);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[6.0, -2.0]);
    }

    #[test]
    fn dropout_is_identity_in_eval_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![1.0, 2.0]));
        let y = tape.dropout(x, 0.5, &mut rng, false).unwrap();
        assert_eq!(x, y);
        assert!(matches!(tape.dropout(x, 0.0, &mut rng, true), Err(Error::KeepProb(_))));
        assert!(tape.dropout(x, 1.5, &mut rng, true).is_err());
    }

    #[test]
    fn dropout_scales_kept_units() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![2.0; 64]));
        let y = tape.dropout(x, 0.8, &mut rng, true).unwrap();
        for v in tape.value(y).data() {
            assert!(*v == 0.0 || (*v - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn param_is_recorded_once() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::vector(vec![1.0]), true).unwrap();
        let mut tape = Tape::new();
        let a = tape.param(&store, id);
        let b = tape.param(&store, id);
        assert_eq!(a, b);
    }

    #[test]
    fn unreached_params_get_zero_gradients() {
        let mut store = ParamStore::new();
        let used = store.add("used", Tensor::vector(vec![2.0]), true).unwrap();
        let unused = store.add("unused", Tensor::vector(vec![5.0, 5.0]), true).unwrap();
        let mut tape = Tape::new();
        let u = tape.param(&store, used);
        tape.param(&store, unused);
        let s = tape.sum(u);
        tape.backward(s).unwrap().accumulate(&mut store);
        assert_eq!(store.grad(used).unwrap().data(), &[1.0]);
        assert_eq!(store.grad(unused).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn param_grads_come_back_in_id_order() {
        let mut store = ParamStore::new();
        let a = store.add("a", Tensor::vector(vec![1.0]), true).unwrap();
        let b = store.add("b", Tensor::vector(vec![3.0, 3.0]), true).unwrap();
        let mut tape = Tape::new();
        tape.param(&store, b);
        let av = tape.param(&store, a);
        let s = tape.scale(av, 4.0);
        let grads = tape.backward(s).unwrap().into_param_grads();
        assert_eq!(grads[0].0, a);
        assert_eq!(grads[0].1.data(), &[4.0]);
        assert_eq!(grads[1].0, b);
        assert_eq!(grads[1].1.data(), &[0.0, 0.0]);
    }

    #[test]
    fn repeated_backward_accumulates_until_zeroed() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::vector(vec![1.0, 1.0]), true).unwrap();
        let mut tape = Tape::new();
        let wv = tape.param(&store, w);
        let s = tape.sum(wv);
        let grads = tape.backward(s).unwrap();
        grads.accumulate(&mut store);
        grads.accumulate(&mut store);
        assert_eq!(store.grad(w).unwrap().data(), &[2.0, 2.0]);
        store.zero_grad();
        assert!(store.grad(w).is_none());
    }
}
