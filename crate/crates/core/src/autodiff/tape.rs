//! Reverse-mode tape over dense matrices.
//!
//! Every operation appends a node holding its forward value; operands always
//! precede results, so the backward sweep is a single reverse pass.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sparse::SparseRows;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::qubo::QuboMatrix;
use crate::scalar::Scalar;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Sum(Var),
    SumRows(Var),
    ConcatRows(Vec<Var>),
    MaskedSelect(Var, Vec<usize>),
    GatherRows(Var, Vec<usize>),
    PrefixSumRows(Var),
    Relu(Var),
    Elu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Ln(Var),
    Dropout(Var, Vec<T>),
    Aggregate(Var, Arc<SparseRows<T>>),
    Attend(Box<AttendCache<T>>),
    QuadForm(Var, Arc<QuboMatrix<T>>),
}

struct AttendCache<T> {
    features: Var,
    attention: Var,
    neighborhoods: Arc<SparseRows<T>>,
    slope: T,
    logits: Vec<T>,
    coefficients: Vec<T>,
}

struct Node<T> {
    op: Op<T>,
    value: Tensor<T>,
}

/// Recorded computation. Single-threaded; build one per forward pass.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    training: bool,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    /// Tape in evaluation mode (dropout is the identity).
    pub fn new() -> Self {
        Self { nodes: Vec::new(), training: false }
    }

    pub fn training() -> Self {
        Self { nodes: Vec::new(), training: true }
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, op: Op<T>, value: Tensor<T>, name: &'static str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(name));
        }
        self.nodes.push(Node { op, value });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records an input (parameter or constant).
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node { op: Op::Leaf, value });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        self.push(Op::MatMul(a, b), value, "matmul")
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).transpose();
        self.push(Op::Transpose(a), value, "transpose")
    }

    fn zip_with(&self, op: &'static str, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(Error::Shape { op, lhs: x.shape(), rhs: y.shape() });
        }
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect();
        Tensor::from_vec(x.rows(), x.cols(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip_with("add", a, b, |p, q| p + q)?;
        self.push(Op::Add(a, b), value, "add")
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip_with("mul", a, b, |p, q| p * q)?;
        self.push(Op::Mul(a, b), value, "mul")
    }

    pub fn scale(&mut self, a: Var, k: T) -> Result<Var> {
        let value = self.value(a).map(|x| x * k);
        self.push(Op::Scale(a, k), value, "scale")
    }

    /// Sum of all entries, as a 1x1 tensor.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let total = self.value(a).data().iter().copied().sum();
        self.push(Op::Sum(a), Tensor::scalar(total), "sum")
    }

    /// Per-row sums, as a column.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let value = Tensor::column((0..x.rows()).map(|r| x.row(r).iter().copied().sum()).collect());
        self.push(Op::SumRows(a), value, "sum_rows")
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = parts.first().map(|&p| self.shape(p).1).unwrap_or(0);
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let x = self.value(p);
            if x.cols() != cols {
                return Err(Error::Shape { op: "concat_rows", lhs: (rows, cols), rhs: x.shape() });
            }
            rows += x.rows();
            data.extend_from_slice(x.data());
        }
        let value = Tensor::from_vec(rows, cols, data)?;
        self.push(Op::ConcatRows(parts.to_vec()), value, "concat_rows")
    }

    /// Entries where `mask` is set, in row-major order, as a column.
    pub fn masked_select(&mut self, a: Var, mask: &[bool]) -> Result<Var> {
        let x = self.value(a);
        if mask.len() != x.len() {
            return Err(Error::Shape { op: "masked_select", lhs: x.shape(), rhs: (mask.len(), 1) });
        }
        let picked: Vec<usize> = (0..mask.len()).filter(|&k| mask[k]).collect();
        let value = Tensor::column(picked.iter().map(|&k| x.data()[k]).collect());
        self.push(Op::MaskedSelect(a, picked), value, "masked_select")
    }

    /// Rows `indices[0], indices[1], ...` of `a`, repetitions allowed.
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let x = self.value(a);
        if let Some(&bad) = indices.iter().find(|&&r| r >= x.rows()) {
            return Err(Error::Shape { op: "gather_rows", lhs: x.shape(), rhs: (bad, 0) });
        }
        let mut data = Vec::with_capacity(indices.len() * x.cols());
        for &r in indices {
            data.extend_from_slice(x.row(r));
        }
        let value = Tensor::from_vec(indices.len(), x.cols(), data)?;
        self.push(Op::GatherRows(a, indices.to_vec()), value, "gather_rows")
    }

    /// Exclusive prefix sums over rows: output row `k` is the sum of input
    /// rows `0..k`, so the result has one more row than the input.
    pub fn prefix_sum_rows(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let mut value = Tensor::zeros(x.rows() + 1, x.cols());
        for r in 0..x.rows() {
            for c in 0..x.cols() {
                let v = value.get(r, c) + x.get(r, c);
                value.set(r + 1, c, v);
            }
        }
        self.push(Op::PrefixSumRows(a), value, "prefix_sum_rows")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(|x| x.max(T::zero()));
        self.push(Op::Relu(a), value, "relu")
    }

    /// ELU with unit scale: `x` for `x > 0`, `exp(x) - 1` otherwise.
    pub fn elu(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(|x| if x > T::zero() { x } else { x.exp_m1() });
        self.push(Op::Elu(a), value, "elu")
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid(a), value, "sigmoid")
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(|x| x.tanh());
        self.push(Op::Tanh(a), value, "tanh")
    }

    /// Natural logarithm; non-positive inputs are rejected as non-finite.
    pub fn ln(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(|x| x.ln());
        self.push(Op::Ln(a), value, "ln")
    }

    /// Inverted dropout: kept entries are scaled by `1 / (1 - rate)`.
    /// The identity on evaluation tapes or when `rate == 0`.
    pub fn dropout(&mut self, a: Var, rate: f64, seed: u64) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        if !self.training || rate == 0.0 {
            return Ok(a);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keep = T::of(1.0 / (1.0 - rate));
        let x = self.value(a);
        let mask: Vec<T> = (0..x.len())
            .map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep })
            .collect();
        let data = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        let value = Tensor::from_vec(x.rows(), x.cols(), data)?;
        self.push(Op::Dropout(a, mask), value, "dropout")
    }

    /// Sparse row mixing: output row `v` is `sum_k w_k * a[col_k]` over the
    /// stored entries of row `v`.
    pub fn aggregate(&mut self, a: Var, mixing: &Arc<SparseRows<T>>) -> Result<Var> {
        let x = self.value(a);
        if x.rows() != mixing.cols() {
            return Err(Error::Shape { op: "aggregate", lhs: (mixing.rows(), mixing.cols()), rhs: x.shape() });
        }
        let mut value = Tensor::zeros(mixing.rows(), x.cols());
        for v in 0..mixing.rows() {
            for (u, w) in mixing.row(v) {
                for (o, &h) in value.row_mut(v).iter_mut().zip(x.row(u)) {
                    *o += w * h;
                }
            }
        }
        self.push(Op::Aggregate(a, Arc::clone(mixing)), value, "aggregate")
    }

    /// Single-head graph attention over precomputed node features.
    ///
    /// For each row `v` and each stored column `u` of `neighborhoods`
    /// (which should include `v` itself), the logit is
    /// `leaky(z_a . f_v + z_b . f_u)` with `attention = [z_a, z_b]` as a
    /// `1 x 2d` row. Logits are softmax-normalized per row and the output row
    /// is `sum_u alpha_vu f_u`.
    pub fn attend(
        &mut self,
        features: Var,
        attention: Var,
        neighborhoods: &Arc<SparseRows<T>>,
        slope: T,
    ) -> Result<Var> {
        let f = self.value(features);
        let z = self.value(attention);
        let d = f.cols();
        if z.shape() != (1, 2 * d) {
            return Err(Error::Shape { op: "attend", lhs: f.shape(), rhs: z.shape() });
        }
        if f.rows() != neighborhoods.rows() || f.rows() != neighborhoods.cols() {
            return Err(Error::Shape { op: "attend", lhs: f.shape(), rhs: (neighborhoods.rows(), neighborhoods.cols()) });
        }
        let (za, zb) = z.data().split_at(d);
        let self_score: Vec<T> = (0..f.rows()).map(|v| dot(f.row(v), za)).collect();
        let other_score: Vec<T> = (0..f.rows()).map(|v| dot(f.row(v), zb)).collect();

        let mut logits = Vec::with_capacity(neighborhoods.nnz());
        let mut coefficients = Vec::with_capacity(neighborhoods.nnz());
        let mut value = Tensor::zeros(f.rows(), d);
        for v in 0..f.rows() {
            let start = logits.len();
            for (u, _) in neighborhoods.row(v) {
                logits.push(self_score[v] + other_score[u]);
            }
            let row_logits = &logits[start..];
            let top = row_logits
                .iter()
                .map(|&e| leaky(e, slope))
                .fold(T::neg_infinity(), T::max);
            let exps: Vec<T> = row_logits.iter().map(|&e| (leaky(e, slope) - top).exp()).collect();
            let total: T = exps.iter().copied().sum();
            for ((u, _), ex) in neighborhoods.row(v).zip(exps) {
                let alpha = ex / total;
                coefficients.push(alpha);
                for (o, &h) in value.row_mut(v).iter_mut().zip(f.row(u)) {
                    *o += alpha * h;
                }
            }
        }
        let cache = AttendCache {
            features,
            attention,
            neighborhoods: Arc::clone(neighborhoods),
            slope,
            logits,
            coefficients,
        };
        self.push(Op::Attend(Box::new(cache)), value, "attend")
    }

    /// Attention coefficients recorded by an [`attend`](Self::attend) node,
    /// in the entry order of its neighborhood structure.
    pub fn attention_coefficients(&self, v: Var) -> Option<&[T]> {
        match &self.nodes[v.0].op {
            Op::Attend(cache) => Some(&cache.coefficients),
            _ => None,
        }
    }

    /// `sum_{i <= j} p_i Q_ij p_j` over the stored entries, as a 1x1 tensor.
    pub fn quadratic_form(&mut self, p: Var, q: &Arc<QuboMatrix<T>>) -> Result<Var> {
        let x = self.value(p);
        if x.len() != q.dim() {
            return Err(Error::Dimension { expected: q.dim(), actual: x.len() });
        }
        let d = x.data();
        let total = q.entries().map(|(i, j, c)| d[i] * c * d[j]).sum();
        self.push(Op::QuadForm(p, Arc::clone(q)), Tensor::scalar(total), "quadratic_form")
    }

    /// Adjoints of `root` with respect to every recorded node.
    pub fn backward(&self, root: Var) -> Result<Gradients<T>> {
        let shape = self.shape(root);
        if shape != (1, 1) {
            return Err(Error::NonScalarRoot(shape));
        }
        let mut adj: Vec<Option<Tensor<T>>> = Vec::new();
        adj.resize_with(root.0 + 1, || None);
        adj[root.0] = Some(Tensor::scalar(T::one()));

        for idx in (0..=root.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            self.propagate(idx, &g, &mut adj)?;
            if !g.is_finite() {
                return Err(Error::NonFinite("backward"));
            }
            adj[idx] = Some(g);
        }
        Ok(Gradients { adjoints: adj })
    }

    fn propagate(&self, idx: usize, g: &Tensor<T>, adj: &mut [Option<Tensor<T>>]) -> Result<()> {
        let node = &self.nodes[idx];
        let mut acc = |v: Var, grad: Tensor<T>| match &mut adj[v.0] {
            Some(existing) => existing.add_assign(&grad),
            slot @ None => *slot = Some(grad),
        };
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                acc(*a, g.matmul(&bv.transpose())?);
                acc(*b, av.transpose().matmul(g)?);
            }
            Op::Transpose(a) => acc(*a, g.transpose()),
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                acc(*a, hadamard(g, bv));
                acc(*b, hadamard(g, av));
            }
            Op::Scale(a, k) => acc(*a, g.map(|x| x * *k)),
            Op::Sum(a) => {
                let (r, c) = self.shape(*a);
                acc(*a, Tensor::filled(r, c, g.item()));
            }
            Op::SumRows(a) => {
                let (r, c) = self.shape(*a);
                acc(*a, Tensor::from_fn(r, c, |i, _| g.get(i, 0)));
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let (r, c) = self.shape(p);
                    acc(p, Tensor::from_fn(r, c, |i, j| g.get(offset + i, j)));
                    offset += r;
                }
            }
            Op::MaskedSelect(a, picked) => {
                let (r, c) = self.shape(*a);
                let mut out = Tensor::zeros(r, c);
                for (k, &flat) in picked.iter().enumerate() {
                    out.data_mut()[flat] += g.data()[k];
                }
                acc(*a, out);
            }
            Op::GatherRows(a, rows) => {
                let (r, c) = self.shape(*a);
                let mut out = Tensor::zeros(r, c);
                for (t, &src) in rows.iter().enumerate() {
                    for (o, &x) in out.row_mut(src).iter_mut().zip(g.row(t)) {
                        *o += x;
                    }
                }
                acc(*a, out);
            }
            Op::PrefixSumRows(a) => {
                let (r, c) = self.shape(*a);
                let mut out = Tensor::zeros(r, c);
                let mut running = vec![T::zero(); c];
                for i in (0..r).rev() {
                    for (j, s) in running.iter_mut().enumerate() {
                        *s += g.get(i + 1, j);
                        out.set(i, j, *s);
                    }
                }
                acc(*a, out);
            }
            Op::Relu(a) => {
                let x = self.value(*a);
                acc(*a, zip_map(g, x, |gi, xi| if xi > T::zero() { gi } else { T::zero() }));
            }
            Op::Elu(a) => {
                let x = self.value(*a);
                let d = zip_map(x, y, |xi, yi| if xi > T::zero() { T::one() } else { yi + T::one() });
                acc(*a, hadamard(g, &d));
            }
            Op::Sigmoid(a) => acc(*a, zip_map(g, y, |gi, yi| gi * yi * (T::one() - yi))),
            Op::Tanh(a) => acc(*a, zip_map(g, y, |gi, yi| gi * (T::one() - yi * yi))),
            Op::Ln(a) => {
                let x = self.value(*a);
                acc(*a, zip_map(g, x, |gi, xi| gi / xi));
            }
            Op::Dropout(a, mask) => {
                let m = Tensor::from_vec(g.rows(), g.cols(), mask.clone())?;
                acc(*a, hadamard(g, &m));
            }
            Op::Aggregate(a, mixing) => {
                let (r, c) = self.shape(*a);
                let mut out = Tensor::zeros(r, c);
                for v in 0..mixing.rows() {
                    for (u, w) in mixing.row(v) {
                        for (o, &gv) in out.row_mut(u).iter_mut().zip(g.row(v)) {
                            *o += w * gv;
                        }
                    }
                }
                acc(*a, out);
            }
            Op::Attend(cache) => {
                let (gf, gz) = attend_backward(self, cache, g);
                acc(cache.features, gf);
                acc(cache.attention, gz);
            }
            Op::QuadForm(p, q) => {
                let x = self.value(*p);
                let d = x.data();
                let scale = g.item();
                let mut out = Tensor::zeros(x.rows(), x.cols());
                let od = out.data_mut();
                for (i, j, c) in q.entries() {
                    if i == j {
                        od[i] += scale * (c + c) * d[i];
                    } else {
                        od[i] += scale * c * d[j];
                        od[j] += scale * c * d[i];
                    }
                }
                acc(*p, out);
            }
        }
        Ok(())
    }
}

fn attend_backward<T: Scalar>(tape: &Tape<T>, cache: &AttendCache<T>, g: &Tensor<T>) -> (Tensor<T>, Tensor<T>) {
    let f = tape.value(cache.features);
    let z = tape.value(cache.attention);
    let (n, d) = f.shape();
    let (za, zb) = z.data().split_at(d);
    let mut gf = Tensor::zeros(n, d);
    let mut d_self = vec![T::zero(); n];
    let mut d_other = vec![T::zero(); n];

    let mut k0 = 0;
    for v in 0..n {
        let entries: Vec<usize> = cache.neighborhoods.row(v).map(|(u, _)| u).collect();
        let alphas = &cache.coefficients[k0..k0 + entries.len()];
        let logits = &cache.logits[k0..k0 + entries.len()];
        let d_alpha: Vec<T> = entries.iter().map(|&u| dot(g.row(v), f.row(u))).collect();
        let weighted: T = alphas.iter().zip(&d_alpha).map(|(&a, &da)| a * da).sum();
        for (k, &u) in entries.iter().enumerate() {
            let alpha = alphas[k];
            for (o, &gv) in gf.row_mut(u).iter_mut().zip(g.row(v)) {
                *o += alpha * gv;
            }
            let d_logit = alpha * (d_alpha[k] - weighted);
            let d_pre = if logits[k] > T::zero() { d_logit } else { d_logit * cache.slope };
            d_self[v] += d_pre;
            d_other[u] += d_pre;
        }
        k0 += entries.len();
    }

    let mut gz = Tensor::zeros(1, 2 * d);
    for v in 0..n {
        for c in 0..d {
            let fv = f.get(v, c);
            let delta = d_self[v] * za[c] + d_other[v] * zb[c];
            let cur = gf.get(v, c);
            gf.set(v, c, cur + delta);
            gz.data_mut()[c] += d_self[v] * fv;
            gz.data_mut()[d + c] += d_other[v] * fv;
        }
    }
    (gf, gz)
}

/// Adjoints produced by [`Tape::backward`].
pub struct Gradients<T> {
    adjoints: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient with respect to `v`; `None` if the root does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.adjoints.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient with respect to `v`, zero-filled when the root does not
    /// depend on it.
    pub fn wrt(&self, v: Var, tape: &Tape<T>) -> Tensor<T> {
        self.get(v).cloned().unwrap_or_else(|| {
            let (r, c) = tape.shape(v);
            Tensor::zeros(r, c)
        })
    }
}

pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn leaky<T: Scalar>(x: T, slope: T) -> T {
    if x > T::zero() {
        x
    } else {
        x * slope
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn hadamard<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    zip_map(a, b, |x, y| x * y)
}

fn zip_map<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_vec(a.rows(), a.cols(), data).expect("operands share a shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sigmoid_and_elu_values() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(Tensor::from_vec(1, 2, vec![0.0, -1.0]).unwrap());
        let s = t.sigmoid(x).unwrap();
        assert_eq!(t.value(s).get(0, 0), 0.5);
        let e = t.elu(x).unwrap();
        assert_relative_eq!(t.value(e).get(0, 1), (-1.0f64).exp() - 1.0, epsilon = 1e-15);
        assert_relative_eq!(t.value(e).get(0, 1), -0.6321, epsilon = 1e-4);
    }

    #[test]
    fn matmul_shape_error() {
        let mut t = Tape::<f64>::new();
        let a = t.leaf(Tensor::zeros(2, 3));
        let b = t.leaf(Tensor::zeros(4, 2));
        assert!(matches!(t.matmul(a, b), Err(Error::Shape { op: "matmul", .. })));
    }

    #[test]
    fn product_rule() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(Tensor::scalar(3.0));
        let y = t.leaf(Tensor::scalar(2.0));
        let p = t.mul(x, y).unwrap();
        let g = t.backward(p).unwrap();
        assert_eq!(g.get(x).unwrap().item(), 2.0);
        assert_eq!(g.get(y).unwrap().item(), 3.0);
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(Tensor::from_fn(3, 4, |r, c| (r * c) as f64));
        let s = t.sum(x).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap(), &Tensor::filled(3, 4, 1.0));
    }

    #[test]
    fn sigmoid_gradient_at_zero() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(Tensor::scalar(0.0));
        let s = t.sigmoid(x).unwrap();
        assert_eq!(t.backward(s).unwrap().get(x).unwrap().item(), 0.25);
    }

    #[test]
    fn non_scalar_root_rejected() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(Tensor::zeros(2, 1));
        assert!(matches!(t.backward(x), Err(Error::NonScalarRoot((2, 1)))));
    }

    #[test]
    fn non_finite_forward_rejected() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(Tensor::scalar(f64::MAX));
        assert!(matches!(t.scale(x, 10.0), Err(Error::NonFinite("scale"))));
    }

    #[test]
    fn dropout_eval_is_identity_and_training_rescales() {
        let mut eval = Tape::<f64>::new();
        let x = eval.leaf(Tensor::filled(10, 10, 1.0));
        assert_eq!(eval.dropout(x, 0.5, 1).unwrap(), x);

        let mut train = Tape::<f64>::training();
        let x = train.leaf(Tensor::filled(10, 10, 1.0));
        let y = train.dropout(x, 0.5, 1).unwrap();
        assert!(train.value(y).data().iter().all(|&v| v == 0.0 || v == 2.0));
        let again = train.dropout(x, 0.5, 1).unwrap();
        assert_eq!(train.value(y), train.value(again));
        assert!(train.dropout(x, 1.0, 1).is_err());
    }

    #[test]
    fn prefix_sum_rows_values() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(Tensor::from_vec(3, 1, vec![1.0, 2.0, 3.0]).unwrap());
        let p = t.prefix_sum_rows(x).unwrap();
        assert_eq!(t.value(p).data(), &[0.0, 1.0, 3.0, 6.0]);
    }

    #[test]
    fn masked_select_and_concat() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(Tensor::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let s = t.masked_select(x, &[true, false, false, true]).unwrap();
        assert_eq!(t.value(s).data(), &[1.0, 4.0]);
        let c = t.concat_rows(&[s, s]).unwrap();
        assert_eq!(t.value(c).shape(), (4, 1));
        let total = t.sum(c).unwrap();
        let g = t.backward(total).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[2.0, 0.0, 0.0, 2.0]);
    }
}
