//! Reverse-mode differentiation over a linear record of tensor operations.
//!
//! Every operation appends one node holding its output value. Calling
//! [`Tape::backward`] walks the nodes in reverse creation order and
//! accumulates vector-Jacobian products into the inputs. Parameters enter
//! the tape by reference, so building a graph never copies weight tables.

use std::collections::BTreeMap;

use rand::Rng;

use super::kernels::{add_assign, axpy, dot};
use super::{NumericError, ParamId, ParamStore, Scalar, Tensor};

pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_2;
pub const SELU_SCALE: f64 = 1.050_700_987_355_480_5;
/// Added to the probability inside the log of the cross-entropy loss.
pub const CE_EPSILON: f64 = 1e-12;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Stored<'p, T> {
    Owned(Tensor<T>),
    Borrowed(&'p Tensor<T>),
}

impl<T> Stored<'_, T> {
    fn get(&self) -> &Tensor<T> {
        match self {
            Stored::Owned(t) => t,
            Stored::Borrowed(t) => t,
        }
    }
}

enum Op<T> {
    Leaf,
    Param(ParamId),
    Affine {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    MatVec {
        x: Var,
        v: Var,
    },
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    MulConst(Var, Vec<T>),
    RowScale {
        x: Var,
        scales: Vec<T>,
        faulty: bool,
    },
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Selu(Var),
    ConcatCols(Var, Var),
    SliceCols {
        x: Var,
        start: usize,
    },
    Row {
        x: Var,
        row: usize,
    },
    StackRows(Vec<Var>),
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    MaskedSoftmax {
        x: Var,
        mask: Vec<bool>,
    },
    VecMat {
        w: Var,
        z: Var,
    },
    SumAll(Var),
    CrossEntropy {
        probs: Var,
        label: usize,
    },
}

struct Node<'p, T> {
    op: Op<T>,
    value: Stored<'p, T>,
}

/// Gradient of a loss with respect to one registered parameter.
///
/// Embedding lookups contribute row-sparse updates; everything else
/// contributes to the dense part.
#[derive(Clone, Debug, Default)]
pub struct ParamGrad<T> {
    pub dense: Option<Tensor<T>>,
    pub rows: BTreeMap<usize, Vec<T>>,
}

impl<T: Scalar> ParamGrad<T> {
    /// Adds `scale` times this gradient into `acc`.
    pub fn accumulate_into(&self, acc: &mut Tensor<T>, scale: T) {
        if let Some(d) = &self.dense {
            acc.add_scaled(d, scale);
        }
        for (&r, g) in &self.rows {
            axpy(scale, g, acc.row_mut(r));
        }
    }

    pub fn to_dense(&self, dims: &[usize]) -> Tensor<T> {
        let mut t = Tensor::zeros(dims);
        self.accumulate_into(&mut t, T::one());
        t
    }

    pub fn is_finite(&self) -> bool {
        self.dense.as_ref().is_none_or(Tensor::is_finite)
            && self.rows.values().flatten().all(|x| x.is_finite())
    }
}

/// Result of one backward pass.
#[derive(Debug)]
pub struct Gradients<T> {
    leaves: BTreeMap<usize, Tensor<T>>,
    params: BTreeMap<ParamId, ParamGrad<T>>,
    visit_order: Vec<usize>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient with respect to a leaf created by [`Tape::leaf`].
    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.leaves.get(&v.0)
    }

    pub fn param(&self, id: ParamId) -> Option<&ParamGrad<T>> {
        self.params.get(&id)
    }

    /// Dense gradient for `id`; zeros if the parameter was never touched.
    pub fn param_dense(&self, id: ParamId, store: &ParamStore<T>) -> Tensor<T> {
        let dims = store.get(id).dims();
        self.params
            .get(&id)
            .map_or_else(|| Tensor::zeros(dims), |g| g.to_dense(dims))
    }

    /// Adds `scale` times every parameter gradient into `acc`, indexed by [`ParamId`].
    pub fn accumulate_into(&self, acc: &mut [Tensor<T>], scale: T) {
        for (id, g) in &self.params {
            g.accumulate_into(&mut acc[id.0], scale);
        }
    }

    pub fn first_non_finite(&self) -> Option<ParamId> {
        self.params
            .iter()
            .find(|(_, g)| !g.is_finite())
            .map(|(&id, _)| id)
    }

    /// Node indices in the order the backward pass processed them.
    pub fn visit_order(&self) -> &[usize] {
        &self.visit_order
    }
}

pub struct Tape<'p, T> {
    nodes: Vec<Node<'p, T>>,
    consumed: bool,
}

impl<T: Scalar> Default for Tape<'_, T> {
    fn default() -> Self {
        Self::new()
    }
}

fn mismatch(op: &'static str, left: &[usize], right: &[usize]) -> NumericError {
    NumericError::ShapeMismatch {
        op,
        left: left.to_vec(),
        right: right.to_vec(),
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn selu<T: Scalar>(x: T) -> T {
    let scale = T::of(SELU_SCALE);
    if x > T::zero() {
        scale * x
    } else {
        scale * T::of(SELU_ALPHA) * x.exp_m1()
    }
}

impl<'p, T: Scalar> Tape<'p, T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            consumed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        self.nodes[v.0].value.get()
    }

    fn push(&mut self, op: Op<T>, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            op,
            value: Stored::Owned(value),
        });
        Var(self.nodes.len() - 1)
    }

    /// Input tensor whose gradient is reported by [`Gradients::wrt`].
    pub fn leaf(&mut self, t: Tensor<T>) -> Var {
        self.push(Op::Leaf, t)
    }

    /// Registers a borrowed parameter tensor.
    pub fn param(&mut self, store: &'p ParamStore<T>, id: ParamId) -> Var {
        self.nodes.push(Node {
            op: Op::Param(id),
            value: Stored::Borrowed(store.get(id)),
        });
        Var(self.nodes.len() - 1)
    }

    /// `x·Wᵀ + b` per row of `x`. A rank-1 `x` is a single row and yields a rank-1 result.
    pub fn affine(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var, NumericError> {
        let (xv, wv) = (self.value(x), self.value(w));
        if wv.rank() != 2 || xv.cols() != wv.dims()[1] {
            return Err(mismatch("affine", xv.dims(), wv.dims()));
        }
        let out_dim = wv.dims()[0];
        if let Some(b) = b {
            let bv = self.value(b);
            if bv.dims() != [out_dim] {
                return Err(mismatch("affine bias", wv.dims(), bv.dims()));
            }
        }
        let rows = xv.rows();
        let mut out = Vec::with_capacity(rows * out_dim);
        for r in 0..rows {
            let xr = xv.row(r);
            for o in 0..out_dim {
                out.push(dot(xr, wv.row(o)));
            }
        }
        if let Some(b) = b {
            let bv = self.value(b).data();
            for chunk in out.chunks_exact_mut(out_dim) {
                add_assign(chunk, bv);
            }
        }
        let dims = if xv.rank() == 1 {
            vec![out_dim]
        } else {
            vec![rows, out_dim]
        };
        let t = Tensor::new(dims, out)?;
        Ok(self.push(Op::Affine { x, w, b }, t))
    }

    /// `x·v` per row of `x`, giving one scalar per row.
    pub fn matvec(&mut self, x: Var, v: Var) -> Result<Var, NumericError> {
        let (xv, vv) = (self.value(x), self.value(v));
        if vv.rank() != 1 || xv.cols() != vv.len() {
            return Err(mismatch("matvec", xv.dims(), vv.dims()));
        }
        let out: Vec<T> = (0..xv.rows()).map(|r| dot(xv.row(r), vv.data())).collect();
        let t = Tensor::vector(out);
        Ok(self.push(Op::MatVec { x, v }, t))
    }

    fn zip_same(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(T, T) -> T,
    ) -> Result<Tensor<T>, NumericError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.dims() != bv.dims() {
            return Err(mismatch(op, av.dims(), bv.dims()));
        }
        let data = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(av.dims().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericError> {
        let t = self.zip_same("add", a, b, |x, y| x + y)?;
        Ok(self.push(Op::Add(a, b), t))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumericError> {
        let t = self.zip_same("mul", a, b, |x, y| x * y)?;
        Ok(self.push(Op::Mul(a, b), t))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let t = self.value(a).map(|x| x * c);
        self.push(Op::Scale(a, c), t)
    }

    /// Elementwise product with a constant that receives no gradient.
    pub fn mul_const(&mut self, a: Var, k: Vec<T>) -> Result<Var, NumericError> {
        let av = self.value(a);
        if av.len() != k.len() {
            return Err(mismatch("mul_const", av.dims(), &[k.len()]));
        }
        let data = av.data().iter().zip(&k).map(|(&x, &c)| x * c).collect();
        let t = Tensor::new(av.dims().to_vec(), data)?;
        Ok(self.push(Op::MulConst(a, k), t))
    }

    /// Multiplies row `r` of `x` by the constant `scales[r]`.
    pub fn row_scale(&mut self, x: Var, scales: Vec<T>) -> Result<Var, NumericError> {
        self.row_scale_impl(x, scales, false)
    }

    /// Same forward value as [`Tape::row_scale`] but the backward pass
    /// ignores the scale factors. Exists only as a negative control for
    /// gradient checking.
    pub fn row_scale_faulty(&mut self, x: Var, scales: Vec<T>) -> Result<Var, NumericError> {
        self.row_scale_impl(x, scales, true)
    }

    fn row_scale_impl(
        &mut self,
        x: Var,
        scales: Vec<T>,
        faulty: bool,
    ) -> Result<Var, NumericError> {
        let xv = self.value(x);
        if xv.rows() != scales.len() {
            return Err(mismatch("row_scale", xv.dims(), &[scales.len()]));
        }
        let mut t = xv.clone();
        for (r, &s) in scales.iter().enumerate() {
            t.row_mut(r).iter_mut().for_each(|v| *v = *v * s);
        }
        Ok(self.push(Op::RowScale { x, scales, faulty }, t))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let t = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid(a), t)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.value(a).map(T::tanh);
        self.push(Op::Tanh(a), t)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let t = self.value(a).map(|x| x.max(T::zero()));
        self.push(Op::Relu(a), t)
    }

    pub fn selu(&mut self, a: Var) -> Var {
        let t = self.value(a).map(selu);
        self.push(Op::Selu(a), t)
    }

    /// Row-wise concatenation `[a_r ; b_r]`.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, NumericError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rows() != bv.rows() || av.rank() != bv.rank() {
            return Err(mismatch("concat_cols", av.dims(), bv.dims()));
        }
        let (ca, cb) = (av.cols(), bv.cols());
        let mut data = Vec::with_capacity(av.len() + bv.len());
        for r in 0..av.rows() {
            data.extend_from_slice(av.row(r));
            data.extend_from_slice(bv.row(r));
        }
        let mut dims = av.dims().to_vec();
        *dims.last_mut().unwrap() = ca + cb;
        let t = Tensor::new(dims, data)?;
        Ok(self.push(Op::ConcatCols(a, b), t))
    }

    /// Columns `start..start + len` of every row.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var, NumericError> {
        let xv = self.value(x);
        if len == 0 || start + len > xv.cols() {
            return Err(mismatch("slice_cols", xv.dims(), &[start, len]));
        }
        let mut data = Vec::with_capacity(xv.rows() * len);
        for r in 0..xv.rows() {
            data.extend_from_slice(&xv.row(r)[start..start + len]);
        }
        let mut dims = xv.dims().to_vec();
        *dims.last_mut().unwrap() = len;
        let t = Tensor::new(dims, data)?;
        Ok(self.push(Op::SliceCols { x, start }, t))
    }

    /// Row `row` of a matrix as a rank-1 tensor.
    pub fn row(&mut self, x: Var, row: usize) -> Result<Var, NumericError> {
        let xv = self.value(x);
        if row >= xv.rows() {
            return Err(mismatch("row", xv.dims(), &[row]));
        }
        let t = Tensor::vector(xv.row(row).to_vec());
        Ok(self.push(Op::Row { x, row }, t))
    }

    /// Stacks equal-length vectors into a matrix.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var, NumericError> {
        let first = rows.first().ok_or(NumericError::Empty("stack_rows"))?;
        let width = self.value(*first).len();
        let mut data = Vec::with_capacity(width * rows.len());
        for &r in rows {
            let rv = self.value(r);
            if rv.len() != width {
                return Err(mismatch("stack_rows", &[width], rv.dims()));
            }
            data.extend_from_slice(rv.data());
        }
        let t = Tensor::new(vec![rows.len(), width], data)?;
        Ok(self.push(Op::StackRows(rows.to_vec()), t))
    }

    /// Row lookup `table[ids[k]]`.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var, NumericError> {
        let tv = self.value(table);
        if ids.is_empty() {
            return Err(NumericError::Empty("gather"));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= tv.rows()) {
            return Err(NumericError::IndexOutOfRange {
                index: bad,
                bound: tv.rows(),
            });
        }
        let mut data = Vec::with_capacity(ids.len() * tv.cols());
        for &i in ids {
            data.extend_from_slice(tv.row(i));
        }
        let t = Tensor::new(vec![ids.len(), tv.cols()], data)?;
        Ok(self.push(
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
            t,
        ))
    }

    /// Softmax restricted to positions where `mask` is set; other outputs are exactly zero.
    pub fn masked_softmax(&mut self, x: Var, mask: &[bool]) -> Result<Var, NumericError> {
        let xv = self.value(x);
        let t = masked_softmax(xv, mask)?;
        Ok(self.push(
            Op::MaskedSoftmax {
                x,
                mask: mask.to_vec(),
            },
            t,
        ))
    }

    pub fn softmax(&mut self, x: Var) -> Result<Var, NumericError> {
        let mask = vec![true; self.value(x).len()];
        self.masked_softmax(x, &mask)
    }

    /// Weighted row sum `Σ_t w_t · z_t`.
    pub fn vecmat(&mut self, w: Var, z: Var) -> Result<Var, NumericError> {
        let (wv, zv) = (self.value(w), self.value(z));
        if wv.rank() != 1 || zv.rank() != 2 || zv.rows() != wv.len() {
            return Err(mismatch("vecmat", wv.dims(), zv.dims()));
        }
        let mut out = vec![T::zero(); zv.cols()];
        for (r, &wr) in wv.data().iter().enumerate() {
            axpy(wr, zv.row(r), &mut out);
        }
        let t = Tensor::vector(out);
        Ok(self.push(Op::VecMat { w, z }, t))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Op::SumAll(a), Tensor::scalar(s))
    }

    /// `-ln(probs[label] + ε)`.
    pub fn cross_entropy(&mut self, probs: Var, label: usize) -> Result<Var, NumericError> {
        let loss = cross_entropy(self.value(probs), label)?;
        Ok(self.push(Op::CrossEntropy { probs, label }, Tensor::scalar(loss)))
    }

    /// Inverted dropout. Passing no generator selects inference mode (identity).
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        x: Var,
        p: f64,
        rng: Option<&mut R>,
    ) -> Result<Var, NumericError> {
        check_dropout_p(p)?;
        match rng {
            Some(rng) if p > 0.0 => {
                let mask = dropout_mask(self.value(x).len(), p, rng);
                self.mul_const(x, mask)
            }
            _ => Ok(x),
        }
    }

    /// Computes gradients of the scalar `loss` with respect to every leaf and parameter.
    ///
    /// A tape can be differentiated once.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>, NumericError> {
        if self.consumed {
            return Err(NumericError::TapeConsumed);
        }
        self.consumed = true;
        if self.value(loss).len() != 1 {
            return Err(NumericError::NonScalarLoss(
                self.value(loss).dims().to_vec(),
            ));
        }

        let nodes = &self.nodes;
        let mut grads: Vec<Option<Vec<T>>> = Vec::new();
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![T::one()]);
        let mut leaves = BTreeMap::new();
        let mut params: BTreeMap<ParamId, ParamGrad<T>> = BTreeMap::new();
        let mut visit_order = Vec::new();

        fn slot<T: Scalar>(grads: &mut [Option<Vec<T>>], v: Var, len: usize) -> &mut Vec<T> {
            grads[v.0].get_or_insert_with(|| vec![T::zero(); len])
        }
        let val = |v: Var| nodes[v.0].value.get();

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            visit_order.push(i);
            let node = &nodes[i];
            let out = node.value.get();
            match &node.op {
                Op::Leaf => {
                    leaves.insert(i, Tensor::new(out.dims().to_vec(), g)?);
                }
                Op::Param(id) => {
                    let pg = params.entry(*id).or_default();
                    match &mut pg.dense {
                        Some(d) => add_assign(d.data_mut(), &g),
                        None => pg.dense = Some(Tensor::new(out.dims().to_vec(), g)?),
                    }
                }
                Op::Affine { x, w, b } => {
                    let (xv, wv) = (val(*x), val(*w));
                    let out_dim = wv.dims()[0];
                    let in_dim = wv.dims()[1];
                    {
                        let dx = slot(&mut grads, *x, xv.len());
                        for (r, gr) in g.chunks_exact(out_dim).enumerate() {
                            let dxr = &mut dx[r * in_dim..(r + 1) * in_dim];
                            for (o, &go) in gr.iter().enumerate() {
                                if go != T::zero() {
                                    axpy(go, wv.row(o), dxr);
                                }
                            }
                        }
                    }
                    {
                        let dw = slot(&mut grads, *w, wv.len());
                        for (r, gr) in g.chunks_exact(out_dim).enumerate() {
                            let xr = xv.row(r);
                            for (o, &go) in gr.iter().enumerate() {
                                if go != T::zero() {
                                    axpy(go, xr, &mut dw[o * in_dim..(o + 1) * in_dim]);
                                }
                            }
                        }
                    }
                    if let Some(b) = b {
                        let db = slot(&mut grads, *b, out_dim);
                        for gr in g.chunks_exact(out_dim) {
                            add_assign(db, gr);
                        }
                    }
                }
                Op::MatVec { x, v } => {
                    let (xv, vv) = (val(*x), val(*v));
                    let c = vv.len();
                    {
                        let dx = slot(&mut grads, *x, xv.len());
                        for (r, &gr) in g.iter().enumerate() {
                            axpy(gr, vv.data(), &mut dx[r * c..(r + 1) * c]);
                        }
                    }
                    let dv = slot(&mut grads, *v, c);
                    for (r, &gr) in g.iter().enumerate() {
                        axpy(gr, xv.row(r), dv);
                    }
                }
                Op::Add(a, b) => {
                    add_assign(slot(&mut grads, *a, g.len()), &g);
                    add_assign(slot(&mut grads, *b, g.len()), &g);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (val(*a), val(*b));
                    let da = slot(&mut grads, *a, g.len());
                    for ((d, &gi), &bi) in da.iter_mut().zip(&g).zip(bv.data()) {
                        *d = *d + gi * bi;
                    }
                    let db = slot(&mut grads, *b, g.len());
                    for ((d, &gi), &ai) in db.iter_mut().zip(&g).zip(av.data()) {
                        *d = *d + gi * ai;
                    }
                }
                Op::Scale(a, c) => axpy(*c, &g, slot(&mut grads, *a, g.len())),
                Op::MulConst(a, k) => {
                    let da = slot(&mut grads, *a, g.len());
                    for ((d, &gi), &ki) in da.iter_mut().zip(&g).zip(k) {
                        *d = *d + gi * ki;
                    }
                }
                Op::RowScale { x, scales, faulty } => {
                    let cols = out.cols();
                    let dx = slot(&mut grads, *x, g.len());
                    for (r, &s) in scales.iter().enumerate() {
                        let s = if *faulty { T::one() } else { s };
                        axpy(
                            s,
                            &g[r * cols..(r + 1) * cols],
                            &mut dx[r * cols..(r + 1) * cols],
                        );
                    }
                }
                Op::Sigmoid(a) => {
                    let da = slot(&mut grads, *a, g.len());
                    for ((d, &gi), &y) in da.iter_mut().zip(&g).zip(out.data()) {
                        *d = *d + gi * y * (T::one() - y);
                    }
                }
                Op::Tanh(a) => {
                    let da = slot(&mut grads, *a, g.len());
                    for ((d, &gi), &y) in da.iter_mut().zip(&g).zip(out.data()) {
                        *d = *d + gi * (T::one() - y * y);
                    }
                }
                Op::Relu(a) => {
                    let da = slot(&mut grads, *a, g.len());
                    for ((d, &gi), &y) in da.iter_mut().zip(&g).zip(out.data()) {
                        if y > T::zero() {
                            *d = *d + gi;
                        }
                    }
                }
                Op::Selu(a) => {
                    let scale = T::of(SELU_SCALE);
                    let sa = T::of(SELU_SCALE * SELU_ALPHA);
                    let da = slot(&mut grads, *a, g.len());
                    for ((d, &gi), &y) in da.iter_mut().zip(&g).zip(out.data()) {
                        // For x <= 0, y = sa·(e^x − 1), so dy/dx = sa·e^x = y + sa.
                        let dydx = if y > T::zero() { scale } else { y + sa };
                        *d = *d + gi * dydx;
                    }
                }
                Op::ConcatCols(a, b) => {
                    let (ca, cb) = (val(*a).cols(), val(*b).cols());
                    let rows = out.rows();
                    {
                        let da = slot(&mut grads, *a, rows * ca);
                        for r in 0..rows {
                            let src = &g[r * (ca + cb)..r * (ca + cb) + ca];
                            add_assign(&mut da[r * ca..(r + 1) * ca], src);
                        }
                    }
                    let db = slot(&mut grads, *b, rows * cb);
                    for r in 0..rows {
                        let src = &g[r * (ca + cb) + ca..(r + 1) * (ca + cb)];
                        add_assign(&mut db[r * cb..(r + 1) * cb], src);
                    }
                }
                Op::SliceCols { x, start } => {
                    let xv = val(*x);
                    let (cols, len) = (xv.cols(), out.cols());
                    let dx = slot(&mut grads, *x, xv.len());
                    for r in 0..out.rows() {
                        let dst = &mut dx[r * cols + start..r * cols + start + len];
                        add_assign(dst, &g[r * len..(r + 1) * len]);
                    }
                }
                Op::Row { x, row } => {
                    let xv = val(*x);
                    let cols = xv.cols();
                    let dx = slot(&mut grads, *x, xv.len());
                    add_assign(&mut dx[row * cols..(row + 1) * cols], &g);
                }
                Op::StackRows(rows) => {
                    let width = out.cols();
                    for (r, &v) in rows.iter().enumerate() {
                        add_assign(slot(&mut grads, v, width), &g[r * width..(r + 1) * width]);
                    }
                }
                Op::Gather { table, ids } => {
                    let tv = val(*table);
                    let cols = tv.cols();
                    if let Op::Param(pid) = nodes[table.0].op {
                        let pg = params.entry(pid).or_default();
                        for (k, &id) in ids.iter().enumerate() {
                            let row = pg.rows.entry(id).or_insert_with(|| vec![T::zero(); cols]);
                            add_assign(row, &g[k * cols..(k + 1) * cols]);
                        }
                    } else {
                        let dt = slot(&mut grads, *table, tv.len());
                        for (k, &id) in ids.iter().enumerate() {
                            add_assign(
                                &mut dt[id * cols..(id + 1) * cols],
                                &g[k * cols..(k + 1) * cols],
                            );
                        }
                    }
                }
                Op::MaskedSoftmax { x, mask } => {
                    let y = out.data();
                    let inner: T = y
                        .iter()
                        .zip(&g)
                        .zip(mask)
                        .filter(|(_, &m)| m)
                        .map(|((&yi, &gi), _)| yi * gi)
                        .sum();
                    let dx = slot(&mut grads, *x, g.len());
                    for (k, &m) in mask.iter().enumerate() {
                        if m {
                            dx[k] = dx[k] + y[k] * (g[k] - inner);
                        }
                    }
                }
                Op::VecMat { w, z } => {
                    let (wv, zv) = (val(*w), val(*z));
                    let cols = zv.cols();
                    {
                        let dw = slot(&mut grads, *w, wv.len());
                        for (r, d) in dw.iter_mut().enumerate() {
                            *d = *d + dot(&g, zv.row(r));
                        }
                    }
                    let dz = slot(&mut grads, *z, zv.len());
                    for (r, &wr) in wv.data().iter().enumerate() {
                        axpy(wr, &g, &mut dz[r * cols..(r + 1) * cols]);
                    }
                }
                Op::SumAll(a) => {
                    let n = val(*a).len();
                    let da = slot(&mut grads, *a, n);
                    da.iter_mut().for_each(|d| *d = *d + g[0]);
                }
                Op::CrossEntropy { probs, label } => {
                    let pv = val(*probs);
                    let p = pv.data()[*label];
                    let dp = slot(&mut grads, *probs, pv.len());
                    dp[*label] = dp[*label] - g[0] / (p + T::of(CE_EPSILON));
                }
            }
        }

        Ok(Gradients {
            leaves,
            params,
            visit_order,
        })
    }
}

/// Softmax over the masked-in entries of a rank-1 tensor.
pub fn masked_softmax<T: Scalar>(
    logits: &Tensor<T>,
    mask: &[bool],
) -> Result<Tensor<T>, NumericError> {
    if logits.len() != mask.len() {
        return Err(mismatch("masked_softmax", logits.dims(), &[mask.len()]));
    }
    let max = logits
        .data()
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&x, _)| x)
        .fold(None, |acc: Option<T>, x| Some(acc.map_or(x, |a| a.max(x))))
        .ok_or(NumericError::EmptyAttention)?;
    let mut out: Vec<T> = logits
        .data()
        .iter()
        .zip(mask)
        .map(|(&x, &m)| if m { (x - max).exp() } else { T::zero() })
        .collect();
    let total: T = out.iter().copied().sum();
    out.iter_mut().for_each(|v| *v = *v / total);
    Tensor::new(logits.dims().to_vec(), out)
}

pub fn cross_entropy<T: Scalar>(probs: &Tensor<T>, label: usize) -> Result<T, NumericError> {
    if label >= probs.len() {
        return Err(NumericError::LabelOutOfRange {
            label,
            classes: probs.len(),
        });
    }
    Ok(-(probs.data()[label] + T::of(CE_EPSILON)).ln())
}

fn check_dropout_p(p: f64) -> Result<(), NumericError> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(NumericError::InvalidProbability(p))
    }
}

/// Keep-mask with survivors scaled by `1/(1-p)`.
fn dropout_mask<T: Scalar, R: Rng + ?Sized>(len: usize, p: f64, rng: &mut R) -> Vec<T> {
    let keep = T::of(1.0 / (1.0 - p));
    (0..len)
        .map(|_| {
            if rng.gen::<f64>() < p {
                T::zero()
            } else {
                keep
            }
        })
        .collect()
}

/// Inverted dropout on a plain tensor.
pub fn dropout<T: Scalar, R: Rng + ?Sized>(
    x: &Tensor<T>,
    p: f64,
    training: bool,
    rng: &mut R,
) -> Result<Tensor<T>, NumericError> {
    check_dropout_p(p)?;
    if !training || p == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask::<T, R>(x.len(), p, rng);
    let data = x.data().iter().zip(mask).map(|(&v, m)| v * m).collect();
    Tensor::new(x.dims().to_vec(), data)
}

/// Elementwise activations on plain tensors, for inspection and tests.
pub mod act {
    use super::*;

    pub fn selu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
        x.map(super::selu)
    }
    pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
        x.map(|v| v.max(T::zero()))
    }
    pub fn tanh<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
        x.map(T::tanh)
    }
    pub fn sigmoid<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
        x.map(super::sigmoid)
    }
}
