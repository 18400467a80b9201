//! Reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! One [`Tape`] records the forward pass of one graph. Parameters enter as
//! leaves tied to a [`ParamId`]; [`Tape::backward`] returns their gradients.
//! Every value is a row-major `Array2<f64>`.

use std::sync::Arc;

use ndarray::{Array2, Axis};

use crate::params::{Gradients, ParamId, ParamStore};

/// Guard added to attention denominators.
pub const SOFTMAX_EPS: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

type Index = Arc<[usize]>;

enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    Square(Var),
    Sqrt(Var),
    Gather(Var, Index),
    ScatterAdd(Var, Index),
    EdgeSoftmax { logits: Var, dst: Index },
    HeadDot { x: Var, a: Var, heads: usize },
    HeadScale { x: Var, alpha: Var, heads: usize },
    HeadMean { x: Var, heads: usize },
    RowScale(Var, Arc<[f64]>),
    RowMul(Var, Var),
    MulConst(Var, Arc<Array2<f64>>),
    PoolMax { x: Var, argmax: Vec<usize> },
    PoolMean(Var, Index),
    PoolSum(Var, Index),
    SegmentMax { x: Var, argmax: Vec<usize> },
    Concat(Vec<Var>),
    SelectRow(Var, usize),
    Broadcast(Var),
    SumAll(Var),
    DivScalar(Var, Var),
}

struct Node {
    value: Array2<f64>,
    op: Op,
    needs_grad: bool,
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

fn slice(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("standard layout")
}

fn slice_mut(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("standard layout")
}

fn standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            nodes: Vec::with_capacity(256),
            param_vars: vec![None; params.len()],
        }
    }

    fn push(&mut self, value: Array2<f64>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value: standard(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        let v = self.push(self.params.get(id).clone(), Op::Param(id), true);
        self.param_vars[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).dot(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        self.push(out, Op::MatMul(a, b), ng)
    }

    /// `x + b` with `b` a `1×d` row broadcast over rows.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Var {
        let out = self.value(x) + self.value(b);
        let ng = self.ng(x) || self.ng(b);
        self.push(out, Op::AddBias(x, b), ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a) + self.value(b);
        let ng = self.ng(a) || self.ng(b);
        self.push(out, Op::Add(a, b), ng)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a) - self.value(b);
        let ng = self.ng(a) || self.ng(b);
        self.push(out, Op::Sub(a, b), ng)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a) * self.value(b);
        let ng = self.ng(a) || self.ng(b);
        self.push(out, Op::Mul(a, b), ng)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a) * c;
        let ng = self.ng(a);
        self.push(out, Op::Scale(a, c), ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(|v| v.max(0.0));
        let ng = self.ng(a);
        self.push(out, Op::Relu(a), ng)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let out = self.value(a).mapv(|v| if v > 0.0 { v } else { slope * v });
        let ng = self.ng(a);
        self.push(out, Op::LeakyRelu(a, slope), ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(|v| 1.0 / (1.0 + (-v).exp()));
        let ng = self.ng(a);
        self.push(out, Op::Sigmoid(a), ng)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(|v| v * v);
        let ng = self.ng(a);
        self.push(out, Op::Square(a), ng)
    }

    /// `sqrt(max(x, 0) + eps)`, applied elementwise; the gradient of the clamp is ignored.
    pub fn sqrt_eps(&mut self, a: Var, eps: f64) -> Var {
        let out = self.value(a).mapv(|v| (v.max(0.0) + eps).sqrt());
        let ng = self.ng(a);
        self.push(out, Op::Sqrt(a), ng)
    }

    /// Row `e` of the output is row `idx[e]` of `x`.
    pub fn gather_rows(&mut self, x: Var, idx: Index) -> Var {
        let xv = self.value(x);
        let d = xv.ncols();
        let src = slice(xv);
        let mut out = Array2::zeros((idx.len(), d));
        let o = slice_mut(&mut out);
        for (e, &i) in idx.iter().enumerate() {
            o[e * d..(e + 1) * d].copy_from_slice(&src[i * d..(i + 1) * d]);
        }
        let ng = self.ng(x);
        self.push(out, Op::Gather(x, idx), ng)
    }

    /// Row `idx[e]` of the `n`-row output accumulates row `e` of `x`.
    pub fn scatter_add_rows(&mut self, x: Var, idx: Index, n: usize) -> Var {
        let xv = self.value(x);
        let d = xv.ncols();
        let src = slice(xv);
        let mut out = Array2::zeros((n, d));
        let o = slice_mut(&mut out);
        for (e, &i) in idx.iter().enumerate() {
            for c in 0..d {
                o[i * d + c] += src[e * d + c];
            }
        }
        let ng = self.ng(x);
        self.push(out, Op::ScatterAdd(x, idx), ng)
    }

    /// Weighted softmax of per-edge logits (`E×H`) over edges sharing a
    /// destination: `α_e = w_e exp(l_e) / Σ w exp(l)`.
    pub fn edge_softmax(&mut self, logits: Var, dst: Index, weights: &[f64], n: usize) -> Var {
        let lv = self.value(logits);
        let h = lv.ncols();
        let l = slice(lv);
        let mut peak = vec![f64::NEG_INFINITY; n * h];
        for (e, &i) in dst.iter().enumerate() {
            for k in 0..h {
                let p = &mut peak[i * h + k];
                *p = p.max(l[e * h + k]);
            }
        }
        // A node whose incoming weights are all zero attends uniformly.
        let mut wsum = vec![0.0; n];
        for (e, &i) in dst.iter().enumerate() {
            wsum[i] += weights[e];
        }
        let mut out = Array2::zeros((dst.len(), h));
        let mut denom = vec![0.0; n * h];
        {
            let o = slice_mut(&mut out);
            for (e, &i) in dst.iter().enumerate() {
                let w = if wsum[i] > 0.0 { weights[e] } else { 1.0 };
                for k in 0..h {
                    let u = w * (l[e * h + k] - peak[i * h + k]).exp();
                    o[e * h + k] = u;
                    denom[i * h + k] += u;
                }
            }
            for (e, &i) in dst.iter().enumerate() {
                for k in 0..h {
                    o[e * h + k] /= denom[i * h + k] + SOFTMAX_EPS;
                }
            }
        }
        let ng = self.ng(logits);
        self.push(out, Op::EdgeSoftmax { logits, dst }, ng)
    }

    /// Per-head dot product of `x` (`N×HD`) with `a` (`1×HD`), giving `N×H`.
    pub fn head_dot(&mut self, x: Var, a: Var, heads: usize) -> Var {
        let (xv, av) = (self.value(x), self.value(a));
        let (n, hd) = xv.dim();
        let d = hd / heads;
        let (xs, a_s) = (slice(xv), slice(av));
        let mut out = Array2::zeros((n, heads));
        let o = slice_mut(&mut out);
        for r in 0..n {
            for k in 0..heads {
                let base = r * hd + k * d;
                o[r * heads + k] = (0..d).map(|c| xs[base + c] * a_s[k * d + c]).sum();
            }
        }
        let ng = self.ng(x) || self.ng(a);
        self.push(out, Op::HeadDot { x, a, heads }, ng)
    }

    /// Scales head block `k` of row `e` of `x` by `alpha[e, k]`.
    pub fn head_scale(&mut self, x: Var, alpha: Var, heads: usize) -> Var {
        let (xv, av) = (self.value(x), self.value(alpha));
        let (e_n, hd) = xv.dim();
        let d = hd / heads;
        let mut out = xv.clone();
        let al = slice(av);
        let o = slice_mut(&mut out);
        for e in 0..e_n {
            for k in 0..heads {
                let s = al[e * heads + k];
                for c in 0..d {
                    o[e * hd + k * d + c] *= s;
                }
            }
        }
        let ng = self.ng(x) || self.ng(alpha);
        self.push(out, Op::HeadScale { x, alpha, heads }, ng)
    }

    /// Mean over the `heads` blocks of each row.
    pub fn head_mean(&mut self, x: Var, heads: usize) -> Var {
        let xv = self.value(x);
        let (n, hd) = xv.dim();
        let d = hd / heads;
        let xs = slice(xv);
        let mut out = Array2::zeros((n, d));
        let o = slice_mut(&mut out);
        for r in 0..n {
            for k in 0..heads {
                for c in 0..d {
                    o[r * d + c] += xs[r * hd + k * d + c];
                }
            }
        }
        out.mapv_inplace(|v| v / heads as f64);
        let ng = self.ng(x);
        self.push(out, Op::HeadMean { x, heads }, ng)
    }

    /// Row `i` scaled by the constant `c[i]`.
    pub fn row_scale(&mut self, x: Var, c: Arc<[f64]>) -> Var {
        let mut out = self.value(x).clone();
        for (mut row, &s) in out.axis_iter_mut(Axis(0)).zip(c.iter()) {
            row *= s;
        }
        let ng = self.ng(x);
        self.push(out, Op::RowScale(x, c), ng)
    }

    /// Row `i` of `x` (`N×d`) scaled by `g[i, 0]` (`N×1`).
    pub fn row_mul(&mut self, x: Var, g: Var) -> Var {
        let gv = self.value(g);
        let mut out = self.value(x).clone();
        for (mut row, &s) in out.axis_iter_mut(Axis(0)).zip(gv.iter()) {
            row *= s;
        }
        let ng = self.ng(x) || self.ng(g);
        self.push(out, Op::RowMul(x, g), ng)
    }

    pub fn mul_const(&mut self, x: Var, c: Arc<Array2<f64>>) -> Var {
        let out = self.value(x) * &*c;
        let ng = self.ng(x);
        self.push(out, Op::MulConst(x, c), ng)
    }

    /// Columnwise max over `rows`, as a `1×d` row.
    pub fn pool_max(&mut self, x: Var, rows: &[usize]) -> Var {
        let xv = self.value(x);
        let d = xv.ncols();
        let xs = slice(xv);
        let mut argmax = vec![rows[0]; d];
        let mut out = Array2::zeros((1, d));
        let o = slice_mut(&mut out);
        for c in 0..d {
            let mut best = f64::NEG_INFINITY;
            for &r in rows {
                let v = xs[r * d + c];
                if v > best {
                    best = v;
                    argmax[c] = r;
                }
            }
            o[c] = best;
        }
        let ng = self.ng(x);
        self.push(out, Op::PoolMax { x, argmax }, ng)
    }

    pub fn pool_sum(&mut self, x: Var, rows: Index) -> Var {
        let xv = self.value(x);
        let mut out = Array2::zeros((1, xv.ncols()));
        for &r in rows.iter() {
            out.row_mut(0).scaled_add(1.0, &xv.row(r));
        }
        let ng = self.ng(x);
        self.push(out, Op::PoolSum(x, rows), ng)
    }

    pub fn pool_mean(&mut self, x: Var, rows: Index) -> Var {
        let xv = self.value(x);
        let mut out = Array2::zeros((1, xv.ncols()));
        for &r in rows.iter() {
            out.row_mut(0).scaled_add(1.0, &xv.row(r));
        }
        out /= rows.len() as f64;
        let ng = self.ng(x);
        self.push(out, Op::PoolMean(x, rows), ng)
    }

    /// Columnwise max of edge rows grouped by destination; empty groups give 0.
    pub fn segment_max(&mut self, x: Var, dst: &[usize], n: usize) -> Var {
        let xv = self.value(x);
        let d = xv.ncols();
        let xs = slice(xv);
        let mut out = Array2::from_elem((n, d), f64::NEG_INFINITY);
        let mut argmax = vec![usize::MAX; n * d];
        {
            let o = slice_mut(&mut out);
            for (e, &i) in dst.iter().enumerate() {
                for c in 0..d {
                    if xs[e * d + c] > o[i * d + c] {
                        o[i * d + c] = xs[e * d + c];
                        argmax[i * d + c] = e;
                    }
                }
            }
            for v in o.iter_mut() {
                if *v == f64::NEG_INFINITY {
                    *v = 0.0;
                }
            }
        }
        let ng = self.ng(x);
        self.push(out, Op::SegmentMax { x, argmax }, ng)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|v| self.value(*v).view()).collect();
        let out = ndarray::concatenate(Axis(1), &views).expect("equal row counts");
        let ng = parts.iter().any(|v| self.ng(*v));
        self.push(out, Op::Concat(parts.to_vec()), ng)
    }

    pub fn select_row(&mut self, x: Var, r: usize) -> Var {
        let out = self.value(x).row(r).to_owned().insert_axis(Axis(0));
        let ng = self.ng(x);
        self.push(out, Op::SelectRow(x, r), ng)
    }

    /// `1×1` to `1×d`.
    pub fn broadcast(&mut self, x: Var, d: usize) -> Var {
        let out = Array2::from_elem((1, d), self.scalar(x));
        let ng = self.ng(x);
        self.push(out, Op::Broadcast(x), ng)
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let out = Array2::from_elem((1, 1), self.value(x).sum());
        let ng = self.ng(x);
        self.push(out, Op::SumAll(x), ng)
    }

    /// `x / s` with `s` a `1×1` value.
    pub fn div_scalar(&mut self, x: Var, s: Var) -> Var {
        let out = self.value(x) / self.scalar(s);
        let ng = self.ng(x) || self.ng(s);
        self.push(out, Op::DivScalar(x, s), ng)
    }

    /// Gradients of the scalar `root` with respect to every parameter.
    pub fn backward(&self, root: Var) -> Gradients {
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Array2::ones(self.value(root).raw_dim()));
        let mut out = Gradients::zeros_like(self.params);

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let mut acc = |v: Var, delta: Array2<f64>| {
                if !self.nodes[v.0].needs_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(existing) => *existing += &delta,
                    slot => *slot = Some(standard(delta)),
                }
            };
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => out.add(*id, &g),
                Op::MatMul(a, b) => {
                    if self.ng(*a) {
                        acc(*a, g.dot(&self.value(*b).t()));
                    }
                    if self.ng(*b) {
                        acc(*b, self.value(*a).t().dot(&g));
                    }
                }
                Op::AddBias(x, b) => {
                    if self.ng(*b) {
                        acc(*b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    acc(*x, g);
                }
                Op::Add(a, b) => {
                    if self.ng(*b) {
                        acc(*b, g.clone());
                    }
                    acc(*a, g);
                }
                Op::Sub(a, b) => {
                    if self.ng(*b) {
                        acc(*b, -&g);
                    }
                    acc(*a, g);
                }
                Op::Mul(a, b) => {
                    if self.ng(*a) {
                        acc(*a, &g * self.value(*b));
                    }
                    if self.ng(*b) {
                        acc(*b, &g * self.value(*a));
                    }
                }
                Op::Scale(a, c) => acc(*a, g * *c),
                Op::Relu(a) => {
                    let mut d = g;
                    ndarray::Zip::from(&mut d)
                        .and(&node.value)
                        .for_each(|d, &y| {
                            if y <= 0.0 {
                                *d = 0.0
                            }
                        });
                    acc(*a, d);
                }
                Op::LeakyRelu(a, slope) => {
                    let mut d = g;
                    ndarray::Zip::from(&mut d)
                        .and(self.value(*a))
                        .for_each(|d, &x| {
                            if x <= 0.0 {
                                *d *= *slope
                            }
                        });
                    acc(*a, d);
                }
                Op::Sigmoid(a) => {
                    let mut d = g;
                    ndarray::Zip::from(&mut d)
                        .and(&node.value)
                        .for_each(|d, &y| *d *= y * (1.0 - y));
                    acc(*a, d);
                }
                Op::Square(a) => {
                    let mut d = g;
                    ndarray::Zip::from(&mut d)
                        .and(self.value(*a))
                        .for_each(|d, &x| *d *= 2.0 * x);
                    acc(*a, d);
                }
                Op::Sqrt(a) => {
                    let mut d = g;
                    ndarray::Zip::from(&mut d)
                        .and(&node.value)
                        .for_each(|d, &y| *d /= 2.0 * y);
                    acc(*a, d);
                }
                Op::Gather(x, index) => {
                    let xv = self.value(*x);
                    let d = xv.ncols();
                    let mut dx = Array2::zeros(xv.raw_dim());
                    let (gs, o) = (slice(&g), slice_mut(&mut dx));
                    for (e, &i) in index.iter().enumerate() {
                        for c in 0..d {
                            o[i * d + c] += gs[e * d + c];
                        }
                    }
                    acc(*x, dx);
                }
                Op::ScatterAdd(x, index) => {
                    let d = g.ncols();
                    let mut dx = Array2::zeros((index.len(), d));
                    let (gs, o) = (slice(&g), slice_mut(&mut dx));
                    for (e, &i) in index.iter().enumerate() {
                        o[e * d..(e + 1) * d].copy_from_slice(&gs[i * d..(i + 1) * d]);
                    }
                    acc(*x, dx);
                }
                Op::EdgeSoftmax { logits, dst } => {
                    let alpha = slice(&node.value);
                    let h = node.value.ncols();
                    let gs = slice(&g);
                    let n = dst.iter().copied().max().map_or(0, |m| m + 1);
                    let mut s = vec![0.0; n * h];
                    for (e, &i) in dst.iter().enumerate() {
                        for k in 0..h {
                            s[i * h + k] += gs[e * h + k] * alpha[e * h + k];
                        }
                    }
                    let mut dl = Array2::zeros(node.value.raw_dim());
                    let o = slice_mut(&mut dl);
                    for (e, &i) in dst.iter().enumerate() {
                        for k in 0..h {
                            o[e * h + k] = alpha[e * h + k] * (gs[e * h + k] - s[i * h + k]);
                        }
                    }
                    acc(*logits, dl);
                }
                Op::HeadDot { x, a, heads } => {
                    let (xv, av) = (self.value(*x), self.value(*a));
                    let (n, hd) = xv.dim();
                    let d = hd / heads;
                    let (xs, a_s, gs) = (slice(xv), slice(av), slice(&g));
                    if self.ng(*x) {
                        let mut dx = Array2::zeros((n, hd));
                        let o = slice_mut(&mut dx);
                        for r in 0..n {
                            for k in 0..*heads {
                                let gk = gs[r * heads + k];
                                for c in 0..d {
                                    o[r * hd + k * d + c] = gk * a_s[k * d + c];
                                }
                            }
                        }
                        acc(*x, dx);
                    }
                    if self.ng(*a) {
                        let mut da = Array2::zeros((1, hd));
                        let o = slice_mut(&mut da);
                        for r in 0..n {
                            for k in 0..*heads {
                                let gk = gs[r * heads + k];
                                for c in 0..d {
                                    o[k * d + c] += gk * xs[r * hd + k * d + c];
                                }
                            }
                        }
                        acc(*a, da);
                    }
                }
                Op::HeadScale { x, alpha, heads } => {
                    let (xv, av) = (self.value(*x), self.value(*alpha));
                    let (e_n, hd) = xv.dim();
                    let d = hd / heads;
                    let (xs, al, gs) = (slice(xv), slice(av), slice(&g));
                    if self.ng(*alpha) {
                        let mut da = Array2::zeros((e_n, *heads));
                        let o = slice_mut(&mut da);
                        for e in 0..e_n {
                            for k in 0..*heads {
                                let b = e * hd + k * d;
                                o[e * heads + k] = (0..d).map(|c| gs[b + c] * xs[b + c]).sum();
                            }
                        }
                        acc(*alpha, da);
                    }
                    if self.ng(*x) {
                        let mut dx = g.clone();
                        let o = slice_mut(&mut dx);
                        for e in 0..e_n {
                            for k in 0..*heads {
                                let s = al[e * heads + k];
                                for c in 0..d {
                                    o[e * hd + k * d + c] *= s;
                                }
                            }
                        }
                        acc(*x, dx);
                    }
                }
                Op::HeadMean { x, heads } => {
                    let (n, hd) = self.value(*x).dim();
                    let d = hd / heads;
                    let gs = slice(&g);
                    let mut dx = Array2::zeros((n, hd));
                    let o = slice_mut(&mut dx);
                    let inv = 1.0 / *heads as f64;
                    for r in 0..n {
                        for k in 0..*heads {
                            for c in 0..d {
                                o[r * hd + k * d + c] = gs[r * d + c] * inv;
                            }
                        }
                    }
                    acc(*x, dx);
                }
                Op::RowScale(x, c) => {
                    let mut d = g;
                    for (mut row, &s) in d.axis_iter_mut(Axis(0)).zip(c.iter()) {
                        row *= s;
                    }
                    acc(*x, d);
                }
                Op::RowMul(x, gate) => {
                    let (xv, gv) = (self.value(*x), self.value(*gate));
                    if self.ng(*gate) {
                        let dg = (&g * xv).sum_axis(Axis(1)).insert_axis(Axis(1));
                        acc(*gate, dg);
                    }
                    if self.ng(*x) {
                        let mut d = g;
                        for (mut row, &s) in d.axis_iter_mut(Axis(0)).zip(gv.iter()) {
                            row *= s;
                        }
                        acc(*x, d);
                    }
                }
                Op::MulConst(x, c) => acc(*x, g * &**c),
                Op::PoolMax { x, argmax } => {
                    let mut dx = Array2::zeros(self.value(*x).raw_dim());
                    for (c, &r) in argmax.iter().enumerate() {
                        dx[[r, c]] += g[[0, c]];
                    }
                    acc(*x, dx);
                }
                Op::PoolSum(x, rows) | Op::PoolMean(x, rows) => {
                    let scale = if matches!(node.op, Op::PoolMean(..)) {
                        1.0 / rows.len() as f64
                    } else {
                        1.0
                    };
                    let mut dx = Array2::zeros(self.value(*x).raw_dim());
                    for &r in rows.iter() {
                        dx.row_mut(r).scaled_add(scale, &g.row(0));
                    }
                    acc(*x, dx);
                }
                Op::SegmentMax { x, argmax } => {
                    let xv = self.value(*x);
                    let d = xv.ncols();
                    let mut dx = Array2::zeros(xv.raw_dim());
                    let (gs, o) = (slice(&g), slice_mut(&mut dx));
                    for (slot, &e) in argmax.iter().enumerate() {
                        if e != usize::MAX {
                            o[e * d + slot % d] += gs[slot];
                        }
                    }
                    acc(*x, dx);
                }
                Op::Concat(parts) => {
                    let mut start = 0;
                    for v in parts {
                        let w = self.value(*v).ncols();
                        if self.ng(*v) {
                            acc(*v, g.slice(ndarray::s![.., start..start + w]).to_owned());
                        }
                        start += w;
                    }
                }
                Op::SelectRow(x, r) => {
                    let mut dx = Array2::zeros(self.value(*x).raw_dim());
                    dx.row_mut(*r).assign(&g.row(0));
                    acc(*x, dx);
                }
                Op::Broadcast(x) => acc(*x, Array2::from_elem((1, 1), g.sum())),
                Op::SumAll(x) => acc(*x, Array2::from_elem(self.value(*x).raw_dim(), g[[0, 0]])),
                Op::DivScalar(x, s) => {
                    let sv = self.scalar(*s);
                    if self.ng(*s) {
                        let ds = -(&g * self.value(*x)).sum() / (sv * sv);
                        acc(*s, Array2::from_elem((1, 1), ds));
                    }
                    acc(*x, g / sv);
                }
            }
        }
        out
    }
}
