use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use super::params::{Gradients, ParamId, ParamSet};
use super::rng;
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

/// Local gradient rule for [`Tape::custom`]: given the input values, the
/// output value and the output gradient, return one gradient per input.
pub type BackwardFn = Box<dyn Fn(&[&[f64]], &[f64], &[f64]) -> Vec<Vec<f64>>>;

enum Op {
    Constant,
    Param(ParamId),
    MatMul { a: Var, b: Var, m: usize, k: usize, n: usize },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Concat(Vec<Var>),
    Stack(Vec<Var>),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    MaxPool { x: Var, argmax: Vec<usize> },
    Dropout { x: Var, mask: Vec<f64> },
    Sum(Var),
    MaskedSoftmax { x: Var, active: usize },
    GatherRows { x: Var, rows: Vec<usize> },
    Bce { p: Var, labels: Vec<f64> },
    BceLogits { z: Var, labels: Vec<f64> },
    Reshape(Var),
    Custom { inputs: Vec<Var>, backward: BackwardFn },
}

struct Node {
    shape: Vec<usize>,
    /// Empty for parameters; their values stay in the borrowed [`ParamSet`].
    data: Vec<f64>,
    op: Op,
}

/// Probabilities are clipped to `[BCE_CLIP, 1 - BCE_CLIP]` inside the log.
pub const BCE_CLIP: f64 = 1e-7;

/// Logit bound matching [`BCE_CLIP`].
fn logit_clip() -> f64 {
    libm::log((1.0 - BCE_CLIP) / BCE_CLIP)
}

fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Records operations in execution order; `backward` replays them in reverse.
pub struct Tape<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
    dropout_key: Option<u64>,
    dropout_counter: u64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

fn shape_err(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Error {
    Error::Shape { op, lhs: lhs.to_vec(), rhs: rhs.to_vec() }
}

impl<'p> Tape<'p> {
    /// Evaluation tape: dropout is the identity.
    pub fn new(params: &'p ParamSet) -> Self {
        Self { params, nodes: Vec::new(), param_vars: vec![None; params.len()], dropout_key: None, dropout_counter: 0 }
    }

    /// Training tape: dropout masks are drawn from `key`.
    pub fn training(params: &'p ParamSet, key: u64) -> Self {
        Self { dropout_key: Some(key), ..Self::new(params) }
    }

    pub fn is_training(&self) -> bool {
        self.dropout_key.is_some()
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op) -> Var {
        self.nodes.push(Node { shape, data, op });
        Var(self.nodes.len() - 1)
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn value(&self, v: Var) -> &[f64] {
        let node = &self.nodes[v.0];
        match node.op {
            Op::Param(id) => self.params.get(id).data(),
            _ => &node.data,
        }
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        Tensor::new(self.shape(v).to_vec(), self.value(v).to_vec()).expect("node shape matches data")
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[0]
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        let shape = t.shape().to_vec();
        self.push(shape, t.into_data(), Op::Constant)
    }

    pub fn vector(&mut self, data: Vec<f64>) -> Var {
        self.constant(Tensor::vector(data))
    }

    /// The tape node of a parameter; recorded once per tape.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        let shape = self.params.get(id).shape().to_vec();
        let v = self.push(shape, Vec::new(), Op::Param(id));
        self.param_vars[id.0] = Some(v);
        v
    }

    /// Matrix products: `[m,k]x[k,n]`, `[m,k]x[k]` and `[k]x[k,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let (m, k, n, out_shape) = match (sa.len(), sb.len()) {
            (2, 2) if sa[1] == sb[0] => (sa[0], sa[1], sb[1], vec![sa[0], sb[1]]),
            (2, 1) if sa[1] == sb[0] => (sa[0], sa[1], 1, vec![sa[0]]),
            (1, 2) if sa[0] == sb[0] => (1, sa[0], sb[1], vec![sb[1]]),
            _ => return Err(shape_err("matmul", sa, sb)),
        };
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = vec![0.0; m * n];
        if n == 1 {
            for (o, row) in out.iter_mut().zip(av.chunks_exact(k)) {
                *o = row.iter().zip(bv).map(|(x, y)| x * y).sum();
            }
        } else {
            for i in 0..m {
                let orow = &mut out[i * n..(i + 1) * n];
                for p in 0..k {
                    let x = av[i * k + p];
                    if x == 0.0 {
                        continue;
                    }
                    for (o, y) in orow.iter_mut().zip(&bv[p * n..(p + 1) * n]) {
                        *o += x * y;
                    }
                }
            }
        }
        Ok(self.push(out_shape, out, Op::MatMul { a, b, m, k, n }))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    fn zip_with(&mut self, op_name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        self.same_shape(op_name, a, b)?;
        let data = self.value(a).iter().zip(self.value(b)).map(|(x, y)| f(*x, *y)).collect();
        Ok(self.push(self.shape(a).to_vec(), data, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds a `[c]` vector to every row of an `[r, c]` matrix.
    pub fn add_row(&mut self, m: Var, row: Var) -> Result<Var> {
        let (sm, sr) = (self.shape(m), self.shape(row));
        if sm.len() != 2 || sr.len() != 1 || sm[1] != sr[0] {
            return Err(shape_err("add_row", sm, sr));
        }
        let c = sr[0];
        let rv = self.value(row);
        let data = self.value(m).chunks_exact(c).flat_map(|r| r.iter().zip(rv).map(|(x, y)| x + y)).collect();
        Ok(self.push(self.shape(m).to_vec(), data, Op::AddRow(m, row)))
    }

    /// Sum of several same-shape values; a single input is returned as is.
    pub fn add_all(&mut self, vars: &[Var]) -> Result<Var> {
        let (&first, rest) = vars.split_first().ok_or_else(|| shape_err("add_all", &[], &[]))?;
        let mut acc = first;
        for &v in rest {
            acc = self.add(acc, v)?;
        }
        Ok(acc)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let data = self.value(x).iter().map(|v| v * c).collect();
        self.push(self.shape(x).to_vec(), data, Op::Scale(x, c))
    }

    /// Concatenation along the last dimension; leading dimensions must agree.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| shape_err("concat", &[], &[]))?;
        let lead = &self.shape(first)[..self.shape(first).len() - 1];
        let rows: usize = lead.iter().product();
        let mut width = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.len() != lead.len() + 1 || &s[..lead.len()] != lead {
                return Err(shape_err("concat", self.shape(first), s));
            }
            width += s[s.len() - 1];
        }
        let mut data = Vec::with_capacity(rows * width);
        for r in 0..rows {
            for &p in parts {
                let c = *self.shape(p).last().expect("non-empty shape");
                data.extend_from_slice(&self.value(p)[r * c..(r + 1) * c]);
            }
        }
        let mut shape = lead.to_vec();
        shape.push(width);
        Ok(self.push(shape, data, Op::Concat(parts.to_vec())))
    }

    /// Stacks `n` vectors of length `d` into an `[n, d]` matrix.
    pub fn stack(&mut self, rows: &[Var]) -> Result<Var> {
        let first = *rows.first().ok_or_else(|| shape_err("stack", &[], &[]))?;
        let d = self.shape(first).to_vec();
        if d.len() != 1 {
            return Err(shape_err("stack", &d, &[]));
        }
        let mut data = Vec::with_capacity(rows.len() * d[0]);
        for &r in rows {
            if self.shape(r) != d.as_slice() {
                return Err(shape_err("stack", &d, self.shape(r)));
            }
            data.extend_from_slice(self.value(r));
        }
        Ok(self.push(vec![rows.len(), d[0]], data, Op::Stack(rows.to_vec())))
    }

    fn map(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let data = self.value(x).iter().map(|v| f(*v)).collect();
        self.push(self.shape(x).to_vec(), data, op)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.map(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.map(x, libm::tanh, Op::Tanh(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map(x, |v| if v > 0.0 { v } else { 0.0 }, Op::Relu(x))
    }

    /// Column-wise maximum of a `[t, d]` matrix (max over the sequence).
    /// Ties route the gradient to the earliest row.
    pub fn maxpool(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x);
        if s.len() != 2 || s[0] == 0 {
            return Err(shape_err("maxpool", s, &[]));
        }
        let (t, d) = (s[0], s[1]);
        let v = self.value(x);
        let mut argmax = vec![0usize; d];
        let mut out = v[..d].to_vec();
        for r in 1..t {
            for c in 0..d {
                if v[r * d + c] > out[c] {
                    out[c] = v[r * d + c];
                    argmax[c] = r;
                }
            }
        }
        Ok(self.push(vec![d], out, Op::MaxPool { x, argmax }))
    }

    /// Inverted dropout; the identity on evaluation tapes or when `p == 0`.
    pub fn dropout(&mut self, x: Var, p: f64) -> Var {
        let Some(key) = self.dropout_key else { return x };
        if p <= 0.0 {
            return x;
        }
        let keep = 1.0 - p;
        let n = self.value(x).len();
        let base = self.dropout_counter;
        self.dropout_counter += n as u64;
        let mask: Vec<f64> =
            (0..n).map(|k| if rng::uniform(key, base + k as u64) < keep { 1.0 / keep } else { 0.0 }).collect();
        let data = self.value(x).iter().zip(&mask).map(|(v, m)| v * m).collect();
        self.push(self.shape(x).to_vec(), data, Op::Dropout { x, mask })
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().sum();
        self.push(vec![1], vec![s], Op::Sum(x))
    }

    /// Softmax over the first `active` entries of a vector; the rest are
    /// exactly zero, and `active == 0` yields all zeros.
    pub fn masked_softmax(&mut self, x: Var, active: usize) -> Result<Var> {
        let s = self.shape(x);
        if s.len() != 1 || active > s[0] {
            return Err(shape_err("masked_softmax", s, &[active]));
        }
        let v = self.value(x);
        let mut out = vec![0.0; v.len()];
        if active > 0 {
            let max = v[..active].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (o, x) in out[..active].iter_mut().zip(v) {
                *o = libm::exp(x - max);
                z += *o;
            }
            for o in &mut out[..active] {
                *o /= z;
            }
        }
        Ok(self.push(s.to_vec(), out, Op::MaskedSoftmax { x, active }))
    }

    /// Rows of an `[r, c]` matrix, in the given order (repeats allowed).
    pub fn gather_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        let s = self.shape(x);
        if s.len() != 2 || rows.iter().any(|&r| r >= s[0]) {
            return Err(shape_err("gather_rows", s, &[rows.len()]));
        }
        let c = s[1];
        let v = self.value(x);
        let mut data = Vec::with_capacity(rows.len() * c);
        for &r in rows {
            data.extend_from_slice(&v[r * c..(r + 1) * c]);
        }
        Ok(self.push(vec![rows.len(), c], data, Op::GatherRows { x, rows: rows.to_vec() }))
    }

    /// Same data under a new shape.
    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        if shape.iter().product::<usize>() != self.value(x).len() {
            return Err(shape_err("reshape", self.shape(x), shape));
        }
        let data = self.value(x).to_vec();
        Ok(self.push(shape.to_vec(), data, Op::Reshape(x)))
    }

    /// Row `r` of an `[r, c]` matrix as a `[c]` vector.
    pub fn row(&mut self, x: Var, r: usize) -> Result<Var> {
        let c = self.shape(x).get(1).copied().unwrap_or(0);
        let g = self.gather_rows(x, &[r])?;
        self.reshape(g, &[c])
    }

    /// Summed binary cross entropy of probabilities against 0/1 labels.
    pub fn bce(&mut self, p: Var, labels: &[f64]) -> Result<Var> {
        let pv = self.value(p);
        if pv.len() != labels.len() {
            return Err(shape_err("bce", self.shape(p), &[labels.len()]));
        }
        let mut loss = 0.0;
        for (&q, &y) in pv.iter().zip(labels) {
            let q = q.clamp(BCE_CLIP, 1.0 - BCE_CLIP);
            loss -= y * libm::log(q) + (1.0 - y) * libm::log(1.0 - q);
        }
        Ok(self.push(vec![1], vec![loss], Op::Bce { p, labels: labels.to_vec() }))
    }

    /// Binary cross entropy of `sigmoid(z)`, evaluated from the logits so
    /// that confident predictions keep full precision. Clipping and the
    /// zero gradient outside the clip match [`Tape::bce`].
    pub fn bce_logits(&mut self, z: Var, labels: &[f64]) -> Result<Var> {
        let zv = self.value(z);
        if zv.len() != labels.len() {
            return Err(shape_err("bce_logits", self.shape(z), &[labels.len()]));
        }
        let bound = logit_clip();
        let mut loss = 0.0;
        for (&x, &y) in zv.iter().zip(labels) {
            let x = x.clamp(-bound, bound);
            loss += x.max(0.0) - y * x + libm::log1p(libm::exp(-libm::fabs(x)));
        }
        Ok(self.push(vec![1], vec![loss], Op::BceLogits { z, labels: labels.to_vec() }))
    }

    /// An operation with caller-supplied forward value and gradient rule.
    pub fn custom(&mut self, inputs: &[Var], value: Tensor, backward: BackwardFn) -> Var {
        let shape = value.shape().to_vec();
        self.push(shape, value.into_data(), Op::Custom { inputs: inputs.to_vec(), backward })
    }

    /// Accumulates `d loss / d param` into `grads`.
    pub fn backward(&self, loss: Var, grads: &mut Gradients) -> Result<()> {
        self.backward_scaled(loss, 1.0, grads)
    }

    /// As [`Tape::backward`] with the output gradient seeded to `seed`.
    pub fn backward_scaled(&self, loss: Var, seed: f64, grads: &mut Gradients) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(shape_err("backward", self.shape(loss), &[1]));
        }
        let mut g: Vec<Option<Vec<f64>>> = Vec::with_capacity(loss.0 + 1);
        g.resize_with(loss.0 + 1, || None);
        g[loss.0] = Some(vec![seed]);
        for idx in (0..=loss.0).rev() {
            let Some(go) = g[idx].take() else { continue };
            let node = &self.nodes[idx];
            let out = &node.data;
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    for (a, b) in grads.get_mut(*id).iter_mut().zip(&go) {
                        *a += b;
                    }
                }
                Op::MatMul { a, b, m, k, n } => {
                    let (m, k, n) = (*m, *k, *n);
                    let av = self.value(*a);
                    let bv = self.value(*b);
                    if self.needs_grad(*a) {
                        let ga = self.slot(&mut g, *a);
                        for i in 0..m {
                            let grow = &go[i * n..(i + 1) * n];
                            for p in 0..k {
                                let brow = &bv[p * n..(p + 1) * n];
                                ga[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                            }
                        }
                    }
                    if self.needs_grad(*b) {
                        let gb = self.slot(&mut g, *b);
                        for i in 0..m {
                            let grow = &go[i * n..(i + 1) * n];
                            for p in 0..k {
                                let x = av[i * k + p];
                                for (o, y) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                    *o += x * y;
                                }
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    self.accumulate(&mut g, *a, go.iter().copied());
                    self.accumulate(&mut g, *b, go.iter().copied());
                }
                Op::Sub(a, b) => {
                    self.accumulate(&mut g, *a, go.iter().copied());
                    self.accumulate(&mut g, *b, go.iter().map(|x| -x));
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    self.accumulate(&mut g, *a, go.iter().zip(bv).map(|(x, y)| x * y));
                    self.accumulate(&mut g, *b, go.iter().zip(av).map(|(x, y)| x * y));
                }
                Op::AddRow(m, row) => {
                    self.accumulate(&mut g, *m, go.iter().copied());
                    if self.needs_grad(*row) {
                        let c = self.shape(*row)[0];
                        let gr = self.slot(&mut g, *row);
                        for chunk in go.chunks_exact(c) {
                            for (o, x) in gr.iter_mut().zip(chunk) {
                                *o += x;
                            }
                        }
                    }
                }
                Op::Scale(x, c) => self.accumulate(&mut g, *x, go.iter().map(|v| v * c)),
                Op::Concat(parts) => {
                    let width = *node.shape.last().expect("non-empty shape");
                    let rows = go.len() / width.max(1);
                    let mut off = 0;
                    for &p in parts {
                        let c = *self.shape(p).last().expect("non-empty shape");
                        if self.needs_grad(p) {
                            let gp = self.slot(&mut g, p);
                            for r in 0..rows {
                                for (o, x) in gp[r * c..(r + 1) * c].iter_mut().zip(&go[r * width + off..]) {
                                    *o += x;
                                }
                            }
                        }
                        off += c;
                    }
                }
                Op::Stack(rows) => {
                    let d = node.shape[1];
                    for (k, &r) in rows.iter().enumerate() {
                        self.accumulate(&mut g, r, go[k * d..(k + 1) * d].iter().copied());
                    }
                }
                Op::Sigmoid(x) => self.accumulate(&mut g, *x, go.iter().zip(out).map(|(g, y)| g * y * (1.0 - y))),
                Op::Tanh(x) => self.accumulate(&mut g, *x, go.iter().zip(out).map(|(g, y)| g * (1.0 - y * y))),
                Op::Relu(x) => {
                    let xv = self.value(*x);
                    self.accumulate(&mut g, *x, go.iter().zip(xv).map(|(g, v)| if *v > 0.0 { *g } else { 0.0 }));
                }
                Op::MaxPool { x, argmax } => {
                    if self.needs_grad(*x) {
                        let d = argmax.len();
                        let gx = self.slot(&mut g, *x);
                        for (c, (&r, gv)) in argmax.iter().zip(&go).enumerate() {
                            gx[r * d + c] += gv;
                        }
                    }
                }
                Op::Dropout { x, mask } => self.accumulate(&mut g, *x, go.iter().zip(mask).map(|(g, m)| g * m)),
                Op::Sum(x) => {
                    let n = self.value(*x).len();
                    self.accumulate(&mut g, *x, core::iter::repeat_n(go[0], n));
                }
                Op::MaskedSoftmax { x, active } => {
                    let dot: f64 = go[..*active].iter().zip(out).map(|(g, y)| g * y).sum();
                    let n = out.len();
                    let active = *active;
                    self.accumulate(&mut g, *x, (0..n).map(|i| if i < active { out[i] * (go[i] - dot) } else { 0.0 }));
                }
                Op::GatherRows { x, rows } => {
                    if self.needs_grad(*x) {
                        let c = node.shape[1];
                        let gx = self.slot(&mut g, *x);
                        for (k, &r) in rows.iter().enumerate() {
                            for (o, v) in gx[r * c..(r + 1) * c].iter_mut().zip(&go[k * c..(k + 1) * c]) {
                                *o += v;
                            }
                        }
                    }
                }
                Op::Bce { p, labels } => {
                    let pv = self.value(*p);
                    let s = go[0];
                    self.accumulate(
                        &mut g,
                        *p,
                        pv.iter().zip(labels).map(|(&q, &y)| {
                            if !(BCE_CLIP..=1.0 - BCE_CLIP).contains(&q) {
                                0.0
                            } else {
                                s * (-y / q + (1.0 - y) / (1.0 - q))
                            }
                        }),
                    );
                }
                Op::BceLogits { z, labels } => {
                    let zv = self.value(*z);
                    let s = go[0];
                    let bound = logit_clip();
                    self.accumulate(
                        &mut g,
                        *z,
                        zv.iter().zip(labels).map(
                            |(&x, &y)| {
                                if x.abs() > bound {
                                    0.0
                                } else {
                                    s * (sigmoid_scalar(x) - y)
                                }
                            },
                        ),
                    );
                }
                Op::Reshape(x) => self.accumulate(&mut g, *x, go.iter().copied()),
                Op::Custom { inputs, backward } => {
                    let vals: Vec<&[f64]> = inputs.iter().map(|v| self.value(*v)).collect();
                    let local = backward(&vals, out, &go);
                    for (v, gv) in inputs.iter().zip(local) {
                        self.accumulate(&mut g, *v, gv.into_iter());
                    }
                }
            }
        }
        Ok(())
    }

    fn needs_grad(&self, v: Var) -> bool {
        !matches!(self.nodes[v.0].op, Op::Constant)
    }

    fn slot<'g>(&self, g: &'g mut [Option<Vec<f64>>], v: Var) -> &'g mut Vec<f64> {
        let n = match self.nodes[v.0].op {
            Op::Param(id) => self.params.get(id).numel(),
            _ => self.nodes[v.0].data.len(),
        };
        g[v.0].get_or_insert_with(|| vec![0.0; n])
    }

    fn accumulate(&self, g: &mut [Option<Vec<f64>>], v: Var, contrib: impl Iterator<Item = f64>) {
        if !self.needs_grad(v) {
            return;
        }
        for (o, c) in self.slot(g, v).iter_mut().zip(contrib) {
            *o += c;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad_check, GradCheckConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn naive_matmul(a: &Tensor, b: &Tensor) -> Vec<f64> {
        let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0;
                for p in 0..k {
                    s += a.data()[i * k + p] * b.data()[p * n + j];
                }
                out[i * n + j] = s;
            }
        }
        out
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = ParamSet::new();
        for _ in 0..20 {
            let a = random(&mut rng, &[3, 4]);
            let b = random(&mut rng, &[4, 2]);
            let mut t = Tape::new(&params);
            let (va, vb) = (t.constant(a.clone()), t.constant(b.clone()));
            let c = t.matmul(va, vb).unwrap();
            assert_eq!(t.shape(c), &[3, 2]);
            for (x, y) in t.value(c).iter().zip(naive_matmul(&a, &b)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matmul_shape_error_names_both() {
        let params = ParamSet::new();
        let mut t = Tape::new(&params);
        let a = t.constant(Tensor::zeros(&[3, 4]));
        let b = t.constant(Tensor::zeros(&[3, 2]));
        assert_eq!(t.matmul(a, b), Err(Error::Shape { op: "matmul", lhs: vec![3, 4], rhs: vec![3, 2] }));
    }

    #[test]
    fn sigmoid_at_zero() {
        let params = ParamSet::new();
        let mut t = Tape::new(&params);
        let x = t.vector(vec![0.0]);
        let y = t.sigmoid(x);
        assert_eq!(t.value(y), &[0.5]);
    }

    #[test]
    fn maxpool_single_row_is_identity() {
        let params = ParamSet::new();
        let mut t = Tape::new(&params);
        let x = t.constant(Tensor::matrix(1, 3, vec![0.1, -2.0, 5.0]).unwrap());
        let y = t.maxpool(x).unwrap();
        assert_eq!(t.value(y), &[0.1, -2.0, 5.0]);
    }

    #[test]
    fn masked_softmax_cases() {
        let params = ParamSet::new();
        let mut t = Tape::new(&params);
        let x = t.vector(vec![3.0]);
        let y = t.masked_softmax(x, 1).unwrap();
        assert_eq!(t.value(y), &[1.0]);
        let x = t.vector(vec![0.7, 0.7]);
        let y = t.masked_softmax(x, 2).unwrap();
        assert_eq!(t.value(y), &[0.5, 0.5]);
        let x = t.vector(vec![libm::log(1.0), libm::log(3.0), 9.0]);
        let y = t.masked_softmax(x, 2).unwrap();
        let v = t.value(y);
        assert!((v[0] - 0.25).abs() < 1e-15 && (v[1] - 0.75).abs() < 1e-15);
        assert_eq!(v[2], 0.0);
        let y = t.masked_softmax(x, 0).unwrap();
        assert_eq!(t.value(y), &[0.0, 0.0, 0.0]);
        assert!(t.masked_softmax(x, 4).is_err());
    }

    #[test]
    fn dropout_identity_when_evaluating() {
        let params = ParamSet::new();
        let mut t = Tape::new(&params);
        let x = t.vector(vec![1.0; 8]);
        assert_eq!(t.dropout(x, 0.5), x);
        let mut t = Tape::training(&params, 9);
        let x = t.vector(vec![1.0; 2000]);
        let y = t.dropout(x, 0.1);
        let kept = t.value(y).iter().filter(|v| **v > 0.0).count();
        assert!((1700..1900).contains(&kept), "kept {kept}");
        assert!(t.value(y).iter().all(|v| *v == 0.0 || (*v - 1.0 / 0.9).abs() < 1e-15));
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut params = ParamSet::new();
        let w = params.add("w", Tensor::vector(vec![0.3, -1.0, 2.0]));
        let mut grads = Gradients::zeros_like(&params);
        let mut t = Tape::new(&params);
        let wv = t.param(w);
        let loss = t.sum(wv);
        t.backward(loss, &mut grads).unwrap();
        assert_eq!(grads.get(w), &[1.0, 1.0, 1.0]);
        // A second pass accumulates.
        t.backward(loss, &mut grads).unwrap();
        assert_eq!(grads.get(w), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut params = ParamSet::new();
        let w = params.add("w", Tensor::vector(vec![1.0, 2.0]));
        let mut t = Tape::new(&params);
        let wv = t.param(w);
        let mut grads = Gradients::zeros_like(&params);
        assert!(t.backward(wv, &mut grads).is_err());
    }

    #[test]
    fn sigmoid_dot_matches_finite_difference() {
        let mut params = ParamSet::new();
        let w = params.add("w", Tensor::vector(vec![0.4, -0.3, 1.2]));
        let c = vec![0.5, 2.0, -1.5];
        let report = grad_check(
            &params,
            |t| {
                let wv = t.param(w);
                let s = t.sigmoid(wv);
                let cv = t.vector(c.clone());
                let p = t.mul(s, cv)?;
                Ok(t.sum(p))
            },
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }

    #[test]
    fn bce_logits_matches_probability_form() {
        let params = ParamSet::new();
        let mut t = Tape::new(&params);
        let zs = vec![-3.0, -0.2, 0.0, 1.5, 9.0, 30.0, -30.0];
        let y = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0];
        let z = t.vector(zs.clone());
        let a = t.bce_logits(z, &y).unwrap();
        let p = t.sigmoid(z);
        let b = t.bce(p, &y).unwrap();
        assert!((t.scalar(a) - t.scalar(b)).abs() < 1e-8);
        let mut ga = Gradients::zeros_like(&params);
        t.backward(a, &mut ga).unwrap();
        assert!(t.bce_logits(z, &[1.0]).is_err());
    }

    #[test]
    fn bce_logits_gradient() {
        let mut params = ParamSet::new();
        let w = params.add("w", Tensor::vector(vec![-2.0, -0.3, 0.4, 3.0]));
        let report = grad_check(
            &params,
            |t| {
                let w = t.param(w);
                t.bce_logits(w, &[1.0, 0.0, 0.0, 1.0])
            },
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }

    #[test]
    fn bce_value() {
        let params = ParamSet::new();
        let mut t = Tape::new(&params);
        let p = t.vector(vec![0.5; 4]);
        let l = t.bce(p, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((t.scalar(l) - 4.0 * core::f64::consts::LN_2).abs() < 1e-12);
        let p = t.vector(vec![1.0, 0.0]);
        let l = t.bce(p, &[1.0, 0.0]).unwrap();
        assert!(t.scalar(l) < 1e-6);
        assert!(t.bce(p, &[1.0]).is_err());
    }
}
