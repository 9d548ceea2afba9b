//! Minimal deterministic neural stack: embedding tables, small MLPs,
//! row-wise max pooling, softmax, explicit reverse-mode gradients, and
//! RMSprop. Everything is 64-bit and seeded; no autodiff framework.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::store::{QuadId, TemporalKG, TimeMode};
use crate::{Error, Result};

/// Dense row-major matrix of activations.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2 {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        let mut data = Vec::with_capacity(n * cols);
        for r in rows {
            assert_eq!(r.len(), cols);
            data.extend(r);
        }
        Self { rows: n, cols, data }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// A parameter tensor with its gradient and RMSprop accumulator.
#[derive(Debug, Clone)]
pub struct Param {
    pub rows: usize,
    pub cols: usize,
    pub w: Vec<f64>,
    pub g: Vec<f64>,
    pub v: Vec<f64>,
}

impl Param {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let n = rows * cols;
        Self {
            rows,
            cols,
            w: vec![0.0; n],
            g: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.g.iter_mut().for_each(|g| *g = 0.0);
    }
}

fn xavier_uniform<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Param {
    let mut p = Param::zeros(rows, cols);
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    for w in &mut p.w {
        *w = rng.gen_range(-limit..limit);
    }
    p
}

fn normal<R: Rng>(rng: &mut R, std: f64) -> f64 {
    // Box-Muller; two uniform draws per sample keeps the stream simple.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    std * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One fully connected layer: `y = act(x Wᵀ + b)`, weights `out × in`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: Param,
    pub b: Param,
    pub act: Activation,
}

/// Stack of fully connected layers; hidden layers use ReLU, the final
/// layer is linear.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

/// Per-layer inputs and pre-activations cached by a forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Tensor2>,
    pre: Vec<Tensor2>,
}

impl Mlp {
    /// `dims = [input, hidden.., output]`.
    pub fn new<R: Rng>(dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i + 2 == dims.len() {
                    Activation::Identity
                } else {
                    Activation::Relu
                };
                Linear {
                    w: xavier_uniform(w[1], w[0], rng),
                    b: Param::zeros(w[1], 1),
                    act,
                }
            })
            .collect();
        Self { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].w.cols
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().w.rows
    }

    pub fn forward(&self, x: &Tensor2) -> (Tensor2, MlpCache) {
        assert_eq!(x.cols, self.in_dim(), "input width mismatch");
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
        };
        let mut cur = x.clone();
        for layer in &self.layers {
            let (out_dim, in_dim) = (layer.w.rows, layer.w.cols);
            let mut z = Tensor2::zeros(cur.rows, out_dim);
            for r in 0..cur.rows {
                let xr = cur.row(r);
                let zr = z.row_mut(r);
                for o in 0..out_dim {
                    let wrow = &layer.w.w[o * in_dim..(o + 1) * in_dim];
                    let mut acc = layer.b.w[o];
                    for i in 0..in_dim {
                        acc += wrow[i] * xr[i];
                    }
                    zr[o] = acc;
                }
            }
            cache.inputs.push(cur);
            let mut a = z.clone();
            a.data.iter_mut().for_each(|v| *v = layer.act.apply(*v));
            cache.pre.push(z);
            cur = a;
        }
        (cur, cache)
    }

    /// Accumulate parameter gradients from `grad_out` (dL/d output) and
    /// return dL/d input.
    pub fn backward(&mut self, cache: &MlpCache, grad_out: &Tensor2) -> Tensor2 {
        let mut grad = grad_out.clone();
        for (l, layer) in self.layers.iter_mut().enumerate().rev() {
            let x = &cache.inputs[l];
            let z = &cache.pre[l];
            let (out_dim, in_dim) = (layer.w.rows, layer.w.cols);
            let mut dx = Tensor2::zeros(x.rows, in_dim);
            for r in 0..x.rows {
                let xr = x.row(r);
                let zr = z.row(r);
                let gr = grad.row(r);
                for o in 0..out_dim {
                    let dz = gr[o] * layer.act.derivative(zr[o]);
                    if dz == 0.0 {
                        continue;
                    }
                    layer.b.g[o] += dz;
                    let wrow = &layer.w.w[o * in_dim..(o + 1) * in_dim];
                    let gwrow = &mut layer.w.g[o * in_dim..(o + 1) * in_dim];
                    let dxr = dx.row_mut(r);
                    for i in 0..in_dim {
                        gwrow[i] += dz * xr[i];
                        dxr[i] += dz * wrow[i];
                    }
                }
            }
            grad = dx;
        }
        grad
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.w, &mut l.b])
            .collect()
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|l| [&l.w, &l.b]).collect()
    }
}

/// Lookup table mapping dense ids to learned vectors.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    pub table: Param,
}

impl EmbeddingTable {
    pub fn new<R: Rng>(count: usize, dim: usize, rng: &mut R) -> Self {
        let mut table = Param::zeros(count, dim);
        for w in &mut table.w {
            *w = normal(rng, 0.1);
        }
        Self { table }
    }

    pub fn dim(&self) -> usize {
        self.table.cols
    }

    pub fn count(&self) -> usize {
        self.table.rows
    }

    pub fn row(&self, id: usize) -> &[f64] {
        let d = self.table.cols;
        &self.table.w[id * d..(id + 1) * d]
    }

    pub fn add_grad(&mut self, id: usize, grad: &[f64]) {
        let d = self.table.cols;
        for (g, &dg) in self.table.g[id * d..(id + 1) * d].iter_mut().zip(grad) {
            *g += dg;
        }
    }
}

/// Which embedding rows produced each matrix row; drives the scatter in
/// the backward pass.
#[derive(Debug, Clone, Default)]
pub struct EmbedInfo {
    pub rows: Vec<(usize, Vec<usize>)>,
}

/// Embed a topology state (merged core ∪ periphery, ascending quad id)
/// as one matrix row per quad: `[ψ(r) ∥ ξ(t)]` in point mode,
/// `[ψ(r) ∥ ξ(since) ∥ ξ(until)]` in interval mode with absent slots
/// mapped to their reserved null rows. An empty state embeds to a single
/// zero row so stranded topologies keep a well-defined fingerprint.
pub fn embed_state(
    kg: &TemporalKG,
    quads: &[QuadId],
    psi: &EmbeddingTable,
    xi: &EmbeddingTable,
) -> (Tensor2, EmbedInfo) {
    let slots = match kg.mode {
        TimeMode::Point => 1,
        TimeMode::Interval => 2,
    };
    let width = psi.dim() + slots * xi.dim();
    if quads.is_empty() {
        return (Tensor2::zeros(1, width), EmbedInfo::default());
    }
    debug_assert!(quads.windows(2).all(|w| w[0] < w[1]));
    let mut x = Tensor2::zeros(quads.len(), width);
    let mut info = EmbedInfo {
        rows: Vec::with_capacity(quads.len()),
    };
    for (r, &qid) in quads.iter().enumerate() {
        let quad = kg.quad(qid);
        let time_rows = match kg.mode {
            TimeMode::Point => vec![kg.since_row(quad.since)],
            TimeMode::Interval => vec![kg.since_row(quad.since), kg.until_row(quad.until)],
        };
        let row = x.row_mut(r);
        row[..psi.dim()].copy_from_slice(psi.row(quad.relation as usize));
        for (s, &trow) in time_rows.iter().enumerate() {
            let off = psi.dim() + s * xi.dim();
            row[off..off + xi.dim()].copy_from_slice(xi.row(trow));
        }
        info.rows.push((quad.relation as usize, time_rows));
    }
    (x, info)
}

/// Scatter dL/dX back into the embedding tables.
pub fn embed_backward(
    grad_x: &Tensor2,
    info: &EmbedInfo,
    psi: &mut EmbeddingTable,
    xi: &mut EmbeddingTable,
) {
    for (r, (relation, time_rows)) in info.rows.iter().enumerate() {
        let row = grad_x.row(r);
        psi.add_grad(*relation, &row[..psi.dim()]);
        for (s, &trow) in time_rows.iter().enumerate() {
            let off = psi.dim() + s * xi.dim();
            xi.add_grad(trow, &row[off..off + xi.dim()]);
        }
    }
}

/// Column-wise max over rows; returns the pooled vector and the first
/// argmax row per column (gradient routing target).
pub fn maxpool_rows(h: &Tensor2) -> (Vec<f64>, Vec<usize>) {
    assert!(h.rows > 0);
    let mut pooled = h.row(0).to_vec();
    let mut arg = vec![0usize; h.cols];
    for r in 1..h.rows {
        for (c, &v) in h.row(r).iter().enumerate() {
            if v > pooled[c] {
                pooled[c] = v;
                arg[c] = r;
            }
        }
    }
    (pooled, arg)
}

/// Route the pooled gradient to each column's argmax row only.
pub fn maxpool_backward(grad_pooled: &[f64], arg: &[usize], rows: usize) -> Tensor2 {
    let mut dh = Tensor2::zeros(rows, grad_pooled.len());
    for (c, (&g, &r)) in grad_pooled.iter().zip(arg).enumerate() {
        dh.set(r, c, g);
    }
    dh
}

/// Fingerprint cache for the backward pass.
#[derive(Debug, Clone)]
pub struct FingerprintCache {
    pub mlp: MlpCache,
    pub argmax: Vec<usize>,
    pub rows: usize,
}

/// Fingerprint of a state matrix: per-row MLP followed by column-wise
/// max pooling.
pub fn fingerprint(x: &Tensor2, net: &Mlp) -> (Vec<f64>, FingerprintCache) {
    let (h, mlp) = net.forward(x);
    let (pooled, argmax) = maxpool_rows(&h);
    (
        pooled,
        FingerprintCache {
            mlp,
            argmax,
            rows: h.rows,
        },
    )
}

/// dL/dΦ -> dL/dX through the pooling and the MLP.
pub fn fingerprint_backward(net: &mut Mlp, cache: &FingerprintCache, grad: &[f64]) -> Tensor2 {
    let dh = maxpool_backward(grad, &cache.argmax, cache.rows);
    net.backward(&cache.mlp, &dh)
}

/// How the two query-entity fingerprints combine into the Q-net input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Concat,
    Sum,
    Max,
    Hadamard,
}

impl Aggregation {
    pub fn out_dim(&self, d_f: usize) -> usize {
        match self {
            Aggregation::Concat => 2 * d_f,
            _ => d_f,
        }
    }

    pub fn forward(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        match self {
            Aggregation::Concat => a.iter().chain(b).copied().collect(),
            Aggregation::Sum => a.iter().zip(b).map(|(x, y)| x + y).collect(),
            Aggregation::Max => a.iter().zip(b).map(|(x, y)| x.max(*y)).collect(),
            Aggregation::Hadamard => a.iter().zip(b).map(|(x, y)| x * y).collect(),
        }
    }

    /// Split dL/d(aggregated) into the two fingerprint gradients.
    /// Max ties route to the first argument.
    pub fn backward(&self, grad: &[f64], a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self {
            Aggregation::Concat => {
                let d = a.len();
                (grad[..d].to_vec(), grad[d..].to_vec())
            }
            Aggregation::Sum => (grad.to_vec(), grad.to_vec()),
            Aggregation::Max => {
                let mut da = vec![0.0; a.len()];
                let mut db = vec![0.0; b.len()];
                for i in 0..a.len() {
                    if a[i] >= b[i] {
                        da[i] = grad[i];
                    } else {
                        db[i] = grad[i];
                    }
                }
                (da, db)
            }
            Aggregation::Hadamard => (
                grad.iter().zip(b).map(|(g, y)| g * y).collect(),
                grad.iter().zip(a).map(|(g, x)| g * x).collect(),
            ),
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// RMSprop with decoupled weight decay:
/// `v ← ρ v + (1−ρ) g²; w ← w − lr·g/(√v + ε) − lr·λ·w`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Rmsprop {
    pub lr: f64,
    pub rho: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Rmsprop {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            rho: 0.99,
            eps: 1e-8,
            weight_decay,
        }
    }

    pub fn step(&self, params: &mut [&mut Param]) -> Result<()> {
        for p in params {
            for i in 0..p.w.len() {
                let g = p.g[i];
                if !g.is_finite() {
                    return Err(Error::Numerical(format!("non-finite gradient {g}")));
                }
                p.v[i] = self.rho * p.v[i] + (1.0 - self.rho) * g * g;
                p.w[i] -= self.lr * g / (p.v[i].sqrt() + self.eps) + self.lr * self.weight_decay * p.w[i];
            }
        }
        Ok(())
    }
}
