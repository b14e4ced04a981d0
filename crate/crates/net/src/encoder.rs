//! Hierarchical polyline encoder: a shared per-node MLP, max-pool per
//! polyline, single-head self-attention across the polylines of one
//! observation and a mean-pool into the global feature.

use crate::{Linear, Params, Tensor2};
use occsim_core::obs::{scale_node, PaddedBatch, PolylineBatch, PolylineKind, FEATURE_DIM, MAX_NODES, MAX_POLYLINES};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Scaled node features plus the polyline-kind one-hot.
pub const NODE_INPUT: usize = FEATURE_DIM + PolylineKind::COUNT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub node1: Linear,
    pub node2: Linear,
    pub wq: Tensor2,
    pub wk: Tensor2,
    pub wv: Tensor2,
}

impl EncoderParams {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            node1: Linear::zeros(NODE_INPUT, hidden),
            node2: Linear::zeros(hidden, hidden),
            wq: Tensor2::zeros(hidden, hidden),
            wk: Tensor2::zeros(hidden, hidden),
            wv: Tensor2::zeros(hidden, hidden),
        }
    }

    pub fn init<R: Rng>(hidden: usize, rng: &mut R) -> Self {
        let relu_gain = 2f64.sqrt();
        let proj = |rng: &mut R| Linear::init(hidden, hidden, 1.0, rng).w;
        Self {
            node1: Linear::init(NODE_INPUT, hidden, relu_gain, rng),
            node2: Linear::init(hidden, hidden, relu_gain, rng),
            wq: proj(rng),
            wk: proj(rng),
            wv: proj(rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.node2.outputs()
    }

    pub(crate) fn tensor_refs(&self) -> Vec<&Tensor2> {
        vec![&self.node1.w, &self.node1.b, &self.node2.w, &self.node2.b, &self.wq, &self.wk, &self.wv]
    }

    pub(crate) fn tensor_refs_mut(&mut self) -> Vec<&mut Tensor2> {
        vec![&mut self.node1.w, &mut self.node1.b, &mut self.node2.w, &mut self.node2.b, &mut self.wq, &mut self.wk, &mut self.wv]
    }

    pub(crate) fn names(prefix: &str) -> Vec<String> {
        ["node1.w", "node1.b", "node2.w", "node2.b", "wq", "wk", "wv"].iter().map(|n| format!("{prefix}{n}")).collect()
    }

    pub fn forward(&self, input: &EncoderInput) -> EncoderCache {
        let h = self.hidden();
        let mut h1 = self.node1.forward(&input.nodes);
        h1.relu_inplace();
        let mut h2 = self.node2.forward(&h1);
        h2.relu_inplace();

        let m = input.polylines.len();
        let mut pooled = Tensor2::zeros(m, h);
        let mut argmax = vec![0usize; m * h];
        for (p, r) in input.polylines.iter().enumerate() {
            for j in 0..h {
                let mut best = r.start;
                for n in r.clone() {
                    if h2.get(n, j) > h2.get(best, j) {
                        best = n;
                    }
                }
                argmax[p * h + j] = best;
                pooled.set(p, j, h2.get(best, j));
            }
        }

        let q = pooled.matmul(&self.wq);
        let k = pooled.matmul(&self.wk);
        let v = pooled.matmul(&self.wv);
        let scale = 1.0 / (h as f64).sqrt();
        let mut attention = Vec::new();
        let mut out = Tensor2::zeros(m, h);
        let mut global = Tensor2::zeros(input.observations.len(), h);
        for (o, r) in input.observations.iter().enumerate() {
            let n = r.len();
            for i in r.clone() {
                let scores: Vec<f64> = r.clone().map(|j| dot(q.row(i), k.row(j)) * scale).collect();
                let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
                let total: f64 = exps.iter().sum();
                let row_start = attention.len();
                attention.extend(exps.iter().map(|e| e / total));
                let weights = &attention[row_start..];
                let out_row = out.row_mut(i);
                for (a, j) in weights.iter().zip(r.clone()) {
                    out_row.iter_mut().zip(v.row(j)).for_each(|(x, y)| *x += a * y);
                }
                let inv = 1.0 / n as f64;
                for c in 0..h {
                    let g = global.get(o, c) + out.get(i, c) * inv;
                    global.set(o, c, g);
                }
            }
        }
        EncoderCache { h1, h2, pooled, argmax, q, k, v, attention, out, global }
    }

    /// Accumulates gradients into `grads` given `dL/d global` and optionally
    /// `dL/d polyline features`. Returns `dL/d nodes`.
    pub fn backward(
        &self,
        input: &EncoderInput,
        cache: &EncoderCache,
        d_global: &Tensor2,
        d_out: Option<&Tensor2>,
        grads: &mut EncoderParams,
    ) -> Tensor2 {
        let h = self.hidden();
        let m = input.polylines.len();
        let mut d_o = match d_out {
            Some(d) => d.clone(),
            None => Tensor2::zeros(m, h),
        };
        for (o, r) in input.observations.iter().enumerate() {
            let inv = 1.0 / r.len() as f64;
            for i in r.clone() {
                d_o.row_mut(i).iter_mut().zip(d_global.row(o)).for_each(|(a, b)| *a += b * inv);
            }
        }

        let scale = 1.0 / (h as f64).sqrt();
        let mut dq = Tensor2::zeros(m, h);
        let mut dk = Tensor2::zeros(m, h);
        let mut dv = Tensor2::zeros(m, h);
        let mut offset = 0;
        for r in &input.observations {
            let n = r.len();
            for (ii, i) in r.clone().enumerate() {
                let a = &cache.attention[offset + ii * n..offset + (ii + 1) * n];
                let da: Vec<f64> = r.clone().map(|j| dot(d_o.row(i), cache.v.row(j))).collect();
                let inner: f64 = a.iter().zip(&da).map(|(x, y)| x * y).sum();
                for (jj, j) in r.clone().enumerate() {
                    dv.row_mut(j).iter_mut().zip(d_o.row(i)).for_each(|(x, y)| *x += a[jj] * y);
                    let ds = a[jj] * (da[jj] - inner) * scale;
                    if ds != 0.0 {
                        dq.row_mut(i).iter_mut().zip(cache.k.row(j)).for_each(|(x, y)| *x += ds * y);
                        dk.row_mut(j).iter_mut().zip(cache.q.row(i)).for_each(|(x, y)| *x += ds * y);
                    }
                }
            }
            offset += n * n;
        }
        cache.pooled.t_matmul_acc(&dq, &mut grads.wq);
        cache.pooled.t_matmul_acc(&dk, &mut grads.wk);
        cache.pooled.t_matmul_acc(&dv, &mut grads.wv);
        let mut d_pooled = dq.matmul_t(&self.wq);
        d_pooled.add_assign(&dk.matmul_t(&self.wk));
        d_pooled.add_assign(&dv.matmul_t(&self.wv));

        let mut dh2 = Tensor2::zeros(cache.h2.rows(), h);
        for p in 0..m {
            for j in 0..h {
                let n = cache.argmax[p * h + j];
                dh2.set(n, j, dh2.get(n, j) + d_pooled.get(p, j));
            }
        }
        dh2.relu_mask(&cache.h2);
        let mut dh1 = self.node2.backward(&cache.h1, &dh2, &mut grads.node2);
        dh1.relu_mask(&cache.h1);
        self.node1.backward(&input.nodes, &dh1, &mut grads.node1)
    }
}

impl Params for EncoderParams {
    fn tensors(&self) -> Vec<&Tensor2> {
        self.tensor_refs()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        self.tensor_refs_mut()
    }

    fn tensor_names(&self) -> Vec<String> {
        Self::names("encoder.")
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Flattened valid nodes of several observations.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderInput {
    /// `N x NODE_INPUT`
    pub nodes: Tensor2,
    /// Node rows of each polyline, never empty.
    pub polylines: Vec<Range<usize>>,
    /// Polyline indices of each observation, possibly empty.
    pub observations: Vec<Range<usize>>,
}

impl EncoderInput {
    /// Valid polylines in batch order; masked ones are dropped.
    pub fn from_batches(batches: &[&PolylineBatch]) -> Self {
        let mut b = Builder::default();
        for batch in batches {
            let start = b.polylines.len();
            for pl in batch.valid_polylines().take(MAX_POLYLINES) {
                b.push_polyline(pl.kind, pl.nodes.iter().take(MAX_NODES));
            }
            b.observations.push(start..b.polylines.len());
        }
        b.finish()
    }

    /// Same as [`EncoderInput::from_batches`] but reads the dense padded
    /// layout and honours its masks.
    pub fn from_padded(batches: &[&PaddedBatch]) -> Self {
        let mut b = Builder::default();
        for batch in batches {
            let start = b.polylines.len();
            for p in 0..batch.polyline_mask.len() {
                if !batch.polyline_mask[p] {
                    continue;
                }
                let nodes = (0..MAX_NODES).filter(|&j| batch.node_mask[p][j]).map(|j| &batch.features[p][j]);
                b.push_polyline(batch.kinds[p], nodes);
            }
            b.observations.push(start..b.polylines.len());
        }
        b.finish()
    }

    pub fn observation_count(&self) -> usize {
        self.observations.len()
    }
}

#[derive(Default)]
struct Builder {
    data: Vec<f64>,
    rows: usize,
    polylines: Vec<Range<usize>>,
    observations: Vec<Range<usize>>,
}

impl Builder {
    fn push_polyline<'a>(&mut self, kind: PolylineKind, nodes: impl Iterator<Item = &'a [f64; FEATURE_DIM]>) {
        let start = self.rows;
        for n in nodes {
            self.data.extend_from_slice(&scale_node(kind, n));
            let mut onehot = [0.0; PolylineKind::COUNT];
            onehot[kind.index()] = 1.0;
            self.data.extend_from_slice(&onehot);
            self.rows += 1;
        }
        if self.rows > start {
            self.polylines.push(start..self.rows);
        }
    }

    fn finish(self) -> EncoderInput {
        EncoderInput {
            nodes: Tensor2::from_vec(self.rows, NODE_INPUT, self.data).expect("rows match node width"),
            polylines: self.polylines,
            observations: self.observations,
        }
    }
}

/// Forward activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct EncoderCache {
    pub h1: Tensor2,
    pub h2: Tensor2,
    pub pooled: Tensor2,
    /// Winning node row per (polyline, channel).
    pub argmax: Vec<usize>,
    pub q: Tensor2,
    pub k: Tensor2,
    pub v: Tensor2,
    /// Row-major attention matrix of each observation, concatenated.
    pub attention: Vec<f64>,
    /// Attended polyline features, `M x H`.
    pub out: Tensor2,
    /// One row per observation.
    pub global: Tensor2,
}

impl EncoderCache {
    /// Attention matrix of observation `o` as rows.
    pub fn attention_rows(&self, input: &EncoderInput, o: usize) -> Vec<Vec<f64>> {
        let offset: usize = input.observations[..o].iter().map(|r| r.len() * r.len()).sum();
        let n = input.observations[o].len();
        (0..n).map(|i| self.attention[offset + i * n..offset + (i + 1) * n].to_vec()).collect()
    }
}
