//! Pre-norm decoder-only transformer: learned positional embeddings, causal
//! multi-head attention, GELU feed-forward, output head tied to the token
//! embedding, no biases on linear maps.
//!
//! Sequences in a batch are packed row-wise into one matrix so the linear maps
//! run as a single product; attention is computed per sequence.

use diglossia_core::rng::Rng;
use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, Axis};
use rand::Rng as _;

use crate::config::{LoraConfig, LoraTarget, ModelConfig};
use crate::ops::{self, LayerNormCache};
use crate::params::{Param, ParamStore};
use crate::tokenizer::Encoded;
use crate::{ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Adapter {
    pub a: usize,
    pub b: usize,
    pub scale: f64,
    pub dropout: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Linear {
    pub name: String,
    pub w: usize,
    pub adapter: Option<Adapter>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layer {
    pub ln1: (usize, usize),
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub ln2: (usize, usize),
    pub up: Linear,
    pub down: Linear,
}

impl Layer {
    pub fn linear_mut(&mut self, target: LoraTarget) -> &mut Linear {
        match target {
            LoraTarget::Q => &mut self.q,
            LoraTarget::K => &mut self.k,
            LoraTarget::V => &mut self.v,
            LoraTarget::O => &mut self.o,
            LoraTarget::Up => &mut self.up,
            LoraTarget::Down => &mut self.down,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub(crate) config: ModelConfig,
    pub(crate) store: ParamStore,
    pub(crate) tok_emb: usize,
    pub(crate) pos_emb: usize,
    pub(crate) layers: Vec<Layer>,
    pub(crate) ln_f: (usize, usize),
    pub(crate) lora: Option<LoraConfig>,
    pub(crate) merged: bool,
}

struct LinearCache {
    x: Array2<f64>,
    /// Adapter input after dropout, adapter hidden, and the dropout mask.
    z: Option<Array2<f64>>,
    t: Option<Array2<f64>>,
    mask: Option<Array2<f64>>,
}

struct LayerCache {
    ln1: LayerNormCache,
    q: LinearCache,
    k: LinearCache,
    v: LinearCache,
    qv: Array2<f64>,
    kv: Array2<f64>,
    vv: Array2<f64>,
    /// Attention probabilities per (sequence, head).
    probs: Vec<Array2<f64>>,
    o: LinearCache,
    drop1: Option<Array2<f64>>,
    ln2: LayerNormCache,
    up: LinearCache,
    u: Array2<f64>,
    down: LinearCache,
    drop2: Option<Array2<f64>>,
}

/// Everything the backward pass needs from one forward pass.
pub struct ForwardCache {
    ids: Vec<u32>,
    positions: Vec<usize>,
    spans: Vec<(usize, usize)>,
    layers: Vec<LayerCache>,
    rows: Vec<usize>,
    ln_f: LayerNormCache,
    xf: Array2<f64>,
    dlogits: Array2<f64>,
}

fn dropout_mask(rows: usize, cols: usize, p: f64, rng: &mut Rng) -> Array2<f64> {
    let keep = 1.0 / (1.0 - p);
    Array2::from_shape_simple_fn((rows, cols), || {
        if rng.random::<f64>() < p {
            0.0
        } else {
            keep
        }
    })
}

fn ln_params(store: &mut ParamStore, prefix: &str, d: usize) -> (usize, usize) {
    let g = store.push(Param::new(format!("{prefix}.gain"), Array2::ones((1, d)), true));
    let b = store.push(Param::new(format!("{prefix}.bias"), Array2::zeros((1, d)), true));
    (g, b)
}

/// Spans of each sequence within the packed rows.
fn pack(batch: &[Encoded], max_len: usize, vocab: usize) -> Result<(Vec<u32>, Vec<usize>, Vec<(usize, usize)>)> {
    let mut ids = Vec::new();
    let mut positions = Vec::new();
    let mut spans = Vec::with_capacity(batch.len());
    for (i, ex) in batch.iter().enumerate() {
        if ex.ids.len() > max_len {
            return Err(ModelError::SequenceTooLong {
                id: format!("batch[{i}]"),
                len: ex.ids.len(),
                max: max_len,
            });
        }
        if ex.labels.len() != ex.ids.len() || ex.supervised.len() != ex.ids.len() {
            return Err(ModelError::Encoding(format!("batch[{i}]: ragged ids, labels and mask")));
        }
        if let Some(&bad) = ex.ids.iter().find(|&&t| t as usize >= vocab) {
            return Err(ModelError::TokenOutOfRange(bad));
        }
        spans.push((ids.len(), ex.ids.len()));
        ids.extend_from_slice(&ex.ids);
        positions.extend(0..ex.ids.len());
    }
    Ok((ids, positions, spans))
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = diglossia_core::rng::stream(seed, diglossia_core::rng::label("init"));
        let d = config.d_model;
        let std = config.init_std;
        let resid_std = std / (2.0 * config.n_layers as f64).sqrt();
        let mut store = ParamStore::default();
        let tok_emb = store.push(Param::normal("tok_emb", config.vocab_size, d, std, &mut rng));
        let pos_emb = store.push(Param::normal("pos_emb", config.max_seq_len, d, std, &mut rng));
        let mut layers = Vec::with_capacity(config.n_layers);
        for l in 0..config.n_layers {
            let p = format!("layers.{l}");
            let linear = |store: &mut ParamStore, name: &str, rows, cols, std, rng: &mut Rng| {
                let full = format!("{p}.{name}");
                let w = store.push(Param::normal(&full, rows, cols, std, rng));
                Linear {
                    name: full,
                    w,
                    adapter: None,
                }
            };
            let ln1 = ln_params(&mut store, &format!("{p}.ln1"), d);
            let q = linear(&mut store, "q", d, d, std, &mut rng);
            let k = linear(&mut store, "k", d, d, std, &mut rng);
            let v = linear(&mut store, "v", d, d, std, &mut rng);
            let o = linear(&mut store, "o", d, d, resid_std, &mut rng);
            let ln2 = ln_params(&mut store, &format!("{p}.ln2"), d);
            let up = linear(&mut store, "up", d, config.d_ff, std, &mut rng);
            let down = linear(&mut store, "down", config.d_ff, d, resid_std, &mut rng);
            layers.push(Layer {
                ln1,
                q,
                k,
                v,
                o,
                ln2,
                up,
                down,
            });
        }
        let ln_f = ln_params(&mut store, "ln_f", d);
        Ok(Model {
            config,
            store,
            tok_emb,
            pos_emb,
            layers,
            ln_f,
            lora: None,
            merged: false,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn lora_config(&self) -> Option<&LoraConfig> {
        self.lora.as_ref()
    }

    pub fn zero_grad(&mut self) {
        self.store.zero_grad();
    }

    fn row_vec(&self, idx: usize) -> ndarray::ArrayView1<'_, f64> {
        self.store.params[idx].value.row(0)
    }

    fn linear_forward(&self, lin: &Linear, x: &Array2<f64>, rng: &mut Option<&mut Rng>) -> (Array2<f64>, LinearCache) {
        let mut y = x.dot(&self.store.params[lin.w].value);
        let mut cache = LinearCache {
            x: x.clone(),
            z: None,
            t: None,
            mask: None,
        };
        if let Some(ad) = lin.adapter {
            let mask = match rng {
                Some(r) if ad.dropout > 0.0 => Some(dropout_mask(x.nrows(), x.ncols(), ad.dropout, r)),
                _ => None,
            };
            let z = match &mask {
                Some(m) => x * m,
                None => x.clone(),
            };
            let t = z.dot(&self.store.params[ad.a].value);
            general_mat_mul(ad.scale, &t, &self.store.params[ad.b].value, 1.0, &mut y);
            cache.z = Some(z);
            cache.t = Some(t);
            cache.mask = mask;
        }
        (y, cache)
    }

    fn linear_backward(&mut self, lin: &Linear, cache: &LinearCache, dy: &Array2<f64>) -> Array2<f64> {
        let mut dx = dy.dot(&self.store.params[lin.w].value.t());
        let w = &mut self.store.params[lin.w];
        if !w.frozen {
            general_mat_mul(1.0, &cache.x.t(), dy, 1.0, &mut w.grad);
        }
        if let Some(ad) = lin.adapter {
            let z = cache.z.as_ref().expect("adapter cache");
            let t = cache.t.as_ref().expect("adapter cache");
            let b_frozen = self.store.params[ad.b].frozen;
            let a_frozen = self.store.params[ad.a].frozen;
            if !b_frozen {
                general_mat_mul(ad.scale, &t.t(), dy, 1.0, &mut self.store.params[ad.b].grad);
            }
            let mut dt = dy.dot(&self.store.params[ad.b].value.t());
            dt *= ad.scale;
            if !a_frozen {
                general_mat_mul(1.0, &z.t(), &dt, 1.0, &mut self.store.params[ad.a].grad);
            }
            let mut dz = dt.dot(&self.store.params[ad.a].value.t());
            if let Some(m) = &cache.mask {
                dz *= m;
            }
            dx += &dz;
        }
        dx
    }

    fn ln_forward(&self, (g, b): (usize, usize), x: &Array2<f64>) -> (Array2<f64>, LayerNormCache) {
        ops::layer_norm(x, self.row_vec(g), self.row_vec(b), self.config.layer_norm_eps)
    }

    fn ln_backward(&mut self, (g, b): (usize, usize), cache: &LayerNormCache, dy: &Array2<f64>) -> Array2<f64> {
        let gain = self.store.params[g].value.clone();
        let frozen = self.store.params[g].frozen;
        if frozen {
            return ops::layer_norm_backward(dy, cache, gain.row(0), None);
        }
        let (lo, hi) = self.store.params.split_at_mut(b);
        let dg = lo[g].grad.view_mut();
        let db = hi[0].grad.view_mut();
        ops::layer_norm_backward(dy, cache, gain.row(0), Some((dg, db)))
    }

    /// Runs the layer stack over packed rows. Returns the residual stream
    /// before the final norm, with per-layer caches when `keep` is set.
    fn forward_stack(
        &self,
        ids: &[u32],
        positions: &[usize],
        spans: &[(usize, usize)],
        mut rng: Option<&mut Rng>,
        keep: bool,
    ) -> (Array2<f64>, Vec<LayerCache>) {
        let d = self.config.d_model;
        let n = ids.len();
        let tok = &self.store.params[self.tok_emb].value;
        let pos = &self.store.params[self.pos_emb].value;
        let mut x = Array2::zeros((n, d));
        for (r, (&id, &p)) in ids.iter().zip(positions).enumerate() {
            let mut row = x.row_mut(r);
            row += &tok.row(id as usize);
            row += &pos.row(p);
        }
        let h = self.config.n_heads;
        let dh = self.config.head_dim();
        let inv_sqrt = 1.0 / (dh as f64).sqrt();
        let p_drop = self.config.dropout;
        let mut caches = Vec::new();
        for layer in &self.layers {
            let (h1, ln1) = self.ln_forward(layer.ln1, &x);
            let (qv, qc) = self.linear_forward(&layer.q, &h1, &mut rng);
            let (kv, kc) = self.linear_forward(&layer.k, &h1, &mut rng);
            let (vv, vc) = self.linear_forward(&layer.v, &h1, &mut rng);
            let mut attn = Array2::zeros((n, d));
            let mut probs = Vec::new();
            for &(start, len) in spans {
                for head in 0..h {
                    let cols = head * dh..(head + 1) * dh;
                    let q = qv.slice(s![start..start + len, cols.clone()]);
                    let k = kv.slice(s![start..start + len, cols.clone()]);
                    let v = vv.slice(s![start..start + len, cols.clone()]);
                    let mut sc = ops::matmul_t(q, k);
                    sc *= inv_sqrt;
                    for i in 0..len {
                        for j in i + 1..len {
                            sc[[i, j]] = f64::NEG_INFINITY;
                        }
                    }
                    ops::softmax_rows(sc.view_mut());
                    let out = sc.dot(&v);
                    attn.slice_mut(s![start..start + len, cols]).assign(&out);
                    if keep {
                        probs.push(sc);
                    }
                }
            }
            let (mut a, oc) = self.linear_forward(&layer.o, &attn, &mut rng);
            let drop1 = match &mut rng {
                Some(r) if p_drop > 0.0 => Some(dropout_mask(n, d, p_drop, r)),
                _ => None,
            };
            if let Some(m) = &drop1 {
                a *= m;
            }
            x += &a;
            let (h2, ln2) = self.ln_forward(layer.ln2, &x);
            let (u, upc) = self.linear_forward(&layer.up, &h2, &mut rng);
            let g = ops::gelu(&u);
            let (mut f, downc) = self.linear_forward(&layer.down, &g, &mut rng);
            let drop2 = match &mut rng {
                Some(r) if p_drop > 0.0 => Some(dropout_mask(n, d, p_drop, r)),
                _ => None,
            };
            if let Some(m) = &drop2 {
                f *= m;
            }
            x += &f;
            if keep {
                caches.push(LayerCache {
                    ln1,
                    q: qc,
                    k: kc,
                    v: vc,
                    qv,
                    kv,
                    vv,
                    probs,
                    o: oc,
                    drop1,
                    ln2,
                    up: upc,
                    u,
                    down: downc,
                    drop2,
                });
            }
        }
        (x, caches)
    }

    fn head(&self, xf: &Array2<f64>) -> Array2<f64> {
        ops::matmul_t(xf.view(), self.store.params[self.tok_emb].value.view())
    }

    /// Logits at every position of one sequence, without dropout.
    pub fn logits(&self, ids: &[u32]) -> Result<Array2<f64>> {
        let enc = Encoded::new(ids.to_vec(), vec![false; ids.len()]);
        let (ids, positions, spans) = pack(
            std::slice::from_ref(&enc),
            self.config.max_seq_len,
            self.config.vocab_size,
        )?;
        let (x, _) = self.forward_stack(&ids, &positions, &spans, None, false);
        let (xf, _) = self.ln_forward(self.ln_f, &x);
        Ok(self.head(&xf))
    }

    /// Mean negative log-likelihood over supervised positions. The label at
    /// position `p` is predicted from the logits at `p - 1`; labels at
    /// positions that are not supervised are never read.
    pub fn forward(&self, batch: &[Encoded], rng: Option<&mut Rng>) -> Result<(f64, ForwardCache)> {
        let (ids, positions, spans) = pack(batch, self.config.max_seq_len, self.config.vocab_size)?;
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        for (ex, &(start, len)) in batch.iter().zip(&spans) {
            for p in 1..len {
                if ex.supervised[p] {
                    let label = ex.labels[p];
                    if label as usize >= self.config.vocab_size {
                        return Err(ModelError::TokenOutOfRange(label));
                    }
                    rows.push(start + p - 1);
                    targets.push(label as usize);
                }
            }
        }
        if rows.is_empty() {
            return Err(ModelError::NoSupervision);
        }
        let (x, layers) = self.forward_stack(&ids, &positions, &spans, rng, true);
        let xs = x.select(Axis(0), &rows);
        let (xf, ln_f) = self.ln_forward(self.ln_f, &xs);
        let mut logits = self.head(&xf);
        let m = rows.len() as f64;
        let mut loss = 0.0;
        for (mut row, &t) in logits.outer_iter_mut().zip(&targets) {
            let lse = ops::log_sum_exp(row.view());
            loss += lse - row[t];
            row.mapv_inplace(|v| (v - lse).exp() / m);
            row[t] -= 1.0 / m;
        }
        let cache = ForwardCache {
            ids,
            positions,
            spans,
            layers,
            rows,
            ln_f,
            xf,
            dlogits: logits,
        };
        Ok((loss / m, cache))
    }

    /// Loss without dropout and without touching gradients.
    pub fn loss(&self, batch: &[Encoded]) -> Result<f64> {
        self.forward(batch, None).map(|(l, _)| l)
    }

    /// Accumulates `scale * d(loss)/d(param)` into the gradient buffers.
    pub fn backward(&mut self, cache: ForwardCache, scale: f64) {
        let ForwardCache {
            ids,
            positions,
            spans,
            layers,
            rows,
            ln_f,
            xf,
            mut dlogits,
        } = cache;
        dlogits *= scale;
        let d = self.config.d_model;
        let n = ids.len();
        let emb_frozen = self.store.params[self.tok_emb].frozen;
        if !emb_frozen {
            general_mat_mul(1.0, &dlogits.t(), &xf, 1.0, &mut self.store.params[self.tok_emb].grad);
        }
        let dxf = dlogits.dot(&self.store.params[self.tok_emb].value);
        let dxs = self.ln_backward(self.ln_f, &ln_f, &dxf);
        let mut dx = Array2::zeros((n, d));
        for (i, &r) in rows.iter().enumerate() {
            let mut row = dx.row_mut(r);
            row += &dxs.row(i);
        }

        let h = self.config.n_heads;
        let dh = self.config.head_dim();
        let inv_sqrt = 1.0 / (dh as f64).sqrt();
        let layer_defs = self.layers.clone();
        for (layer, c) in layer_defs.iter().zip(layers).rev() {
            // feed-forward branch
            let mut df = dx.clone();
            if let Some(m) = &c.drop2 {
                df *= m;
            }
            let dg = self.linear_backward(&layer.down, &c.down, &df);
            let du = ops::gelu_backward(&c.u, &dg);
            let dh2 = self.linear_backward(&layer.up, &c.up, &du);
            dx += &self.ln_backward(layer.ln2, &c.ln2, &dh2);

            // attention branch
            let mut da = dx.clone();
            if let Some(m) = &c.drop1 {
                da *= m;
            }
            let dattn = self.linear_backward(&layer.o, &c.o, &da);
            let mut dq = Array2::zeros((n, d));
            let mut dk = Array2::zeros((n, d));
            let mut dv = Array2::zeros((n, d));
            let mut probs = c.probs.iter();
            for &(start, len) in &spans {
                for head in 0..h {
                    let p = probs.next().expect("one probability matrix per head");
                    let cols = head * dh..(head + 1) * dh;
                    let rs = start..start + len;
                    let q = c.qv.slice(s![rs.clone(), cols.clone()]);
                    let k = c.kv.slice(s![rs.clone(), cols.clone()]);
                    let v = c.vv.slice(s![rs.clone(), cols.clone()]);
                    let dout = dattn.slice(s![rs.clone(), cols.clone()]);
                    let dp = ops::matmul_t(dout, v);
                    dv.slice_mut(s![rs.clone(), cols.clone()]).assign(&p.t().dot(&dout));
                    let mut ds = &dp * p;
                    for (mut row, prow) in ds.outer_iter_mut().zip(p.outer_iter()) {
                        let dot = row.sum();
                        row.zip_mut_with(&prow, |v, &pv| *v -= pv * dot);
                    }
                    ds *= inv_sqrt;
                    dq.slice_mut(s![rs.clone(), cols.clone()]).assign(&ds.dot(&k));
                    dk.slice_mut(s![rs, cols]).assign(&ds.t().dot(&q));
                }
            }
            let mut dh1 = self.linear_backward(&layer.q, &c.q, &dq);
            dh1 += &self.linear_backward(&layer.k, &c.k, &dk);
            dh1 += &self.linear_backward(&layer.v, &c.v, &dv);
            dx += &self.ln_backward(layer.ln1, &c.ln1, &dh1);
        }

        if !self.store.params[self.tok_emb].frozen {
            let grad = &mut self.store.params[self.tok_emb].grad;
            for (r, &id) in ids.iter().enumerate() {
                let mut row = grad.row_mut(id as usize);
                row += &dx.row(r);
            }
        }
        if !self.store.params[self.pos_emb].frozen {
            let grad = &mut self.store.params[self.pos_emb].grad;
            for (r, &p) in positions.iter().enumerate() {
                let mut row = grad.row_mut(p);
                row += &dx.row(r);
            }
        }
    }

    /// Forward plus backward; returns the batch loss.
    pub fn loss_and_grad(&mut self, batch: &[Encoded], rng: Option<&mut Rng>, scale: f64) -> Result<f64> {
        let (loss, cache) = self.forward(batch, rng)?;
        self.backward(cache, scale);
        Ok(loss)
    }

    pub fn new_kv_cache(&self) -> KvCache {
        let shape = (self.config.max_seq_len, self.config.d_model);
        KvCache {
            k: vec![Array2::zeros(shape); self.config.n_layers],
            v: vec![Array2::zeros(shape); self.config.n_layers],
            len: 0,
        }
    }

    /// Feeds one token and returns next-token logits.
    pub fn step(&self, cache: &mut KvCache, token: u32) -> Result<Array1<f64>> {
        let pos = cache.len;
        if pos >= self.config.max_seq_len {
            return Err(ModelError::SequenceTooLong {
                id: "generation".into(),
                len: pos + 1,
                max: self.config.max_seq_len,
            });
        }
        if token as usize >= self.config.vocab_size {
            return Err(ModelError::TokenOutOfRange(token));
        }
        let d = self.config.d_model;
        let h = self.config.n_heads;
        let dh = self.config.head_dim();
        let inv_sqrt = 1.0 / (dh as f64).sqrt();
        let mut x = Array2::zeros((1, d));
        {
            let mut row = x.row_mut(0);
            row += &self.store.params[self.tok_emb].value.row(token as usize);
            row += &self.store.params[self.pos_emb].value.row(pos);
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let (h1, _) = self.ln_forward(layer.ln1, &x);
            let (q, _) = self.linear_forward(&layer.q, &h1, &mut None);
            let (k, _) = self.linear_forward(&layer.k, &h1, &mut None);
            let (v, _) = self.linear_forward(&layer.v, &h1, &mut None);
            cache.k[l].row_mut(pos).assign(&k.row(0));
            cache.v[l].row_mut(pos).assign(&v.row(0));
            let mut attn = Array2::zeros((1, d));
            for head in 0..h {
                let cols = head * dh..(head + 1) * dh;
                let keys = cache.k[l].slice(s![0..=pos, cols.clone()]);
                let vals = cache.v[l].slice(s![0..=pos, cols.clone()]);
                let mut sc = ops::matmul_t(q.slice(s![.., cols.clone()]), keys);
                sc *= inv_sqrt;
                ops::softmax_rows(sc.view_mut());
                attn.slice_mut(s![.., cols]).assign(&sc.dot(&vals));
            }
            let (a, _) = self.linear_forward(&layer.o, &attn, &mut None);
            x += &a;
            let (h2, _) = self.ln_forward(layer.ln2, &x);
            let (u, _) = self.linear_forward(&layer.up, &h2, &mut None);
            let (f, _) = self.linear_forward(&layer.down, &ops::gelu(&u), &mut None);
            x += &f;
        }
        cache.len += 1;
        let (xf, _) = self.ln_forward(self.ln_f, &x);
        Ok(self.head(&xf).row(0).to_owned())
    }

    /// Attaches fresh adapters to the targeted linear maps and freezes every
    /// base parameter.
    pub fn apply_lora(&mut self, config: &LoraConfig, seed: u64) -> Result<()> {
        crate::lora::apply(self, config, seed)
    }

    /// Folds the adapters into the base weights and removes them.
    pub fn merge_lora(&mut self) -> Result<()> {
        crate::lora::merge(self)
    }
}

/// Keys and values of already processed positions, per layer.
#[derive(Debug, Clone)]
pub struct KvCache {
    k: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    len: usize,
}

impl KvCache {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelConfig {
        ModelConfig {
            vocab_size: 11,
            d_model: 8,
            n_layers: 2,
            n_heads: 2,
            d_ff: 16,
            max_seq_len: 12,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn parameter_count_matches_config() {
        let m = Model::new(tiny(), 1).unwrap();
        assert_eq!(m.params().n_params(), tiny().n_params());
    }

    #[test]
    fn cached_steps_match_full_forward() {
        let m = Model::new(tiny(), 3).unwrap();
        let ids = [0u32, 5, 7, 1, 9, 2];
        let full = m.logits(&ids).unwrap();
        let mut cache = m.new_kv_cache();
        for (i, &t) in ids.iter().enumerate() {
            let step = m.step(&mut cache, t).unwrap();
            for (a, b) in step.iter().zip(full.row(i)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn causal() {
        let m = Model::new(tiny(), 3).unwrap();
        let a = m.logits(&[0, 5, 7, 1]).unwrap();
        let b = m.logits(&[0, 5, 7, 9]).unwrap();
        for i in 0..3 {
            assert_eq!(a.row(i), b.row(i));
        }
    }

    #[test]
    fn rejects_bad_input() {
        let m = Model::new(tiny(), 3).unwrap();
        let enc = Encoded::new(vec![0, 1, 2], vec![false; 3]);
        assert!(matches!(m.loss(&[enc]), Err(ModelError::NoSupervision)));
        assert!(matches!(m.logits(&[0, 99]), Err(ModelError::TokenOutOfRange(99))));
        assert!(matches!(m.logits(&[0; 13]), Err(ModelError::SequenceTooLong { .. })));
    }
}
