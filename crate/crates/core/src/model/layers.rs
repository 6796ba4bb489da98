//! Differentiable building blocks with hand-written backward passes.
//!
//! Every `forward` returns its output plus whatever the matching
//! `backward` needs; `backward` adds parameter gradients into a
//! [`Gradients`] buffer and returns the gradient for its input(s).

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::{Gradients, ParamId, ParamStore};

const LN_EPS: f64 = 1e-5;

/// Dropout state for one forward pass: disabled for inference, seeded
/// for training.
pub struct ForwardCtx {
    rate: f64,
    rng: Option<ChaCha8Rng>,
}

impl ForwardCtx {
    pub fn eval() -> Self {
        ForwardCtx {
            rate: 0.0,
            rng: None,
        }
    }

    pub fn train(rate: f64, seed: u64) -> Self {
        if rate <= 0.0 {
            return Self::eval();
        }
        ForwardCtx {
            rate,
            rng: Some(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    /// Inverted dropout; the returned mask holds 0 or 1/(1-p).
    pub(crate) fn dropout(&mut self, x: Array2<f64>) -> (Array2<f64>, Option<Array2<f64>>) {
        let Some(rng) = self.rng.as_mut() else {
            return (x, None);
        };
        let keep = 1.0 - self.rate;
        let mask = Array2::from_shape_simple_fn(x.raw_dim(), || {
            if rng.random::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        });
        (x * &mask, Some(mask))
    }
}

pub(crate) fn undrop(dy: Array2<f64>, mask: &Option<Array2<f64>>) -> Array2<f64> {
    match mask {
        Some(m) => dy * m,
        None => dy,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, d_in: usize, d_out: usize, rng: &mut R) -> Self {
        let w = store.add_xavier(format!("{name}.weight"), d_in, d_out, rng);
        let b = store.add(format!("{name}.bias"), Array2::zeros((1, d_out)));
        Linear { w, b }
    }

    pub fn forward(&self, p: &ParamStore, x: &ArrayView2<f64>) -> Array2<f64> {
        let mut y = x.dot(p.get(self.w));
        y += p.get(self.b);
        y
    }

    /// Accumulates weight and bias gradients; returns the input gradient.
    pub fn backward(
        &self,
        p: &ParamStore,
        x: &ArrayView2<f64>,
        dy: &ArrayView2<f64>,
        g: &mut Gradients,
    ) -> Array2<f64> {
        self.backward_params(x, dy, g);
        dy.dot(&p.get(self.w).t())
    }

    /// Parameter gradients only, for layers whose input needs none.
    pub fn backward_params(&self, x: &ArrayView2<f64>, dy: &ArrayView2<f64>, g: &mut Gradients) {
        ndarray::linalg::general_mat_mul(1.0, &x.t(), dy, 1.0, g.get_mut(self.w));
        *g.get_mut(self.b) += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

pub struct LayerNormCache {
    xhat: Array2<f64>,
    inv_std: Vec<f64>,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, d: usize) -> Self {
        LayerNorm {
            gamma: store.add(format!("{name}.gamma"), Array2::ones((1, d))),
            beta: store.add(format!("{name}.beta"), Array2::zeros((1, d))),
        }
    }

    pub fn forward(&self, p: &ParamStore, x: &ArrayView2<f64>) -> (Array2<f64>, LayerNormCache) {
        let d = x.ncols() as f64;
        let mut xhat = x.to_owned();
        let mut inv_std = Vec::with_capacity(x.nrows());
        for mut row in xhat.rows_mut() {
            let mean = row.sum() / d;
            row.mapv_inplace(|v| v - mean);
            let var = row.iter().map(|v| v * v).sum::<f64>() / d;
            let is = 1.0 / (var + LN_EPS).sqrt();
            row.mapv_inplace(|v| v * is);
            inv_std.push(is);
        }
        let mut y = &xhat * p.get(self.gamma);
        y += p.get(self.beta);
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward(
        &self,
        p: &ParamStore,
        cache: &LayerNormCache,
        dy: &ArrayView2<f64>,
        g: &mut Gradients,
    ) -> Array2<f64> {
        *g.get_mut(self.gamma) += &(dy * &cache.xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
        *g.get_mut(self.beta) += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        let dxhat = dy * p.get(self.gamma);
        let d = dy.ncols() as f64;
        let mut dx = Array2::zeros(dy.raw_dim());
        for (i, mut out) in dx.rows_mut().into_iter().enumerate() {
            let dh = dxhat.row(i);
            let xh = cache.xhat.row(i);
            let sum_dh = dh.sum();
            let sum_dh_xh = dh.dot(&xh);
            let is = cache.inv_std[i];
            for j in 0..out.len() {
                out[j] = is / d * (d * dh[j] - sum_dh - xh[j] * sum_dh_xh);
            }
        }
        dx
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Embedding {
    pub table: ParamId,
}

impl Embedding {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, vocab: usize, d: usize, rng: &mut R) -> Self {
        Embedding {
            table: store.add_xavier(format!("{name}.weight"), vocab, d, rng),
        }
    }

    pub fn forward(&self, p: &ParamStore, ids: &[u32]) -> Array2<f64> {
        let table = p.get(self.table);
        let mut out = Array2::zeros((ids.len(), table.ncols()));
        for (mut row, &id) in out.rows_mut().into_iter().zip(ids) {
            row.assign(&table.row(id as usize));
        }
        out
    }

    pub fn backward(&self, ids: &[u32], dy: &ArrayView2<f64>, g: &mut Gradients) {
        let table = g.get_mut(self.table);
        for (row, &id) in dy.rows().into_iter().zip(ids) {
            let mut dst = table.row_mut(id as usize);
            dst += &row;
        }
    }
}

/// Multi-head scaled dot-product attention with separate query and
/// key/value inputs (identical for self-attention).
#[derive(Debug, Clone, Copy)]
pub struct MultiHeadAttention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub heads: usize,
}

pub struct AttentionCache {
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    context: Array2<f64>,
}

fn softmax_rows(mut x: Array2<f64>) -> Array2<f64> {
    for mut row in x.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    x
}

impl MultiHeadAttention {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, d: usize, heads: usize, rng: &mut R) -> Self {
        MultiHeadAttention {
            q: Linear::new(store, &format!("{name}.q"), d, d, rng),
            k: Linear::new(store, &format!("{name}.k"), d, d, rng),
            v: Linear::new(store, &format!("{name}.v"), d, d, rng),
            o: Linear::new(store, &format!("{name}.out"), d, d, rng),
            heads,
        }
    }

    pub fn forward(
        &self,
        p: &ParamStore,
        xq: &ArrayView2<f64>,
        xkv: &ArrayView2<f64>,
    ) -> (Array2<f64>, AttentionCache) {
        let q = self.q.forward(p, xq);
        let k = self.k.forward(p, xkv);
        let v = self.v.forward(p, xkv);
        let d = q.ncols();
        let dh = d / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut context = Array2::zeros((q.nrows(), d));
        let mut probs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            let pr = softmax_rows(scores);
            context.slice_mut(cols).assign(&pr.dot(&v.slice(cols)));
            probs.push(pr);
        }
        let out = self.o.forward(p, &context.view());
        (
            out,
            AttentionCache {
                q,
                k,
                v,
                probs,
                context,
            },
        )
    }

    /// Returns (d query input, d key/value input).
    pub fn backward(
        &self,
        p: &ParamStore,
        xq: &ArrayView2<f64>,
        xkv: &ArrayView2<f64>,
        cache: &AttentionCache,
        dout: &ArrayView2<f64>,
        g: &mut Gradients,
    ) -> (Array2<f64>, Array2<f64>) {
        let dcontext = self.o.backward(p, &cache.context.view(), dout, g);
        let d = cache.q.ncols();
        let dh = d / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut dq = Array2::zeros(cache.q.raw_dim());
        let mut dk = Array2::zeros(cache.k.raw_dim());
        let mut dv = Array2::zeros(cache.v.raw_dim());
        for h in 0..self.heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let pr = &cache.probs[h];
            let dc = dcontext.slice(cols);
            let dp = dc.dot(&cache.v.slice(cols).t());
            dv.slice_mut(cols).assign(&pr.t().dot(&dc));
            let mut ds = dp;
            for (mut drow, prow) in ds.rows_mut().into_iter().zip(pr.rows()) {
                let dot = drow.dot(&prow);
                for (dv, &pv) in drow.iter_mut().zip(prow.iter()) {
                    *dv = pv * (*dv - dot) * scale;
                }
            }
            dq.slice_mut(cols).assign(&ds.dot(&cache.k.slice(cols)));
            dk.slice_mut(cols).assign(&ds.t().dot(&cache.q.slice(cols)));
        }
        let dxq = self.q.backward(p, xq, &dq.view(), g);
        let mut dxkv = self.k.backward(p, xkv, &dk.view(), g);
        dxkv += &self.v.backward(p, xkv, &dv.view(), g);
        (dxq, dxkv)
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

#[derive(Debug, Clone, Copy)]
pub struct FeedForward {
    pub up: Linear,
    pub down: Linear,
}

pub struct FeedForwardCache {
    pre: Array2<f64>,
    hidden: Array2<f64>,
    mask: Option<Array2<f64>>,
}

impl FeedForward {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, d: usize, ffn: usize, rng: &mut R) -> Self {
        FeedForward {
            up: Linear::new(store, &format!("{name}.up"), d, ffn, rng),
            down: Linear::new(store, &format!("{name}.down"), ffn, d, rng),
        }
    }

    pub fn forward(
        &self,
        p: &ParamStore,
        x: &ArrayView2<f64>,
        ctx: &mut ForwardCtx,
    ) -> (Array2<f64>, FeedForwardCache) {
        let pre = self.up.forward(p, x);
        let (hidden, mask) = ctx.dropout(pre.mapv(gelu));
        let out = self.down.forward(p, &hidden.view());
        (out, FeedForwardCache { pre, hidden, mask })
    }

    pub fn backward(
        &self,
        p: &ParamStore,
        x: &ArrayView2<f64>,
        cache: &FeedForwardCache,
        dy: &ArrayView2<f64>,
        g: &mut Gradients,
    ) -> Array2<f64> {
        let dhidden = undrop(self.down.backward(p, &cache.hidden.view(), dy, g), &cache.mask);
        let dpre = dhidden * &cache.pre.mapv(gelu_grad);
        self.up.backward(p, x, &dpre.view(), g)
    }
}

/// Pre-norm transformer block: x + Attn(LN(x)), then h + FFN(LN(h)).
#[derive(Debug, Clone, Copy)]
pub struct EncoderLayer {
    pub ln_attn: LayerNorm,
    pub attn: MultiHeadAttention,
    pub ln_ffn: LayerNorm,
    pub ffn: FeedForward,
}

pub struct EncoderLayerCache {
    ln_attn: LayerNormCache,
    attn_in: Array2<f64>,
    attn: AttentionCache,
    attn_mask: Option<Array2<f64>>,
    ln_ffn: LayerNormCache,
    ffn_in: Array2<f64>,
    ffn: FeedForwardCache,
    ffn_mask: Option<Array2<f64>>,
}

impl EncoderLayer {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        d: usize,
        heads: usize,
        ffn: usize,
        rng: &mut R,
    ) -> Self {
        EncoderLayer {
            ln_attn: LayerNorm::new(store, &format!("{name}.ln_attn"), d),
            attn: MultiHeadAttention::new(store, &format!("{name}.self_attn"), d, heads, rng),
            ln_ffn: LayerNorm::new(store, &format!("{name}.ln_ffn"), d),
            ffn: FeedForward::new(store, &format!("{name}.ffn"), d, ffn, rng),
        }
    }

    pub fn forward(
        &self,
        p: &ParamStore,
        x: Array2<f64>,
        ctx: &mut ForwardCtx,
    ) -> (Array2<f64>, EncoderLayerCache) {
        let (attn_in, ln_attn) = self.ln_attn.forward(p, &x.view());
        let (a, attn) = self.attn.forward(p, &attn_in.view(), &attn_in.view());
        let (a, attn_mask) = ctx.dropout(a);
        let h = x + a;
        let (ffn_in, ln_ffn) = self.ln_ffn.forward(p, &h.view());
        let (f, ffn) = self.ffn.forward(p, &ffn_in.view(), ctx);
        let (f, ffn_mask) = ctx.dropout(f);
        let y = h + f;
        (
            y,
            EncoderLayerCache {
                ln_attn,
                attn_in,
                attn,
                attn_mask,
                ln_ffn,
                ffn_in,
                ffn,
                ffn_mask,
            },
        )
    }

    pub fn backward(
        &self,
        p: &ParamStore,
        cache: &EncoderLayerCache,
        dy: Array2<f64>,
        g: &mut Gradients,
    ) -> Array2<f64> {
        let df = undrop(dy.clone(), &cache.ffn_mask);
        let dffn_in = self.ffn.backward(p, &cache.ffn_in.view(), &cache.ffn, &df.view(), g);
        let dh = dy + self.ln_ffn.backward(p, &cache.ln_ffn, &dffn_in.view(), g);
        let da = undrop(dh.clone(), &cache.attn_mask);
        let ai = cache.attn_in.view();
        let (dq_in, dkv_in) = self.attn.backward(p, &ai, &ai, &cache.attn, &da.view(), g);
        let dattn_in = dq_in + dkv_in;
        dh + self.ln_attn.backward(p, &cache.ln_attn, &dattn_in.view(), g)
    }
}

/// Sinusoidal position table (frames × d).
pub fn positional_encoding(frames: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((frames, d), |(pos, i)| {
        let pair = (i / 2) as f64;
        let angle = pos as f64 / 10000f64.powf(2.0 * pair / d as f64);
        if i % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}
