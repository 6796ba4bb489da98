use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    positional_encoding, undrop, AttentionCache, Embedding, EncoderLayer, EncoderLayerCache,
    ForwardCtx, LayerNorm, LayerNormCache, Linear, MultiHeadAttention,
};
use super::params::{Gradients, ParamStore};
use crate::error::{Error, Result};
use crate::metrics::{Metric, MetricRegistry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
    pub ffn_dim: usize,
    pub dropout: f64,
    pub use_ref_audio: bool,
    pub use_ref_text: bool,
    pub metrics: MetricRegistry,
    pub feature_dim: usize,
    pub text_vocab_size: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_model: 256,
            heads: 4,
            layers: 4,
            ffn_dim: 1024,
            dropout: 0.1,
            use_ref_audio: true,
            use_ref_text: true,
            metrics: MetricRegistry::default(),
            feature_dim: 80,
            text_vocab_size: crate::bpe::DEFAULT_VOCAB_SIZE + 3,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_model", self.d_model),
            ("heads", self.heads),
            ("layers", self.layers),
            ("ffn_dim", self.ffn_dim),
            ("feature_dim", self.feature_dim),
            ("text_vocab_size", self.text_vocab_size),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !self.d_model.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "d_model {} not divisible by {} heads",
                self.d_model, self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.metrics.is_empty() {
            return Err(Error::Config("no metrics configured".into()));
        }
        Ok(())
    }
}

/// Per-frame hidden states (frames × d_model).
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStates(pub Array2<f64>);

impl HiddenStates {
    pub fn frames(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }
}

/// The inputs of one utterance: target features plus whichever references
/// the configuration consumes.
#[derive(Debug, Clone, Copy)]
pub struct ModelInput<'a> {
    pub target: ArrayView2<'a, f64>,
    pub ref_audio: Option<ArrayView2<'a, f64>>,
    pub ref_text: Option<&'a [u32]>,
}

#[derive(Debug, Clone, Copy)]
enum EncoderFront {
    Features(Linear),
    Tokens(Embedding),
}

#[derive(Debug, Clone, Copy)]
enum EncoderSource<'a> {
    Features(ArrayView2<'a, f64>),
    Tokens(&'a [u32]),
}

#[derive(Debug, Clone)]
struct Encoder {
    front: EncoderFront,
    layers: Vec<EncoderLayer>,
    ln_out: LayerNorm,
}

struct EncoderCache {
    input_mask: Option<Array2<f64>>,
    layers: Vec<EncoderLayerCache>,
    ln_out: LayerNormCache,
}

impl Encoder {
    fn new(store: &mut ParamStore, name: &str, front: EncoderFrontKind, cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let d = cfg.d_model;
        let front = match front {
            EncoderFrontKind::Features(dim) => {
                EncoderFront::Features(Linear::new(store, &format!("{name}.input"), dim, d, rng))
            }
            EncoderFrontKind::Tokens(vocab) => {
                EncoderFront::Tokens(Embedding::new(store, &format!("{name}.embed"), vocab, d, rng))
            }
        };
        let layers = (0..cfg.layers)
            .map(|i| EncoderLayer::new(store, &format!("{name}.layer{i}"), d, cfg.heads, cfg.ffn_dim, rng))
            .collect();
        let ln_out = LayerNorm::new(store, &format!("{name}.ln_out"), d);
        Encoder { front, layers, ln_out }
    }

    fn forward(&self, p: &ParamStore, src: EncoderSource<'_>, ctx: &mut ForwardCtx) -> (Array2<f64>, EncoderCache) {
        let mut x = match (self.front, src) {
            (EncoderFront::Features(lin), EncoderSource::Features(f)) => lin.forward(p, &f),
            (EncoderFront::Tokens(emb), EncoderSource::Tokens(ids)) => emb.forward(p, ids),
            _ => unreachable!("encoder front does not match its input"),
        };
        x += &positional_encoding(x.nrows(), x.ncols());
        let (mut x, input_mask) = ctx.dropout(x);
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (y, c) = layer.forward(p, x, ctx);
            x = y;
            caches.push(c);
        }
        let (y, ln_out) = self.ln_out.forward(p, &x.view());
        (
            y,
            EncoderCache {
                input_mask,
                layers: caches,
                ln_out,
            },
        )
    }

    fn backward(&self, p: &ParamStore, src: EncoderSource<'_>, cache: &EncoderCache, dy: &ArrayView2<f64>, g: &mut Gradients) {
        let mut dx = self.ln_out.backward(p, &cache.ln_out, dy, g);
        for (layer, c) in self.layers.iter().zip(&cache.layers).rev() {
            dx = layer.backward(p, c, dx, g);
        }
        let dx = undrop(dx, &cache.input_mask);
        match (self.front, src) {
            (EncoderFront::Features(lin), EncoderSource::Features(f)) => lin.backward_params(&f, &dx.view(), g),
            (EncoderFront::Tokens(emb), EncoderSource::Tokens(ids)) => emb.backward(ids, &dx.view(), g),
            _ => unreachable!("encoder front does not match its input"),
        }
    }
}

enum EncoderFrontKind {
    Features(usize),
    Tokens(usize),
}

/// Residual cross-attention with the target as query:
/// h + Attn(LN(h), reference).
#[derive(Debug, Clone, Copy)]
struct CrossFusion {
    ln_query: LayerNorm,
    attn: MultiHeadAttention,
}

struct FusionCache {
    ln: LayerNormCache,
    query: Array2<f64>,
    attn: AttentionCache,
    mask: Option<Array2<f64>>,
}

impl CrossFusion {
    fn new(store: &mut ParamStore, name: &str, cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        CrossFusion {
            ln_query: LayerNorm::new(store, &format!("{name}.ln_query"), cfg.d_model),
            attn: MultiHeadAttention::new(store, &format!("{name}.cross_attn"), cfg.d_model, cfg.heads, rng),
        }
    }

    fn forward(&self, p: &ParamStore, h: Array2<f64>, reference: &ArrayView2<f64>, ctx: &mut ForwardCtx) -> (Array2<f64>, FusionCache) {
        let (query, ln) = self.ln_query.forward(p, &h.view());
        let (a, attn) = self.attn.forward(p, &query.view(), reference);
        let (a, mask) = ctx.dropout(a);
        (h + a, FusionCache { ln, query, attn, mask })
    }

    /// Returns (d target, d reference).
    fn backward(&self, p: &ParamStore, reference: &ArrayView2<f64>, cache: &FusionCache, dy: Array2<f64>, g: &mut Gradients) -> (Array2<f64>, Array2<f64>) {
        let da = undrop(dy.clone(), &cache.mask);
        let (dquery, dref) = self.attn.backward(p, &cache.query.view(), reference, &cache.attn, &da.view(), g);
        let dh = dy + self.ln_query.backward(p, &cache.ln, &dquery.view(), g);
        (dh, dref)
    }
}

/// Everything the backward pass needs from one forward pass.
pub struct ForwardCache {
    target: EncoderCache,
    ref_audio: Option<(EncoderCache, Array2<f64>)>,
    ref_text: Option<(EncoderCache, Array2<f64>)>,
    audio_fusion: Option<FusionCache>,
    text_fusion: Option<FusionCache>,
    frames: usize,
    pooled: Array1<f64>,
}

/// Target, reference-audio and reference-text encoders, two cross-attention
/// fusion stages and one mean-pool + linear head per metric.
#[derive(Debug, Clone)]
pub struct UniVersa {
    config: ModelConfig,
    params: ParamStore,
    target_encoder: Encoder,
    ref_audio_encoder: Option<Encoder>,
    ref_text_encoder: Option<Encoder>,
    audio_fusion: Option<CrossFusion>,
    text_fusion: Option<CrossFusion>,
    heads: Vec<(Metric, Linear)>,
}

impl UniVersa {
    /// Builds a freshly initialized model: Xavier-uniform weights, zero
    /// biases, unit layer-norm gains.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let cfg = &config;
        let target_encoder = Encoder::new(&mut store, "target_encoder", EncoderFrontKind::Features(cfg.feature_dim), cfg, &mut rng);
        let (ref_audio_encoder, audio_fusion) = if cfg.use_ref_audio {
            (
                Some(Encoder::new(&mut store, "ref_audio_encoder", EncoderFrontKind::Features(cfg.feature_dim), cfg, &mut rng)),
                Some(CrossFusion::new(&mut store, "audio_fusion", cfg, &mut rng)),
            )
        } else {
            (None, None)
        };
        let (ref_text_encoder, text_fusion) = if cfg.use_ref_text {
            (
                Some(Encoder::new(&mut store, "ref_text_encoder", EncoderFrontKind::Tokens(cfg.text_vocab_size), cfg, &mut rng)),
                Some(CrossFusion::new(&mut store, "text_fusion", cfg, &mut rng)),
            )
        } else {
            (None, None)
        };
        let heads = cfg
            .metrics
            .metrics()
            .iter()
            .map(|&m| (m, Linear::new(&mut store, &format!("head.{m}"), cfg.d_model, 1, &mut rng)))
            .collect();
        Ok(UniVersa {
            config,
            params: store,
            target_encoder,
            ref_audio_encoder,
            ref_text_encoder,
            audio_fusion,
            text_fusion,
            heads,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn metrics(&self) -> &[Metric] {
        self.config.metrics.metrics()
    }

    fn check_features(&self, f: &ArrayView2<f64>, what: &str) -> Result<()> {
        if f.nrows() == 0 {
            return Err(Error::Shape(format!("{what} has no frames")));
        }
        if f.ncols() != self.config.feature_dim {
            return Err(Error::Shape(format!(
                "{what} has {} dims, model expects {}",
                f.ncols(),
                self.config.feature_dim
            )));
        }
        Ok(())
    }

    fn check_tokens(&self, ids: &[u32]) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::Shape("token sequence is empty".into()));
        }
        if let Some(&bad) = ids.iter().find(|&&id| id as usize >= self.config.text_vocab_size) {
            return Err(Error::invalid(format!(
                "token id {bad} out of range for vocabulary of {}",
                self.config.text_vocab_size
            )));
        }
        Ok(())
    }

    pub fn encode_target(&self, features: ArrayView2<f64>) -> Result<HiddenStates> {
        self.check_features(&features, "target features")?;
        let (h, _) = self.target_encoder.forward(&self.params, EncoderSource::Features(features), &mut ForwardCtx::eval());
        Ok(HiddenStates(h))
    }

    pub fn encode_ref_audio(&self, features: ArrayView2<f64>) -> Result<HiddenStates> {
        let enc = self
            .ref_audio_encoder
            .as_ref()
            .ok_or_else(|| Error::Config("reference-audio encoder is disabled".into()))?;
        self.check_features(&features, "reference features")?;
        let (h, _) = enc.forward(&self.params, EncoderSource::Features(features), &mut ForwardCtx::eval());
        Ok(HiddenStates(h))
    }

    pub fn encode_ref_text(&self, tokens: &[u32]) -> Result<HiddenStates> {
        let enc = self
            .ref_text_encoder
            .as_ref()
            .ok_or_else(|| Error::Config("reference-text encoder is disabled".into()))?;
        self.check_tokens(tokens)?;
        let (h, _) = enc.forward(&self.params, EncoderSource::Tokens(tokens), &mut ForwardCtx::eval());
        Ok(HiddenStates(h))
    }

    /// Audio fusion, then text fusion; disabled stages are skipped.
    pub fn fuse(&self, target: &HiddenStates, ref_audio: Option<&HiddenStates>, ref_text: Option<&HiddenStates>) -> Result<HiddenStates> {
        let mut h = target.0.clone();
        let mut ctx = ForwardCtx::eval();
        for (stage, reference, name) in [
            (&self.audio_fusion, ref_audio, "reference audio"),
            (&self.text_fusion, ref_text, "reference text"),
        ] {
            match (stage, reference) {
                (Some(f), Some(r)) => h = f.forward(&self.params, h, &r.0.view(), &mut ctx).0,
                (None, None) => {}
                (Some(_), None) => return Err(Error::invalid(format!("{name} hidden states required"))),
                (None, Some(_)) => return Err(Error::invalid(format!("{name} given but its fusion module is disabled"))),
            }
        }
        Ok(HiddenStates(h))
    }

    /// Mean-pools and applies every head; outputs live in normalized space.
    pub fn predict_raw(&self, fused: &HiddenStates) -> Result<Vec<f64>> {
        if fused.dim() != self.config.d_model || fused.frames() == 0 {
            return Err(Error::Shape(format!(
                "fused states {}×{}, expected d_model {}",
                fused.frames(),
                fused.dim(),
                self.config.d_model
            )));
        }
        let pooled = fused.0.mean_axis(Axis(0)).unwrap();
        Ok(self.apply_heads(&pooled))
    }

    fn apply_heads(&self, pooled: &Array1<f64>) -> Vec<f64> {
        self.heads
            .iter()
            .map(|(_, h)| pooled.dot(&self.params.get(h.w).column(0)) + self.params.get(h.b)[[0, 0]])
            .collect()
    }

    fn validate_input(&self, input: &ModelInput<'_>) -> Result<()> {
        self.check_features(&input.target, "target features")?;
        match (self.config.use_ref_audio, input.ref_audio) {
            (true, Some(r)) => self.check_features(&r, "reference features")?,
            (true, None) => return Err(Error::invalid("reference audio features required")),
            (false, Some(_)) => return Err(Error::invalid("reference audio given but the encoder is disabled")),
            (false, None) => {}
        }
        match (self.config.use_ref_text, input.ref_text) {
            (true, Some(t)) => self.check_tokens(t)?,
            (true, None) => return Err(Error::invalid("reference tokens required")),
            (false, Some(_)) => return Err(Error::invalid("reference text given but the encoder is disabled")),
            (false, None) => {}
        }
        Ok(())
    }

    /// Full forward pass returning normalized-space outputs and a cache for
    /// [`UniVersa::backward`].
    pub fn forward(&self, input: &ModelInput<'_>, ctx: &mut ForwardCtx) -> Result<(Vec<f64>, ForwardCache)> {
        self.validate_input(input)?;
        let p = &self.params;
        let (mut h, target) = self.target_encoder.forward(p, EncoderSource::Features(input.target), ctx);
        let ref_audio = match (&self.ref_audio_encoder, input.ref_audio) {
            (Some(enc), Some(f)) => {
                let (r, c) = enc.forward(p, EncoderSource::Features(f), ctx);
                Some((c, r))
            }
            _ => None,
        };
        let ref_text = match (&self.ref_text_encoder, input.ref_text) {
            (Some(enc), Some(ids)) => {
                let (r, c) = enc.forward(p, EncoderSource::Tokens(ids), ctx);
                Some((c, r))
            }
            _ => None,
        };
        let audio_fusion = match (&self.audio_fusion, &ref_audio) {
            (Some(f), Some((_, r))) => {
                let (y, c) = f.forward(p, h, &r.view(), ctx);
                h = y;
                Some(c)
            }
            _ => None,
        };
        let text_fusion = match (&self.text_fusion, &ref_text) {
            (Some(f), Some((_, r))) => {
                let (y, c) = f.forward(p, h, &r.view(), ctx);
                h = y;
                Some(c)
            }
            _ => None,
        };
        let pooled = h.mean_axis(Axis(0)).unwrap();
        let raw = self.apply_heads(&pooled);
        Ok((
            raw,
            ForwardCache {
                target,
                ref_audio,
                ref_text,
                audio_fusion,
                text_fusion,
                frames: h.nrows(),
                pooled,
            },
        ))
    }

    /// Gradients of a scalar loss given d loss / d raw output per head.
    pub fn backward(&self, input: &ModelInput<'_>, cache: &ForwardCache, draw: &[f64]) -> Gradients {
        let p = &self.params;
        let mut g = p.zero_grads();
        let d = self.config.d_model;
        let mut dpooled = Array1::<f64>::zeros(d);
        for ((_, head), &dr) in self.heads.iter().zip(draw) {
            if dr == 0.0 {
                continue;
            }
            g.get_mut(head.w).column_mut(0).scaled_add(dr, &cache.pooled);
            g.get_mut(head.b)[[0, 0]] += dr;
            dpooled.scaled_add(dr, &p.get(head.w).column(0));
        }
        let row = (dpooled / cache.frames as f64).insert_axis(Axis(0));
        let mut dh = row.broadcast((cache.frames, d)).unwrap().to_owned();

        if let (Some(f), Some(c), Some((_, r))) = (&self.text_fusion, &cache.text_fusion, &cache.ref_text) {
            let (dh_next, dref) = f.backward(p, &r.view(), c, dh, &mut g);
            dh = dh_next;
            let (enc, (ec, _)) = (self.ref_text_encoder.as_ref().unwrap(), cache.ref_text.as_ref().unwrap());
            enc.backward(p, EncoderSource::Tokens(input.ref_text.unwrap()), ec, &dref.view(), &mut g);
        }
        if let (Some(f), Some(c), Some((_, r))) = (&self.audio_fusion, &cache.audio_fusion, &cache.ref_audio) {
            let (dh_next, dref) = f.backward(p, &r.view(), c, dh, &mut g);
            dh = dh_next;
            let (enc, (ec, _)) = (self.ref_audio_encoder.as_ref().unwrap(), cache.ref_audio.as_ref().unwrap());
            enc.backward(p, EncoderSource::Features(input.ref_audio.unwrap()), ec, &dref.view(), &mut g);
        }
        self.target_encoder
            .backward(p, EncoderSource::Features(input.target), &cache.target, &dh.view(), &mut g);
        g
    }

    /// Parameter names of the fusion output projections, which
    /// [`UniVersa::fuse`] bypasses when zeroed.
    pub fn fusion_output_params(&self) -> Vec<String> {
        [&self.audio_fusion, &self.text_fusion]
            .into_iter()
            .flatten()
            .flat_map(|f| [f.attn.o.w, f.attn.o.b])
            .map(|id| self.params.name(id).to_string())
            .collect()
    }

    /// The head (weight, bias) parameter names per metric.
    pub fn head_params(&self, metric: Metric) -> Option<(String, String)> {
        self.heads.iter().find(|(m, _)| *m == metric).map(|(_, h)| {
            (self.params.name(h.w).to_string(), self.params.name(h.b).to_string())
        })
    }
}
