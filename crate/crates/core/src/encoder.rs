//! Transformer encoder with a syntax-guided attention layer on top.
//!
//! ```text
//! ids ─ embed ─ L × transformer_layer ─ H ─┬──────────────────────┐
//!                                          └ sg_attention_layer ─ H' ─ dual_aggregate ─ H̄
//! ```
//!
//! Attention calls take `(query, key, value)` in that order everywhere.

use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::numerics::{BitMatrix, Graph, NumericsError, ParamId, ParamStore, Tensor, Var};
use crate::sdoi::{MaskError, SdoiMask};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("token id {id} out of range for vocabulary of {vocab}")]
    TokenOutOfRange { id: usize, vocab: usize },
    #[error("sequence length {len} exceeds max_len {max}")]
    TooLong { len: usize, max: usize },
    #[error("mask covers {mask} positions, sequence has {len}")]
    MaskLength { mask: usize, len: usize },
    #[error("the syntax-guided encoder needs an SDOI mask")]
    MissingMask,
    #[error("{what} {index} out of range (have {len})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("{0}")]
    Input(String),
}

/// How the SDOI mask enters the attention logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskMode {
    /// Excluded positions get `-inf` before the softmax (exact zero weight).
    #[default]
    AdditiveNegInf,
    /// Logits are multiplied by the 0/1 mask before the softmax.
    LiteralMultiply,
}

impl fmt::Display for MaskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaskMode::AdditiveNegInf => "additive-neg-inf",
            MaskMode::LiteralMultiply => "literal-multiply",
        })
    }
}

impl FromStr for MaskMode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "additive-neg-inf" | "additive" => Ok(MaskMode::AdditiveNegInf),
            "literal-multiply" | "literal" => Ok(MaskMode::LiteralMultiply),
            other => Err(ModelError::Config(format!("unknown mask_mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub d_k: usize,
    pub d_q: usize,
    pub d_v: usize,
    /// Weight of the vanilla representation in the final mix.
    pub alpha: f64,
    pub mask_mode: MaskMode,
    pub vocab_size: usize,
    pub max_len: usize,
    pub n_types: usize,
    /// `false` builds the plain transformer baseline with no extra layer.
    pub syntax_guided: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_layers: 2,
            n_heads: 2,
            d_model: 32,
            d_ff: 64,
            d_k: 16,
            d_q: 16,
            d_v: 16,
            alpha: 0.5,
            mask_mode: MaskMode::AdditiveNegInf,
            vocab_size: 64,
            max_len: 64,
            n_types: 2,
            syntax_guided: true,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |m: &str| Err(ModelError::Config(m.to_string()));
        if self.d_k != self.d_q {
            return err("d_k must equal d_q");
        }
        if [self.n_heads, self.d_model, self.d_ff, self.d_k, self.d_v, self.vocab_size, self.max_len, self.n_types]
            .contains(&0)
        {
            return err("dimensions must be positive");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return err("alpha must lie in [0, 1]");
        }
        Ok(())
    }

    /// Parameter count of the syntax-guided layer, from the shapes alone.
    pub fn sg_layer_param_count(&self) -> usize {
        let (d, m) = (self.d_model, self.n_heads);
        m * d * (self.d_q + self.d_k + self.d_v)
            + m * self.d_v * self.d_ff
            + self.d_ff
            + self.d_ff * d
            + d
            + 2 * d
    }

    /// Sets one field from its textual form. Returns `false` for unknown keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, ModelError> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ModelError> {
            value
                .parse()
                .map_err(|_| ModelError::Config(format!("bad value {value:?} for {key}")))
        }
        match key {
            "n_layers" => self.n_layers = parse(key, value)?,
            "n_heads" => self.n_heads = parse(key, value)?,
            "d_model" => self.d_model = parse(key, value)?,
            "d_ff" => self.d_ff = parse(key, value)?,
            "d_k" => self.d_k = parse(key, value)?,
            "d_q" => self.d_q = parse(key, value)?,
            "d_v" => self.d_v = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "mask_mode" => self.mask_mode = value.parse()?,
            "vocab_size" => self.vocab_size = parse(key, value)?,
            "max_len" => self.max_len = parse(key, value)?,
            "n_types" => self.n_types = parse(key, value)?,
            "syntax_guided" => self.syntax_guided = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        [
            ("n_layers", self.n_layers.to_string()),
            ("n_heads", self.n_heads.to_string()),
            ("d_model", self.d_model.to_string()),
            ("d_ff", self.d_ff.to_string()),
            ("d_k", self.d_k.to_string()),
            ("d_q", self.d_q.to_string()),
            ("d_v", self.d_v.to_string()),
            ("alpha", self.alpha.to_string()),
            ("mask_mode", self.mask_mode.to_string()),
            ("vocab_size", self.vocab_size.to_string()),
            ("max_len", self.max_len.to_string()),
            ("n_types", self.n_types.to_string()),
            ("syntax_guided", self.syntax_guided.to_string()),
            ("seed", self.seed.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, ModelError> {
        let mut c = ModelConfig::default();
        for (k, v) in map {
            c.set(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Uniform `±1/√fan_in` weight of shape `[fan_in × fan_out]`.
fn weight<R: Rng>(store: &mut ParamStore, name: String, fan_in: usize, fan_out: usize, rng: &mut R) -> ParamId {
    store.add_uniform(name, &[fan_in, fan_out], 1.0 / (fan_in as f64).sqrt(), rng)
}

#[derive(Debug, Clone)]
pub struct AttentionHead {
    pub query: ParamId,
    pub key: ParamId,
    pub value: ParamId,
}

impl AttentionHead {
    fn new<R: Rng>(store: &mut ParamStore, prefix: &str, c: &ModelConfig, rng: &mut R) -> Self {
        AttentionHead {
            query: weight(store, format!("{prefix}.query"), c.d_model, c.d_q, rng),
            key: weight(store, format!("{prefix}.key"), c.d_model, c.d_k, rng),
            value: weight(store, format!("{prefix}.value"), c.d_model, c.d_v, rng),
        }
    }

    /// `softmax(Q Kᵀ / √d_k)` under an optional support restriction, and the
    /// mixed values `A V`.
    pub fn attend(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        query_in: Var,
        kv_in: Var,
        support: Option<(&BitMatrix, MaskMode)>,
    ) -> Result<(Var, Var), ModelError> {
        let wq = g.param(store, self.query);
        let wk = g.param(store, self.key);
        let wv = g.param(store, self.value);
        let q = g.matmul(query_in, wq)?;
        let k = g.matmul(kv_in, wk)?;
        let v = g.matmul(kv_in, wv)?;
        let kt = g.transpose(k);
        let raw = g.matmul(q, kt)?;
        let d_k = g.value(wk).cols() as f64;
        let attn = match support {
            None => {
                let scores = g.scale(raw, 1.0 / d_k.sqrt());
                g.softmax_rows(scores)
            }
            Some((mask, MaskMode::AdditiveNegInf)) => {
                let scores = g.scale(raw, 1.0 / d_k.sqrt());
                g.masked_softmax_rows(scores, mask)?
            }
            Some((mask, MaskMode::LiteralMultiply)) => {
                let masked = g.mask_multiply(raw, Rc::new(mask.clone()))?;
                let scores = g.scale(masked, 1.0 / d_k.sqrt());
                g.softmax_rows(scores)
            }
        };
        let mixed = g.matmul(attn, v)?;
        Ok((attn, mixed))
    }
}

#[derive(Debug, Clone)]
pub struct FeedForward {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

impl FeedForward {
    pub fn new<R: Rng>(store: &mut ParamStore, prefix: &str, d_in: usize, d_ff: usize, d_out: usize, rng: &mut R) -> Self {
        FeedForward {
            w1: weight(store, format!("{prefix}.w1"), d_in, d_ff, rng),
            b1: store.add(format!("{prefix}.b1"), Tensor::zeros(&[d_ff])),
            w2: weight(store, format!("{prefix}.w2"), d_ff, d_out, rng),
            b2: store.add(format!("{prefix}.b2"), Tensor::zeros(&[d_out])),
        }
    }

    /// `GELU(x W1 + b1) W2 + b2`.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var, ModelError> {
        let (w1, b1, w2, b2) = (
            g.param(store, self.w1),
            g.param(store, self.b1),
            g.param(store, self.w2),
            g.param(store, self.b2),
        );
        let hidden = g.linear(x, w1, Some(b1))?;
        let act = g.gelu(hidden);
        Ok(g.linear(act, w2, Some(b2))?)
    }
}

#[derive(Debug, Clone)]
pub struct LayerNormParams {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNormParams {
    fn new(store: &mut ParamStore, prefix: &str, d: usize) -> Self {
        LayerNormParams {
            gain: store.add(format!("{prefix}.gain"), Tensor::full(&[d], 1.0)),
            bias: store.add(format!("{prefix}.bias"), Tensor::zeros(&[d])),
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var, ModelError> {
        let (gain, bias) = (g.param(store, self.gain), g.param(store, self.bias));
        Ok(g.layer_norm(x, gain, bias)?)
    }
}

/// Multi-head attention whose heads are summed through per-head output
/// projections, `Σ_m (A_m X V_m) W_m`.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub heads: Vec<AttentionHead>,
    pub outputs: Vec<ParamId>,
}

impl MultiHeadAttention {
    pub fn new<R: Rng>(store: &mut ParamStore, prefix: &str, c: &ModelConfig, rng: &mut R) -> Self {
        let mut heads = Vec::new();
        let mut outputs = Vec::new();
        for m in 0..c.n_heads {
            heads.push(AttentionHead::new(store, &format!("{prefix}.head{m}"), c, rng));
            outputs.push(weight(store, format!("{prefix}.head{m}.output"), c.d_v, c.d_model, rng));
        }
        MultiHeadAttention { heads, outputs }
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        query_in: Var,
        kv_in: Var,
        support: Option<(&BitMatrix, MaskMode)>,
    ) -> Result<(Var, Vec<Var>), ModelError> {
        let mut total = None;
        let mut attns = Vec::with_capacity(self.heads.len());
        for (head, &out) in self.heads.iter().zip(&self.outputs) {
            let (attn, mixed) = head.attend(g, store, query_in, kv_in, support)?;
            let w = g.param(store, out);
            let projected = g.matmul(mixed, w)?;
            total = Some(match total {
                None => projected,
                Some(t) => g.add(t, projected)?,
            });
            attns.push(attn);
        }
        Ok((total.expect("at least one head"), attns))
    }
}

/// One vanilla layer: attention, residual layer-norm, GELU feed-forward,
/// residual layer-norm.
#[derive(Debug, Clone)]
pub struct TransformerLayer {
    pub attention: MultiHeadAttention,
    pub norm1: LayerNormParams,
    pub ffn: FeedForward,
    pub norm2: LayerNormParams,
}

impl TransformerLayer {
    pub fn new<R: Rng>(store: &mut ParamStore, prefix: &str, c: &ModelConfig, rng: &mut R) -> Self {
        TransformerLayer {
            attention: MultiHeadAttention::new(store, &format!("{prefix}.attn"), c, rng),
            norm1: LayerNormParams::new(store, &format!("{prefix}.norm1"), c.d_model),
            ffn: FeedForward::new(store, &format!("{prefix}.ffn"), c.d_model, c.d_ff, c.d_model, rng),
            norm2: LayerNormParams::new(store, &format!("{prefix}.norm2"), c.d_model),
        }
    }

    /// Returns the layer output and one attention matrix per head. `mask`
    /// restricts keys (padding); it never carries syntax.
    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        x: Var,
        mask: Option<&BitMatrix>,
    ) -> Result<(Var, Vec<Var>), ModelError> {
        let support = mask.map(|m| (m, MaskMode::AdditiveNegInf));
        let (mixed, attns) = self.attention.forward(g, store, x, x, support)?;
        let res1 = g.add(x, mixed)?;
        let h = self.norm1.forward(g, store, res1)?;
        let ff = self.ffn.forward(g, store, h)?;
        let res2 = g.add(h, ff)?;
        let out = self.norm2.forward(g, store, res2)?;
        Ok((out, attns))
    }
}

/// The syntax-guided layer: SDOI-restricted heads, concatenated, through
/// `FF2(GELU(FF1(·)))`, then `LayerNorm(out + H)`.
#[derive(Debug, Clone)]
pub struct SyntaxGuidedLayer {
    pub heads: Vec<AttentionHead>,
    pub ffn: FeedForward,
    pub norm: LayerNormParams,
}

/// Pieces of one syntax-guided forward pass.
pub struct SgForward {
    pub output: Var,
    /// Concatenated per-head mixtures, before the feed-forward layers.
    pub concat: Var,
    pub attention: Vec<Var>,
}

impl SyntaxGuidedLayer {
    pub fn new<R: Rng>(store: &mut ParamStore, prefix: &str, c: &ModelConfig, rng: &mut R) -> Self {
        let heads = (0..c.n_heads)
            .map(|m| AttentionHead::new(store, &format!("{prefix}.head{m}"), c, rng))
            .collect();
        SyntaxGuidedLayer {
            heads,
            ffn: FeedForward::new(store, &format!("{prefix}.ffn"), c.n_heads * c.d_v, c.d_ff, c.d_model, rng),
            norm: LayerNormParams::new(store, &format!("{prefix}.norm"), c.d_model),
        }
    }

    /// `mask = None` runs the same layer with unrestricted attention.
    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        h: Var,
        mask: Option<&SdoiMask>,
        mode: MaskMode,
    ) -> Result<SgForward, ModelError> {
        let n = g.value(h).rows();
        if let Some(m) = mask {
            if m.n() != n {
                return Err(ModelError::MaskLength { mask: m.n(), len: n });
            }
        }
        let support = mask.map(|m| (m.as_matrix(), mode));
        let mut mixed = Vec::with_capacity(self.heads.len());
        let mut attention = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            let (attn, w) = head.attend(g, store, h, h, support)?;
            attention.push(attn);
            mixed.push(w);
        }
        let concat = g.concat_cols(&mixed)?;
        let ff = self.ffn.forward(g, store, concat)?;
        let res = g.add(ff, h)?;
        let output = self.norm.forward(g, store, res)?;
        Ok(SgForward {
            output,
            concat,
            attention,
        })
    }
}

/// Elementwise `alpha·H + (1−alpha)·H'`.
pub fn dual_aggregate(g: &mut Graph, h: Var, h_prime: Var, alpha: f64) -> Result<Var, ModelError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(ModelError::Config(format!("alpha {alpha} outside [0, 1]")));
    }
    Ok(g.lerp(h, h_prime, alpha)?)
}

#[derive(Debug, Clone)]
pub struct Embeddings {
    pub token: ParamId,
    pub position: ParamId,
    pub segment: ParamId,
}

/// One sequence to encode.
#[derive(Debug, Clone, Copy)]
pub struct EncoderInput<'a> {
    pub token_ids: &'a [usize],
    /// Segment ids; all zero when absent.
    pub type_ids: Option<&'a [usize]>,
    /// Required by the syntax-guided encoder. A mask shorter than the
    /// sequence is extended with unit rows for the trailing padding.
    pub sdoi: Option<&'a SdoiMask>,
    /// Positions at or beyond this length are padding and are hidden from
    /// every vanilla attention query.
    pub valid_len: Option<usize>,
}

impl<'a> EncoderInput<'a> {
    pub fn new(token_ids: &'a [usize]) -> Self {
        EncoderInput {
            token_ids,
            type_ids: None,
            sdoi: None,
            valid_len: None,
        }
    }

    pub fn with_mask(mut self, mask: &'a SdoiMask) -> Self {
        self.sdoi = Some(mask);
        self
    }

    pub fn with_types(mut self, types: &'a [usize]) -> Self {
        self.type_ids = Some(types);
        self
    }

    pub fn with_valid_len(mut self, len: usize) -> Self {
        self.valid_len = Some(len);
        self
    }
}

/// Graph nodes of one encoder pass.
pub struct EncoderVars {
    pub h: Var,
    pub h_prime: Option<Var>,
    pub h_bar: Var,
    pub attn_vanilla: Vec<Vec<Var>>,
    pub attn_sg: Vec<Var>,
}

/// Materialized encoder pass.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    pub h: Tensor,
    pub h_prime: Option<Tensor>,
    pub h_bar: Tensor,
    /// `[layer][head]`, each `n×n`.
    pub attn_vanilla: Vec<Vec<Tensor>>,
    /// `[head]`, each `n×n`.
    pub attn_sg: Vec<Tensor>,
}

impl EncoderVars {
    pub fn materialize(&self, g: &Graph) -> EncoderOutput {
        EncoderOutput {
            h: g.value(self.h).clone(),
            h_prime: self.h_prime.map(|v| g.value(v).clone()),
            h_bar: g.value(self.h_bar).clone(),
            attn_vanilla: self
                .attn_vanilla
                .iter()
                .map(|l| l.iter().map(|&v| g.value(v).clone()).collect())
                .collect(),
            attn_sg: self.attn_sg.iter().map(|&v| g.value(v).clone()).collect(),
        }
    }
}

/// Parameter handles of the whole encoder; values live in a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Encoder {
    pub config: ModelConfig,
    pub prefix: String,
    pub embeddings: Embeddings,
    pub layers: Vec<TransformerLayer>,
    pub sg: Option<SyntaxGuidedLayer>,
}

impl Encoder {
    /// Registers all encoder parameters under `prefix`. The vanilla part is
    /// drawn first, so a baseline and a syntax-guided encoder built from the
    /// same generator share identical vanilla weights.
    pub fn new<R: Rng>(config: ModelConfig, store: &mut ParamStore, prefix: &str, rng: &mut R) -> Result<Self, ModelError> {
        config.validate()?;
        let c = &config;
        let bound = 1.0 / (c.d_model as f64).sqrt();
        let embeddings = Embeddings {
            token: store.add_uniform(format!("{prefix}embed.token"), &[c.vocab_size, c.d_model], bound, rng),
            position: store.add_uniform(format!("{prefix}embed.position"), &[c.max_len, c.d_model], bound, rng),
            segment: store.add_uniform(format!("{prefix}embed.type"), &[c.n_types, c.d_model], bound, rng),
        };
        let layers = (0..c.n_layers)
            .map(|l| TransformerLayer::new(store, &format!("{prefix}layer{l}"), c, rng))
            .collect();
        let sg = c
            .syntax_guided
            .then(|| SyntaxGuidedLayer::new(store, &format!("{prefix}sg"), c, rng));
        Ok(Encoder {
            config,
            prefix: prefix.to_string(),
            embeddings,
            layers,
            sg,
        })
    }

    /// Sum of token, absolute-position and segment embeddings.
    pub fn embed(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        token_ids: &[usize],
        type_ids: Option<&[usize]>,
    ) -> Result<Var, ModelError> {
        let c = &self.config;
        let n = token_ids.len();
        if n == 0 {
            return Err(ModelError::Input("empty sequence".into()));
        }
        if n > c.max_len {
            return Err(ModelError::TooLong { len: n, max: c.max_len });
        }
        if let Some(&id) = token_ids.iter().find(|&&id| id >= c.vocab_size) {
            return Err(ModelError::TokenOutOfRange { id, vocab: c.vocab_size });
        }
        let zeros = vec![0; n];
        let types = type_ids.unwrap_or(&zeros);
        if types.len() != n {
            return Err(ModelError::Input(format!("{} type ids for {n} tokens", types.len())));
        }
        if let Some(&t) = types.iter().find(|&&t| t >= c.n_types) {
            return Err(ModelError::OutOfRange { what: "type id", index: t, len: c.n_types });
        }
        let positions: Vec<usize> = (0..n).collect();
        let tok = g.param(store, self.embeddings.token);
        let pos = g.param(store, self.embeddings.position);
        let seg = g.param(store, self.embeddings.segment);
        let a = g.gather_rows(tok, token_ids)?;
        let b = g.gather_rows(pos, &positions)?;
        let s = g.gather_rows(seg, types)?;
        let ab = g.add(a, b)?;
        Ok(g.add(ab, s)?)
    }

    /// Full pass recorded on `g`.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, input: &EncoderInput<'_>) -> Result<EncoderVars, ModelError> {
        let n = input.token_ids.len();
        let valid = input.valid_len.unwrap_or(n);
        if valid == 0 || valid > n {
            return Err(ModelError::Input(format!("valid_len {valid} for {n} tokens")));
        }
        let padding = (valid < n).then(|| {
            let mut m = BitMatrix::filled(n, n, false);
            for i in 0..n {
                for j in 0..valid {
                    m.set(i, j, true);
                }
            }
            m
        });

        let mut x = self.embed(g, store, input.token_ids, input.type_ids)?;
        let mut attn_vanilla = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (out, attns) = layer.forward(g, store, x, padding.as_ref())?;
            attn_vanilla.push(attns);
            x = out;
        }
        let h = x;

        let Some(sg) = &self.sg else {
            return Ok(EncoderVars {
                h,
                h_prime: None,
                h_bar: h,
                attn_vanilla,
                attn_sg: Vec::new(),
            });
        };
        let mask = input.sdoi.ok_or(ModelError::MissingMask)?;
        let extended;
        let mask = if mask.n() < n {
            let pad = SdoiMask::identity(n - mask.n());
            extended = crate::sdoi::block_diagonal_merge(&[mask.clone(), pad])?;
            &extended
        } else {
            mask
        };
        let sg_out = sg.forward(g, store, h, Some(mask), self.config.mask_mode)?;
        let h_bar = dual_aggregate(g, h, sg_out.output, self.config.alpha)?;
        Ok(EncoderVars {
            h,
            h_prime: Some(sg_out.output),
            h_bar,
            attn_vanilla,
            attn_sg: sg_out.attention,
        })
    }

    /// Forward pass on a throwaway graph.
    pub fn encode(&self, store: &ParamStore, input: &EncoderInput<'_>) -> Result<EncoderOutput, ModelError> {
        let mut g = Graph::new();
        let vars = self.forward(&mut g, store, input)?;
        Ok(vars.materialize(&g))
    }

    /// Parameter names owned by this encoder.
    pub fn param_ids(&self, store: &ParamStore) -> Vec<ParamId> {
        store
            .ids()
            .filter(|&id| store.get(id).name.starts_with(&self.prefix))
            .collect()
    }

    pub fn param_count(&self, store: &ParamStore) -> usize {
        self.param_ids(store).iter().map(|&id| store.value(id).len()).sum()
    }
}
