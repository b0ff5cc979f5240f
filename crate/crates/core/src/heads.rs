//! Task heads on top of the aggregated encoder output `H̄`.
//!
//! Sequence positions in this module are 0-based in code, except in
//! [`SpanScores`] and [`PredictionRecord`], which report spans 1-based with
//! position 1 being the pooled `[CLS]` slot.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{Encoder, EncoderInput, FeedForward, MaskMode, ModelConfig, ModelError, MultiHeadAttention};
use crate::numerics::{Graph, ParamId, ParamStore, Tensor, Var};

fn weight<R: Rng>(store: &mut ParamStore, name: String, fan_in: usize, fan_out: usize, rng: &mut R) -> ParamId {
    store.add_uniform(name, &[fan_in, fan_out], 1.0 / (fan_in as f64).sqrt(), rng)
}

/// Linear map to start/end logits, softmax over positions.
#[derive(Debug, Clone)]
pub struct SpanHead {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl SpanHead {
    pub fn new<R: Rng>(store: &mut ParamStore, prefix: &str, d_model: usize, rng: &mut R) -> Self {
        SpanHead {
            weight: weight(store, format!("{prefix}.weight"), d_model, 2, rng),
            bias: store.add(format!("{prefix}.bias"), Tensor::zeros(&[2])),
        }
    }

    /// `[2×n]` logits: row 0 start, row 1 end.
    pub fn logits(&self, g: &mut Graph, store: &ParamStore, h_bar: Var) -> Result<Var, ModelError> {
        let n = g.value(h_bar).rows();
        if n < 2 {
            return Err(ModelError::Input(format!("span scoring needs n >= 2, got {n}")));
        }
        let (w, b) = (g.param(store, self.weight), g.param(store, self.bias));
        let per_pos = g.linear(h_bar, w, Some(b))?;
        Ok(g.transpose(per_pos))
    }

    /// `(s, e)` as a `[2×n]` probability node.
    pub fn span_probs(&self, g: &mut Graph, store: &ParamStore, h_bar: Var) -> Result<Var, ModelError> {
        let logits = self.logits(g, store, h_bar)?;
        Ok(g.softmax_rows(logits))
    }

    /// Mean of start and end cross-entropy for 0-based gold positions.
    pub fn loss(&self, g: &mut Graph, store: &ParamStore, h_bar: Var, start: usize, end: usize) -> Result<Var, ModelError> {
        let logits = self.logits(g, store, h_bar)?;
        Ok(g.cross_entropy(logits, &[start, end])?)
    }
}

/// Every score of the answerability pipeline for one example.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanScores {
    pub s: Vec<f64>,
    pub e: Vec<f64>,
    pub score_has: f64,
    pub score_null: f64,
    pub score_diff: f64,
    pub score_ext: f64,
    pub score_final: f64,
    /// 1-based `(k, l)` with `1 < k ≤ l ≤ n`.
    pub best_span: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub beta1: f64,
    pub beta2: f64,
    pub delta: f64,
}

impl Default for FusionWeights {
    fn default() -> Self {
        FusionWeights {
            beta1: 1.0,
            beta2: 1.0,
            delta: 0.0,
        }
    }
}

/// Best in-passage span against the null slot.
///
/// `score_has = max s_k + e_l` over `1 < k ≤ l ≤ n` (1-based); ties go to the
/// lowest `k`, then the lowest `l`. Runs in O(n): rounding is monotone, so
/// the best sum is attained with the prefix maximum of `s`, and the tie
/// winner is the first `k` whose sum with the suffix maximum of `e` reaches it.
pub fn span_scores(s: &[f64], e: &[f64]) -> Result<SpanScores, ModelError> {
    let n = s.len();
    if n < 2 || e.len() != n {
        return Err(ModelError::Input(format!(
            "span scores need equal-length vectors with n >= 2 (got {} and {})",
            s.len(),
            e.len()
        )));
    }
    // 0-based candidates are 1..n
    let mut best = f64::NEG_INFINITY;
    let mut prefix = f64::NEG_INFINITY;
    for l in 1..n {
        prefix = prefix.max(s[l]);
        best = best.max(prefix + e[l]);
    }
    let mut suffix = vec![f64::NEG_INFINITY; n + 1];
    for l in (1..n).rev() {
        suffix[l] = suffix[l + 1].max(e[l]);
    }
    let k = (1..n)
        .find(|&k| s[k] + suffix[k] == best)
        .expect("maximum is attained");
    let l = (k..n).find(|&l| s[k] + e[l] == best).expect("maximum is attained");

    let score_null = s[0] + e[0];
    let score_diff = best - score_null;
    Ok(SpanScores {
        s: s.to_vec(),
        e: e.to_vec(),
        score_has: best,
        score_null,
        score_diff,
        score_ext: 0.0,
        score_final: score_diff,
        best_span: (k + 1, l + 1),
    })
}

impl SpanScores {
    /// Records the verifier score and the fused final score.
    pub fn fuse(&mut self, score_ext: f64, fusion: &FusionWeights) {
        self.score_ext = score_ext;
        self.score_final = fusion.beta1 * self.score_diff + fusion.beta2 * score_ext;
    }
}

/// `Some(best_span)` when `β1·score_diff + β2·score_ext > δ`, `None` (the
/// null answer) otherwise.
pub fn answerability_decision(scores: &SpanScores, fusion: &FusionWeights) -> Option<(usize, usize)> {
    let score_final = fusion.beta1 * scores.score_diff + fusion.beta2 * scores.score_ext;
    (score_final > fusion.delta).then_some(scores.best_span)
}

/// Accuracy-maximizing threshold over `(score_final, answerable)` pairs.
///
/// Candidates are `-inf` and every observed score; a threshold `δ` answers
/// exactly the examples with `score_final > δ`. The smallest maximizer wins.
pub fn best_threshold(examples: &[(f64, bool)]) -> (f64, f64) {
    if examples.is_empty() {
        return (f64::NEG_INFINITY, 0.0);
    }
    let mut sorted: Vec<(f64, bool)> = examples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // δ = -inf answers everything
    let mut correct = sorted.iter().filter(|x| x.1).count() as i64;
    let mut best = (f64::NEG_INFINITY, correct);
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == v {
            // moved from "answer" to "null"
            correct += if sorted[i].1 { -1 } else { 1 };
            i += 1;
        }
        if correct > best.1 {
            best = (v, correct);
        }
    }
    (best.0, best.1 as f64 / examples.len() as f64)
}

/// Fully connected layer on the pooled row, `(logit_ans, logit_na)`.
#[derive(Debug, Clone)]
pub struct VerifierHead {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl VerifierHead {
    pub fn new<R: Rng>(store: &mut ParamStore, prefix: &str, d_model: usize, rng: &mut R) -> Self {
        VerifierHead {
            weight: weight(store, format!("{prefix}.weight"), d_model, 2, rng),
            bias: store.add(format!("{prefix}.bias"), Tensor::zeros(&[2])),
        }
    }

    /// `[1×2]` logits; column 0 answerable, column 1 unanswerable.
    pub fn logits(&self, g: &mut Graph, store: &ParamStore, h_bar: Var) -> Result<Var, ModelError> {
        let pooled = g.gather_rows(h_bar, &[0])?;
        let (w, b) = (g.param(store, self.weight), g.param(store, self.bias));
        Ok(g.linear(pooled, w, Some(b))?)
    }

    /// Cross-entropy with class 1 meaning "no answer".
    pub fn loss(&self, g: &mut Graph, store: &ParamStore, h_bar: Var, answerable: bool) -> Result<Var, ModelError> {
        let logits = self.logits(g, store, h_bar)?;
        Ok(g.cross_entropy(logits, &[usize::from(!answerable)])?)
    }
}

/// Verifier that either reads the shared `H̄` or owns a second encoder.
#[derive(Debug, Clone)]
pub struct AnswerVerifier {
    pub head: VerifierHead,
    pub encoder: Option<Encoder>,
}

impl AnswerVerifier {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        config: &ModelConfig,
        separate_encoder: bool,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        let encoder = if separate_encoder {
            Some(Encoder::new(config.clone(), store, &format!("{prefix}.encoder."), rng)?)
        } else {
            None
        };
        Ok(AnswerVerifier {
            head: VerifierHead::new(store, &format!("{prefix}.head"), config.d_model, rng),
            encoder,
        })
    }

    /// `[1×2]` logits; `shared` is ignored when the verifier has its own encoder.
    pub fn logits(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        shared: Var,
        input: &EncoderInput<'_>,
    ) -> Result<Var, ModelError> {
        let h_bar = match &self.encoder {
            Some(enc) => enc.forward(g, store, input)?.h_bar,
            None => shared,
        };
        self.head.logits(g, store, h_bar)
    }
}

/// `[CLS] a [SEP] b [SEP] …` with segment ids counting up per segment,
/// capped at `n_types - 1`.
pub fn pack_segments(segments: &[&[usize]], cls: usize, sep: usize, n_types: usize) -> (Vec<usize>, Vec<usize>) {
    let mut ids = vec![cls];
    let mut types = vec![0];
    for (k, seg) in segments.iter().enumerate() {
        let t = k.min(n_types.saturating_sub(1));
        ids.extend_from_slice(seg);
        ids.push(sep);
        types.extend(std::iter::repeat(t).take(seg.len() + 1));
    }
    (ids, types)
}

/// `logit_na − logit_ans` from a `[1×2]` verifier output.
pub fn score_ext(logits: &Tensor) -> f64 {
    logits.data()[1] - logits.data()[0]
}

/// Feed-forward layer on the pooled row, softmax over classes.
#[derive(Debug, Clone)]
pub struct ClassifierHead {
    pub weight: ParamId,
    pub bias: ParamId,
    pub n_classes: usize,
}

impl ClassifierHead {
    pub fn new<R: Rng>(store: &mut ParamStore, prefix: &str, d_model: usize, n_classes: usize, rng: &mut R) -> Self {
        ClassifierHead {
            weight: weight(store, format!("{prefix}.weight"), d_model, n_classes, rng),
            bias: store.add(format!("{prefix}.bias"), Tensor::zeros(&[n_classes])),
            n_classes,
        }
    }

    pub fn logits(&self, g: &mut Graph, store: &ParamStore, h_bar: Var) -> Result<Var, ModelError> {
        let pooled = g.gather_rows(h_bar, &[0])?;
        let (w, b) = (g.param(store, self.weight), g.param(store, self.bias));
        Ok(g.linear(pooled, w, Some(b))?)
    }

    /// `[1×c]` class probabilities.
    pub fn classify(&self, g: &mut Graph, store: &ParamStore, h_bar: Var) -> Result<Var, ModelError> {
        let logits = self.logits(g, store, h_bar)?;
        Ok(g.softmax_rows(logits))
    }

    pub fn loss(&self, g: &mut Graph, store: &ParamStore, h_bar: Var, label: usize) -> Result<Var, ModelError> {
        let logits = self.logits(g, store, h_bar)?;
        Ok(g.cross_entropy(logits, &[label])?)
    }
}

/// Index of the largest entry; the first one on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Multi-choice scoring: one encoded sequence per choice, a scalar per
/// pooled row, softmax across choices.
#[derive(Debug, Clone)]
pub struct ChoiceScorer {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl ChoiceScorer {
    pub fn new<R: Rng>(store: &mut ParamStore, prefix: &str, d_model: usize, rng: &mut R) -> Self {
        ChoiceScorer {
            weight: weight(store, format!("{prefix}.weight"), d_model, 1, rng),
            bias: store.add(format!("{prefix}.bias"), Tensor::zeros(&[1])),
        }
    }

    /// `[1×C]` logits from the `H̄` of each choice.
    pub fn logits(&self, g: &mut Graph, store: &ParamStore, choices: &[Var]) -> Result<Var, ModelError> {
        if choices.is_empty() {
            return Err(ModelError::Input("no choices".into()));
        }
        let (w, b) = (g.param(store, self.weight), g.param(store, self.bias));
        let mut scores = Vec::with_capacity(choices.len());
        for &h in choices {
            let pooled = g.gather_rows(h, &[0])?;
            scores.push(g.linear(pooled, w, Some(b))?);
        }
        Ok(g.concat_cols(&scores)?)
    }
}

/// Per-token pointer over positions, used by the head-prediction task:
/// `scores = (H̄ Wq)(H̄ Wk)ᵀ / √d_k`.
#[derive(Debug, Clone)]
pub struct PointerHead {
    pub query: ParamId,
    pub key: ParamId,
}

impl PointerHead {
    pub fn new<R: Rng>(store: &mut ParamStore, prefix: &str, d_model: usize, d_k: usize, rng: &mut R) -> Self {
        PointerHead {
            query: weight(store, format!("{prefix}.query"), d_model, d_k, rng),
            key: weight(store, format!("{prefix}.key"), d_model, d_k, rng),
        }
    }

    /// Logits for the queried rows over all positions.
    pub fn logits(&self, g: &mut Graph, store: &ParamStore, h_bar: Var, rows: &[usize]) -> Result<Var, ModelError> {
        let (wq, wk) = (g.param(store, self.query), g.param(store, self.key));
        let selected = g.gather_rows(h_bar, rows)?;
        let q = g.matmul(selected, wq)?;
        let k = g.matmul(h_bar, wk)?;
        let kt = g.transpose(k);
        let raw = g.matmul(q, kt)?;
        let d_k = g.value(wk).cols() as f64;
        Ok(g.scale(raw, 1.0 / d_k.sqrt()))
    }
}

/// Encoder–decoder attention step followed by the generator
/// `softmax(GELU(o Lw) L0)` for the last target position.
#[derive(Debug, Clone)]
pub struct CrossAttentionDecoder {
    pub attention: MultiHeadAttention,
    pub ffn: FeedForward,
    pub lw: ParamId,
    pub l0: ParamId,
}

/// Nodes of one decode step.
pub struct DecodeStep {
    pub attention: Vec<Var>,
    /// `o = c + H_tgt`.
    pub context: Var,
    /// `[1×vocab]` logits for the last target position.
    pub logits: Var,
    pub probs: Var,
}

impl CrossAttentionDecoder {
    pub fn new<R: Rng>(store: &mut ParamStore, prefix: &str, config: &ModelConfig, target_vocab: usize, rng: &mut R) -> Self {
        let d = config.d_model;
        CrossAttentionDecoder {
            attention: MultiHeadAttention::new(store, &format!("{prefix}.cross"), config, rng),
            ffn: FeedForward::new(store, &format!("{prefix}.ffn"), d, config.d_ff, d, rng),
            lw: weight(store, format!("{prefix}.lw"), d, config.d_ff, rng),
            l0: weight(store, format!("{prefix}.l0"), config.d_ff, target_vocab, rng),
        }
    }

    /// Queries come from `h_tgt`, keys and values from `h_bar`.
    pub fn step(&self, g: &mut Graph, store: &ParamStore, h_tgt: Var, h_bar: Var) -> Result<DecodeStep, ModelError> {
        let (dt, ds) = (g.value(h_tgt).cols(), g.value(h_bar).cols());
        if dt != ds {
            return Err(ModelError::Input(format!("target width {dt} vs source width {ds}")));
        }
        let (mixed, attention) = self.attention.forward(g, store, h_tgt, h_bar, None::<(&_, MaskMode)>)?;
        let c = self.ffn.forward(g, store, mixed)?;
        let context = g.add(c, h_tgt)?;
        let last = g.value(context).rows() - 1;
        let o = g.gather_rows(context, &[last])?;
        let lw = g.param(store, self.lw);
        let l0 = g.param(store, self.l0);
        let hidden = g.matmul(o, lw)?;
        let act = g.gelu(hidden);
        let logits = g.matmul(act, l0)?;
        let probs = g.softmax_rows(logits);
        Ok(DecodeStep {
            attention,
            context,
            logits,
            probs,
        })
    }
}

/// One line of the span prediction dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub score_has: f64,
    pub score_null: f64,
    pub score_diff: f64,
    pub score_ext: f64,
    pub score_final: f64,
    pub span: Option<[usize; 2]>,
}

impl PredictionRecord {
    pub fn new(id: impl Into<String>, scores: &SpanScores, fusion: &FusionWeights) -> Self {
        PredictionRecord {
            id: id.into(),
            score_has: scores.score_has,
            score_null: scores.score_null,
            score_diff: scores.score_diff,
            score_ext: scores.score_ext,
            score_final: scores.score_final,
            span: answerability_decision(scores, fusion).map(|(k, l)| [k, l]),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(3)
    }

    #[test]
    fn zero_span_head_is_uniform() {
        let mut store = ParamStore::new();
        let head = SpanHead::new(&mut store, "span", 4, &mut rng());
        store.get_mut(head.weight).value.fill(0.0);
        let mut g = Graph::new();
        let h = g.constant(Tensor::full(&[5, 4], 0.3));
        let p = head.span_probs(&mut g, &store, h).unwrap();
        assert!(g.value(p).data().iter().all(|&v| v == 0.2));
        let one = g.constant(Tensor::zeros(&[1, 4]));
        assert!(head.span_probs(&mut g, &store, one).is_err());
    }

    #[test]
    fn forced_pair_when_n_is_2() {
        let s = span_scores(&[0.7, 0.3], &[0.4, 0.6]).unwrap();
        assert_eq!(s.best_span, (2, 2));
        assert_eq!(s.score_has, 0.3 + 0.6);
        assert_eq!(s.score_null, 0.7 + 0.4);
        assert_eq!(s.score_diff, s.score_has - s.score_null);
    }

    #[test]
    fn one_hot_at_three() {
        let mut v = vec![0.0; 5];
        v[2] = 1.0;
        let s = span_scores(&v, &v).unwrap();
        assert_eq!(s.score_has, 2.0);
        assert_eq!(s.best_span, (3, 3));
    }

    #[test]
    fn ties_prefer_lowest_start() {
        // (2,4) and (3,3) both sum to 1.0
        let s = [0.0, 0.5, 0.5, 0.0, 0.0];
        let e = [0.0, 0.0, 0.5, 0.5, 0.0];
        assert_eq!(span_scores(&s, &e).unwrap().best_span, (2, 3));
        let s = [0.0, 0.5, 0.5, 0.1, 0.0];
        let e = [0.0, 0.0, 0.4, 0.5, 0.0];
        assert_eq!(span_scores(&s, &e).unwrap().best_span, (2, 4));
    }

    #[test]
    fn decision_extremes_and_fusion() {
        let mut s = span_scores(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
        let always = FusionWeights {
            delta: f64::NEG_INFINITY,
            ..FusionWeights::default()
        };
        let never = FusionWeights {
            delta: f64::INFINITY,
            ..FusionWeights::default()
        };
        assert_eq!(answerability_decision(&s, &always), Some((2, 2)));
        assert_eq!(answerability_decision(&s, &never), None);
        let f = FusionWeights {
            beta1: 2.0,
            beta2: -1.0,
            delta: 0.0,
        };
        s.fuse(0.25, &f);
        assert_eq!(s.score_final, 2.0 * s.score_diff - 0.25);
    }

    #[test]
    fn threshold_sweep_small() {
        let ex = [(-1.0, false), (0.5, true), (0.2, false), (2.0, true)];
        let (delta, acc) = best_threshold(&ex);
        assert_eq!(delta, 0.2);
        assert_eq!(acc, 1.0);
        assert_eq!(best_threshold(&[(1.0, true)]), (f64::NEG_INFINITY, 1.0));
    }

    #[test]
    fn verifier_and_classifier_zero_params() {
        let mut store = ParamStore::new();
        let v = VerifierHead::new(&mut store, "ver", 4, &mut rng());
        let c = ClassifierHead::new(&mut store, "cls", 4, 3, &mut rng());
        for p in store.iter_mut() {
            p.value.fill(0.0);
        }
        let mut g = Graph::new();
        let h = g.constant(Tensor::full(&[3, 4], 1.5));
        let logits = v.logits(&mut g, &store, h).unwrap();
        assert_eq!(g.value(logits).data(), &[0.0, 0.0]);
        assert_eq!(score_ext(g.value(logits)), 0.0);
        let loss = v.loss(&mut g, &store, h, true).unwrap();
        assert!((g.value(loss).item() - 2f64.ln()).abs() < 1e-15);

        let p = c.classify(&mut g, &store, h).unwrap();
        for &x in g.value(p).data() {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let loss = c.loss(&mut g, &store, h, 2).unwrap();
        assert!((g.value(loss).item() - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn packing_orders_segments() {
        let (ids, types) = pack_segments(&[&[7, 8], &[9], &[10]], 0, 1, 2);
        assert_eq!(ids, vec![0, 7, 8, 1, 9, 1, 10, 1]);
        assert_eq!(types, vec![0, 0, 0, 0, 1, 1, 1, 1]);
    }

    #[test]
    fn separate_verifier_ignores_shared_states() {
        let config = ModelConfig {
            d_model: 8,
            d_ff: 8,
            d_k: 4,
            d_q: 4,
            d_v: 4,
            n_layers: 1,
            syntax_guided: false,
            ..ModelConfig::default()
        };
        let mut store = ParamStore::new();
        let own = AnswerVerifier::new(&mut store, "ver", &config, true, &mut rng()).unwrap();
        let shared = AnswerVerifier::new(&mut store, "ver2", &config, false, &mut rng()).unwrap();
        let ids = [0, 5, 6];
        let input = EncoderInput::new(&ids);
        let mut g = Graph::new();
        let a = g.constant(Tensor::full(&[3, 8], 0.5));
        let b = g.constant(Tensor::full(&[3, 8], -0.5));
        let la = own.logits(&mut g, &store, a, &input).unwrap();
        let lb = own.logits(&mut g, &store, b, &input).unwrap();
        assert_eq!(g.value(la), g.value(lb));
        let la = shared.logits(&mut g, &store, a, &input).unwrap();
        let lb = shared.logits(&mut g, &store, b, &input).unwrap();
        assert_ne!(g.value(la), g.value(lb));
    }

    #[test]
    fn argmax_shift_invariance() {
        let v = [0.1, 2.5, -1.0, 2.5];
        assert_eq!(argmax(&v), 1);
        let shifted: Vec<f64> = v.iter().map(|x| x + 1000.0).collect();
        assert_eq!(argmax(&shifted), 1);
    }

    #[test]
    fn single_step_cross_attention() {
        let config = ModelConfig {
            d_model: 8,
            d_ff: 12,
            d_k: 4,
            d_q: 4,
            d_v: 4,
            ..ModelConfig::default()
        };
        let mut store = ParamStore::new();
        let dec = CrossAttentionDecoder::new(&mut store, "dec", &config, 10, &mut rng());
        let mut g = Graph::new();
        let tgt = g.constant(Tensor::full(&[1, 8], 0.1));
        let src = g.constant(Tensor::full(&[1, 8], -0.2));
        let step = dec.step(&mut g, &store, tgt, src).unwrap();
        for &a in &step.attention {
            assert_eq!(g.value(a).data(), &[1.0]);
        }
        assert!((g.value(step.probs).sum() - 1.0).abs() < 1e-12);
        assert_eq!(g.value(step.probs).cols(), 10);
    }

    #[test]
    fn prediction_line_format() {
        let s = span_scores(&[0.1, 0.9], &[0.2, 0.8]).unwrap();
        let line = PredictionRecord::new("q1", &s, &FusionWeights::default()).to_json_line();
        assert!(line.starts_with("{\"id\":\"q1\",\"score_has\":"));
        assert!(line.ends_with("\"span\":[2,2]}"));
        let back: PredictionRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back.span, Some([2, 2]));
    }
}
