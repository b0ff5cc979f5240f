//! Finite-difference checks over every op, every layer kind and a whole
//! task model.

use std::rc::Rc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::model::{example_mask, TaskModel};
use super::rng::substream;
use super::synthetic::{gen_synthetic, Task};
use super::HarnessError;
use crate::encoder::{dual_aggregate, ModelConfig, SyntaxGuidedLayer, TransformerLayer};
use crate::heads::{ClassifierHead, CrossAttentionDecoder, PointerHead, SpanHead, VerifierHead};
use crate::numerics::{grad_check, BitMatrix, Graph, ParamId, ParamStore, Tensor, Var, DEFAULT_STEP};
use crate::sdoi::build_sdoi_mask;

/// How much of the suite to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Depth {
    Ops,
    Layers,
    Model,
    All,
}

impl std::str::FromStr for Depth {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ops" => Ok(Depth::Ops),
            "layers" => Ok(Depth::Layers),
            "model" => Ok(Depth::Model),
            "all" => Ok(Depth::All),
            _ => Err(format!("unknown depth {s:?} (expected ops, layers, model or all)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradRow {
    pub component: String,
    pub max_rel_error: f64,
    pub threshold: f64,
    pub coordinates: usize,
    pub pass: bool,
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("shape")
}

fn random_mask(rng: &mut ChaCha8Rng, n: usize) -> BitMatrix {
    let mut m = BitMatrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            if rng.gen_bool(0.5) {
                m.set(i, j, true);
            }
        }
    }
    m
}

/// `Σ op(x) ⊙ R` so every output coordinate reaches the gradient.
fn project(g: &mut Graph, out: Var, weights: &Tensor) -> Result<Var, HarnessError> {
    let w = g.constant(weights.clone());
    let prod = g.mul(out, w)?;
    Ok(g.sum(prod))
}

type OpFn = fn(&mut Graph, &[Var], &OpCtx) -> Result<Var, HarnessError>;

struct OpCtx {
    mask: BitMatrix,
    targets: Vec<usize>,
    rows: Vec<usize>,
}

fn op_table() -> Vec<(&'static str, Vec<[usize; 2]>, OpFn)> {
    vec![
        ("matmul", vec![[3, 4], [4, 2]], |g, x, _| Ok(g.matmul(x[0], x[1])?)),
        ("add", vec![[3, 4], [3, 4]], |g, x, _| Ok(g.add(x[0], x[1])?)),
        ("sub", vec![[3, 4], [3, 4]], |g, x, _| Ok(g.sub(x[0], x[1])?)),
        ("mul", vec![[3, 4], [3, 4]], |g, x, _| Ok(g.mul(x[0], x[1])?)),
        ("scale", vec![[3, 4]], |g, x, _| Ok(g.scale(x[0], -1.7))),
        ("add_row", vec![[3, 4], [1, 4]], |g, x, _| Ok(g.add_row(x[0], x[1])?)),
        ("linear", vec![[3, 4], [4, 2], [1, 2]], |g, x, _| Ok(g.linear(x[0], x[1], Some(x[2]))?)),
        ("transpose", vec![[3, 4]], |g, x, _| Ok(g.transpose(x[0]))),
        ("softmax_rows", vec![[4, 4]], |g, x, _| Ok(g.softmax_rows(x[0]))),
        ("masked_softmax_rows", vec![[4, 4]], |g, x, c| Ok(g.masked_softmax_rows(x[0], &c.mask)?)),
        ("mask_multiply", vec![[4, 4]], |g, x, c| Ok(g.mask_multiply(x[0], Rc::new(c.mask.clone()))?)),
        ("layer_norm", vec![[3, 5], [1, 5], [1, 5]], |g, x, _| Ok(g.layer_norm(x[0], x[1], x[2])?)),
        ("gelu", vec![[3, 4]], |g, x, _| Ok(g.gelu(x[0]))),
        ("cross_entropy", vec![[4, 4]], |g, x, c| Ok(g.cross_entropy(x[0], &c.targets)?)),
        ("gather_rows", vec![[4, 3]], |g, x, c| Ok(g.gather_rows(x[0], &c.rows)?)),
        ("concat_cols", vec![[3, 2], [3, 4]], |g, x, _| Ok(g.concat_cols(&[x[0], x[1]])?)),
        ("lerp", vec![[3, 4], [3, 4]], |g, x, _| Ok(g.lerp(x[0], x[1], 0.3)?)),
        ("sum", vec![[3, 4]], |g, x, _| Ok(g.sum(x[0]))),
        ("mean", vec![[3, 4]], |g, x, _| Ok(g.mean(x[0]))),
    ]
}

fn row(component: impl Into<String>, err: f64, coordinates: usize, threshold: f64) -> GradRow {
    GradRow {
        component: component.into(),
        max_rel_error: err,
        threshold,
        coordinates,
        pass: err < threshold,
    }
}

/// Every op at `points` random inputs.
pub fn check_ops(seed: u64, points: usize, threshold: f64) -> Result<Vec<GradRow>, HarnessError> {
    let mut rng = substream(seed, "gradcheck.ops");
    let mut rows = Vec::new();
    for (name, shapes, op) in op_table() {
        let (mut worst, mut coords) = (0.0f64, 0);
        for _ in 0..points {
            let mut store = ParamStore::new();
            let ids: Vec<ParamId> = shapes
                .iter()
                .enumerate()
                .map(|(k, s)| store.add(format!("x{k}"), random(&mut rng, s)))
                .collect();
            let ctx = OpCtx {
                mask: random_mask(&mut rng, 4),
                targets: (0..4).map(|_| rng.gen_range(0..4)).collect(),
                rows: vec![2, 0, 2],
            };
            // output shape from one dry run
            let mut g = Graph::new();
            let xs: Vec<Var> = ids.iter().map(|&id| g.param(&store, id)).collect();
            let out = op(&mut g, &xs, &ctx)?;
            let weights = random(&mut rng, g.value(out).shape());
            let r = grad_check(&store, &ids, DEFAULT_STEP, |g: &mut Graph, s: &ParamStore| {
                let xs: Vec<Var> = ids.iter().map(|&id| g.param(s, id)).collect();
                let out = op(g, &xs, &ctx)?;
                project(g, out, &weights)
            })?;
            worst = worst.max(r.max_rel_error);
            coords += r.coordinates;
        }
        rows.push(row(format!("op.{name}"), worst, coords, threshold));
    }
    Ok(rows)
}

/// Small configuration for the per-layer checks.
fn small_config() -> ModelConfig {
    ModelConfig {
        n_layers: 1,
        d_model: 8,
        d_ff: 12,
        d_k: 4,
        d_q: 4,
        d_v: 4,
        vocab_size: 16,
        max_len: 8,
        ..ModelConfig::default()
    }
}

fn check_all(store: &ParamStore, weights: &Tensor, f: impl Fn(&mut Graph, &ParamStore) -> Result<Var, HarnessError>) -> Result<(f64, usize), HarnessError> {
    let ids: Vec<ParamId> = store.ids().collect();
    let r = grad_check(store, &ids, DEFAULT_STEP, |g: &mut Graph, s: &ParamStore| {
        let out = f(g, s)?;
        if g.value(out).len() == 1 {
            Ok(out)
        } else {
            project(g, out, weights)
        }
    })?;
    Ok((r.max_rel_error, r.coordinates))
}

/// Each layer kind and head with its input as a parameter too.
pub fn check_layers(seed: u64, threshold: f64) -> Result<Vec<GradRow>, HarnessError> {
    let mut rng = substream(seed, "gradcheck.layers");
    let c = small_config();
    let n = 5;
    let tree = crate::conllu::DependencyTree::from_heads(&[0, 1, 1, 3]).expect("valid");
    let sdoi = build_sdoi_mask(&tree, &[0].into()).expect("mask");
    let mut rows = Vec::new();

    let mut run = |name: &str,
                   build: &dyn Fn(&mut ParamStore, &mut ChaCha8Rng) -> Box<dyn Fn(&mut Graph, &ParamStore, Var) -> Result<Var, HarnessError>>|
     -> Result<(), HarnessError> {
        let mut store = ParamStore::new();
        let x = store.add("input", random(&mut rng, &[n, c.d_model]));
        let f = build(&mut store, &mut rng);
        let mut g = Graph::new();
        let xv = g.param(&store, x);
        let out = f(&mut g, &store, xv)?;
        let weights = random(&mut rng, g.value(out).shape());
        let (err, coords) = check_all(&store, &weights, |g, s| {
            let xv = g.param(s, x);
            f(g, s, xv)
        })?;
        rows.push(row(name, err, coords, threshold));
        Ok(())
    };

    run("layer.transformer", &|s, r| {
        let l = TransformerLayer::new(s, "t", &c, r);
        Box::new(move |g, s, x| Ok(l.forward(g, s, x, None)?.0))
    })?;
    let mode = c.mask_mode;
    run("layer.syntax_guided", &|s, r| {
        let l = SyntaxGuidedLayer::new(s, "sg", &c, r);
        let m = sdoi.clone();
        Box::new(move |g, s, x| Ok(l.forward(g, s, x, Some(&m), mode)?.output))
    })?;
    run("layer.dual_aggregate", &|s, r| {
        let other = s.add("other", random(r, &[n, c.d_model]));
        Box::new(move |g, s, x| {
            let o = g.param(s, other);
            Ok(dual_aggregate(g, x, o, 0.3)?)
        })
    })?;
    run("head.span", &|s, r| {
        let h = SpanHead::new(s, "span", c.d_model, r);
        Box::new(move |g, s, x| h.loss(g, s, x, 1, 3).map_err(Into::into))
    })?;
    run("head.verifier", &|s, r| {
        let h = VerifierHead::new(s, "ver", c.d_model, r);
        Box::new(move |g, s, x| h.loss(g, s, x, false).map_err(Into::into))
    })?;
    run("head.classifier", &|s, r| {
        let h = ClassifierHead::new(s, "cls", c.d_model, 3, r);
        Box::new(move |g, s, x| h.loss(g, s, x, 2).map_err(Into::into))
    })?;
    run("head.pointer", &|s, r| {
        let h = PointerHead::new(s, "ptr", c.d_model, c.d_k, r);
        Box::new(move |g, s, x| {
            let logits = h.logits(g, s, x, &[1, 2, 3, 4])?;
            Ok(g.cross_entropy(logits, &[0, 1, 1, 3])?)
        })
    })?;
    run("head.cross_attention", &|s, r| {
        let d = CrossAttentionDecoder::new(s, "dec", &c, 10, r);
        let tgt = s.add("target", random(r, &[2, c.d_model]));
        Box::new(move |g, s, x| {
            let t = g.param(s, tgt);
            let step = d.step(g, s, t, x)?;
            Ok(g.cross_entropy(step.logits, &[7])?)
        })
    })?;
    Ok(rows)
}

/// Head-prediction loss of the full model for `config`.
pub fn check_model(seed: u64, config: &ModelConfig, threshold: f64) -> Result<GradRow, HarnessError> {
    let (model, store) = TaskModel::new(Task::HeadPredict, config, seed)?;
    let mut rng = substream(seed, "gradcheck.model");
    let ex = gen_synthetic(Task::HeadPredict, 1, 6, 6, config.max_len, &mut rng)?.remove(0);
    let mask = example_mask(&ex, 0.0, 0)?;
    let ids: Vec<ParamId> = store.ids().collect();
    let r = grad_check(&store, &ids, DEFAULT_STEP, |g: &mut Graph, s: &ParamStore| model.loss(g, s, &ex, &mask))?;
    Ok(row("model.head_predict", r.max_rel_error, r.coordinates, threshold))
}

pub fn run_suite(
    seed: u64,
    depth: Depth,
    config: &ModelConfig,
    op_threshold: f64,
    model_threshold: f64,
) -> Result<Vec<GradRow>, HarnessError> {
    let mut rows = Vec::new();
    if matches!(depth, Depth::Ops | Depth::All) {
        rows.extend(check_ops(seed, 10, op_threshold)?);
    }
    if matches!(depth, Depth::Layers | Depth::All) {
        rows.extend(check_layers(seed, op_threshold)?);
    }
    if matches!(depth, Depth::Model | Depth::All) {
        rows.push(check_model(seed, config, model_threshold)?);
    }
    Ok(rows)
}
