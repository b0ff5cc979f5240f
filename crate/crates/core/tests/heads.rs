mod common;

use common::{brute_force_span, fd_max_rel_error, random_probs};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgnet::encoder::ModelConfig;
use sgnet::heads::{
    answerability_decision, argmax, best_threshold, span_scores, ClassifierHead, CrossAttentionDecoder,
    FusionWeights, SpanHead, VerifierHead,
};
use sgnet::numerics::{ParamId, ParamStore, Tensor};

fn input(store: &mut ParamStore, rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ParamId {
    let t = Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    store.add("input", t)
}

proptest! {
    #[test]
    fn span_scores_match_exhaustive_search(seed in any::<u64>(), n in 2usize..=40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_probs(n, &mut rng);
        let e = random_probs(n, &mut rng);
        let got = span_scores(&s, &e).unwrap();
        let (best, span) = brute_force_span(&s, &e);
        prop_assert_eq!(got.score_has, best);
        prop_assert_eq!(got.best_span, span);
        prop_assert_eq!(got.score_null, s[0] + e[0]);
        prop_assert_eq!(got.score_diff, got.score_has - got.score_null);
    }

    #[test]
    fn span_ties_match_exhaustive_search(seed in any::<u64>(), n in 2usize..=12) {
        // coarse values force many ties
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..3u8)) / 4.0).collect();
        let e: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..3u8)) / 4.0).collect();
        let got = span_scores(&s, &e).unwrap();
        let (best, span) = brute_force_span(&s, &e);
        prop_assert_eq!((got.score_has, got.best_span), (best, span));
    }

    #[test]
    fn raising_delta_never_turns_null_into_span(seed in any::<u64>(), d1 in -3.0f64..3.0, d2 in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut scores = span_scores(&random_probs(6, &mut rng), &random_probs(6, &mut rng)).unwrap();
        scores.fuse(rng.gen_range(-1.0..1.0), &FusionWeights::default());
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let at = |delta| answerability_decision(&scores, &FusionWeights { delta, ..FusionWeights::default() });
        if at(lo).is_none() {
            prop_assert!(at(hi).is_none());
        }
    }

    #[test]
    fn classify_argmax_ignores_shifts(seed in any::<u64>(), shift in -100.0f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let logits: Vec<f64> = (0..5).map(|_| f64::from(rng.gen_range(-8i32..8)) / 2.0).collect();
        let shifted: Vec<f64> = logits.iter().map(|x| x + shift).collect();
        prop_assert_eq!(argmax(&logits), argmax(&shifted));
    }
}

#[test]
fn fused_score_is_linear() {
    let mut scores = span_scores(&[0.2, 0.3, 0.5], &[0.1, 0.6, 0.3]).unwrap();
    let f = FusionWeights {
        beta1: 0.7,
        beta2: -1.3,
        delta: 0.0,
    };
    let diff = scores.score_diff;
    let at = |scores: &mut sgnet::heads::SpanScores, ext: f64| {
        scores.fuse(ext, &f);
        scores.score_final
    };
    let (a, b, c) = (at(&mut scores, -1.0), at(&mut scores, 0.5), at(&mut scores, 2.0));
    assert!(((b - a) / 1.5 - (c - b) / 1.5).abs() < 1e-12);
    assert!((a - (0.7 * diff + 1.3)).abs() < 1e-12);
}

#[test]
fn threshold_sweep_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let dev: Vec<(f64, bool)> = (0..50)
            .map(|_| {
                let answerable = rng.gen_bool(0.5);
                let centre = if answerable { 0.5 } else { -0.5 };
                // two decimals so that ties occur
                let v = ((centre + rng.gen_range(-1.0..1.0)) * 100.0f64).round() / 100.0;
                (v, answerable)
            })
            .collect();
        let mut candidates: Vec<f64> = dev.iter().map(|x| x.0).collect();
        candidates.push(f64::NEG_INFINITY);
        candidates.sort_by(f64::total_cmp);
        let mut best = (f64::NAN, -1.0);
        for &delta in &candidates {
            let acc = dev.iter().filter(|&&(v, ans)| (v > delta) == ans).count() as f64 / 50.0;
            if acc > best.1 {
                best = (delta, acc);
            }
        }
        assert_eq!(best_threshold(&dev), best);
    }
}

#[test]
fn head_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let d = 8;

    let mut store = ParamStore::new();
    let x = input(&mut store, &mut rng, 5, d);
    let span = SpanHead::new(&mut store, "span", d, &mut rng);
    let ids: Vec<ParamId> = store.ids().collect();
    let err = fd_max_rel_error(&store, &ids, 1e-5, |g, s| {
        let h = g.param(s, x);
        span.loss(g, s, h, 1, 3).unwrap()
    });
    assert!(err < 1e-5, "span {err}");

    let mut store = ParamStore::new();
    let x = input(&mut store, &mut rng, 4, d);
    let ver = VerifierHead::new(&mut store, "ver", d, &mut rng);
    let cls = ClassifierHead::new(&mut store, "cls", d, 3, &mut rng);
    let ids: Vec<ParamId> = store.ids().collect();
    let err = fd_max_rel_error(&store, &ids, 1e-5, |g, s| {
        let h = g.param(s, x);
        let a = ver.loss(g, s, h, true).unwrap();
        let b = cls.loss(g, s, h, 1).unwrap();
        g.add(a, b).unwrap()
    });
    assert!(err < 1e-5, "verifier and classifier {err}");

    let config = ModelConfig {
        d_model: d,
        d_ff: 12,
        d_k: 4,
        d_q: 4,
        d_v: 4,
        ..ModelConfig::default()
    };
    let mut store = ParamStore::new();
    let src = input(&mut store, &mut rng, 5, d);
    let tgt = store.add("target", Tensor::full(&[3, d], 0.1));
    let dec = CrossAttentionDecoder::new(&mut store, "dec", &config, 11, &mut rng);
    let ids: Vec<ParamId> = store.ids().collect();
    let err = fd_max_rel_error(&store, &ids, 1e-5, |g, s| {
        let (h, t) = (g.param(s, src), g.param(s, tgt));
        let step = dec.step(g, s, t, h).unwrap();
        g.cross_entropy(step.logits, &[4]).unwrap()
    });
    assert!(err < 1e-4, "decode step {err}");
}
