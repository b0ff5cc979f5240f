//! Span selection with a null slot, verifier fusion and a tuned threshold.

use sgnet::heads::{answerability_decision, best_threshold, span_scores, FusionWeights, PredictionRecord};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // position 1 is the null slot
    let s = [0.10, 0.05, 0.60, 0.15, 0.10];
    let e = [0.10, 0.05, 0.10, 0.55, 0.20];
    let mut scores = span_scores(&s, &e)?;
    println!(
        "best span {:?}: has {:.2}, null {:.2}, diff {:.2}",
        scores.best_span, scores.score_has, scores.score_null, scores.score_diff
    );

    // score_ext grows with "no answer", so a negative beta2 lets the
    // verifier vote against the span
    let fusion = FusionWeights {
        beta2: -1.0,
        ..FusionWeights::default()
    };
    scores.fuse(0.3, &fusion);
    println!("final {:.2} -> {:?}", scores.score_final, answerability_decision(&scores, &fusion));
    println!("{}", PredictionRecord::new("q1", &scores, &fusion).to_json_line());

    let dev = [(0.9, true), (0.4, true), (0.2, false), (-0.5, false), (0.3, true), (0.35, false)];
    let (delta, acc) = best_threshold(&dev);
    println!("threshold {delta} gives dev accuracy {acc:.3}");
    Ok(())
}
