//! Greedy decoding with cross-attention over a syntax-guided source
//! encoding. Weights are untrained, so the output tokens are arbitrary.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sgnet::conllu::DependencyTree;
use sgnet::encoder::{Encoder, EncoderInput, ModelConfig};
use sgnet::heads::{argmax, CrossAttentionDecoder};
use sgnet::numerics::{Graph, ParamStore};
use sgnet::sdoi::build_sdoi_mask;

const TARGET_VOCAB: usize = 20;
const BOS: usize = 1;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ModelConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut store = ParamStore::new();
    let encoder = Encoder::new(config.clone(), &mut store, "src.", &mut rng)?;
    let target_embed = store.add_uniform("tgt.embed", &[TARGET_VOCAB, config.d_model], 0.2, &mut rng);
    let decoder = CrossAttentionDecoder::new(&mut store, "dec", &config, TARGET_VOCAB, &mut rng);

    let tree = DependencyTree::from_heads(&[2, 0, 2])?;
    let mask = build_sdoi_mask(&tree, &BTreeSet::from([0]))?;
    let source = [0, 5, 4, 5];

    let mut output = vec![BOS];
    for _ in 0..5 {
        let mut g = Graph::new();
        let h_bar = encoder.forward(&mut g, &store, &EncoderInput::new(&source).with_mask(&mask))?.h_bar;
        let table = g.param(&store, target_embed);
        let h_tgt = g.gather_rows(table, &output)?;
        let step = decoder.step(&mut g, &store, h_tgt, h_bar)?;
        let next = argmax(g.value(step.probs).data());
        let attn = g.value(step.attention[0]);
        println!("step {}: next {next}, source attention {:?}", output.len(), attn.row(attn.rows() - 1));
        output.push(next);
    }
    println!("decoded {output:?}");
    Ok(())
}
