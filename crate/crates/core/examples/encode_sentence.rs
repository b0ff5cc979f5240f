//! Runs the toy encoder on one sentence and compares the vanilla stack,
//! the syntax-guided layer and their blend.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sgnet::conllu::DependencyTree;
use sgnet::encoder::{Encoder, EncoderInput, ModelConfig};
use sgnet::numerics::ParamStore;
use sgnet::sdoi::build_sdoi_mask;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tree = DependencyTree::from_heads(&[2, 0, 5, 5, 2, 2])?;
    let mask = build_sdoi_mask(&tree, &BTreeSet::from([0]))?;
    let ids = [0, 5, 4, 6, 6, 5, 5];

    let config = ModelConfig::default();
    let mut store = ParamStore::new();
    let encoder = Encoder::new(config.clone(), &mut store, "enc.", &mut ChaCha8Rng::seed_from_u64(0))?;
    println!(
        "{} parameters, {} in the syntax-guided layer",
        encoder.param_count(&store),
        config.sg_layer_param_count()
    );

    let out = encoder.encode(&store, &EncoderInput::new(&ids).with_mask(&mask))?;
    let h_prime = out.h_prime.as_ref().expect("syntax-guided");
    println!("H  {:?}", out.h.shape());
    println!("H' {:?}", h_prime.shape());
    println!("H̄  {:?} (alpha = {})", out.h_bar.shape(), config.alpha);
    println!("max |H - H'| = {:.4}", out.h.max_abs_diff(h_prime));

    let sg = &out.attn_sg[0];
    println!("syntax-guided attention, head 0:");
    for i in 0..sg.rows() {
        let row: Vec<String> = sg.row(i).iter().map(|v| format!("{v:.2}")).collect();
        println!("  {}", row.join(" "));
    }
    Ok(())
}
