//! Expands a word-level mask to word pieces under both projection modes.

use std::collections::BTreeSet;

use sgnet::conllu::DependencyTree;
use sgnet::sdoi::{build_sdoi_mask, project_to_subwords, split_word, SdoiMask, SubwordAlignment, SubwordMode};

fn show(title: &str, pieces: &[String], mask: &SdoiMask) {
    println!("{title}");
    for (i, p) in pieces.iter().enumerate() {
        let row: String = (0..mask.n()).map(|j| if mask.get(i, j) { '1' } else { '.' }).collect();
        println!("  {p:<10} {row}");
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let words = ["Unbelievable", "results", "arrived"];
    let tree = DependencyTree::from_heads(&[2, 3, 0])?;
    let word_mask = build_sdoi_mask(&tree, &BTreeSet::new())?;

    let split: Vec<Vec<String>> = words.iter().map(|w| split_word(w, 5)).collect();
    let counts: Vec<usize> = split.iter().map(Vec::len).collect();
    let pieces: Vec<String> = split.into_iter().flatten().collect();
    let align = SubwordAlignment::from_counts(&counts)?;

    for mode in [SubwordMode::SharedTag, SubwordMode::FirstPieceHead] {
        let m = project_to_subwords(&word_mask, &align, mode)?;
        show(&format!("{mode:?}"), &pieces, &m);
    }
    Ok(())
}
