//! Builds the mask for "Income reflects lower credit losses ." with a
//! leading [CLS] and prints the rows, then both serialized forms.

use std::collections::BTreeSet;

use sgnet::conllu::DependencyTree;
use sgnet::sdoi::{ancestors, build_sdoi_mask, SdoiMask};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let words = ["Income", "reflects", "lower", "credit", "losses", "."];
    let tree = DependencyTree::from_heads(&[2, 0, 5, 5, 2, 2])?;
    let mask = build_sdoi_mask(&tree, &BTreeSet::from([0]))?;

    let labels: Vec<&str> = std::iter::once("[CLS]").chain(words).collect();
    for (i, label) in labels.iter().enumerate() {
        let row: String = (0..mask.n()).map(|j| if mask.get(i, j) { '1' } else { '.' }).collect();
        println!("{i} {label:<9} {row}");
    }
    println!("ancestors of 'credit': {:?}", ancestors(&tree, 4)?);

    let json = mask.to_json();
    let rle = mask.to_rle_bytes();
    println!("json: {json}");
    println!("rle: {} bytes", rle.len());
    assert_eq!(SdoiMask::from_rle_bytes(&rle)?, mask);
    Ok(())
}
