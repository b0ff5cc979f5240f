//! Finite-difference report for every op, layer kind and the toy model.

use sgnet::encoder::ModelConfig;
use sgnet::harness::gradsuite::{run_suite, Depth};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rows = run_suite(0, Depth::All, &ModelConfig::default(), 1e-5, 1e-4)?;
    for r in &rows {
        println!("{:<26} {:>10.3e}  {} coords  {}", r.component, r.max_rel_error, r.coordinates, if r.pass { "ok" } else { "FAIL" });
    }
    Ok(())
}
