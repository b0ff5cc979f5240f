//! Accuracy as parser errors grow: corrupts a fraction of heads before the
//! masks are built and retrains at each level.
//!
//!     cargo run --release --example degrade_sweep -- [steps]

use sgnet::harness::{cmd_degrade_sweep, format_sweep, Settings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut settings = Settings::default().with_seed(1);
    settings.run.steps = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(600);
    settings.run.seeds = Some(vec![1, 2, 3]);
    let out = std::env::temp_dir().join("sgnet-degrade-sweep");
    let rows = cmd_degrade_sweep(&settings, &out)?;
    print!("{}", format_sweep(&rows));
    println!("per-job logs under {}", out.display());
    Ok(())
}
