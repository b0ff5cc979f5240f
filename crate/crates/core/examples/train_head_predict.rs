//! Trains the syntax-guided encoder on synthetic head prediction and prints
//! the eval curve.
//!
//!     cargo run --release --example train_head_predict -- [seed] [steps] [degradation]

use sgnet::harness::{train, Settings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let mut settings = Settings::default().with_seed(seed);
    if let Some(steps) = args.next() {
        settings.run.steps = steps.parse()?;
    }
    if let Some(p) = args.next() {
        settings.run.degradation = p.parse()?;
    }
    let start = std::time::Instant::now();
    let report = train(&settings)?;
    for line in report.metrics.lines().filter(|l| l.contains("eval_accuracy")) {
        println!("{line}");
    }
    println!(
        "final token accuracy {:.2}% in {:.1?}",
        100.0 * report.eval.accuracy,
        start.elapsed()
    );
    Ok(())
}
