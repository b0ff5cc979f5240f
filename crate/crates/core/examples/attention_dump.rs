//! Trains briefly, then prints the vanilla and syntax-guided attention of
//! one held-out example next to its mask.

use sgnet::harness::train::eval_set;
use sgnet::harness::{dump_attention, train, DumpOptions, Settings};

fn print(title: &str, m: &[Vec<f64>]) {
    println!("{title}");
    for row in m {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.2}")).collect();
        println!("  {}", cells.join(" "));
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut settings = Settings::default().with_seed(5);
    settings.run.steps = 400;
    let report = train(&settings)?;
    let example = eval_set(&settings)?.iter().position(|ex| ex.len() >= 7).unwrap_or(0);
    let opts = DumpOptions {
        example,
        ..DumpOptions::default()
    };
    let (vanilla, sg, mask) = dump_attention(&report.model, &report.store, &settings, &opts)?;
    println!("tokens: {}", vanilla.tokens.join(" "));
    print(&format!("vanilla layer {} head {}", vanilla.layer, vanilla.head), &vanilla.matrix);
    if let Some(sg) = sg {
        print("syntax-guided head 0", &sg.matrix);
    }
    let rows: Vec<Vec<f64>> = (0..mask.n())
        .map(|i| (0..mask.n()).map(|j| f64::from(u8::from(mask.get(i, j)))).collect())
        .collect();
    print("mask", &rows);
    println!("{}", vanilla.to_json());
    Ok(())
}
