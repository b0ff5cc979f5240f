use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sgnet::harness::gradsuite::Depth;
use sgnet::harness::{
    cmd_degrade_sweep, cmd_dump_attn, cmd_eval, cmd_gradcheck, cmd_mask, cmd_train, format_sweep, DumpOptions,
    HarnessError, MaskOptions, Settings,
};
use sgnet::sdoi::SubwordMode;

#[derive(Parser)]
#[command(name = "sgnet", version, about = "Syntax-guided self-attention toolkit")]
struct Cli {
    /// Root seed for every random substream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat `key = value` file with run and model settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serialize SDOI masks for every sentence of a treebank file.
    Mask {
        input: PathBuf,
        #[arg(long)]
        subword_mode: Option<SubwordMode>,
        #[arg(long)]
        special_tokens: bool,
        #[arg(long)]
        merge: bool,
        #[arg(long, default_value_t = 4)]
        max_piece: usize,
    },
    /// Train on a synthetic task and save a checkpoint.
    Train {
        /// Extra `key=value` settings, applied last.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Evaluate a checkpoint.
    Eval {
        checkpoint: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Dump vanilla and syntax-guided attention for one example.
    DumpAttn {
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0)]
        example: usize,
        /// Take the sentence from this treebank instead of the eval set.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        layer: Option<usize>,
        #[arg(long)]
        head: Option<usize>,
    },
    /// Accuracy against the fraction of corrupted heads.
    DegradeSweep {
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Finite-difference gradient report.
    Gradcheck {
        #[arg(long, default_value = "all")]
        depth: Depth,
    },
}

fn settings(cli: &Cli, extra: &[String]) -> Result<Settings, HarnessError> {
    let mut s = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    if let Some(seed) = cli.seed {
        s = s.with_seed(seed);
    }
    s.apply_text(&extra.join("\n"), "--set")?;
    Ok(s)
}

/// Config file and `--seed` rendered as override lines for a checkpoint.
fn overrides(cli: &Cli, extra: &[String]) -> Result<String, HarnessError> {
    let mut text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.clone(),
            source,
        })?,
        None => String::new(),
    };
    if let Some(seed) = cli.seed {
        text += &format!("\nseed = {seed}\n");
    }
    for line in extra {
        text += &format!("\n{line}");
    }
    Ok(text)
}

fn run(cli: &Cli) -> Result<bool, HarnessError> {
    let out = &cli.out;
    match &cli.command {
        Command::Mask {
            input,
            subword_mode,
            special_tokens,
            merge,
            max_piece,
        } => {
            let opts = MaskOptions {
                subword_mode: *subword_mode,
                special_tokens: *special_tokens,
                merge: *merge,
                max_piece: *max_piece,
            };
            for p in cmd_mask(input, out, &opts)? {
                println!("{}", p.display());
            }
        }
        Command::Train { set } => {
            let s = settings(cli, set)?;
            let report = cmd_train(&s, out)?;
            println!("accuracy {:.4} ({}/{})", report.eval.accuracy, report.eval.correct, report.eval.total);
        }
        Command::Eval { checkpoint, set } => {
            let text = overrides(cli, set)?;
            let e = cmd_eval(checkpoint, out, Some(&text))?;
            println!("accuracy {:.4} ({}/{})", e.accuracy, e.correct, e.total);
        }
        Command::DumpAttn {
            checkpoint,
            example,
            input,
            layer,
            head,
        } => {
            let opts = DumpOptions {
                example: *example,
                layer: *layer,
                head: *head,
                input: input.clone(),
            };
            for p in cmd_dump_attn(checkpoint, out, &opts)? {
                println!("{}", p.display());
            }
        }
        Command::DegradeSweep { set } => {
            let s = settings(cli, set)?;
            print!("{}", format_sweep(&cmd_degrade_sweep(&s, out)?));
        }
        Command::Gradcheck { depth } => {
            let s = settings(cli, &[])?;
            let rows = cmd_gradcheck(&s, *depth, out)?;
            for r in &rows {
                let verdict = if r.pass { "ok" } else { "FAIL" };
                println!("{:<28} {:.3e} < {:.0e}  {verdict}", r.component, r.max_rel_error, r.threshold);
            }
            return Ok(rows.iter().all(|r| r.pass));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
