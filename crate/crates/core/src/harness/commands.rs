//! One function per CLI subcommand. Each validates its paths before doing
//! any work and writes UTF-8 JSON or JSON-lines under the output directory.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::Settings;
use super::gradsuite::{run_suite, Depth, GradRow};
use super::model::{example_mask, TaskModel};
use super::rng::substream;
use super::synthetic::example_from_tree;
use super::train::{checkpoint, eval_set, evaluate, restore, train, EvalReport, TrainReport};
use super::HarnessError;
use crate::conllu::read_trees;
use crate::encoder::EncoderInput;
use crate::numerics::{Checkpoint, Graph, ParamStore, Tensor};
use crate::sdoi::{block_diagonal_merge, build_sdoi_mask, project_to_subwords, split_word, SdoiMask, SubwordAlignment, SubwordMode};

pub const CHECKPOINT_FILE: &str = "checkpoint.sgnet";
pub const METRICS_FILE: &str = "metrics.jsonl";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    fs::write(path, bytes).map_err(io_err(path))
}

fn prepare_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn require_file(path: &Path) -> Result<(), HarnessError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(HarnessError::Input(format!("{}: no such file", path.display())))
    }
}

#[derive(Debug, Clone, Default)]
pub struct MaskOptions {
    pub subword_mode: Option<SubwordMode>,
    /// Wraps each sentence in `[CLS] … [SEP]`.
    pub special_tokens: bool,
    /// One block-diagonal mask for the whole file.
    pub merge: bool,
    /// Longest piece produced by the toy splitter.
    pub max_piece: usize,
}

/// Mask of one sentence under `opts`.
pub fn sentence_mask(tree: &crate::conllu::DependencyTree, opts: &MaskOptions) -> Result<SdoiMask, HarnessError> {
    let n = tree.len();
    let specials: BTreeSet<usize> = if opts.special_tokens {
        [0, n + 1].into()
    } else {
        BTreeSet::new()
    };
    let mask = build_sdoi_mask(tree, &specials)?;
    let Some(mode) = opts.subword_mode else {
        return Ok(mask);
    };
    let mut counts: Vec<usize> = tree
        .tokens
        .iter()
        .map(|t| split_word(&t.form, opts.max_piece.max(1)).len())
        .collect();
    if opts.special_tokens {
        counts.insert(0, 1);
        counts.push(1);
    }
    let align = SubwordAlignment::from_counts(&counts)?;
    Ok(project_to_subwords(&mask, &align, mode)?)
}

/// Writes `sentenceK.json` and `sentenceK.rle` per sentence, or
/// `merged.json` and `merged.rle` with `merge`.
pub fn cmd_mask(input: &Path, out: &Path, opts: &MaskOptions) -> Result<Vec<PathBuf>, HarnessError> {
    require_file(input)?;
    prepare_dir(out)?;
    let trees = read_trees(input)?;
    let masks = trees
        .iter()
        .map(|t| sentence_mask(t, opts))
        .collect::<Result<Vec<_>, _>>()?;
    let named: Vec<(String, SdoiMask)> = if opts.merge {
        if masks.is_empty() {
            return Err(HarnessError::Input(format!("{}: no sentences to merge", input.display())));
        }
        vec![("merged".to_string(), block_diagonal_merge(&masks)?)]
    } else {
        masks
            .into_iter()
            .enumerate()
            .map(|(k, m)| (format!("sentence{}", k + 1), m))
            .collect()
    };
    let mut written = Vec::new();
    for (stem, mask) in named {
        let json = out.join(format!("{stem}.json"));
        let rle = out.join(format!("{stem}.rle"));
        write(&json, mask.to_json())?;
        write(&rle, mask.to_rle_bytes())?;
        written.extend([json, rle]);
    }
    Ok(written)
}

fn eval_json(settings: &Settings, e: &EvalReport) -> String {
    let v = json!({
        "task": settings.run.task.to_string(),
        "degradation": settings.run.degradation,
        "correct": e.correct,
        "total": e.total,
        "accuracy": e.accuracy,
    });
    serde_json::to_string_pretty(&v).expect("json") + "\n"
}

fn write_eval(out: &Path, settings: &Settings, e: &EvalReport) -> Result<(), HarnessError> {
    write(&out.join("eval.json"), eval_json(settings, e))?;
    if !e.records.is_empty() {
        write(&out.join("predictions.jsonl"), e.predictions_jsonl())?;
    }
    Ok(())
}

/// Trains and writes the metrics log, checkpoint and eval summary.
pub fn cmd_train(settings: &Settings, out: &Path) -> Result<TrainReport, HarnessError> {
    settings.validate()?;
    prepare_dir(out)?;
    let report = train(settings)?;
    write(&out.join(METRICS_FILE), &report.metrics)?;
    checkpoint(&report, settings).save(&out.join(CHECKPOINT_FILE))?;
    write_eval(out, settings, &report.eval)?;
    Ok(report)
}

/// Re-evaluates a checkpoint; `overrides` are `key = value` lines applied on
/// top of the stored settings (e.g. another seed or degradation level).
pub fn cmd_eval(ck_path: &Path, out: &Path, overrides: Option<&str>) -> Result<EvalReport, HarnessError> {
    require_file(ck_path)?;
    prepare_dir(out)?;
    let ck = Checkpoint::load(ck_path)?;
    let (model, store, settings) = restore(&ck, overrides)?;
    settings.validate()?;
    let report = evaluate(&model, &store, &eval_set(&settings)?, &settings)?;
    write_eval(out, &settings, &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttentionDump {
    pub tokens: Vec<String>,
    pub layer: usize,
    pub head: usize,
    pub matrix: Vec<Vec<f64>>,
}

impl AttentionDump {
    fn new(tokens: Vec<String>, layer: usize, head: usize, m: &Tensor) -> Self {
        AttentionDump {
            tokens,
            layer,
            head,
            matrix: m.to_rows(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("json") + "\n"
    }
}

#[derive(Debug, Clone, Default)]
pub struct DumpOptions {
    /// Index into the eval set, or into `input` when given.
    pub example: usize,
    /// Vanilla layer; the last one by default.
    pub layer: Option<usize>,
    pub head: Option<usize>,
    pub input: Option<PathBuf>,
}

/// Vanilla and syntax-guided attention for one example. The syntax-guided
/// dump reports its layer as `n_layers`, the slot above the vanilla stack.
pub fn dump_attention(
    model: &TaskModel,
    store: &ParamStore,
    settings: &Settings,
    opts: &DumpOptions,
) -> Result<(AttentionDump, Option<AttentionDump>, SdoiMask), HarnessError> {
    let c = &model.encoder.config;
    let layer = opts.layer.unwrap_or(c.n_layers.saturating_sub(1));
    let head = opts.head.unwrap_or(0);
    if layer >= c.n_layers {
        return Err(HarnessError::Input(format!("layer {layer} out of range for {} layers", c.n_layers)));
    }
    if head >= c.n_heads {
        return Err(HarnessError::Input(format!("head {head} out of range for {} heads", c.n_heads)));
    }
    let ex = match &opts.input {
        Some(path) => {
            let trees = read_trees(path)?;
            let tree = trees.get(opts.example).cloned().ok_or_else(|| {
                HarnessError::Input(format!("{} has {} sentences", path.display(), trees.len()))
            })?;
            let mut rng = substream(settings.run.root_seed()?, "data.dump");
            example_from_tree(settings.run.task, format!("sent{}", opts.example), tree, &mut rng)
        }
        None => {
            let set = eval_set(settings)?;
            let len = set.len();
            set.into_iter()
                .nth(opts.example)
                .ok_or_else(|| HarnessError::Input(format!("example {} out of range for {len}", opts.example)))?
        }
    };
    let mask = example_mask(&ex, 0.0, 0)?;
    let mut g = Graph::new();
    let vars = model
        .encoder
        .forward(&mut g, store, &EncoderInput::new(&ex.token_ids).with_mask(&mask))?;
    let tokens = ex.tokens();
    let vanilla = AttentionDump::new(tokens.clone(), layer, head, g.value(vars.attn_vanilla[layer][head]));
    let sg = vars
        .attn_sg
        .get(head)
        .map(|&a| AttentionDump::new(tokens, c.n_layers, head, g.value(a)));
    Ok((vanilla, sg, mask))
}

/// Writes `attn_vanilla.json`, `attn_sg.json` and the `mask.json` used.
pub fn cmd_dump_attn(ck_path: &Path, out: &Path, opts: &DumpOptions) -> Result<Vec<PathBuf>, HarnessError> {
    require_file(ck_path)?;
    if let Some(p) = &opts.input {
        require_file(p)?;
    }
    prepare_dir(out)?;
    let ck = Checkpoint::load(ck_path)?;
    let (model, store, settings) = restore(&ck, None)?;
    let (vanilla, sg, mask) = dump_attention(&model, &store, &settings, opts)?;
    let mut written = vec![out.join("attn_vanilla.json")];
    write(&written[0], vanilla.to_json())?;
    if let Some(sg) = sg {
        let p = out.join("attn_sg.json");
        write(&p, sg.to_json())?;
        written.push(p);
    }
    let p = out.join("mask.json");
    write(&p, mask.to_json())?;
    written.push(p);
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub level: f64,
    pub median_accuracy: f64,
    pub seeds: Vec<u64>,
    pub accuracies: Vec<f64>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => (v[n / 2 - 1] + v[n / 2]) / 2.0,
    }
}

/// Directory of one sweep job.
pub fn sweep_job_dir(out: &Path, level: f64, seed: u64) -> PathBuf {
    out.join(format!("level_{level}")).join(format!("seed_{seed}"))
}

/// Trains one job per (level, seed) in parallel; each job writes its own
/// metrics log. Returns one row per level.
pub fn cmd_degrade_sweep(settings: &Settings, out: &Path) -> Result<Vec<SweepRow>, HarnessError> {
    settings.validate()?;
    let seeds = settings.run.sweep_seeds()?;
    let levels = settings.run.levels.clone();
    let jobs: Vec<(f64, u64)> = levels
        .iter()
        .flat_map(|&l| seeds.iter().map(move |&s| (l, s)))
        .collect();
    for &(l, s) in &jobs {
        prepare_dir(&sweep_job_dir(out, l, s))?;
    }
    let results: Vec<f64> = jobs
        .par_iter()
        .map(|&(level, seed)| {
            let mut job = settings.clone().with_seed(seed);
            job.run.degradation = level;
            let report = train(&job)?;
            let dir = sweep_job_dir(out, level, seed);
            write(&dir.join(METRICS_FILE), &report.metrics)?;
            write(&dir.join("eval.json"), eval_json(&job, &report.eval))?;
            Ok(report.eval.accuracy)
        })
        .collect::<Result<_, HarnessError>>()?;
    let rows: Vec<SweepRow> = levels
        .iter()
        .enumerate()
        .map(|(i, &level)| {
            let accuracies = results[i * seeds.len()..(i + 1) * seeds.len()].to_vec();
            SweepRow {
                level,
                median_accuracy: median(&accuracies),
                seeds: seeds.clone(),
                accuracies,
            }
        })
        .collect();
    let lines: String = rows
        .iter()
        .map(|r| serde_json::to_string(r).expect("json") + "\n")
        .collect();
    write(&out.join("sweep.jsonl"), lines)?;
    Ok(rows)
}

/// Plain-text rendering of the sweep table.
pub fn format_sweep(rows: &[SweepRow]) -> String {
    let mut s = String::from("level\tmedian_accuracy\tseeds\n");
    for r in rows {
        s += &format!("{}\t{:.4}\t{}\n", r.level, r.median_accuracy, r.seeds.len());
    }
    s
}

/// Runs the finite-difference suite and writes `gradcheck.jsonl`.
pub fn cmd_gradcheck(settings: &Settings, depth: Depth, out: &Path) -> Result<Vec<GradRow>, HarnessError> {
    settings.validate()?;
    prepare_dir(out)?;
    let r = &settings.run;
    let rows = run_suite(r.root_seed()?, depth, &settings.model, r.op_threshold, r.model_threshold)?;
    let lines: String = rows
        .iter()
        .map(|row| serde_json::to_string(row).expect("json") + "\n")
        .collect();
    write(&out.join("gradcheck.jsonl"), lines)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Task;

    fn small(seed: u64, steps: usize) -> Settings {
        let mut s = Settings::default().with_seed(seed);
        s.run.steps = steps;
        s.run.batch_size = 2;
        s.run.eval_examples = 10;
        s.run.eval_every = 5;
        s.run.max_words = 6;
        s.model.d_model = 8;
        s.model.d_ff = 8;
        s.model.d_k = 4;
        s.model.d_q = 4;
        s.model.d_v = 4;
        s.model.n_layers = 1;
        s
    }

    const FIG: &str = "1\tIncome\t_\t_\t_\t_\t2\tnsubj\t_\t_\n\
                       2\treflects\t_\t_\t_\t_\t0\troot\t_\t_\n\
                       3\tlower\t_\t_\t_\t_\t5\tamod\t_\t_\n\
                       4\tcredit\t_\t_\t_\t_\t5\tcompound\t_\t_\n\
                       5\tlosses\t_\t_\t_\t_\t2\tobj\t_\t_\n\
                       6\t.\t_\t_\t_\t_\t2\tpunct\t_\t_\n\
                       \n\
                       1\tHi\t_\t_\t_\t_\t0\troot\t_\t_\n";

    #[test]
    fn mask_files_are_stable() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("fig.conllu");
        fs::write(&input, FIG).unwrap();
        let opts = MaskOptions {
            special_tokens: true,
            ..MaskOptions::default()
        };
        let a = cmd_mask(&input, &dir.path().join("a"), &opts).unwrap();
        let b = cmd_mask(&input, &dir.path().join("b"), &opts).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        }
        let m = SdoiMask::from_json(&fs::read_to_string(&a[0]).unwrap()).unwrap();
        assert_eq!(m.row_set(4), [2, 4, 5].into());
        let single = SdoiMask::from_rle_bytes(&fs::read(&a[3]).unwrap()).unwrap();
        assert_eq!(single.n(), 3);

        let merged = cmd_mask(
            &input,
            &dir.path().join("c"),
            &MaskOptions {
                merge: true,
                ..MaskOptions::default()
            },
        )
        .unwrap();
        let m = SdoiMask::from_json(&fs::read_to_string(&merged[0]).unwrap()).unwrap();
        assert_eq!(m.n(), 7);
        assert_eq!(m.row_set(6), [6].into());

        let missing = cmd_mask(&dir.path().join("nope.conllu"), &dir.path().join("d"), &opts);
        assert!(missing.is_err());
    }

    #[test]
    fn zero_steps_keeps_initialization() {
        let dir = tempfile::tempdir().unwrap();
        let s = small(4, 0);
        cmd_train(&s, dir.path()).unwrap();
        let ck = Checkpoint::load(&dir.path().join(CHECKPOINT_FILE)).unwrap();
        let (_, init) = TaskModel::new(Task::HeadPredict, &s.model, 4).unwrap();
        assert_eq!(ck.params, init);
    }

    #[test]
    fn train_twice_gives_identical_logs() {
        let dir = tempfile::tempdir().unwrap();
        let s = small(6, 12);
        cmd_train(&s, &dir.path().join("a")).unwrap();
        cmd_train(&s, &dir.path().join("b")).unwrap();
        for f in [METRICS_FILE, CHECKPOINT_FILE, "eval.json"] {
            assert_eq!(
                fs::read(dir.path().join("a").join(f)).unwrap(),
                fs::read(dir.path().join("b").join(f)).unwrap()
            );
        }
        let log = fs::read_to_string(dir.path().join("a").join(METRICS_FILE)).unwrap();
        for line in log.lines() {
            serde_json::from_str::<serde_json::Value>(line).unwrap();
        }
    }

    #[test]
    fn span_run_writes_predictions() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = small(2, 3);
        s.run.task = Task::Span;
        cmd_train(&s, dir.path()).unwrap();
        let lines = fs::read_to_string(dir.path().join("predictions.jsonl")).unwrap();
        assert_eq!(lines.lines().count(), 10);
        let e = cmd_eval(&dir.path().join(CHECKPOINT_FILE), &dir.path().join("eval"), None).unwrap();
        assert_eq!(e.records.len(), 10);
    }

    #[test]
    fn dumped_attention_respects_the_mask() {
        let dir = tempfile::tempdir().unwrap();
        let s = small(8, 4);
        cmd_train(&s, dir.path()).unwrap();
        let ck = Checkpoint::load(&dir.path().join(CHECKPOINT_FILE)).unwrap();
        let (model, store, settings) = restore(&ck, None).unwrap();
        let (vanilla, sg, mask) = dump_attention(&model, &store, &settings, &DumpOptions::default()).unwrap();
        assert_eq!(vanilla.layer, 0);
        let sg = sg.unwrap();
        for (i, row) in sg.matrix.iter().enumerate() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (j, &v) in row.iter().enumerate() {
                if !mask.get(i, j) {
                    assert_eq!(v, 0.0);
                }
            }
        }
        // [CLS] has a unit row
        assert_eq!(sg.matrix[0][0], 1.0);
        let bad = DumpOptions {
            head: Some(9),
            ..DumpOptions::default()
        };
        assert!(dump_attention(&model, &store, &settings, &bad).is_err());
    }

    #[test]
    fn sweep_level_zero_matches_train() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = small(11, 6);
        s.run.levels = vec![0.0, 1.0];
        s.run.seeds = Some(vec![11, 12]);
        let rows = cmd_degrade_sweep(&s, &dir.path().join("sweep")).unwrap();
        assert_eq!(rows.len(), 2);
        cmd_train(&s, &dir.path().join("train")).unwrap();
        assert_eq!(
            fs::read(sweep_job_dir(&dir.path().join("sweep"), 0.0, 11).join(METRICS_FILE)).unwrap(),
            fs::read(dir.path().join("train").join(METRICS_FILE)).unwrap()
        );
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn gradcheck_report_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let s = small(1, 0);
        let a = cmd_gradcheck(&s, Depth::Ops, &dir.path().join("a")).unwrap();
        let b = cmd_gradcheck(&s, Depth::Ops, &dir.path().join("b")).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|r| r.pass));
    }
}
