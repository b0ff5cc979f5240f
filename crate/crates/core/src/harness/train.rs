//! Training loop, evaluation and checkpoints.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde_json::json;

use super::config::Settings;
use super::model::{degradation_seed, example_mask, TaskModel};
use super::rng::substream;
use super::synthetic::{example_from_tree, gen_synthetic, SyntheticExample};
use super::HarnessError;
use crate::conllu::{read_trees, DependencyTree};
use crate::heads::PredictionRecord;
use crate::numerics::{Adam, Checkpoint, Graph, ParamStore};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    /// Span task only.
    pub records: Vec<PredictionRecord>,
}

impl EvalReport {
    pub fn predictions_jsonl(&self) -> String {
        self.records.iter().map(|r| r.to_json_line() + "\n").collect()
    }
}

pub struct TrainReport {
    pub model: TaskModel,
    pub store: ParamStore,
    /// One JSON object per line.
    pub metrics: String,
    pub eval: EvalReport,
}

/// Held-out examples drawn from the `data.eval` substream.
pub fn eval_set(settings: &Settings) -> Result<Vec<SyntheticExample>, HarnessError> {
    let r = &settings.run;
    let mut rng = substream(r.root_seed()?, "data.eval");
    if let Some(trees) = load_trees(settings)? {
        return Ok(trees
            .into_iter()
            .enumerate()
            .take(r.eval_examples)
            .map(|(k, t)| example_from_tree(r.task, format!("sent{k}"), t, &mut rng))
            .collect());
    }
    gen_synthetic(r.task, r.eval_examples, r.min_words, r.max_words, settings.model.max_len, &mut rng)
}

fn load_trees(settings: &Settings) -> Result<Option<Vec<DependencyTree>>, HarnessError> {
    let Some(path) = &settings.run.data else {
        return Ok(None);
    };
    let trees = read_trees(path)?;
    if trees.is_empty() {
        return Err(HarnessError::Input(format!("{} holds no sentences", path.display())));
    }
    if let Some((k, t)) = trees.iter().enumerate().find(|(_, t)| t.len() + 1 > settings.model.max_len) {
        return Err(HarnessError::Input(format!(
            "{}: sentence {} has {} words, more than max_len allows",
            path.display(),
            k + 1,
            t.len()
        )));
    }
    Ok(Some(trees))
}

/// Accuracy over `examples` with masks built at the run's degradation level.
pub fn evaluate(
    model: &TaskModel,
    store: &ParamStore,
    examples: &[SyntheticExample],
    settings: &Settings,
) -> Result<EvalReport, HarnessError> {
    let seed = settings.run.root_seed()?;
    let (mut correct, mut total, mut records) = (0, 0, Vec::new());
    for (k, ex) in examples.iter().enumerate() {
        let mask = example_mask(ex, settings.run.degradation, degradation_seed(seed, "eval", k as u64))?;
        let s = model.score(store, ex, &mask)?;
        correct += s.correct;
        total += s.total;
        records.extend(s.record);
    }
    Ok(EvalReport {
        correct,
        total,
        accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        records,
    })
}

/// Adam on fresh batches from the `data` substream. Aborts on a non-finite
/// loss.
pub fn train(settings: &Settings) -> Result<TrainReport, HarnessError> {
    settings.validate()?;
    let r = &settings.run;
    let seed = r.root_seed()?;
    let (model, mut store) = TaskModel::new(r.task, &settings.model, seed)?;
    let trees = load_trees(settings)?;
    let eval_examples = eval_set(settings)?;
    let mut data_rng = substream(seed, "data");
    let mut adam = Adam::new(&store, r.learning_rate);
    let mut metrics = String::new();
    let mut drawn = 0u64;
    let mut last_eval = None;

    for step in 0..r.steps {
        let batch = match &trees {
            Some(trees) => (0..r.batch_size)
                .map(|k| {
                    let t = trees[data_rng.gen_range(0..trees.len())].clone();
                    example_from_tree(r.task, format!("step{step}.{k}"), t, &mut data_rng)
                })
                .collect(),
            None => gen_synthetic(r.task, r.batch_size, r.min_words, r.max_words, settings.model.max_len, &mut data_rng)?,
        };
        let mut total = 0.0;
        for ex in &batch {
            let mask = example_mask(ex, r.degradation, degradation_seed(seed, "train", drawn))?;
            drawn += 1;
            let mut g = Graph::new();
            let loss = model.loss(&mut g, &store, ex, &mask)?;
            let scaled = g.scale(loss, 1.0 / batch.len() as f64);
            total += g.value(scaled).item();
            let grads = g.backward(scaled);
            g.accumulate(&grads, &mut store);
        }
        if !total.is_finite() {
            return Err(HarnessError::Diverged { step, loss: total });
        }
        adam.step(&mut store);
        writeln!(metrics, "{}", json!({"step": step, "loss": total})).unwrap();
        if r.eval_every > 0 && (step + 1) % r.eval_every == 0 {
            let e = evaluate(&model, &store, &eval_examples, settings)?;
            writeln!(metrics, "{}", json!({"step": step + 1, "eval_accuracy": e.accuracy})).unwrap();
            last_eval = Some((step + 1, e));
        }
    }
    let eval = match last_eval {
        Some((s, e)) if s == r.steps => e,
        _ => {
            let e = evaluate(&model, &store, &eval_examples, settings)?;
            writeln!(metrics, "{}", json!({"step": r.steps, "eval_accuracy": e.accuracy})).unwrap();
            e
        }
    };
    Ok(TrainReport {
        model,
        store,
        metrics,
        eval,
    })
}

/// Checkpoint carrying the settings needed to rebuild the model.
pub fn checkpoint(report: &TrainReport, settings: &Settings) -> Checkpoint {
    let metadata = BTreeMap::from([
        ("settings".to_string(), settings.to_string()),
        ("task".to_string(), settings.run.task.to_string()),
    ]);
    Checkpoint {
        params: report.store.clone(),
        metadata,
    }
}

/// Rebuilds the model recorded in a checkpoint. `overrides` is applied on
/// top of the stored settings.
pub fn restore(ck: &Checkpoint, overrides: Option<&str>) -> Result<(TaskModel, ParamStore, Settings), HarnessError> {
    let text = ck
        .metadata
        .get("settings")
        .ok_or_else(|| HarnessError::Input("checkpoint has no settings".into()))?;
    let mut settings = Settings::default();
    settings.apply_text(text, "checkpoint")?;
    if let Some(extra) = overrides {
        settings.apply_text(extra, "overrides")?;
    }
    let (model, mut store) = TaskModel::new(settings.run.task, &settings.model, settings.run.root_seed()?)?;
    ck.restore_into(&mut store)?;
    Ok((model, store, settings))
}
