//! Encoder plus task head, with the masks each example needs.

use std::collections::BTreeSet;

use super::rng::{indexed_seed, substream};
use super::synthetic::{SyntheticExample, Target, Task};
use super::HarnessError;
use crate::encoder::{Encoder, EncoderInput, EncoderVars, ModelConfig};
use crate::heads::{argmax, span_scores, ClassifierHead, FusionWeights, PointerHead, PredictionRecord, SpanHead};
use crate::numerics::{Graph, ParamStore, Var};
use crate::sdoi::{build_sdoi_mask, degrade_tree, SdoiMask};

pub const ENCODER_PREFIX: &str = "encoder.";

#[derive(Debug, Clone)]
pub enum TaskHead {
    Pointer(PointerHead),
    Span(SpanHead),
    Classify(ClassifierHead),
}

#[derive(Debug, Clone)]
pub struct TaskModel {
    pub task: Task,
    pub encoder: Encoder,
    pub head: TaskHead,
}

/// Outcome of scoring one example.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub correct: usize,
    pub total: usize,
    pub record: Option<PredictionRecord>,
}

/// SDOI mask for an example, built from its tree after corrupting a
/// `degradation` fraction of heads. `[CLS]` gets a unit row.
pub fn example_mask(ex: &SyntheticExample, degradation: f64, seed: u64) -> Result<SdoiMask, HarnessError> {
    let specials = BTreeSet::from([0]);
    if degradation == 0.0 {
        return Ok(build_sdoi_mask(&ex.tree, &specials)?);
    }
    let tree = degrade_tree(&ex.tree, degradation, seed)?;
    Ok(build_sdoi_mask(&tree, &specials)?)
}

/// Seed of the degradation draw for example `index` of stream `name`.
pub fn degradation_seed(root: u64, name: &str, index: u64) -> u64 {
    indexed_seed(root, &format!("degradation.{name}"), index)
}

impl TaskModel {
    /// Encoder weights come from the `init` substream and head weights from
    /// `init.heads`, so the encoder is shared by every task for one seed.
    pub fn new(task: Task, config: &ModelConfig, seed: u64) -> Result<(Self, ParamStore), HarnessError> {
        let mut store = ParamStore::new();
        let mut rng = substream(seed, "init");
        let encoder = Encoder::new(config.clone(), &mut store, ENCODER_PREFIX, &mut rng)?;
        let mut rng = substream(seed, "init.heads");
        let d = config.d_model;
        let head = match task {
            Task::HeadPredict => TaskHead::Pointer(PointerHead::new(&mut store, "pointer", d, config.d_k, &mut rng)),
            Task::Span => TaskHead::Span(SpanHead::new(&mut store, "span", d, &mut rng)),
            Task::Classify => TaskHead::Classify(ClassifierHead::new(&mut store, "classifier", d, 3, &mut rng)),
        };
        Ok((TaskModel { task, encoder, head }, store))
    }

    pub fn encode(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        ex: &SyntheticExample,
        mask: &SdoiMask,
    ) -> Result<EncoderVars, HarnessError> {
        let input = EncoderInput::new(&ex.token_ids).with_mask(mask);
        Ok(self.encoder.forward(g, store, &input)?)
    }

    /// Mean cross-entropy of one example.
    pub fn loss(&self, g: &mut Graph, store: &ParamStore, ex: &SyntheticExample, mask: &SdoiMask) -> Result<Var, HarnessError> {
        let h_bar = self.encode(g, store, ex, mask)?.h_bar;
        let loss = match (&self.head, &ex.target) {
            (TaskHead::Pointer(p), Target::Heads(heads)) => {
                let rows: Vec<usize> = (1..ex.len()).collect();
                let logits = p.logits(g, store, h_bar, &rows)?;
                g.cross_entropy(logits, heads)?
            }
            (TaskHead::Span(s), Target::Span(span)) => {
                let (a, b) = span.unwrap_or((0, 0));
                s.loss(g, store, h_bar, a, b)?
            }
            (TaskHead::Classify(c), Target::Class(label)) => c.loss(g, store, h_bar, *label)?,
            _ => return Err(HarnessError::Input(format!("example {} does not match task {}", ex.id, self.task))),
        };
        Ok(loss)
    }

    /// Greedy prediction against the example's target.
    pub fn score(&self, store: &ParamStore, ex: &SyntheticExample, mask: &SdoiMask) -> Result<Scored, HarnessError> {
        let mut g = Graph::new();
        let h_bar = self.encode(&mut g, store, ex, mask)?.h_bar;
        match (&self.head, &ex.target) {
            (TaskHead::Pointer(p), Target::Heads(heads)) => {
                let rows: Vec<usize> = (1..ex.len()).collect();
                let logits = p.logits(&mut g, store, h_bar, &rows)?;
                let value = g.value(logits);
                let correct = heads
                    .iter()
                    .enumerate()
                    .filter(|&(r, &h)| argmax(value.row(r)) == h)
                    .count();
                Ok(Scored {
                    correct,
                    total: heads.len(),
                    record: None,
                })
            }
            (TaskHead::Span(s), Target::Span(span)) => {
                let probs = s.span_probs(&mut g, store, h_bar)?;
                let value = g.value(probs);
                let scores = span_scores(value.row(0), value.row(1))?;
                let record = PredictionRecord::new(ex.id.clone(), &scores, &FusionWeights::default());
                // records are 1-based, positions 0-based
                let predicted = record.span.map(|[k, l]| (k - 1, l - 1));
                Ok(Scored {
                    correct: usize::from(predicted == *span),
                    total: 1,
                    record: Some(record),
                })
            }
            (TaskHead::Classify(c), Target::Class(label)) => {
                let probs = c.classify(&mut g, store, h_bar)?;
                Ok(Scored {
                    correct: usize::from(argmax(g.value(probs).data()) == *label),
                    total: 1,
                    record: None,
                })
            }
            _ => Err(HarnessError::Input(format!("example {} does not match task {}", ex.id, self.task))),
        }
    }
}
