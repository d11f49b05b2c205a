//! Mini-batch training with Adam, the pretrain-then-finetune regime, a grid
//! runner, and evaluation reports.

mod eval;
mod grid;
mod synthetic;

use std::collections::{BTreeSet, HashSet};
use std::io::Write;

use mpe_autodiff::{Adam, AdamConfig, ParamId, ParamStore, Tape, Tensor};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, Item};
use crate::label::Label;
use crate::models::{EncodedPair, Embeddings, Model, ModelError, ModelKind, Mode, Preset, Vocab};
use crate::text::TextPipeline;

pub use eval::{evaluate, predict_all, Bucket, EvalReport, PredictionRecord};
pub use grid::{best_point, grid_points, grid_search, GridPoint, GridResult};
pub use synthetic::separable_examples;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("item {0:?} has no gold label")]
    Unlabeled(String),
    #[error("item {id:?}: {kind} model cannot take {count} premises")]
    Arity { id: String, kind: ModelKind, count: usize },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("no items to {0}")]
    Empty(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<mpe_autodiff::Error> for TrainError {
    fn from(e: mpe_autodiff::Error) -> Self {
        TrainError::Model(e.into())
    }
}

/// An item ready for the models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub input: EncodedPair,
    pub label: Option<Label>,
    pub pair_labels: Option<[Label; 4]>,
    pub tags: BTreeSet<String>,
}

/// Vocabulary over the lowercased tokens of `items`. With `pretrained`, only
/// tokens that have a vector are kept.
pub fn build_vocab(items: &[Item], pipeline: &TextPipeline, min_count: usize, pretrained: Option<&Embeddings>) -> Result<Vocab, TrainError> {
    let mut tokens = Vec::new();
    for item in items {
        let n = item.normalize(pipeline)?;
        for s in n.premises.iter().chain([&n.hypothesis]) {
            tokens.extend(s.tokens.iter().cloned());
        }
    }
    if let Some(e) = pretrained {
        tokens.retain(|t| e.vectors.contains_key(t));
    }
    Ok(Vocab::from_counts(tokens.iter().map(String::as_str), min_count))
}

/// Every token appearing in `items`, for filtering embedding files.
pub fn item_tokens(items: &[Item], pipeline: &TextPipeline) -> Result<HashSet<String>, TrainError> {
    let mut out = HashSet::new();
    for item in items {
        let n = item.normalize(pipeline)?;
        for s in n.premises.iter().chain([&n.hypothesis]) {
            out.extend(s.tokens.iter().cloned());
        }
    }
    Ok(out)
}

pub fn encode_items(vocab: &Vocab, items: &[Item], pipeline: &TextPipeline) -> Result<Vec<Example>, TrainError> {
    items
        .iter()
        .map(|item| {
            let n = item.normalize(pipeline)?;
            let premises: Vec<Vec<String>> = n.premises.into_iter().map(|s| s.tokens).collect();
            Ok(Example {
                id: item.id.clone(),
                input: EncodedPair::new(vocab, &premises, &n.hypothesis.tokens),
                label: item.gold_label,
                pair_labels: item.pair_labels.as_deref().and_then(|p| <[Label; 4]>::try_from(p).ok()),
                tags: item.phenomenon_tags.clone(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Seeds shuffling and dropout.
    pub seed: u64,
    /// Restore the parameters of the epoch with the best dev accuracy at the
    /// end of a run with a dev set.
    pub keep_best: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: Preset::EPOCHS,
            batch_size: Preset::BATCH_SIZE,
            lr: Preset::LEARNING_RATE,
            seed: 0,
            keep_best: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch size must be at least 1".into()));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(TrainError::Config(format!("learning rate must be finite and non-negative, got {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Pretrain,
    Finetune,
}

/// One line of the epoch log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: Phase,
    /// 1-based within the phase.
    pub epoch: usize,
    pub steps: u64,
    /// Mean training loss over the epoch, with dropout active.
    pub loss: f64,
    /// Evaluation-mode accuracy on the training items after the epoch.
    pub train_accuracy: f64,
    pub dev_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestEpoch {
    pub phase: Phase,
    pub epoch: usize,
    pub dev_accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    /// Epoch whose parameters were kept, when a dev set was given.
    pub best: Option<BestEpoch>,
}

impl TrainLog {
    /// One JSON object per epoch.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), TrainError> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn check_examples(model: &Model, examples: &[Example], what: &'static str) -> Result<(), TrainError> {
    if examples.is_empty() {
        return Err(TrainError::Empty(what));
    }
    let kind = model.config().kind;
    for e in examples {
        if e.label.is_none() {
            return Err(TrainError::Unlabeled(e.id.clone()));
        }
        let count = e.input.premises.len();
        if count == 0 || (kind == ModelKind::Se && count != 1 && count != 4) {
            return Err(TrainError::Arity {
                id: e.id.clone(),
                kind,
                count,
            });
        }
    }
    Ok(())
}

/// Fraction of `examples` classified correctly in evaluation mode.
pub fn accuracy(model: &Model, examples: &[Example]) -> Result<f64, TrainError> {
    let preds = predict_all(model, examples)?;
    let correct = preds.iter().filter(|p| Some(p.predicted) == p.gold).count();
    Ok(correct as f64 / examples.len().max(1) as f64)
}

type ItemGrads = (f64, Vec<(ParamId, Tensor)>);

/// Optimizer state and random stream that persist across phases.
pub struct Trainer {
    pub config: TrainConfig,
    adam: Adam,
    rng: ChaCha8Rng,
    best: Option<(BestEpoch, ParamStore)>,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Trainer, TrainError> {
        config.validate()?;
        Ok(Trainer {
            adam: Adam::new(AdamConfig {
                lr: config.lr,
                ..AdamConfig::default()
            }),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            best: None,
            config,
        })
    }

    fn item_grads(model: &Model, example: &Example, seed: u64) -> Result<ItemGrads, TrainError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tape = Tape::new();
        let out = model.forward(&mut tape, &example.input, Mode::Train(&mut rng))?;
        let label = example.label.ok_or_else(|| TrainError::Unlabeled(example.id.clone()))?;
        let loss = tape.cross_entropy(out.logits, label.index())?;
        let value = tape.value(loss).item();
        Ok((value, tape.backward(loss)?.into_param_grads()))
    }

    /// One pass over `examples`; returns the mean loss.
    fn epoch(&mut self, model: &mut Model, examples: &[Example]) -> Result<f64, TrainError> {
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        for batch in order.chunks(self.config.batch_size) {
            let seeds: Vec<u64> = batch.iter().map(|_| self.rng.random()).collect();
            let results: Vec<ItemGrads> = batch
                .par_iter()
                .zip(seeds)
                .map(|(&i, seed)| Trainer::item_grads(model, &examples[i], seed))
                .collect::<Result<_, _>>()?;
            model.params.zero_grad();
            for (loss, grads) in &results {
                total += loss;
                for (id, g) in grads {
                    model.params.accumulate_grad(*id, g);
                }
            }
            let scale = 1.0 / batch.len() as f64;
            let ids: Vec<ParamId> = model.params.ids().collect();
            for id in ids {
                if let Some(g) = model.params.get_mut(id).grad.as_mut() {
                    g.data_mut().iter_mut().for_each(|v| *v *= scale);
                }
            }
            self.adam.step(&mut model.params)?;
        }
        model.params.zero_grad();
        Ok(total / examples.len() as f64)
    }

    /// Trains for the configured number of epochs, calling `progress` after
    /// each one.
    pub fn run_phase(
        &mut self,
        model: &mut Model,
        phase: Phase,
        train: &[Example],
        dev: Option<&[Example]>,
        log: &mut TrainLog,
        progress: &mut dyn FnMut(&EpochRecord),
    ) -> Result<(), TrainError> {
        check_examples(model, train, "train on")?;
        if let Some(dev) = dev {
            check_examples(model, dev, "evaluate")?;
        }
        for epoch in 1..=self.config.epochs {
            let loss = self.epoch(model, train)?;
            let train_accuracy = accuracy(model, train)?;
            let dev_accuracy = dev.map(|d| accuracy(model, d)).transpose()?;
            let record = EpochRecord {
                phase,
                epoch,
                steps: self.adam.steps(),
                loss,
                train_accuracy,
                dev_accuracy,
            };
            if let Some(acc) = dev_accuracy {
                if self.best.as_ref().is_none_or(|(b, _)| acc > b.dev_accuracy) {
                    self.best = Some((
                        BestEpoch {
                            phase,
                            epoch,
                            dev_accuracy: acc,
                        },
                        model.params.clone(),
                    ));
                }
            }
            progress(&record);
            log.records.push(record);
        }
        Ok(())
    }

    /// Restores the best dev epoch's parameters if `keep_best` is set.
    pub fn finish(self, model: &mut Model, log: &mut TrainLog) {
        if let Some((best, params)) = self.best {
            if self.config.keep_best {
                model.params = params;
            }
            log.best = Some(best);
        }
    }
}

/// Trains `model` on `train`, logging dev accuracy per epoch.
pub fn train(model: &mut Model, train: &[Example], dev: Option<&[Example]>, config: &TrainConfig) -> Result<TrainLog, TrainError> {
    let mut trainer = Trainer::new(config.clone())?;
    let mut log = TrainLog::default();
    trainer.run_phase(model, Phase::Train, train, dev, &mut log, &mut |_| {})?;
    trainer.finish(model, &mut log);
    Ok(log)
}

/// Trains on `pretrain` and then on `finetune` with the same optimizer state
/// and random stream, each for `config.epochs` epochs.
pub fn pretrain_finetune(
    model: &mut Model,
    pretrain: &[Example],
    finetune: &[Example],
    dev: Option<&[Example]>,
    config: &TrainConfig,
) -> Result<TrainLog, TrainError> {
    check_examples(model, pretrain, "pretrain on")?;
    check_examples(model, finetune, "fine-tune on")?;
    let mut trainer = Trainer::new(config.clone())?;
    let mut log = TrainLog::default();
    trainer.run_phase(model, Phase::Pretrain, pretrain, dev, &mut log, &mut |_| {})?;
    trainer.run_phase(model, Phase::Finetune, finetune, dev, &mut log, &mut |_| {})?;
    trainer.finish(model, &mut log);
    Ok(log)
}
