use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::models::{Embeddings, Model, ModelConfig, Vocab};

use super::{train, Example, TrainConfig, TrainError, TrainLog};

/// One setting of the searched hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lr: f64,
    pub keep_prob: f64,
    pub hidden: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub point: GridPoint,
    pub best_dev_accuracy: f64,
    pub log: TrainLog,
}

/// Every combination of the given values, in lexicographic order of
/// (lr, keep_prob, hidden).
pub fn grid_points(lrs: &[f64], keep_probs: &[f64], hiddens: &[usize]) -> Vec<GridPoint> {
    let mut out = Vec::new();
    for &lr in lrs {
        for &keep_prob in keep_probs {
            for &hidden in hiddens {
                out.push(GridPoint { lr, keep_prob, hidden });
            }
        }
    }
    out
}

/// Trains one model per grid point, in parallel, and returns the results in
/// grid order with the trained models. Each run uses `config` apart from the
/// searched values.
pub fn grid_search(
    base: &ModelConfig,
    vocab: &Vocab,
    pretrained: Option<&Embeddings>,
    points: &[GridPoint],
    train_set: &[Example],
    dev: &[Example],
    config: &TrainConfig,
) -> Result<Vec<(GridResult, Model)>, TrainError> {
    if points.is_empty() {
        return Err(TrainError::Config("empty grid".into()));
    }
    points
        .par_iter()
        .map(|&point| {
            let model_config = ModelConfig {
                keep_prob: point.keep_prob,
                hidden: point.hidden,
                ..base.clone()
            };
            model_config.validate()?;
            let mut model = Model::new(model_config, vocab.clone(), pretrained)?;
            let run = TrainConfig {
                lr: point.lr,
                keep_best: true,
                ..config.clone()
            };
            let log = train(&mut model, train_set, Some(dev), &run)?;
            let best_dev_accuracy = log.best.as_ref().map_or(0.0, |b| b.dev_accuracy);
            Ok((
                GridResult {
                    point,
                    best_dev_accuracy,
                    log,
                },
                model,
            ))
        })
        .collect()
}

/// Index of the best result; the earliest grid point wins ties.
pub fn best_point(results: &[GridResult]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in results.iter().enumerate() {
        if best.is_none_or(|b| r.best_dev_accuracy > results[b].best_dev_accuracy) {
            best = Some(i);
        }
    }
    best
}
