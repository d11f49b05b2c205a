use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::label::Label;
use crate::models::Model;
use crate::voting::pair_agreement_category;

use super::{Example, TrainError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub gold: Option<Label>,
    pub predicted: Label,
    /// (E, N, C)
    pub probs: [f64; 3],
}

/// Evaluation-mode predictions, in input order.
pub fn predict_all(model: &Model, examples: &[Example]) -> Result<Vec<PredictionRecord>, TrainError> {
    examples
        .par_iter()
        .map(|e| {
            let p = model.predict(&e.input)?;
            Ok(PredictionRecord {
                id: e.id.clone(),
                gold: e.label,
                predicted: p.label,
                probs: p.probs,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub count: usize,
    pub correct: usize,
    /// `None` for an empty bucket.
    pub accuracy: Option<f64>,
}

impl Bucket {
    fn add(&mut self, correct: bool) {
        self.count += 1;
        self.correct += usize::from(correct);
        self.accuracy = Some(self.correct as f64 / self.count as f64);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// By gold label, (E, N, C).
    pub per_class: [Bucket; 3],
    /// `confusion[gold][predicted]`.
    pub confusion: [[usize; 3]; 3],
    /// By number of pair labels agreeing with gold, over items with pair
    /// labels.
    pub by_agreement: [Bucket; 5],
    pub without_pair_labels: usize,
    /// An item counts once under each of its tags.
    pub by_phenomenon: BTreeMap<String, Bucket>,
    pub untagged: usize,
}

impl EvalReport {
    /// Scores `predicted` (aligned with `examples`) against the gold labels.
    pub fn from_predictions(examples: &[Example], predicted: &[Label]) -> Result<EvalReport, TrainError> {
        if examples.is_empty() {
            return Err(TrainError::Empty("evaluate"));
        }
        assert_eq!(examples.len(), predicted.len(), "one prediction per example");
        let mut r = EvalReport {
            total: examples.len(),
            correct: 0,
            accuracy: 0.0,
            per_class: Default::default(),
            confusion: [[0; 3]; 3],
            by_agreement: Default::default(),
            without_pair_labels: 0,
            by_phenomenon: BTreeMap::new(),
            untagged: 0,
        };
        for (e, &p) in examples.iter().zip(predicted) {
            let gold = e.label.ok_or_else(|| TrainError::Unlabeled(e.id.clone()))?;
            let ok = gold == p;
            r.correct += usize::from(ok);
            r.per_class[gold.index()].add(ok);
            r.confusion[gold.index()][p.index()] += 1;
            match &e.pair_labels {
                Some(pairs) => r.by_agreement[pair_agreement_category(pairs, gold)].add(ok),
                None => r.without_pair_labels += 1,
            }
            if e.tags.is_empty() {
                r.untagged += 1;
            }
            for t in &e.tags {
                r.by_phenomenon.entry(t.clone()).or_default().add(ok);
            }
        }
        r.accuracy = r.correct as f64 / r.total as f64;
        Ok(r)
    }

    /// Aligned plain-text rendering.
    pub fn to_table(&self) -> String {
        let pct = |b: &Bucket| b.accuracy.map(|a| format!("{:6.1}%", 100.0 * a)).unwrap_or_else(|| "      -".into());
        let mut s = format!("{:<24}{:6.1}%  ({}/{})\n", "accuracy", 100.0 * self.accuracy, self.correct, self.total);
        for l in Label::ALL {
            let b = &self.per_class[l.index()];
            s.push_str(&format!("{:<24}{}  (n={})\n", format!("gold {l}"), pct(b), b.count));
        }
        s.push_str("confusion (rows gold, columns predicted)\n");
        s.push_str(&format!("{:<8}{:>8}{:>8}{:>8}\n", "", "E", "N", "C"));
        for l in Label::ALL {
            let row = &self.confusion[l.index()];
            s.push_str(&format!("{:<8}{:>8}{:>8}{:>8}\n", l.as_str(), row[0], row[1], row[2]));
        }
        let covered: usize = self.by_agreement.iter().map(|b| b.count).sum();
        if covered > 0 {
            s.push_str(&format!("pair labels agreeing with gold ({covered} items)\n"));
            for (k, b) in self.by_agreement.iter().enumerate() {
                let share = 100.0 * b.count as f64 / covered as f64;
                s.push_str(&format!("{:<24}{}  ({:.1}% of items)\n", format!("  {k}"), pct(b), share));
            }
        }
        if !self.by_phenomenon.is_empty() {
            s.push_str("phenomena\n");
            for (t, b) in &self.by_phenomenon {
                s.push_str(&format!("{:<24}{}  (n={})\n", format!("  {t}"), pct(b), b.count));
            }
        }
        s
    }
}

/// Predicts every example with dropout off and scores the predictions.
pub fn evaluate(model: &Model, examples: &[Example]) -> Result<(EvalReport, Vec<PredictionRecord>), TrainError> {
    if examples.is_empty() {
        return Err(TrainError::Empty("evaluate"));
    }
    let preds = predict_all(model, examples)?;
    let labels: Vec<Label> = preds.iter().map(|p| p.predicted).collect();
    Ok((EvalReport::from_predictions(examples, &labels)?, preds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::EncodedPair;
    use Label::*;

    fn ex(id: &str, gold: Label, pairs: Option<[Label; 4]>, tags: &[&str]) -> Example {
        Example {
            id: id.into(),
            input: EncodedPair {
                premises: vec![vec![2]; 4],
                hypothesis: vec![2],
            },
            label: Some(gold),
            pair_labels: pairs,
            tags: tags.iter().map(|t| t.to_string()).collect(),
        }
    }

    #[test]
    fn constant_prediction_scores_class_frequency() {
        let examples = vec![
            ex("a", Entailment, Some([Entailment; 4]), &["hypernym"]),
            ex("b", Neutral, Some([Neutral, Entailment, Neutral, Neutral]), &[]),
            ex("c", Contradiction, None, &["hypernym", "count"]),
            ex("d", Entailment, Some([Neutral; 4]), &[]),
        ];
        let r = EvalReport::from_predictions(&examples, &[Entailment; 4]).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.per_class.map(|b| b.accuracy), [Some(1.0), Some(0.0), Some(0.0)]);
        assert_eq!(r.confusion, [[2, 0, 0], [1, 0, 0], [1, 0, 0]]);
        assert_eq!(r.by_agreement[4].count, 1);
        assert_eq!(r.by_agreement[3].count, 1);
        assert_eq!(r.by_agreement[0].count, 1);
        assert_eq!(r.without_pair_labels, 1);
        assert_eq!(r.by_phenomenon["hypernym"].count, 2);
        assert_eq!(r.untagged, 2);
        let table = r.to_table();
        assert!(table.contains("50.0%") && table.contains("hypernym"), "{table}");
    }

    #[test]
    fn empty_and_unlabeled_are_errors() {
        assert!(matches!(EvalReport::from_predictions(&[], &[]), Err(TrainError::Empty(_))));
        let mut e = ex("z", Neutral, None, &[]);
        e.label = None;
        assert!(matches!(EvalReport::from_predictions(&[e], &[Neutral]), Err(TrainError::Unlabeled(_))));
    }
}
