//! Tab-separated annotation files keyed by item id.
//!
//! ```text
//! judgments:   item_id <TAB> five comma-separated labels
//! pair labels: item_id <TAB> four comma-separated labels
//! decisions:   item_id <TAB> label
//! ```
//!
//! Labels are `E`, `N` or `C` (full names are also accepted). Blank lines and
//! lines starting with `#` are ignored.

use std::collections::HashMap;
use std::io::BufRead;

use crate::label::{parse_label_list, Label};

use super::aggregate::aggregate_labels;
use super::{DatasetError, Item, LabelProvenance};

fn parse_keyed<R: BufRead>(r: R, source_name: &str, expected: Option<usize>) -> Result<Vec<(String, Vec<Label>)>, DatasetError> {
    let mut out = Vec::new();
    let mut seen = HashMap::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let err = |message: String| DatasetError::Parse {
            source_name: source_name.into(),
            line: i + 1,
            message,
        };
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, labels) = line.split_once('\t').ok_or_else(|| err("expected `item_id <TAB> labels`".into()))?;
        let id = id.trim();
        let labels = parse_label_list(labels).map_err(|e| err(e.to_string()))?;
        if let Some(n) = expected {
            if labels.len() != n {
                return Err(err(format!("expected {n} labels, got {}", labels.len())));
            }
        }
        if let Some(prev) = seen.insert(id.to_string(), i + 1) {
            return Err(err(format!("duplicate item id {id:?} (first on line {prev})")));
        }
        out.push((id.to_string(), labels));
    }
    Ok(out)
}

pub fn parse_judgments<R: BufRead>(r: R, source_name: &str) -> Result<Vec<(String, Vec<Label>)>, DatasetError> {
    parse_keyed(r, source_name, Some(5))
}

pub fn parse_pair_labels<R: BufRead>(r: R, source_name: &str) -> Result<Vec<(String, Vec<Label>)>, DatasetError> {
    parse_keyed(r, source_name, Some(4))
}

pub fn parse_decisions<R: BufRead>(r: R, source_name: &str) -> Result<Vec<(String, Label)>, DatasetError> {
    Ok(parse_keyed(r, source_name, Some(1))?
        .into_iter()
        .map(|(id, mut l)| (id, l.remove(0)))
        .collect())
}

fn index_by_id(items: &[Item]) -> HashMap<&str, usize> {
    items.iter().enumerate().map(|(i, it)| (it.id.as_str(), i)).collect()
}

/// Per-kind counts after attaching judgments.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct JudgmentSummary {
    pub clear_majority: usize,
    pub split_32: usize,
    pub split_221: usize,
}

/// Stores judgments on their items and labels clear majorities. Items with a
/// 3-2 or 2-2-1 split are left unlabeled for adjudication.
pub fn apply_judgments(items: &mut [Item], judgments: &[(String, Vec<Label>)]) -> Result<JudgmentSummary, DatasetError> {
    let index = index_by_id(items);
    let mut targets = Vec::with_capacity(judgments.len());
    for (id, labels) in judgments {
        let &i = index.get(id.as_str()).ok_or_else(|| DatasetError::UnknownItem(id.clone()))?;
        targets.push((i, aggregate_labels(labels)?, labels.clone()));
    }
    let mut summary = JudgmentSummary::default();
    for (i, outcome, labels) in targets {
        let item = &mut items[i];
        item.judgments = labels;
        if outcome.needs_adjudication() {
            item.gold_label = None;
            item.label_provenance = None;
            if outcome.label.is_some() {
                summary.split_32 += 1;
            } else {
                summary.split_221 += 1;
            }
        } else {
            item.gold_label = outcome.label;
            item.label_provenance = Some(LabelProvenance::Crowd);
            summary.clear_majority += 1;
        }
    }
    Ok(summary)
}

pub fn attach_pair_labels(items: &mut [Item], pairs: &[(String, Vec<Label>)]) -> Result<(), DatasetError> {
    let index = index_by_id(items);
    let resolved: Vec<(usize, &Vec<Label>)> = pairs
        .iter()
        .map(|(id, l)| index.get(id.as_str()).map(|&i| (i, l)).ok_or_else(|| DatasetError::UnknownItem(id.clone())))
        .collect::<Result<_, _>>()?;
    for (i, labels) in resolved {
        if labels.len() != items[i].premises.len() {
            return Err(DatasetError::InvalidItem {
                id: items[i].id.clone(),
                message: format!("{} pair labels for {} premises", labels.len(), items[i].premises.len()),
            });
        }
        items[i].pair_labels = Some(labels.clone());
    }
    Ok(())
}
