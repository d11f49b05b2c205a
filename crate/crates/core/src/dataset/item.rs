use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::graph::CaptionRef;
use crate::label::Label;
use crate::text::{Sentence, TextPipeline};

use super::{DatasetError, Split};

pub const ITEM_FORMAT_VERSION: u32 = 1;

/// Where an item's final label came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelProvenance {
    /// Clear majority of the crowd judgments.
    Crowd,
    /// Set by a human reviewer.
    Adjudicated,
    /// Taken as given from an external dataset.
    Imported,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    /// Hypothesis generalizes another caption of the premises' scene.
    Related,
    /// Hypothesis generalizes a caption of a different scene.
    Unrelated,
}

/// How a generated item was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemOrigin {
    pub relation: Relation,
    pub source_caption: CaptionRef,
    pub premise_captions: Vec<CaptionRef>,
    /// Lemma sequence of the hypothesis node in the phrase graph.
    pub hypothesis_key: String,
    pub overlap_full: f64,
}

/// One entailment problem: premises, a hypothesis and its labels.
///
/// MPE items have exactly four premises; single-premise items are used for
/// pretraining.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub format_version: u32,
    pub id: String,
    pub split: Split,
    pub scene_group: String,
    pub premises: Vec<String>,
    pub hypothesis: String,
    #[serde(default)]
    pub gold_label: Option<Label>,
    #[serde(default)]
    pub label_provenance: Option<LabelProvenance>,
    /// Five crowd judgments, or empty.
    #[serde(default)]
    pub judgments: Vec<Label>,
    /// One single-premise label per premise, in premise order.
    #[serde(default)]
    pub pair_labels: Option<Vec<Label>>,
    #[serde(default)]
    pub phenomenon_tags: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<ItemOrigin>,
}

/// Normalized text of an item.
#[derive(Clone, Debug)]
pub struct NormalizedItem {
    pub premises: Vec<Sentence>,
    pub hypothesis: Sentence,
}

impl Item {
    pub fn new(id: impl Into<String>, split: Split, scene_group: impl Into<String>, premises: Vec<String>, hypothesis: impl Into<String>) -> Self {
        Self {
            format_version: ITEM_FORMAT_VERSION,
            id: id.into(),
            split,
            scene_group: scene_group.into(),
            premises,
            hypothesis: hypothesis.into(),
            gold_label: None,
            label_provenance: None,
            judgments: Vec::new(),
            pair_labels: None,
            phenomenon_tags: BTreeSet::new(),
            origin: None,
        }
    }

    pub fn is_mpe(&self) -> bool {
        self.premises.len() == 4
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |message: String| DatasetError::InvalidItem {
            id: self.id.clone(),
            message,
        };
        if self.format_version != ITEM_FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {}", self.format_version)));
        }
        if self.premises.len() != 1 && self.premises.len() != 4 {
            return Err(bad(format!("expected 1 or 4 premises, got {}", self.premises.len())));
        }
        if !self.judgments.is_empty() && self.judgments.len() != 5 {
            return Err(bad(format!("expected 0 or 5 judgments, got {}", self.judgments.len())));
        }
        if let Some(p) = &self.pair_labels {
            if p.len() != self.premises.len() {
                return Err(bad(format!("expected {} pair labels, got {}", self.premises.len(), p.len())));
            }
        }
        Ok(())
    }

    pub fn normalize(&self, pipeline: &TextPipeline) -> Result<NormalizedItem, DatasetError> {
        let wrap = |e| DatasetError::InvalidItem {
            id: self.id.clone(),
            message: format!("{e}"),
        };
        Ok(NormalizedItem {
            premises: self
                .premises
                .iter()
                .map(|p| pipeline.normalize(p))
                .collect::<Result<_, _>>()
                .map_err(wrap)?,
            hypothesis: pipeline.normalize(&self.hypothesis).map_err(wrap)?,
        })
    }
}

/// One JSON record per line, in order.
pub fn write_items<W: Write>(mut w: W, items: &[Item]) -> Result<(), DatasetError> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_items<R: BufRead>(r: R, source_name: &str) -> Result<Vec<Item>, DatasetError> {
    let mut items = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| DatasetError::Parse {
            source_name: source_name.into(),
            line: i + 1,
            message,
        };
        let item: Item = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        item.validate().map_err(|e| err(e.to_string()))?;
        items.push(item);
    }
    Ok(items)
}
