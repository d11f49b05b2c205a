use serde::{Deserialize, Serialize};

use crate::label::{label_counts, Label};

use super::DatasetError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregationKind {
    ClearMajority,
    /// Three votes against two, between entailment and contradiction.
    Split32,
    /// Two, two and one votes across the three classes.
    Split221,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregationOutcome {
    pub kind: AggregationKind,
    /// Majority label; provisional for 3-2 splits and absent for 2-2-1.
    pub label: Option<Label>,
    /// Votes in (E, N, C) order.
    pub vote_counts: [usize; 3],
}

impl AggregationOutcome {
    pub fn needs_adjudication(&self) -> bool {
        self.kind != AggregationKind::ClearMajority
    }
}

/// Strict majority (at least three of five votes), if any.
pub fn majority_label(judgments: &[Label]) -> Option<Label> {
    let counts = label_counts(judgments);
    Label::ALL.into_iter().find(|l| counts[l.index()] >= 3)
}

pub fn aggregate_labels(judgments: &[Label]) -> Result<AggregationOutcome, DatasetError> {
    if judgments.len() != 5 {
        return Err(DatasetError::JudgmentCount(judgments.len()));
    }
    let vote_counts = label_counts(judgments);
    let [e, _, c] = vote_counts;
    let label = majority_label(judgments);
    let kind = match label {
        None => AggregationKind::Split221,
        Some(_) if (e, c) == (3, 2) || (e, c) == (2, 3) => AggregationKind::Split32,
        Some(_) => AggregationKind::ClearMajority,
    };
    Ok(AggregationOutcome { kind, label, vote_counts })
}
