use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Entailment relation. The order E, N, C is used for logits, reports and
/// files throughout the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "E")]
    Entailment,
    #[serde(rename = "N")]
    Neutral,
    #[serde(rename = "C")]
    Contradiction,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid label {0:?}, expected one of E, N, C")]
pub struct ParseLabelError(pub String);

impl Label {
    pub const ALL: [Label; 3] = [Label::Entailment, Label::Neutral, Label::Contradiction];

    pub fn index(self) -> usize {
        match self {
            Label::Entailment => 0,
            Label::Neutral => 1,
            Label::Contradiction => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Entailment => "E",
            Label::Neutral => "N",
            Label::Contradiction => "C",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = ParseLabelError;

    /// Accepts the single-letter codes and the full names, case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "e" | "entailment" => Ok(Label::Entailment),
            "n" | "neutral" => Ok(Label::Neutral),
            "c" | "contradiction" => Ok(Label::Contradiction),
            _ => Err(ParseLabelError(s.to_string())),
        }
    }
}

/// Per-class counts in (E, N, C) order.
pub fn label_counts<'a, I: IntoIterator<Item = &'a Label>>(labels: I) -> [usize; 3] {
    let mut counts = [0; 3];
    for l in labels {
        counts[l.index()] += 1;
    }
    counts
}

/// Parses a comma-separated label list such as `E,N,N,C`.
pub fn parse_label_list(s: &str) -> Result<Vec<Label>, ParseLabelError> {
    s.split(',').map(str::parse).collect()
}
