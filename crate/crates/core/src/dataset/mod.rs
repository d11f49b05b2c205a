//! Item generation, crowd label aggregation, adjudication and corpus
//! statistics.

mod adjudicate;
mod aggregate;
mod annotations;
mod corpus;
mod generate;
mod import;
mod item;
mod stats;

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use thiserror::Error;

use crate::graph::GraphError;
use crate::text::TextError;

pub use adjudicate::{adjudicate, flagged_items, provenance_report, review_loop, AdjudicationReport};
pub use aggregate::{aggregate_labels, majority_label, AggregationKind, AggregationOutcome};
pub use annotations::{apply_judgments, attach_pair_labels, parse_decisions, parse_judgments, parse_pair_labels, JudgmentSummary};
pub use corpus::{Corpus, CorpusCaption, SceneGroup, Split};
pub use generate::{generate_items, CandidateRejections, GenerateConfig, GenerateDiagnostics, GenerateOutcome, Shortfall};
pub use import::{import_pairs_jsonl, import_released_tsv, split_caption_id, ImportReport};
pub use item::{read_items, write_items, Item, ItemOrigin, LabelProvenance, NormalizedItem, Relation, ITEM_FORMAT_VERSION};
pub use stats::{corpus_stats, MeanSd, OverlapStats, StatsReport};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("empty input")]
    EmptyInput,
    #[error("expected 5 judgments, got {0}")]
    JudgmentCount(usize),
    #[error("unknown item id {0:?}")]
    UnknownItem(String),
    #[error("item {0:?} has no gold label")]
    Unlabeled(String),
    #[error("item {id:?}: {message}")]
    InvalidItem { id: String, message: String },
    #[error("opening {path}: {source}")]
    Open {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn open_file(path: &Path) -> Result<BufReader<File>, DatasetError> {
    File::open(path).map(BufReader::new).map_err(|source| DatasetError::Open {
        path: path.display().to_string(),
        source,
    })
}
