use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::graph::CaptionRef;
use crate::text::{Sentence, TextPipeline};

use super::{open_file, DatasetError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            _ => Err(format!("unknown split {s:?}, expected train, dev or test")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusCaption {
    pub cref: CaptionRef,
    pub sentence: Sentence,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SceneGroup {
    pub id: String,
    pub split: Split,
    /// Sorted by caption index.
    pub captions: Vec<CorpusCaption>,
}

/// Captions grouped by scene, each group assigned to one split.
#[derive(Clone, Debug, Default)]
pub struct Corpus {
    groups: BTreeMap<String, SceneGroup>,
}

/// Group ids must survive the tab/comma separated formats.
pub(crate) fn valid_group_id(g: &str) -> bool {
    !g.is_empty() && !g.contains(|c: char| c == ',' || c.is_whitespace())
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reads `group <TAB> index <TAB> text` lines into `split`. Blank lines
    /// and lines starting with `#` are skipped. Returns the number of captions
    /// added.
    pub fn add_tsv<R: BufRead>(
        &mut self,
        reader: R,
        split: Split,
        source_name: &str,
        pipeline: &TextPipeline,
    ) -> Result<usize, DatasetError> {
        let mut added = 0;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let err = |message: String| DatasetError::Parse {
                source_name: source_name.into(),
                line: i + 1,
                message,
            };
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.splitn(3, '\t').collect();
            if fields.len() != 3 {
                return Err(err("expected `group <TAB> index <TAB> caption`".into()));
            }
            let group = fields[0].trim();
            if !valid_group_id(group) {
                return Err(err(format!("invalid group id {group:?} (no commas or whitespace allowed)")));
            }
            let index: u32 = fields[1]
                .trim()
                .parse()
                .map_err(|_| err(format!("invalid caption index {:?}", fields[1])))?;
            let sentence = pipeline.normalize(fields[2]).map_err(|e| err(e.to_string()))?;
            let entry = self.groups.entry(group.to_string()).or_insert_with(|| SceneGroup {
                id: group.to_string(),
                split,
                captions: Vec::new(),
            });
            if entry.split != split {
                return Err(err(format!("group {group:?} already belongs to split {}", entry.split)));
            }
            match entry.captions.binary_search_by_key(&index, |c| c.cref.index) {
                Ok(_) => return Err(err(format!("duplicate caption {group}:{index}"))),
                Err(pos) => entry.captions.insert(
                    pos,
                    CorpusCaption {
                        cref: CaptionRef::new(group, index),
                        sentence,
                    },
                ),
            }
            added += 1;
        }
        Ok(added)
    }

    pub fn load(&mut self, path: &Path, split: Split, pipeline: &TextPipeline) -> Result<usize, DatasetError> {
        let reader = open_file(path)?;
        self.add_tsv(reader, split, &path.display().to_string(), pipeline)
    }

    pub fn groups(&self) -> impl Iterator<Item = &SceneGroup> {
        self.groups.values()
    }

    pub fn group(&self, id: &str) -> Option<&SceneGroup> {
        self.groups.get(id)
    }

    pub fn split_of(&self, group: &str) -> Option<Split> {
        self.groups.get(group).map(|g| g.split)
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_captions(&self) -> usize {
        self.groups.values().map(|g| g.captions.len()).sum()
    }

    /// All captions in group order, ready for graph construction.
    pub fn graph_input(&self) -> Vec<(CaptionRef, Sentence)> {
        self.groups
            .values()
            .flat_map(|g| g.captions.iter().map(|c| (c.cref.clone(), c.sentence.clone())))
            .collect()
    }
}
