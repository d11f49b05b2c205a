//! Typed readers over [`Inputs`].

use std::path::Path;

use anyhow::Result;
use mpe_core::dataset::{import_pairs_jsonl, import_released_tsv, read_items, Corpus, Item, Split};
use mpe_core::graph::{read_graph, PhraseGraph};
use mpe_core::text::TextPipeline;

use crate::files::{Inputs, ResultExt};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ItemFormat {
    /// One item record per line.
    Items,
    /// Single-premise pairs with `sentence1`/`sentence2`.
    Pairs,
    /// Tab-separated release with a header row.
    ReleasedTsv,
}

pub fn detect_format(bytes: &[u8]) -> ItemFormat {
    let text = String::from_utf8_lossy(&bytes[..bytes.len().min(1 << 16)]);
    let first = text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    if !first.starts_with('{') {
        return ItemFormat::ReleasedTsv;
    }
    match serde_json::from_str::<serde_json::Value>(first) {
        Ok(v) if v.get("sentence1").is_some() => ItemFormat::Pairs,
        _ => ItemFormat::Items,
    }
}

/// Split recorded on imported items, guessed from the file name.
fn split_from_name(path: &str) -> Split {
    let name = Path::new(path).file_name().map(|n| n.to_string_lossy().to_lowercase()).unwrap_or_default();
    if name.contains("train") {
        Split::Train
    } else if name.contains("test") {
        Split::Test
    } else {
        Split::Dev
    }
}

/// Items from an item file, a pair file or a tab-separated release.
pub fn items(inputs: &mut Inputs, path: &Path) -> Result<Vec<Item>> {
    let (bytes, name) = inputs.read(path)?;
    let items = match detect_format(&bytes) {
        ItemFormat::Items => read_items(bytes.as_slice(), &name).invalid(|| format!("reading items from {name}"))?,
        ItemFormat::Pairs => {
            import_pairs_jsonl(bytes.as_slice(), split_from_name(&name), &name)
                .invalid(|| format!("reading pairs from {name}"))?
                .0
        }
        ItemFormat::ReleasedTsv => {
            import_released_tsv(bytes.as_slice(), split_from_name(&name), &name)
                .invalid(|| format!("reading {name}"))?
                .0
        }
    };
    for item in &items {
        item.validate().invalid(|| format!("in {name}"))?;
    }
    Ok(items)
}

/// Captions from up to three tab-separated files, one per split.
pub fn corpus(inputs: &mut Inputs, files: &[(Split, &Path)], pipeline: &TextPipeline) -> Result<Corpus> {
    let mut corpus = Corpus::new();
    for &(split, path) in files {
        let (bytes, name) = inputs.read(path)?;
        corpus.add_tsv(bytes.as_slice(), split, &name, pipeline).invalid(|| format!("reading captions from {name}"))?;
    }
    if corpus.num_captions() == 0 {
        return Err(crate::files::invalid("no captions in the input files"));
    }
    Ok(corpus)
}

pub fn graph(inputs: &mut Inputs, path: &Path) -> Result<PhraseGraph> {
    let (bytes, name) = inputs.read(path)?;
    read_graph(bytes.as_slice()).invalid(|| format!("reading graph from {name}"))
}
