//! Importers for externally distributed entailment data.

use std::collections::HashMap;
use std::io::BufRead;

use serde::Serialize;

use crate::label::{parse_label_list, Label};

use super::{DatasetError, Item, LabelProvenance, Split};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ImportReport {
    pub items: usize,
    /// Rows whose judgments did not amount to exactly five votes; imported
    /// without judgments.
    pub bad_judgments: usize,
    /// Rows without a usable gold label.
    pub unlabeled: usize,
}

fn column_key(name: &str) -> String {
    name.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase()
}

/// Splits a premise cell of the form `<image>#<n>/<caption>` into the image id
/// and caption. Cells without that prefix are returned unchanged.
pub fn split_caption_id(cell: &str) -> (Option<&str>, &str) {
    if let Some((prefix, text)) = cell.split_once('/') {
        if let Some((image, n)) = prefix.split_once('#') {
            if !image.is_empty() && !image.contains(char::is_whitespace) && !n.is_empty() && n.chars().all(|c| c.is_ascii_digit()) {
                return (Some(image), text);
            }
        }
    }
    (None, cell)
}

/// Reads a tab-separated MPE release with a header row.
///
/// Recognized columns (case and punctuation insensitive): `id` or `pair_id`;
/// `premise1` to `premise4`; `hypothesis`; `gold_label` or `label`; either
/// `judgments` (comma-separated labels) or the three vote counts
/// `entailment_judgments`, `neutral_judgments`, `contradiction_judgments`;
/// optionally `pair_labels` (comma-separated). Premise cells may carry an
/// `<image>#<n>/` prefix, whose image id becomes the scene group.
pub fn import_released_tsv<R: BufRead>(r: R, split: Split, source_name: &str) -> Result<(Vec<Item>, ImportReport), DatasetError> {
    let mut lines = r.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, line)) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => return Err(DatasetError::EmptyInput),
        }
    };
    let cols: HashMap<String, usize> = header.split('\t').enumerate().map(|(i, h)| (column_key(h), i)).collect();
    let header_err = |message: String| DatasetError::Parse {
        source_name: source_name.into(),
        line: 1,
        message,
    };
    let find = |names: &[&str]| names.iter().find_map(|n| cols.get(*n).copied());
    let id_col = find(&["id", "pairid", "itemid"]).ok_or_else(|| header_err("missing id column".into()))?;
    let premise_cols: Vec<usize> = (1..=4)
        .map(|k| find(&[&format!("premise{k}"), &format!("sentence{k}")]).ok_or_else(|| header_err(format!("missing premise{k} column"))))
        .collect::<Result<_, _>>()?;
    let hyp_col = find(&["hypothesis", "sentence5"]).ok_or_else(|| header_err("missing hypothesis column".into()))?;
    let gold_col = find(&["goldlabel", "label"]);
    let judg_col = find(&["judgments", "annotatorlabels"]);
    let count_cols = [
        find(&["entailmentjudgments"]),
        find(&["neutraljudgments"]),
        find(&["contradictionjudgments"]),
    ];
    let pair_col = find(&["pairlabels"]);

    let mut items = Vec::new();
    let mut report = ImportReport::default();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| DatasetError::Parse {
            source_name: source_name.into(),
            line: i + 1,
            message,
        };
        let f: Vec<&str> = line.split('\t').collect();
        let cell = |c: usize| f.get(c).map(|s| s.trim()).ok_or_else(|| err(format!("missing column {}", c + 1)));
        let id = cell(id_col)?.to_string();
        let mut group = None;
        let mut premises = Vec::with_capacity(4);
        for &c in &premise_cols {
            let (image, text) = split_caption_id(cell(c)?);
            group = group.or(image);
            premises.push(text.to_string());
        }
        let mut item = Item::new(id.clone(), split, group.unwrap_or(&id), premises, cell(hyp_col)?);

        let votes: Option<Vec<Label>> = if let Some(c) = judg_col {
            parse_label_list(cell(c)?).ok()
        } else if count_cols.iter().all(Option::is_some) {
            let mut v = Vec::new();
            for (l, c) in Label::ALL.into_iter().zip(count_cols) {
                let n: usize = cell(c.expect("checked"))?
                    .parse()
                    .map_err(|_| err(format!("bad vote count for {l}")))?;
                v.extend(std::iter::repeat_n(l, n));
            }
            Some(v)
        } else {
            None
        };
        match votes {
            Some(v) if v.len() == 5 => item.judgments = v,
            Some(_) => report.bad_judgments += 1,
            None if judg_col.is_some() || count_cols.iter().all(Option::is_some) => report.bad_judgments += 1,
            None => {}
        }
        item.gold_label = match gold_col {
            Some(c) => cell(c)?.parse().ok(),
            None => None,
        };
        if item.gold_label.is_some() {
            item.label_provenance = Some(LabelProvenance::Imported);
        } else {
            report.unlabeled += 1;
        }
        if let Some(c) = pair_col {
            let raw = cell(c)?;
            if !raw.is_empty() {
                let labels = parse_label_list(raw).map_err(|e| err(e.to_string()))?;
                if labels.len() != 4 {
                    return Err(err(format!("expected 4 pair labels, got {}", labels.len())));
                }
                item.pair_labels = Some(labels);
            }
        }
        items.push(item);
    }
    report.items = items.len();
    Ok((items, report))
}

/// Reads single-premise pairs from JSON lines with `sentence1`, `sentence2`
/// and `gold_label` fields. Pairs without a gold label (`-`) are skipped and
/// counted as unlabeled.
pub fn import_pairs_jsonl<R: BufRead>(r: R, split: Split, source_name: &str) -> Result<(Vec<Item>, ImportReport), DatasetError> {
    #[derive(serde::Deserialize)]
    struct Pair {
        sentence1: String,
        sentence2: String,
        gold_label: String,
        #[serde(default, rename = "pairID")]
        pair_id: Option<String>,
        #[serde(default, rename = "captionID")]
        caption_id: Option<String>,
    }
    let mut items = Vec::new();
    let mut report = ImportReport::default();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Pair = serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
            source_name: source_name.into(),
            line: i + 1,
            message: e.to_string(),
        })?;
        let Ok(gold) = p.gold_label.parse::<Label>() else {
            report.unlabeled += 1;
            continue;
        };
        let id = p.pair_id.unwrap_or_else(|| format!("{split}-pair-{i}"));
        let group = p.caption_id.as_deref().map(|c| c.split('#').next().unwrap_or(c).to_string()).unwrap_or_else(|| id.clone());
        let mut item = Item::new(id, split, group, vec![p.sentence1], p.sentence2);
        item.gold_label = Some(gold);
        item.label_provenance = Some(LabelProvenance::Imported);
        items.push(item);
    }
    report.items = items.len();
    Ok((items, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn caption_id_prefix() {
        assert_eq!(split_caption_id("123.jpg#2/A dog runs."), (Some("123.jpg"), "A dog runs."));
        assert_eq!(split_caption_id("A dog/cat."), (None, "A dog/cat."));
        assert_eq!(split_caption_id("a b#1/x"), (None, "a b#1/x"));
    }

    #[test]
    fn imports_vote_counts() {
        let tsv = "ID\tpremise1\tpremise2\tpremise3\tpremise4\thypothesis\tentailment_judgments\tneutral_judgments\tcontradiction_judgments\tgold_label\n\
                   7\t9.jpg#0/A.\t9.jpg#1/B.\t9.jpg#2/C.\t9.jpg#3/D.\tH.\t3\t1\t1\tentailment\n\
                   8\tA.\tB.\tC.\tD.\tH.\t2\t1\t1\tneutral\n";
        let (items, report) = import_released_tsv(tsv.as_bytes(), Split::Train, "t").unwrap();
        assert_eq!(items.len(), 2);
        assert_eq!(items[0].scene_group, "9.jpg");
        assert_eq!(items[0].premises[1], "B.");
        assert_eq!(items[0].judgments.len(), 5);
        assert_eq!(items[0].gold_label, Some(Label::Entailment));
        assert_eq!(items[1].scene_group, "8");
        assert!(items[1].judgments.is_empty());
        assert_eq!(report.bad_judgments, 1);
    }

    #[test]
    fn imports_judgment_lists_and_pairs() {
        let tsv = "id\tpremise1\tpremise2\tpremise3\tpremise4\thypothesis\tjudgments\tgold_label\tpair_labels\n\
                   a\tA.\tB.\tC.\tD.\tH.\tE,E,N,N,C\t-\tN,N,E,N\n";
        let (items, report) = import_released_tsv(tsv.as_bytes(), Split::Dev, "t").unwrap();
        assert_eq!(items[0].gold_label, None);
        assert_eq!(report.unlabeled, 1);
        assert_eq!(items[0].pair_labels.as_ref().unwrap()[2], Label::Entailment);
        assert!(import_released_tsv("premise1\n".as_bytes(), Split::Dev, "t").is_err());
    }

    #[test]
    fn imports_pair_jsonl() {
        let text = r#"{"sentence1":"A man.","sentence2":"A person.","gold_label":"entailment","pairID":"p1"}
{"sentence1":"A man.","sentence2":"A cat.","gold_label":"-"}
"#;
        let (items, report) = import_pairs_jsonl(text.as_bytes(), Split::Train, "s").unwrap();
        assert_eq!(items.len(), 1);
        assert_eq!(items[0].premises.len(), 1);
        assert_eq!(report.unlabeled, 1);
    }
}
