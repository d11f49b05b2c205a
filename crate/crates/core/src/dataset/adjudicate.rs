use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use serde::Serialize;

use crate::label::{label_counts, Label};

use super::aggregate::{aggregate_labels, majority_label, AggregationKind};
use super::{DatasetError, Item, LabelProvenance};

/// Label provenance over items that carry five judgments.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AdjudicationReport {
    pub items_with_judgments: usize,
    pub clear_majority: usize,
    pub split_32: usize,
    pub split_221: usize,
    pub adjudicated: usize,
    /// Flagged items that still have no final label.
    pub unresolved: Vec<String>,
    /// Labeled items whose final label equals the strict majority vote.
    pub final_equals_majority: usize,
    pub labeled: usize,
}

impl AdjudicationReport {
    fn frac(n: usize, d: usize) -> f64 {
        if d == 0 {
            0.0
        } else {
            n as f64 / d as f64
        }
    }

    /// Items with any majority label (clear or 3-2).
    pub fn majority_fraction(&self) -> f64 {
        Self::frac(self.clear_majority + self.split_32, self.items_with_judgments)
    }

    pub fn split_32_fraction(&self) -> f64 {
        Self::frac(self.split_32, self.items_with_judgments)
    }

    pub fn split_221_fraction(&self) -> f64 {
        Self::frac(self.split_221, self.items_with_judgments)
    }

    pub fn final_equals_majority_fraction(&self) -> f64 {
        Self::frac(self.final_equals_majority, self.labeled)
    }
}

/// Indices of items whose judgments split 3-2 between E and C or 2-2-1.
pub fn flagged_items(items: &[Item]) -> Vec<usize> {
    items
        .iter()
        .enumerate()
        .filter(|(_, it)| aggregate_labels(&it.judgments).map(|o| o.needs_adjudication()).unwrap_or(false))
        .map(|(i, _)| i)
        .collect()
}

pub fn provenance_report(items: &[Item]) -> AdjudicationReport {
    let mut r = AdjudicationReport::default();
    for item in items {
        let Ok(outcome) = aggregate_labels(&item.judgments) else {
            continue;
        };
        r.items_with_judgments += 1;
        match outcome.kind {
            AggregationKind::ClearMajority => r.clear_majority += 1,
            AggregationKind::Split32 => r.split_32 += 1,
            AggregationKind::Split221 => r.split_221 += 1,
        }
        if item.label_provenance == Some(LabelProvenance::Adjudicated) {
            r.adjudicated += 1;
        }
        match item.gold_label {
            Some(gold) => {
                r.labeled += 1;
                if majority_label(&item.judgments) == Some(gold) {
                    r.final_equals_majority += 1;
                }
            }
            None if outcome.needs_adjudication() => r.unresolved.push(item.id.clone()),
            None => {}
        }
    }
    r
}

/// Applies reviewer decisions. Every decision id must name an item; nothing is
/// changed if one does not. Decisions on clear-majority items are accepted as
/// corrections.
pub fn adjudicate(items: &mut [Item], decisions: &[(String, Label)]) -> Result<AdjudicationReport, DatasetError> {
    let index: HashMap<&str, usize> = items.iter().enumerate().map(|(i, it)| (it.id.as_str(), i)).collect();
    let resolved: Vec<(usize, Label)> = decisions
        .iter()
        .map(|(id, l)| index.get(id.as_str()).map(|&i| (i, *l)).ok_or_else(|| DatasetError::UnknownItem(id.clone())))
        .collect::<Result<_, _>>()?;
    for (i, label) in resolved {
        items[i].gold_label = Some(label);
        items[i].label_provenance = Some(LabelProvenance::Adjudicated);
    }
    Ok(provenance_report(items))
}

/// Terminal review of flagged items. For each one, shows the premises,
/// hypothesis and vote counts, then reads `E`, `N`, `C`, `s` (skip) or `q`
/// (stop). Returns the decisions made.
pub fn review_loop<R: BufRead, W: Write>(items: &[Item], flagged: &[usize], mut input: R, mut out: W) -> io::Result<Vec<(String, Label)>> {
    let mut decisions = Vec::new();
    'items: for (n, &i) in flagged.iter().enumerate() {
        let item = &items[i];
        let [e, ne, c] = label_counts(&item.judgments);
        writeln!(out, "[{}/{}] {}", n + 1, flagged.len(), item.id)?;
        for (k, p) in item.premises.iter().enumerate() {
            writeln!(out, "  premise {}: {p}", k + 1)?;
        }
        writeln!(out, "  hypothesis: {}", item.hypothesis)?;
        writeln!(out, "  votes: E={e} N={ne} C={c}")?;
        loop {
            write!(out, "label [E/N/C, s=skip, q=quit]: ")?;
            out.flush()?;
            let mut line = String::new();
            if input.read_line(&mut line)? == 0 {
                break 'items;
            }
            match line.trim() {
                "s" | "S" => break,
                "q" | "Q" => break 'items,
                other => match other.parse::<Label>() {
                    Ok(l) => {
                        decisions.push((item.id.clone(), l));
                        break;
                    }
                    Err(_) => writeln!(out, "unrecognized answer {other:?}")?,
                },
            }
        }
    }
    Ok(decisions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{apply_judgments, Split};
    use Label::*;

    fn items() -> Vec<Item> {
        let mut items: Vec<Item> = (0..3)
            .map(|i| Item::new(format!("i{i}"), Split::Dev, "g", vec!["p".into(); 4], "h"))
            .collect();
        let j = vec![
            ("i0".to_string(), vec![Entailment, Entailment, Entailment, Neutral, Neutral]),
            ("i1".to_string(), vec![Entailment, Entailment, Entailment, Contradiction, Contradiction]),
            ("i2".to_string(), vec![Entailment, Entailment, Neutral, Neutral, Contradiction]),
        ];
        apply_judgments(&mut items, &j).unwrap();
        items
    }

    #[test]
    fn decision_sets_label_and_provenance() {
        let mut items = items();
        assert_eq!(flagged_items(&items), [1, 2]);
        let r = adjudicate(&mut items, &[("i2".into(), Contradiction)]).unwrap();
        assert_eq!(items[2].gold_label, Some(Contradiction));
        assert_eq!(items[2].label_provenance, Some(LabelProvenance::Adjudicated));
        assert_eq!(r.unresolved, ["i1"]);
        assert_eq!((r.labeled, r.final_equals_majority, r.adjudicated), (2, 1, 1));
        assert!((r.split_221_fraction() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_id_changes_nothing() {
        let mut items = items();
        let before = items.clone();
        let err = adjudicate(&mut items, &[("i1".into(), Entailment), ("nope".into(), Neutral)]).unwrap_err();
        assert!(matches!(err, DatasetError::UnknownItem(id) if id == "nope"));
        assert_eq!(items, before);
    }

    #[test]
    fn review_loop_reads_answers() {
        let items = items();
        let mut out = Vec::new();
        let d = review_loop(&items, &[1, 2], "x\nc\ns\n".as_bytes(), &mut out).unwrap();
        assert_eq!(d, vec![("i1".to_string(), Contradiction)]);
        let shown = String::from_utf8(out).unwrap();
        assert!(shown.contains("votes: E=3 N=0 C=2"));
        assert!(shown.contains("unrecognized answer"));
        assert!(review_loop(&items, &[1, 2], "q\n".as_bytes(), Vec::new()).unwrap().is_empty());
    }
}
