use std::collections::BTreeSet;

use serde::Serialize;

use crate::label::{label_counts, Label};
use crate::text::{word_overlap, OverlapMode, TextError, TextPipeline};

use super::{DatasetError, Item};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
    pub n: usize,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Option<MeanSd> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(MeanSd {
            mean,
            sd: var.sqrt(),
            n: values.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OverlapStats {
    pub overall: Option<MeanSd>,
    /// (E, N, C); `None` when a class has no items with defined overlap.
    pub per_label: [Option<MeanSd>; 3],
    /// Items whose hypothesis has no content tokens.
    pub undefined: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatsReport {
    pub items: usize,
    pub type_count: usize,
    pub token_count: usize,
    /// Tokens over all premises of an item.
    pub premise_length: MeanSd,
    pub hypothesis_length: MeanSd,
    pub label_counts: [usize; 3],
    pub label_distribution: [f64; 3],
    pub overlap_full: OverlapStats,
    pub overlap_lemma: OverlapStats,
    /// Mean fraction of judgments equal to the gold label, over items with
    /// judgments.
    pub agreement: Option<f64>,
    pub agreement_per_label: [Option<f64>; 3],
}

fn mean(v: &[f64]) -> Option<f64> {
    MeanSd::of(v).map(|m| m.mean)
}

pub fn corpus_stats(items: &[Item], pipeline: &TextPipeline) -> Result<StatsReport, DatasetError> {
    if items.is_empty() {
        return Err(DatasetError::EmptyInput);
    }
    let mut types = BTreeSet::new();
    let mut tokens = 0;
    let mut premise_len = Vec::with_capacity(items.len());
    let mut hyp_len = Vec::with_capacity(items.len());
    let mut golds = Vec::with_capacity(items.len());
    let mut overlap: [(Vec<f64>, [Vec<f64>; 3], usize); 2] = Default::default();
    let mut agreement: (Vec<f64>, [Vec<f64>; 3]) = Default::default();

    for item in items {
        let gold = item.gold_label.ok_or_else(|| DatasetError::Unlabeled(item.id.clone()))?;
        golds.push(gold);
        let norm = item.normalize(pipeline)?;
        let plen: usize = norm.premises.iter().map(|p| p.len()).sum();
        premise_len.push(plen as f64);
        hyp_len.push(norm.hypothesis.len() as f64);
        tokens += plen + norm.hypothesis.len();
        for s in norm.premises.iter().chain([&norm.hypothesis]) {
            types.extend(s.tokens.iter().cloned());
        }
        for (slot, mode) in overlap.iter_mut().zip([OverlapMode::Full, OverlapMode::Lemma]) {
            match word_overlap(&norm.hypothesis, &norm.premises, mode) {
                Ok(o) => {
                    slot.0.push(o);
                    slot.1[gold.index()].push(o);
                }
                Err(TextError::UndefinedOverlap) => slot.2 += 1,
                Err(e) => return Err(e.into()),
            }
        }
        if item.judgments.len() == 5 {
            let a = item.judgments.iter().filter(|&&j| j == gold).count() as f64 / 5.0;
            agreement.0.push(a);
            agreement.1[gold.index()].push(a);
        }
    }

    let counts = label_counts(&golds);
    let n = items.len() as f64;
    let [full, lemma] = overlap.map(|(all, per, undefined)| OverlapStats {
        overall: MeanSd::of(&all),
        per_label: per.map(|v| MeanSd::of(&v)),
        undefined,
    });
    Ok(StatsReport {
        items: items.len(),
        type_count: types.len(),
        token_count: tokens,
        premise_length: MeanSd::of(&premise_len).expect("non-empty"),
        hypothesis_length: MeanSd::of(&hyp_len).expect("non-empty"),
        label_counts: counts,
        label_distribution: counts.map(|c| c as f64 / n),
        overlap_full: full,
        overlap_lemma: lemma,
        agreement: mean(&agreement.0),
        agreement_per_label: agreement.1.map(|v| mean(&v)),
    })
}

impl StatsReport {
    /// Aligned plain-text rendering.
    pub fn to_table(&self) -> String {
        let ms = |m: &MeanSd| format!("{:.2} ± {:.2}", m.mean, m.sd);
        let opt = |m: &Option<MeanSd>| m.as_ref().map(ms).unwrap_or_else(|| "-".into());
        let optf = |v: &Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
        let mut s = String::new();
        let mut row = |k: &str, v: String| s.push_str(&format!("{k:<28}{v}\n"));
        row("items", self.items.to_string());
        row("lexical types", self.type_count.to_string());
        row("lexical tokens", self.token_count.to_string());
        row("premise length", ms(&self.premise_length));
        row("hypothesis length", ms(&self.hypothesis_length));
        for l in Label::ALL {
            row(
                &format!("label {l}"),
                format!("{:.1}% ({})", 100.0 * self.label_distribution[l.index()], self.label_counts[l.index()]),
            );
        }
        for (name, o) in [("full", &self.overlap_full), ("lemma", &self.overlap_lemma)] {
            row(&format!("overlap {name}"), opt(&o.overall));
            for l in Label::ALL {
                row(&format!("overlap {name} {l}"), opt(&o.per_label[l.index()]));
            }
        }
        row("agreement", optf(&self.agreement));
        for l in Label::ALL {
            row(&format!("agreement {l}"), optf(&self.agreement_per_label[l.index()]));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Split;

    #[test]
    fn mean_sd_is_population() {
        let m = MeanSd::of(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
        assert_eq!((m.mean, m.sd), (5.0, 2.0));
        assert!(MeanSd::of(&[]).is_none());
    }

    #[test]
    fn unanimous_item_has_full_agreement() {
        let mut item = Item::new("a", Split::Train, "g", vec!["A woman sits.".into(); 4], "A woman smiles.");
        item.judgments = vec![Label::Entailment; 5];
        item.gold_label = Some(Label::Entailment);
        let r = corpus_stats(&[item], &TextPipeline::english()).unwrap();
        assert_eq!(r.agreement, Some(1.0));
        assert_eq!(r.label_distribution, [1.0, 0.0, 0.0]);
        assert_eq!(r.overlap_full.overall.unwrap().mean, 0.5);
        assert_eq!(r.token_count, 4 * 3 + 3);
        assert_eq!(r.type_count, 4);
    }

    #[test]
    fn errors() {
        let p = TextPipeline::english();
        assert!(matches!(corpus_stats(&[], &p), Err(DatasetError::EmptyInput)));
        let item = Item::new("a", Split::Train, "g", vec!["x".into(); 4], "y");
        assert!(matches!(corpus_stats(&[item], &p), Err(DatasetError::Unlabeled(_))));
    }
}
