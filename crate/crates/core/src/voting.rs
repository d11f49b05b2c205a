//! Reductions from per-premise labels to a multi-premise label, and the
//! pair-agreement breakdown.

use serde::Serialize;

use crate::dataset::Item;
use crate::label::{label_counts, Label};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Vote {
    Winner(Label),
    NoMajority,
}

/// The label given by at least three of the four pair labels.
pub fn majority_vote(pairs: &[Label; 4]) -> Vote {
    let counts = label_counts(pairs);
    Label::ALL
        .into_iter()
        .find(|l| counts[l.index()] >= 3)
        .map_or(Vote::NoMajority, Vote::Winner)
}

/// E if more pairs say E than C, C if more say C than E, otherwise N.
pub fn ec_heuristic(pairs: &[Label; 4]) -> Label {
    let [e, _, c] = label_counts(pairs);
    match e.cmp(&c) {
        std::cmp::Ordering::Greater => Label::Entailment,
        std::cmp::Ordering::Less => Label::Contradiction,
        std::cmp::Ordering::Equal => Label::Neutral,
    }
}

/// Number of pair labels equal to the gold label (0 to 4).
pub fn pair_agreement_category(pairs: &[Label; 4], gold: Label) -> usize {
    pairs.iter().filter(|&&l| l == gold).count()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BaselineReport {
    pub scored: usize,
    pub skipped_no_pairs: usize,
    pub skipped_no_gold: usize,
    /// No-majority counts as wrong.
    pub majority_acc_strict: f64,
    /// No-majority is read as N.
    pub majority_acc_neutral_fallback: f64,
    pub heuristic_acc: f64,
    pub category_counts: [usize; 5],
    pub category_histogram: [f64; 5],
}

/// Scores both voting baselines on items with four pair labels and a gold
/// label; other items are skipped and counted.
pub fn score_baselines(items: &[Item]) -> BaselineReport {
    let mut skipped_no_pairs = 0;
    let mut skipped_no_gold = 0;
    let mut strict = 0;
    let mut fallback = 0;
    let mut heuristic = 0;
    let mut categories = [0usize; 5];
    for item in items {
        let Some(pairs) = item.pair_labels.as_deref().and_then(|p| <&[Label; 4]>::try_from(p).ok()) else {
            skipped_no_pairs += 1;
            continue;
        };
        let Some(gold) = item.gold_label else {
            skipped_no_gold += 1;
            continue;
        };
        let vote = majority_vote(pairs);
        strict += usize::from(vote == Vote::Winner(gold));
        let fb = match vote {
            Vote::Winner(l) => l,
            Vote::NoMajority => Label::Neutral,
        };
        fallback += usize::from(fb == gold);
        heuristic += usize::from(ec_heuristic(pairs) == gold);
        categories[pair_agreement_category(pairs, gold)] += 1;
    }
    let scored: usize = categories.iter().sum();
    let frac = |n: usize| if scored == 0 { 0.0 } else { n as f64 / scored as f64 };
    BaselineReport {
        scored,
        skipped_no_pairs,
        skipped_no_gold,
        majority_acc_strict: frac(strict),
        majority_acc_neutral_fallback: frac(fallback),
        heuristic_acc: frac(heuristic),
        category_counts: categories,
        category_histogram: categories.map(frac),
    }
}

impl BaselineReport {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("{:<34}{}\n", "items scored", self.scored));
        s.push_str(&format!("{:<34}{}\n", "skipped (no pair labels)", self.skipped_no_pairs));
        s.push_str(&format!("{:<34}{}\n", "skipped (no gold label)", self.skipped_no_gold));
        s.push_str(&format!("{:<34}{:.1}%\n", "majority vote (strict)", 100.0 * self.majority_acc_strict));
        s.push_str(&format!(
            "{:<34}{:.1}%\n",
            "majority vote (N fallback)",
            100.0 * self.majority_acc_neutral_fallback
        ));
        s.push_str(&format!("{:<34}{:.1}%\n", "E-vs-C heuristic", 100.0 * self.heuristic_acc));
        s.push_str("pairs agreeing with gold   0      1      2      3      4\n");
        s.push_str(&format!("{:<27}", "% of items"));
        for h in self.category_histogram {
            s.push_str(&format!("{:<7.1}", 100.0 * h));
        }
        s.push('\n');
        s
    }
}
