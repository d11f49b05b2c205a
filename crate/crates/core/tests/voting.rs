use mpe_core::dataset::{Item, Split};
use mpe_core::voting::{ec_heuristic, majority_vote, pair_agreement_category, score_baselines, Vote};
use mpe_core::Label::{self, *};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn all_assignments() -> impl Iterator<Item = [Label; 4]> {
    (0..81).map(|mut n| {
        let mut out = [Entailment; 4];
        for slot in &mut out {
            *slot = Label::ALL[n % 3];
            n /= 3;
        }
        out
    })
}

fn count(pairs: &[Label; 4], l: Label) -> usize {
    let mut n = 0;
    for &p in pairs {
        if p == l {
            n += 1;
        }
    }
    n
}

#[test]
fn majority_matches_brute_force_on_every_assignment() {
    for pairs in all_assignments() {
        let mut expected = Vote::NoMajority;
        for l in [Entailment, Neutral, Contradiction] {
            if count(&pairs, l) >= 3 {
                expected = Vote::Winner(l);
            }
        }
        assert_eq!(majority_vote(&pairs), expected, "{pairs:?}");
    }
}

#[test]
fn heuristic_matches_brute_force_on_every_assignment() {
    for pairs in all_assignments() {
        let (e, c) = (count(&pairs, Entailment), count(&pairs, Contradiction));
        let expected = if e > c {
            Entailment
        } else if c > e {
            Contradiction
        } else {
            Neutral
        };
        assert_eq!(ec_heuristic(&pairs), expected, "{pairs:?}");
        for gold in Label::ALL {
            assert_eq!(pair_agreement_category(&pairs, gold), count(&pairs, gold));
        }
    }
}

fn item(id: usize, pairs: [Label; 4], gold: Label) -> Item {
    let mut it = Item::new(format!("i{id}"), Split::Dev, "g", vec!["p".into(); 4], "h");
    it.pair_labels = Some(pairs.to_vec());
    it.gold_label = Some(gold);
    it
}

#[test]
fn worked_examples() {
    let rows = [
        ([Neutral, Neutral, Neutral, Neutral], Entailment, Vote::Winner(Neutral), Neutral),
        ([Neutral, Contradiction, Neutral, Neutral], Contradiction, Vote::Winner(Neutral), Contradiction),
        ([Entailment, Entailment, Neutral, Neutral], Entailment, Vote::NoMajority, Entailment),
        ([Neutral, Neutral, Entailment, Neutral], Neutral, Vote::Winner(Neutral), Entailment),
        ([Contradiction; 4], Contradiction, Vote::Winner(Contradiction), Contradiction),
    ];
    for (pairs, _, majority, heuristic) in &rows {
        assert_eq!(majority_vote(pairs), *majority);
        assert_eq!(ec_heuristic(pairs), *heuristic);
    }
    let correct: Vec<bool> = rows.iter().map(|(p, gold, _, _)| ec_heuristic(p) == *gold).collect();
    assert_eq!(correct, [false, true, true, false, true]);
    let items: Vec<Item> = rows.iter().enumerate().map(|(i, (p, g, _, _))| item(i, *p, *g)).collect();
    let r = score_baselines(&items);
    assert_eq!(r.scored, 5);
    assert_eq!(r.heuristic_acc, 0.6);
    assert_eq!(r.majority_acc_strict, 0.4);
    assert_eq!(r.majority_acc_neutral_fallback, 0.4);
    assert_eq!(r.category_counts, [1, 1, 1, 1, 1]);
}

fn random_items(n: usize, seed: u64) -> Vec<Item> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let pairs = [(); 4].map(|_| Label::ALL[rng.random_range(0..3)]);
            item(i, pairs, Label::ALL[rng.random_range(0..3)])
        })
        .collect()
}

#[test]
fn strict_majority_equals_top_two_categories() {
    for seed in 0..5 {
        let items = random_items(1000, seed);
        let r = score_baselines(&items);
        assert_eq!(r.scored, 1000);
        let mut strict = 0;
        let mut heuristic = 0;
        let mut hist = [0usize; 5];
        for it in &items {
            let pairs: [Label; 4] = it.pair_labels.clone().unwrap().try_into().unwrap();
            let gold = it.gold_label.unwrap();
            if count(&pairs, gold) >= 3 {
                strict += 1;
            }
            let (e, c) = (count(&pairs, Entailment), count(&pairs, Contradiction));
            let h = if e > c { Entailment } else if c > e { Contradiction } else { Neutral };
            heuristic += usize::from(h == gold);
            hist[count(&pairs, gold)] += 1;
        }
        assert_eq!(r.category_counts, hist);
        assert_eq!(r.majority_acc_strict, strict as f64 / 1000.0);
        assert_eq!(r.heuristic_acc, heuristic as f64 / 1000.0);
        let top_two = r.category_histogram[3] + r.category_histogram[4];
        assert!((r.majority_acc_strict - top_two).abs() < 1e-12);
        assert!((r.category_histogram.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
