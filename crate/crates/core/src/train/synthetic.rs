use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::label::Label;
use crate::models::{EncodedPair, Vocab};

use super::Example;

const CUES: usize = 6;
const FILLERS: usize = 14;

/// A linearly separable four-premise dataset: the first hypothesis token is
/// one of six cue words, two per class, and everything else is random
/// filler. Labels cycle E, N, C so the classes stay balanced.
pub fn separable_examples(n: usize, seed: u64) -> (Vocab, Vec<Example>) {
    let vocab = Vocab::new((0..CUES).map(|i| format!("cue{i}")).chain((0..FILLERS).map(|i| format!("fill{i}"))));
    let cue = |i: usize| vocab.id(&format!("cue{i}"));
    let fillers: Vec<usize> = (0..FILLERS).map(|i| vocab.id(&format!("fill{i}"))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let examples = (0..n)
        .map(|i| {
            let label = Label::from_index(i % 3).expect("three classes");
            let words = |len: usize, rng: &mut ChaCha8Rng| -> Vec<usize> {
                (0..len).map(|_| *fillers.choose(rng).expect("non-empty")).collect()
            };
            let premises = (0..4).map(|_| {
                let len = rng.random_range(2..=4);
                words(len, &mut rng)
            }).collect();
            let mut hypothesis = vec![cue(2 * label.index() + rng.random_range(0..2))];
            let extra = rng.random_range(1..=2);
            hypothesis.extend(words(extra, &mut rng));
            Example {
                id: format!("syn-{i}"),
                input: EncodedPair { premises, hypothesis },
                label: Some(label),
                pair_labels: None,
                tags: BTreeSet::new(),
            }
        })
        .collect();
    (vocab, examples)
}
