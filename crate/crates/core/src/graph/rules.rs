use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::path::Path;

use crate::text::{data_lines, read_data_file, LemmaRules, Sentence, StopwordList};

use super::GraphError;

const DETERMINERS: &str = include_str!("../../data/determiners.txt");
const PREPOSITIONS: &str = include_str!("../../data/prepositions.txt");
const ADJECTIVES: &str = include_str!("../../data/adjectives.txt");
const HYPERNYMS: &str = include_str!("../../data/hypernyms.txt");

/// Closures larger than this are not expanded; the caption keeps only its own
/// node and is reported.
pub const DEFAULT_MAX_CLOSURE: usize = 20_000;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word {
    pub surface: String,
    pub lemma: String,
}

/// A token sequence. Its identity is the lemma sequence; surfaces are kept
/// for display.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Phrase {
    pub words: Vec<Word>,
}

impl Phrase {
    pub fn from_sentence(s: &Sentence) -> Self {
        Self {
            words: s
                .tokens
                .iter()
                .zip(&s.lemmas)
                .map(|(t, l)| Word {
                    surface: t.clone(),
                    lemma: l.clone(),
                })
                .collect(),
        }
    }

    pub fn key(&self) -> String {
        join(self.words.iter().map(|w| w.lemma.as_str()))
    }

    pub fn surface(&self) -> String {
        join(self.words.iter().map(|w| w.surface.as_str()))
    }

    pub fn lemmas(&self) -> Vec<String> {
        self.words.iter().map(|w| w.lemma.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    fn without(&self, start: usize, end: usize) -> Phrase {
        let mut words = self.words[..start].to_vec();
        words.extend_from_slice(&self.words[end..]);
        Phrase { words }
    }
}

fn join<'a>(parts: impl Iterator<Item = &'a str>) -> String {
    parts.collect::<Vec<_>>().join(" ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleKind {
    DropDeterminer,
    DropAdjective,
    DropPrepositionalPhrase,
    HypernymSubstitute,
    ExtractNounPhrase,
}

impl RuleKind {
    pub const ALL: [RuleKind; 5] = [
        RuleKind::DropDeterminer,
        RuleKind::DropAdjective,
        RuleKind::DropPrepositionalPhrase,
        RuleKind::HypernymSubstitute,
        RuleKind::ExtractNounPhrase,
    ];
}

/// The reduction rules and their closed-class lexicons.
///
/// Lemmatization is implicit: phrases are identified by their lemma sequence.
/// Every rule looks only at lemmas, so the generalizations of a phrase do not
/// depend on which surface form it was reached through.
#[derive(Clone, Debug)]
pub struct ReductionRules {
    determiners: HashSet<String>,
    /// Longest first so multiword entries win.
    prepositions: Vec<Vec<String>>,
    single_prepositions: HashSet<String>,
    adjectives: HashSet<String>,
    hypernyms: HashMap<String, String>,
    nouns: HashSet<String>,
    stopwords: StopwordList,
    enabled: BTreeSet<RuleKind>,
    pub max_closure: usize,
}

pub struct LexiconSources<'a> {
    pub determiners: &'a str,
    pub prepositions: &'a str,
    pub adjectives: &'a str,
    pub hypernyms: &'a str,
}

impl ReductionRules {
    /// The shipped lexicons with the shipped stopwords and lemma rules.
    pub fn english() -> Self {
        Self::from_sources(
            LexiconSources {
                determiners: DETERMINERS,
                prepositions: PREPOSITIONS,
                adjectives: ADJECTIVES,
                hypernyms: HYPERNYMS,
            },
            StopwordList::english(),
            &LemmaRules::english(),
        )
        .expect("shipped lexicons are valid")
    }

    /// Loads `determiners.txt`, `prepositions.txt`, `adjectives.txt` and
    /// `hypernyms.txt` from a directory.
    pub fn load_dir(dir: &Path, stopwords: StopwordList, lemmas: &LemmaRules) -> Result<Self, GraphError> {
        let read = |name: &str| read_data_file(&dir.join(name)).map_err(GraphError::from);
        Self::from_sources(
            LexiconSources {
                determiners: &read("determiners.txt")?,
                prepositions: &read("prepositions.txt")?,
                adjectives: &read("adjectives.txt")?,
                hypernyms: &read("hypernyms.txt")?,
            },
            stopwords,
            lemmas,
        )
    }

    pub fn from_sources(src: LexiconSources<'_>, stopwords: StopwordList, lemmas: &LemmaRules) -> Result<Self, GraphError> {
        let lemma_seq = |entry: &str| -> Vec<String> { entry.split_whitespace().map(|w| lemmas.lemmatize(&w.to_lowercase())).collect() };
        let single = |name: &str, text: &str| -> Result<HashSet<String>, GraphError> {
            let mut set = HashSet::new();
            for (line, entry) in data_lines(text) {
                let seq = lemma_seq(entry);
                if seq.len() != 1 {
                    return Err(GraphError::Lexicon {
                        source_name: name.into(),
                        line,
                        message: format!("expected a single word, got {entry:?}"),
                    });
                }
                set.extend(seq);
            }
            Ok(set)
        };
        let determiners = single("determiners.txt", src.determiners)?;
        let adjectives = single("adjectives.txt", src.adjectives)?;

        let mut prepositions: Vec<Vec<String>> = data_lines(src.prepositions).map(|(_, e)| lemma_seq(e)).collect();
        prepositions.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        prepositions.dedup();
        let single_prepositions = prepositions.iter().filter(|p| p.len() == 1).map(|p| p[0].clone()).collect();

        let mut hypernyms = HashMap::new();
        for (line, entry) in data_lines(src.hypernyms) {
            let err = |message: String| GraphError::Lexicon {
                source_name: "hypernyms.txt".into(),
                line,
                message,
            };
            let fields: Vec<&str> = entry.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(err(format!("expected `noun hypernym`, got {entry:?}")));
            }
            let (child, parent) = (lemmas.lemmatize(fields[0]), lemmas.lemmatize(fields[1]));
            if child == parent {
                return Err(err(format!("{child:?} is its own hypernym")));
            }
            if hypernyms.insert(child.clone(), parent).is_some() {
                return Err(err(format!("{child:?} has more than one hypernym")));
            }
        }
        for start in hypernyms.keys() {
            let mut seen = HashSet::new();
            let mut cur = start;
            while let Some(next) = hypernyms.get(cur) {
                if !seen.insert(cur) {
                    return Err(GraphError::HypernymCycle(start.clone()));
                }
                cur = next;
            }
        }
        let nouns = hypernyms.iter().flat_map(|(c, p)| [c.clone(), p.clone()]).collect();

        Ok(Self {
            determiners,
            prepositions,
            single_prepositions,
            adjectives,
            hypernyms,
            nouns,
            stopwords,
            enabled: RuleKind::ALL.into_iter().collect(),
            max_closure: DEFAULT_MAX_CLOSURE,
        })
    }

    /// Restricts the rule set to `rules`.
    pub fn with_rules(mut self, rules: &[RuleKind]) -> Self {
        self.enabled = rules.iter().copied().collect();
        self
    }

    pub fn enabled(&self, rule: RuleKind) -> bool {
        self.enabled.contains(&rule)
    }

    pub fn hypernym(&self, lemma: &str) -> Option<&str> {
        self.hypernyms.get(lemma).map(String::as_str)
    }

    pub fn hypernym_pairs(&self) -> BTreeMap<&str, &str> {
        self.hypernyms.iter().map(|(c, p)| (c.as_str(), p.as_str())).collect()
    }

    pub fn is_noun(&self, lemma: &str) -> bool {
        self.nouns.contains(lemma)
    }

    fn is_det(&self, w: &str) -> bool {
        self.determiners.contains(w)
    }

    fn is_adj(&self, w: &str) -> bool {
        self.adjectives.contains(w)
    }

    fn is_open(&self, w: &str) -> bool {
        !self.is_det(w) && !self.single_prepositions.contains(w) && !self.stopwords.contains(w)
    }

    fn preposition_at(&self, l: &[&str], i: usize) -> Option<usize> {
        self.prepositions
            .iter()
            .find(|p| l.len() >= i + p.len() && p.iter().zip(&l[i..]).all(|(a, b)| a == b))
            .map(Vec::len)
    }

    /// End of a noun phrase `det* adj* head noun*` starting at `i`, where the
    /// trailing nouns are nominal lexicon nouns. With `noun_final`, the last
    /// token must also be one.
    fn noun_phrase_at(&self, l: &[&str], nominal: &[bool], i: usize, noun_final: bool) -> Option<usize> {
        let mut j = i;
        while j < l.len() && self.is_det(l[j]) {
            j += 1;
        }
        while j < l.len() && self.is_adj(l[j]) {
            j += 1;
        }
        if j >= l.len() || !self.is_open(l[j]) {
            return None;
        }
        j += 1;
        while j < l.len() && nominal[j] {
            j += 1;
        }
        (!noun_final || nominal[j - 1]).then_some(j)
    }

    /// All one-step generalizations of `phrase`, in rule order then position
    /// order, each tagged with the rule that produced it.
    pub fn generalizations(&self, phrase: &Phrase) -> Vec<(RuleKind, Phrase)> {
        let l: Vec<&str> = phrase.words.iter().map(|w| w.lemma.as_str()).collect();
        let n = l.len();
        let nominal: Vec<bool> = phrase.words.iter().map(|w| self.is_noun(&w.lemma) && !verbal_form(w)).collect();
        let mut out = Vec::new();

        if self.enabled(RuleKind::DropDeterminer) && l.iter().any(|w| self.is_det(w)) {
            let words: Vec<Word> = phrase.words.iter().filter(|w| !self.is_det(&w.lemma)).cloned().collect();
            if !words.is_empty() {
                out.push((RuleKind::DropDeterminer, Phrase { words }));
            }
        }

        if self.enabled(RuleKind::DropAdjective) {
            for i in 0..n {
                if !self.is_adj(l[i]) {
                    continue;
                }
                let mut j = i + 1;
                while j < n && self.is_adj(l[j]) {
                    j += 1;
                }
                if j < n && self.is_open(l[j]) {
                    out.push((RuleKind::DropAdjective, phrase.without(i, i + 1)));
                }
            }
        }

        if self.enabled(RuleKind::DropPrepositionalPhrase) {
            let mut inside_until = 0;
            for i in 1..n {
                if i < inside_until {
                    continue;
                }
                if let Some(plen) = self.preposition_at(&l, i) {
                    inside_until = i + plen;
                    if let Some(end) = self.noun_phrase_at(&l, &nominal, i + plen, false) {
                        out.push((RuleKind::DropPrepositionalPhrase, phrase.without(i, end)));
                    }
                }
            }
        }

        if self.enabled(RuleKind::HypernymSubstitute) {
            for i in (0..n).filter(|&i| nominal[i]) {
                if let Some(parent) = self.hypernyms.get(l[i]) {
                    let mut words = phrase.words.clone();
                    words[i] = Word {
                        surface: parent.clone(),
                        lemma: parent.clone(),
                    };
                    out.push((RuleKind::HypernymSubstitute, Phrase { words }));
                }
            }
        }

        if self.enabled(RuleKind::ExtractNounPhrase) {
            for i in 0..n {
                if i > 0 && (self.is_det(l[i - 1]) || self.is_adj(l[i - 1])) {
                    continue;
                }
                if let Some(end) = self.noun_phrase_at(&l, &nominal, i, true) {
                    if end - i < n {
                        out.push((
                            RuleKind::ExtractNounPhrase,
                            Phrase {
                                words: phrase.words[i..end].to_vec(),
                            },
                        ));
                    }
                }
            }
        }
        out
    }
}

/// An `-ing` or `-ed` surface whose lemma differs, read as a verb even when
/// the lemma is a lexicon noun ("fishing", "parked").
fn verbal_form(w: &Word) -> bool {
    w.surface != w.lemma && (w.surface.ends_with("ing") || w.surface.ends_with("ed"))
}

/// The generalization closure of one caption.
#[derive(Clone, Debug)]
pub struct Closure {
    pub root: String,
    /// Every phrase in the closure, keyed by lemma sequence. The surface is
    /// the first one reached in breadth-first order.
    pub phrases: BTreeMap<String, Phrase>,
    /// Distinct one-step generalizations of each phrase.
    pub successors: BTreeMap<String, Vec<String>>,
    /// Phrases reachable without extracting a noun phrase.
    pub sentence_keys: BTreeSet<String>,
    /// Set when the closure exceeded the size cap and was cut back to the root.
    pub truncated: bool,
}

impl Closure {
    pub fn contains(&self, key: &str) -> bool {
        self.phrases.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }
}

/// Closure of a caption under single-rule applications, including the
/// lemmatized caption itself.
pub fn apply_reductions(caption: &Sentence, rules: &ReductionRules) -> Closure {
    let root_phrase = Phrase::from_sentence(caption);
    let root = root_phrase.key();
    let mut phrases = BTreeMap::from([(root.clone(), root_phrase)]);
    let mut successors: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut non_extract: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut queue = VecDeque::from([root.clone()]);
    while let Some(key) = queue.pop_front() {
        if phrases.len() > rules.max_closure {
            let phrase = phrases.remove(&root).expect("root present");
            return Closure {
                sentence_keys: BTreeSet::from([root.clone()]),
                phrases: BTreeMap::from([(root.clone(), phrase)]),
                successors: BTreeMap::from([(root.clone(), Vec::new())]),
                root,
                truncated: true,
            };
        }
        let mut succ = Vec::new();
        let mut succ_plain = Vec::new();
        for (rule, g) in rules.generalizations(&phrases[&key]) {
            let gk = g.key();
            if !succ.contains(&gk) {
                succ.push(gk.clone());
            }
            if rule != RuleKind::ExtractNounPhrase && !succ_plain.contains(&gk) {
                succ_plain.push(gk.clone());
            }
            if !phrases.contains_key(&gk) {
                phrases.insert(gk.clone(), g);
                queue.push_back(gk);
            }
        }
        successors.insert(key.clone(), succ);
        non_extract.insert(key, succ_plain);
    }

    let mut sentence_keys = BTreeSet::from([root.clone()]);
    let mut stack = vec![root.clone()];
    while let Some(k) = stack.pop() {
        for s in &non_extract[&k] {
            if sentence_keys.insert(s.clone()) {
                stack.push(s.clone());
            }
        }
    }
    Closure {
        root,
        phrases,
        successors,
        sentence_keys,
        truncated: false,
    }
}
