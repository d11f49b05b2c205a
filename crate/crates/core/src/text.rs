//! Tokenization, rule-based lemmatization, stopword filtering and the
//! word-overlap metric.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use thiserror::Error;

const STOPWORDS: &str = include_str!("../data/stopwords.txt");
const LEMMA_EXCEPTIONS: &str = include_str!("../data/lemma_exceptions.txt");

/// Upper bound on rule passes; every rule shortens the word and exception
/// targets are fixpoints, so this is never reached in practice.
const MAX_LEMMA_PASSES: usize = 64;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("sentence has no alphanumeric content: {0:?}")]
    EmptySentence(String),
    #[error("hypothesis has no content tokens after stopword removal")]
    UndefinedOverlap,
    #[error("{source_name}:{line}: {message}")]
    Data {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Non-empty, comment-free lines of a data file with their 1-based numbers.
pub(crate) fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub(crate) fn read_data_file(path: &Path) -> Result<String, TextError> {
    std::fs::read_to_string(path).map_err(|source| TextError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StopwordList {
    words: BTreeSet<String>,
}

impl StopwordList {
    /// The shipped English function-word list.
    pub fn english() -> Self {
        Self::parse(STOPWORDS, "stopwords.txt").expect("shipped stopword list is valid")
    }

    pub fn from_words<I, S>(words: I) -> Result<Self, TextError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words: BTreeSet<String> = words.into_iter().map(|w| w.as_ref().to_lowercase()).collect();
        if words.is_empty() {
            return Err(TextError::Data {
                source_name: "stopwords".into(),
                line: 0,
                message: "stopword list is empty".into(),
            });
        }
        Ok(Self { words })
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Self, TextError> {
        let mut words = Vec::new();
        for (line, entry) in data_lines(text) {
            if entry.split_whitespace().count() != 1 {
                return Err(TextError::Data {
                    source_name: source_name.into(),
                    line,
                    message: format!("expected a single word, got {entry:?}"),
                });
            }
            words.push(entry);
        }
        Self::from_words(words).map_err(|_| TextError::Data {
            source_name: source_name.into(),
            line: 0,
            message: "stopword list is empty".into(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        Self::parse(&read_data_file(path)?, &path.display().to_string())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

/// Suffix-stripping lemmatizer backed by an exception table.
///
/// Rules are applied repeatedly until the word stops changing, so lemmas are
/// fixpoints: `lemmatize(lemmatize(w)) == lemmatize(w)`.
#[derive(Clone, Debug)]
pub struct LemmaRules {
    exceptions: HashMap<String, String>,
}

impl LemmaRules {
    /// Rules with the shipped exception table.
    pub fn english() -> Self {
        Self::parse(LEMMA_EXCEPTIONS, "lemma_exceptions.txt").expect("shipped exception table is valid")
    }

    /// Suffix rules only, no exceptions.
    pub fn suffix_only() -> Self {
        Self {
            exceptions: HashMap::new(),
        }
    }

    /// Parses `token lemma` lines. Every lemma must be a fixpoint of the
    /// resulting rule set.
    pub fn parse(text: &str, source_name: &str) -> Result<Self, TextError> {
        let mut exceptions = HashMap::new();
        let mut lines = Vec::new();
        for (line, entry) in data_lines(text) {
            let fields: Vec<&str> = entry.split_whitespace().collect();
            let err = |message: String| TextError::Data {
                source_name: source_name.into(),
                line,
                message,
            };
            if fields.len() != 2 {
                return Err(err(format!("expected `token lemma`, got {entry:?}")));
            }
            if fields.iter().any(|f| !f.chars().all(char::is_alphanumeric)) {
                return Err(err(format!("entries must be alphanumeric, got {entry:?}")));
            }
            let token = fields[0].to_lowercase();
            if exceptions.insert(token.clone(), fields[1].to_lowercase()).is_some() {
                return Err(err(format!("duplicate entry for {token:?}")));
            }
            lines.push((line, token));
        }
        let rules = Self { exceptions };
        for (line, token) in lines {
            let lemma = &rules.exceptions[&token];
            let again = rules.lemmatize(lemma);
            if &again != lemma {
                return Err(TextError::Data {
                    source_name: source_name.into(),
                    line,
                    message: format!("lemma {lemma:?} of {token:?} is not stable (it lemmatizes to {again:?})"),
                });
            }
        }
        Ok(rules)
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        Self::parse(&read_data_file(path)?, &path.display().to_string())
    }

    pub fn num_exceptions(&self) -> usize {
        self.exceptions.len()
    }

    pub fn lemmatize(&self, token: &str) -> String {
        let mut current = token.to_string();
        for _ in 0..MAX_LEMMA_PASSES {
            let next = self.step(&current);
            if next == current {
                break;
            }
            current = next;
        }
        current
    }

    fn step(&self, w: &str) -> String {
        if let Some(lemma) = self.exceptions.get(w) {
            return lemma.clone();
        }
        if w.len() <= 3 || !w.bytes().all(|b| b.is_ascii_lowercase()) {
            return w.to_string();
        }
        if w.len() > 4 {
            if let Some(stem) = w.strip_suffix("ing") {
                return verb_stem(stem).unwrap_or_else(|| w.to_string());
            }
            if w.ends_with("eed") {
                return w.to_string();
            }
            if let Some(stem) = w.strip_suffix("ied") {
                return format!("{stem}y");
            }
            if let Some(stem) = w.strip_suffix("ed") {
                return verb_stem(stem).unwrap_or_else(|| w.to_string());
            }
        }
        plural_stem(w)
    }
}

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn is_consonant(c: u8) -> bool {
    c.is_ascii_lowercase() && !is_vowel(c)
}

fn vowel_groups(s: &[u8]) -> usize {
    let mut groups = 0;
    let mut in_group = false;
    for &c in s {
        let v = is_vowel(c) || (c == b'y' && in_group);
        if v && !in_group {
            groups += 1;
        }
        in_group = v;
    }
    groups
}

/// Restores the base form of a verb stem left after removing -ing or -ed.
/// Returns `None` when the stem has no vowel (e.g. "sing" -> "s").
fn verb_stem(stem: &str) -> Option<String> {
    let b = stem.as_bytes();
    if !b.iter().any(|&c| is_vowel(c) || c == b'y') || b.len() < 2 {
        return None;
    }
    let n = b.len();
    let last = b[n - 1];
    let prev = b[n - 2];
    if last == prev && is_consonant(last) && !matches!(last, b'f' | b'l' | b's' | b'z') {
        return Some(stem[..n - 1].to_string());
    }
    let needs_e = matches!(last, b'c' | b'v')
        || stem.ends_with("rg")
        || stem.ends_with("dg")
        || (last == b'l' && is_consonant(prev) && !matches!(prev, b'l' | b'r' | b'w'))
        || (last == b's' && prev != b's')
        || (last == b'z' && prev != b'z')
        || (n >= 3
            && is_consonant(b[n - 3])
            && is_vowel(prev)
            && is_consonant(last)
            && !matches!(last, b'w' | b'x' | b'y')
            && vowel_groups(b) == 1);
    Some(if needs_e { format!("{stem}e") } else { stem.to_string() })
}

fn plural_stem(w: &str) -> String {
    if !w.ends_with('s') || w.ends_with("ss") || w.ends_with("us") || w.ends_with("is") {
        return w.to_string();
    }
    if w.len() > 4 {
        if let Some(stem) = w.strip_suffix("ies") {
            return format!("{stem}y");
        }
    }
    for suffix in ["sses", "ches", "shes", "xes", "zzes"] {
        if w.ends_with(suffix) {
            return w[..w.len() - 2].to_string();
        }
    }
    w[..w.len() - 1].to_string()
}

/// Lowercases and splits on every non-alphanumeric character, dropping
/// punctuation.
pub fn tokenize(raw: &str) -> Vec<String> {
    raw.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// A normalized sentence with token, lemma and content views.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub raw: String,
    pub tokens: Vec<String>,
    pub lemmas: Vec<String>,
    /// Tokens that are not stopwords and whose lemma is not a stopword.
    pub content_tokens: BTreeSet<String>,
    /// Lemmas at the same positions as `content_tokens`.
    pub content_lemmas: BTreeSet<String>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn content(&self, mode: OverlapMode) -> &BTreeSet<String> {
        match mode {
            OverlapMode::Full => &self.content_tokens,
            OverlapMode::Lemma => &self.content_lemmas,
        }
    }
}

pub fn normalize(raw: &str, stopwords: &StopwordList, lexicon: &LemmaRules) -> Result<Sentence, TextError> {
    let tokens = tokenize(raw);
    if tokens.is_empty() {
        return Err(TextError::EmptySentence(raw.to_string()));
    }
    let lemmas: Vec<String> = tokens.iter().map(|t| lexicon.lemmatize(t)).collect();
    let mut content_tokens = BTreeSet::new();
    let mut content_lemmas = BTreeSet::new();
    for (t, l) in tokens.iter().zip(&lemmas) {
        if !stopwords.contains(t) && !stopwords.contains(l) {
            content_tokens.insert(t.clone());
            content_lemmas.insert(l.clone());
        }
    }
    Ok(Sentence {
        raw: raw.to_string(),
        tokens,
        lemmas,
        content_tokens,
        content_lemmas,
    })
}

/// Stopword list and lemma rules bundled for repeated normalization.
#[derive(Clone, Debug)]
pub struct TextPipeline {
    pub stopwords: StopwordList,
    pub lemmas: LemmaRules,
}

impl TextPipeline {
    pub fn english() -> Self {
        Self {
            stopwords: StopwordList::english(),
            lemmas: LemmaRules::english(),
        }
    }

    pub fn normalize(&self, raw: &str) -> Result<Sentence, TextError> {
        normalize(raw, &self.stopwords, &self.lemmas)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapMode {
    Full,
    Lemma,
}

/// Fraction of distinct hypothesis content types found in at least one
/// premise.
pub fn word_overlap(hypothesis: &Sentence, premises: &[Sentence], mode: OverlapMode) -> Result<f64, TextError> {
    let h = hypothesis.content(mode);
    if h.is_empty() {
        return Err(TextError::UndefinedOverlap);
    }
    let hits = h
        .iter()
        .filter(|w| premises.iter().any(|p| p.content(mode).contains(*w)))
        .count();
    Ok(hits as f64 / h.len() as f64)
}
