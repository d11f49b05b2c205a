use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Row of the unknown-word embedding.
pub const UNK: usize = 0;
/// Row of the separator placed between concatenated premises.
pub const SEP: usize = 1;
pub const UNK_TOKEN: &str = "<unk>";
pub const SEP_TOKEN: &str = "<sep>";

/// Token to row mapping. Rows 0 and 1 are always `<unk>` and `<sep>`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        Vocab::new(tokens.into_iter().filter(|t| t != UNK_TOKEN && t != SEP_TOKEN))
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Specials followed by `tokens` in order, duplicates dropped.
    pub fn new<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocab {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for t in [UNK_TOKEN.to_string(), SEP_TOKEN.to_string()]
            .into_iter()
            .chain(tokens.into_iter().map(Into::into))
        {
            if !v.index.contains_key(&t) {
                v.index.insert(t.clone(), v.tokens.len());
                v.tokens.push(t);
            }
        }
        v
    }

    /// Tokens seen at least `min_count` times, most frequent first, ties in
    /// byte order.
    pub fn from_counts<'a, I>(tokens: I, min_count: usize) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for t in tokens {
            *counts.entry(t).or_default() += 1;
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        Vocab::new(ranked.into_iter().map(|(t, _)| t))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, row: usize) -> Option<&str> {
        self.tokens.get(row).map(String::as_str)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Row of `token`, or [`UNK`].
    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }
}

/// Joins premise sequences in order with [`SEP`] between consecutive ones.
pub fn concat_premises(premises: &[Vec<usize>]) -> Vec<usize> {
    let mut out = Vec::with_capacity(premises.iter().map(Vec::len).sum::<usize>() + premises.len());
    for (i, p) in premises.iter().enumerate() {
        if i > 0 {
            out.push(SEP);
        }
        out.extend_from_slice(p);
    }
    out
}

/// Pretrained vectors read from a text file.
#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
}

/// Reads lines of `token v1 ... vd`. When `keep` is given, other tokens are
/// skipped without parsing their values. The first occurrence of a token
/// wins. A leading `count dim` header line, as written by some tools, is
/// ignored.
pub fn read_embeddings<R: BufRead>(r: R, source_name: &str, keep: Option<&HashSet<String>>) -> Result<Embeddings, ModelError> {
    let mut dim = None;
    let mut vectors = HashMap::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        if i == 0 && rest.len() == 1 && token.parse::<usize>().is_ok() && rest[0].parse::<usize>().is_ok() {
            continue;
        }
        let err = |message: String| ModelError::Embedding {
            source_name: source_name.into(),
            line: i + 1,
            message,
        };
        match dim {
            None if rest.is_empty() => return Err(err("no values".into())),
            None => dim = Some(rest.len()),
            Some(d) if d != rest.len() => return Err(err(format!("expected {d} values, got {}", rest.len()))),
            Some(_) => {}
        }
        if keep.is_some_and(|k| !k.contains(token)) || vectors.contains_key(token) {
            continue;
        }
        let v = rest
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| err(format!("bad value {s:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        vectors.insert(token.to_string(), v);
    }
    let dim = dim.ok_or_else(|| ModelError::Embedding {
        source_name: source_name.into(),
        line: 0,
        message: "no vectors".into(),
    })?;
    Ok(Embeddings { dim, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specials_come_first() {
        let v = Vocab::new(["dog", "cat", "dog"]);
        assert_eq!(v.tokens(), &["<unk>", "<sep>", "dog", "cat"]);
        assert_eq!(v.id("cat"), 3);
        assert_eq!(v.id("zebra"), UNK);
    }

    #[test]
    fn counts_rank_by_frequency() {
        let v = Vocab::from_counts("b a b c c b a d".split(' '), 2);
        assert_eq!(&v.tokens()[2..], &["b", "a", "c"]);
    }

    #[test]
    fn serde_round_trip() {
        let v = Vocab::new(["x", "y"]);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"["<unk>","<sep>","x","y"]"#);
        assert_eq!(serde_json::from_str::<Vocab>(&json).unwrap(), v);
    }

    #[test]
    fn concatenation_inserts_separators() {
        let ps: Vec<Vec<usize>> = [5, 6, 7, 8].iter().map(|&n| vec![2; n]).collect();
        assert_eq!(concat_premises(&ps).len(), 29);
        assert_eq!(concat_premises(&[vec![4, 5]]), vec![4, 5]);
        assert_eq!(concat_premises(&[vec![4], vec![5]]), vec![4, SEP, 5]);
        assert_ne!(concat_premises(&[vec![4], vec![5]]), concat_premises(&[vec![5], vec![4]]));
    }

    #[test]
    fn reads_embedding_files() {
        let text = "3 2\ndog 0.5 -1\ncat 1 2\ndog 9 9\nbird 1e-1 0\n";
        let keep: HashSet<String> = ["dog", "bird"].iter().map(|s| s.to_string()).collect();
        let e = read_embeddings(text.as_bytes(), "e", Some(&keep)).unwrap();
        assert_eq!(e.dim, 2);
        assert_eq!(e.vectors.len(), 2);
        assert_eq!(e.vectors["dog"], vec![0.5, -1.0]);
        assert_eq!(e.vectors["bird"], vec![0.1, 0.0]);

        let err = read_embeddings("a 1 2\nb 1\n".as_bytes(), "e", None).unwrap_err();
        assert!(err.to_string().contains("e:2"), "{err}");
        assert!(read_embeddings("a 1 x\n".as_bytes(), "e", None).is_err());
        assert!(read_embeddings("".as_bytes(), "e", None).is_err());
    }
}
