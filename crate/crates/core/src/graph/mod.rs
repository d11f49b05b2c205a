//! Subsumption graph over generalized caption phrases.
//!
//! Captions are reduced to shorter, more generic phrases by a small rule set
//! ([`ReductionRules`]). Every phrase reachable from any caption becomes a
//! node; an edge runs from a parent (more generic) to a child when the parent
//! is a generalization of the child with no other node strictly between them.

mod io;
mod rules;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::text::{Sentence, TextError};

pub use io::{read_graph, write_graph, GRAPH_FORMAT_VERSION};
pub use rules::{apply_reductions, Closure, LexiconSources, Phrase, ReductionRules, RuleKind, Word, DEFAULT_MAX_CLOSURE};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("caption {0:?} is not in the graph")]
    UnknownCaption(String),
    #[error("{source_name}:{line}: {message}")]
    Lexicon {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("hypernym lexicon has a cycle through {0:?}")]
    HypernymCycle(String),
    #[error("graph file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A caption's position in the corpus: its scene group and index within it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct CaptionRef {
    pub group: String,
    pub index: u32,
}

impl CaptionRef {
    pub fn new(group: impl Into<String>, index: u32) -> Self {
        Self {
            group: group.into(),
            index,
        }
    }
}

impl fmt::Display for CaptionRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.group, self.index)
    }
}

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    /// Reachable from some caption without extracting a noun phrase.
    Sentence,
    /// Only reachable through noun-phrase extraction.
    NounPhrase,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhraseNode {
    pub id: NodeId,
    pub lemmas: Vec<String>,
    pub surface: String,
    pub kind: NodeKind,
    /// Scene groups with a caption that reduces to this phrase.
    pub groups: BTreeSet<String>,
    /// Captions that reduce to this phrase.
    pub captions: BTreeSet<CaptionRef>,
}

impl PhraseNode {
    pub fn key(&self) -> String {
        self.lemmas.join(" ")
    }
}

/// Captions whose closure hit the size cap and were kept as a single node.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BuildDiagnostics {
    pub truncated: Vec<CaptionRef>,
}

#[derive(Clone, Debug)]
pub struct PhraseGraph {
    nodes: Vec<PhraseNode>,
    parents: Vec<Vec<NodeId>>,
    children: Vec<Vec<NodeId>>,
    by_key: HashMap<String, NodeId>,
    captions: BTreeMap<CaptionRef, NodeId>,
    pub diagnostics: BuildDiagnostics,
}

struct NodeBuilder {
    phrase: Phrase,
    sentence: bool,
    groups: BTreeSet<String>,
    captions: BTreeSet<CaptionRef>,
}

/// Builds the graph from captions. Closures are computed in parallel and
/// merged in input order, so the result is independent of thread count.
pub fn build_graph(captions: &[(CaptionRef, Sentence)], rules: &ReductionRules) -> PhraseGraph {
    let closures: Vec<Closure> = captions.par_iter().map(|(_, s)| apply_reductions(s, rules)).collect();

    let mut builders: BTreeMap<String, NodeBuilder> = BTreeMap::new();
    let mut successors: HashMap<String, Vec<String>> = HashMap::new();
    let mut caption_keys = BTreeMap::new();
    let mut diagnostics = BuildDiagnostics::default();
    for ((cref, _), closure) in captions.iter().zip(closures) {
        if closure.truncated {
            diagnostics.truncated.push(cref.clone());
        }
        caption_keys.insert(cref.clone(), closure.root.clone());
        for (key, phrase) in closure.phrases {
            let sentence = closure.sentence_keys.contains(&key);
            let b = builders.entry(key).or_insert_with(|| NodeBuilder {
                phrase,
                sentence: false,
                groups: BTreeSet::new(),
                captions: BTreeSet::new(),
            });
            b.sentence |= sentence;
            b.groups.insert(cref.group.clone());
            b.captions.insert(cref.clone());
        }
        for (key, succ) in closure.successors {
            successors.entry(key).or_insert(succ);
        }
    }

    let by_key: HashMap<String, NodeId> = builders.keys().enumerate().map(|(i, k)| (k.clone(), i)).collect();
    let succ_ids: Vec<Vec<NodeId>> = builders
        .keys()
        .map(|k| {
            successors
                .get(k)
                .map(|s| s.iter().map(|g| by_key[g]).collect())
                .unwrap_or_default()
        })
        .collect();
    let nodes: Vec<PhraseNode> = builders
        .into_values()
        .enumerate()
        .map(|(id, b)| PhraseNode {
            id,
            lemmas: b.phrase.lemmas(),
            surface: b.phrase.surface(),
            kind: if b.sentence { NodeKind::Sentence } else { NodeKind::NounPhrase },
            groups: b.groups,
            captions: b.captions,
        })
        .collect();

    let parents: Vec<Vec<NodeId>> = (0..nodes.len())
        .into_par_iter()
        .map(|n| transitive_parents(&succ_ids, n))
        .collect();
    let captions = caption_keys.into_iter().map(|(c, k)| (c, by_key[&k])).collect();
    PhraseGraph::assemble(nodes, parents, captions, diagnostics)
}

/// One-step generalizations of `n` that are not reachable from another
/// one-step generalization.
fn transitive_parents(succ: &[Vec<NodeId>], n: NodeId) -> Vec<NodeId> {
    let mut below = HashSet::new();
    let mut stack: Vec<NodeId> = succ[n].iter().flat_map(|&s| succ[s].iter().copied()).collect();
    while let Some(x) = stack.pop() {
        if below.insert(x) {
            stack.extend(succ[x].iter().copied());
        }
    }
    let mut parents: Vec<NodeId> = succ[n].iter().copied().filter(|s| !below.contains(s)).collect();
    parents.sort_unstable();
    parents.dedup();
    parents
}

impl PhraseGraph {
    pub(crate) fn assemble(
        nodes: Vec<PhraseNode>,
        mut parents: Vec<Vec<NodeId>>,
        captions: BTreeMap<CaptionRef, NodeId>,
        diagnostics: BuildDiagnostics,
    ) -> Self {
        let mut children = vec![Vec::new(); nodes.len()];
        for (c, ps) in parents.iter_mut().enumerate() {
            ps.sort_unstable();
            for &p in ps.iter() {
                children[p].push(c);
            }
        }
        let by_key = nodes.iter().map(|n| (n.key(), n.id)).collect();
        Self {
            nodes,
            parents,
            children,
            by_key,
            captions,
            diagnostics,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn num_edges(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    pub fn nodes(&self) -> &[PhraseNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &PhraseNode {
        &self.nodes[id]
    }

    pub fn parents(&self, id: NodeId) -> &[NodeId] {
        &self.parents[id]
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.children[id]
    }

    /// Edges as (parent, child) pairs in child order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| ps.iter().map(move |&p| (p, c)))
    }

    pub fn find(&self, lemma_key: &str) -> Option<NodeId> {
        self.by_key.get(lemma_key).copied()
    }

    /// Node of a normalized sentence (its full lemma sequence).
    pub fn find_sentence(&self, s: &Sentence) -> Option<NodeId> {
        self.find(&s.lemmas.join(" "))
    }

    pub fn caption_node(&self, caption: &CaptionRef) -> Option<NodeId> {
        self.captions.get(caption).copied()
    }

    pub fn captions(&self) -> &BTreeMap<CaptionRef, NodeId> {
        &self.captions
    }

    /// All strictly more generic nodes, by depth-first search over parent
    /// edges.
    pub fn ancestors(&self, id: NodeId) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        let mut stack = self.parents[id].clone();
        while let Some(p) = stack.pop() {
            if out.insert(p) {
                stack.extend_from_slice(&self.parents[p]);
            }
        }
        out
    }

    /// Whether `ancestor` is reachable from `node` by parent edges (or is it).
    pub fn subsumes(&self, ancestor: NodeId, node: NodeId) -> bool {
        ancestor == node || self.ancestors(node).contains(&ancestor)
    }

    /// Ancestors of `source` that are neither premise nodes nor ancestors of
    /// any premise.
    pub fn simplify(&self, source: NodeId, premises: &[NodeId]) -> BTreeSet<NodeId> {
        let mut excluded = BTreeSet::new();
        for &p in premises {
            excluded.insert(p);
            excluded.extend(self.ancestors(p));
        }
        self.ancestors(source).difference(&excluded).copied().collect()
    }
}

/// Candidate hypotheses for a source caption: its generalizations that cannot
/// be obtained from any premise by the same rules.
pub fn simplify_hypothesis(
    source_caption: &Sentence,
    premises: &[Sentence],
    graph: &PhraseGraph,
) -> Result<BTreeSet<NodeId>, GraphError> {
    let lookup = |s: &Sentence| graph.find_sentence(s).ok_or_else(|| GraphError::UnknownCaption(s.raw.clone()));
    let source = lookup(source_caption)?;
    let premise_ids = premises.iter().map(lookup).collect::<Result<Vec<_>, _>>()?;
    Ok(graph.simplify(source, &premise_ids))
}
