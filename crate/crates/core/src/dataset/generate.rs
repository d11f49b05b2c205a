use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::{CaptionRef, NodeId, NodeKind, PhraseGraph};
use crate::text::{word_overlap, OverlapMode, Sentence, TextPipeline};

use super::{Corpus, DatasetError, Item, ItemOrigin, Relation, SceneGroup, Split};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    /// Maximum full-mode word overlap with the premises (inclusive).
    pub overlap_max: f64,
    pub n_items: usize,
    /// Minimum captions, over the train split and the target split together,
    /// that reduce to the hypothesis.
    pub min_support: usize,
    /// Minimum captions in the target split alone.
    pub min_split_support: usize,
    /// Probability that an item uses a hypothesis from its own scene.
    pub related_fraction: f64,
    /// Other scenes tried before an unrelated item is given up.
    pub unrelated_attempts: usize,
    pub seed: u64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            overlap_max: 0.5,
            n_items: 8000,
            min_support: 2,
            min_split_support: 1,
            related_fraction: 0.5,
            unrelated_attempts: 10,
            seed: 42,
        }
    }
}

/// Why candidate hypotheses were dropped, summed over every candidate set
/// computed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CandidateRejections {
    pub not_sentence: usize,
    pub low_support: usize,
    pub overlap: usize,
    pub no_content: usize,
}

impl CandidateRejections {
    fn add(&mut self, o: &CandidateRejections) {
        self.not_sentence += o.not_sentence;
        self.low_support += o.low_support;
        self.overlap += o.overlap;
        self.no_content += o.no_content;
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GenerateDiagnostics {
    /// Scene groups in the split with at least four captions.
    pub premise_groups: usize,
    /// Groups with at least five captions and one eligible related hypothesis.
    pub groups_with_related_candidates: usize,
    pub related_items: usize,
    pub unrelated_items: usize,
    pub skipped_no_related: usize,
    pub skipped_no_unrelated: usize,
    pub rejections: CandidateRejections,
}

/// Produced fewer items than requested.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Shortfall {
    pub requested: usize,
    pub produced: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GenerateOutcome {
    pub items: Vec<Item>,
    pub shortfall: Option<Shortfall>,
    pub diagnostics: GenerateDiagnostics,
}

#[derive(Clone, Debug, PartialEq)]
struct Candidate {
    node: NodeId,
    hypothesis: Sentence,
    overlap_full: f64,
}

struct PremiseSet<'a> {
    group: &'a SceneGroup,
    nodes: Vec<NodeId>,
    sentences: Vec<Sentence>,
}

struct Generator<'a> {
    graph: &'a PhraseGraph,
    pipeline: &'a TextPipeline,
    config: &'a GenerateConfig,
    eligible: HashMap<NodeId, bool>,
}

impl Generator<'_> {
    /// Whether a node passes the frequency thresholds for `split`.
    fn node_eligible(graph: &PhraseGraph, corpus: &Corpus, split: Split, config: &GenerateConfig, id: NodeId) -> bool {
        let mut support = 0;
        let mut in_split = 0;
        for c in &graph.node(id).captions {
            match corpus.split_of(&c.group) {
                Some(s) if s == split => {
                    support += 1;
                    in_split += 1;
                }
                Some(Split::Train) => support += 1,
                _ => {}
            }
        }
        support >= config.min_support && in_split >= config.min_split_support
    }

    /// Eligible hypotheses generalizing `source` that are not premise
    /// generalizations, in node id order.
    fn candidates(&self, source: NodeId, premises: &PremiseSet<'_>) -> (Vec<Candidate>, CandidateRejections) {
        let mut rej = CandidateRejections::default();
        let mut out = Vec::new();
        for node in self.graph.simplify(source, &premises.nodes) {
            let n = self.graph.node(node);
            if n.kind != NodeKind::Sentence {
                rej.not_sentence += 1;
                continue;
            }
            if !self.eligible[&node] {
                rej.low_support += 1;
                continue;
            }
            let hypothesis = match self.pipeline.normalize(&n.surface) {
                Ok(h) => h,
                Err(_) => {
                    rej.no_content += 1;
                    continue;
                }
            };
            match word_overlap(&hypothesis, &premises.sentences, OverlapMode::Full) {
                Ok(o) if o <= self.config.overlap_max => out.push(Candidate {
                    node,
                    hypothesis,
                    overlap_full: o,
                }),
                Ok(_) => rej.overlap += 1,
                Err(_) => rej.no_content += 1,
            }
        }
        (out, rej)
    }
}

fn caption_node(graph: &PhraseGraph, c: &CaptionRef) -> Result<NodeId, DatasetError> {
    graph
        .caption_node(c)
        .ok_or_else(|| DatasetError::Graph(crate::graph::GraphError::UnknownCaption(c.to_string())))
}

/// Samples MPE items for `split`.
///
/// Each scene group with at least four captions offers its first four (by
/// index) as premises. A related item takes its hypothesis from the
/// generalizations of the group's remaining captions; an unrelated item from
/// those of a random other group's remaining captions. In both cases
/// generalizations of any premise are excluded and the thresholds in `config`
/// apply. At most one item is produced per group, and the run is fully
/// determined by `config.seed`.
pub fn generate_items(
    corpus: &Corpus,
    graph: &PhraseGraph,
    pipeline: &TextPipeline,
    split: Split,
    config: &GenerateConfig,
) -> Result<GenerateOutcome, DatasetError> {
    let groups: Vec<&SceneGroup> = corpus.groups().filter(|g| g.split == split && g.captions.len() >= 4).collect();
    let premise_sets: Vec<PremiseSet<'_>> = groups
        .iter()
        .map(|g| {
            Ok(PremiseSet {
                group: g,
                nodes: g.captions[..4].iter().map(|c| caption_node(graph, &c.cref)).collect::<Result<_, _>>()?,
                sentences: g.captions[..4].iter().map(|c| c.sentence.clone()).collect(),
            })
        })
        .collect::<Result<_, DatasetError>>()?;

    let mut eligible = HashMap::new();
    for g in &groups {
        for c in &g.captions[4..] {
            let src = caption_node(graph, &c.cref)?;
            for a in graph.ancestors(src) {
                eligible
                    .entry(a)
                    .or_insert_with(|| Generator::node_eligible(graph, corpus, split, config, a));
            }
        }
    }
    let generator = Generator {
        graph,
        pipeline,
        config,
        eligible,
    };
    let sources = |g: &SceneGroup| -> Vec<(CaptionRef, NodeId)> {
        g.captions[4..]
            .iter()
            .map(|c| (c.cref.clone(), graph.caption_node(&c.cref).expect("checked above")))
            .collect()
    };
    let candidates_for = |source_group: &SceneGroup, premises: &PremiseSet<'_>| {
        let mut all: BTreeMap<NodeId, (CaptionRef, Candidate)> = BTreeMap::new();
        let mut rej = CandidateRejections::default();
        for (cref, node) in sources(source_group) {
            let (cands, r) = generator.candidates(node, premises);
            rej.add(&r);
            for c in cands {
                all.entry(c.node).or_insert((cref.clone(), c));
            }
        }
        (all.into_values().collect::<Vec<_>>(), rej)
    };

    let related: Vec<(Vec<(CaptionRef, Candidate)>, CandidateRejections)> =
        premise_sets.par_iter().map(|p| candidates_for(p.group, p)).collect();

    let mut diagnostics = GenerateDiagnostics {
        premise_groups: premise_sets.len(),
        groups_with_related_candidates: related.iter().filter(|(c, _)| !c.is_empty()).count(),
        ..Default::default()
    };
    for (_, r) in &related {
        diagnostics.rejections.add(r);
    }

    let source_groups: Vec<usize> = (0..premise_sets.len()).filter(|&i| premise_sets[i].group.captions.len() > 4).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..premise_sets.len()).collect();
    order.shuffle(&mut rng);

    let mut items = Vec::new();
    for gi in order {
        if items.len() >= config.n_items {
            break;
        }
        let premises = &premise_sets[gi];
        let is_related = rng.random::<f64>() < config.related_fraction;
        let picked = if is_related {
            let cands = &related[gi].0;
            if cands.is_empty() {
                diagnostics.skipped_no_related += 1;
                None
            } else {
                Some(cands[rng.random_range(0..cands.len())].clone())
            }
        } else {
            let others: Vec<usize> = source_groups.iter().copied().filter(|&o| o != gi).collect();
            let mut found = None;
            if !others.is_empty() {
                for _ in 0..config.unrelated_attempts {
                    let other = others[rng.random_range(0..others.len())];
                    let (cands, rej) = candidates_for(premise_sets[other].group, premises);
                    diagnostics.rejections.add(&rej);
                    if !cands.is_empty() {
                        found = Some(cands[rng.random_range(0..cands.len())].clone());
                        break;
                    }
                }
            }
            if found.is_none() {
                diagnostics.skipped_no_unrelated += 1;
            }
            found
        };
        let Some((source_caption, cand)) = picked else {
            continue;
        };
        if is_related {
            diagnostics.related_items += 1;
        } else {
            diagnostics.unrelated_items += 1;
        }
        let group = premises.group;
        let mut item = Item::new(
            format!("{split}-{}", items.len()),
            split,
            group.id.clone(),
            group.captions[..4].iter().map(|c| c.sentence.raw.clone()).collect(),
            cand.hypothesis.raw.clone(),
        );
        item.origin = Some(ItemOrigin {
            relation: if is_related { Relation::Related } else { Relation::Unrelated },
            source_caption,
            premise_captions: group.captions[..4].iter().map(|c| c.cref.clone()).collect(),
            hypothesis_key: graph.node(cand.node).key(),
            overlap_full: cand.overlap_full,
        });
        items.push(item);
    }

    let shortfall = (items.len() < config.n_items).then_some(Shortfall {
        requested: config.n_items,
        produced: items.len(),
    });
    Ok(GenerateOutcome {
        items,
        shortfall,
        diagnostics,
    })
}
