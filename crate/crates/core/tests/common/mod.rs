#![allow(dead_code)]

use std::path::PathBuf;

use mpe_core::dataset::{generate_items, Corpus, GenerateConfig, GenerateOutcome, Split};
use mpe_core::graph::{build_graph, PhraseGraph, ReductionRules};
use mpe_core::text::TextPipeline;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn fixture_corpus(pipeline: &TextPipeline) -> Corpus {
    let mut corpus = Corpus::new();
    corpus.load(&fixture("train.tsv"), Split::Train, pipeline).unwrap();
    corpus.load(&fixture("dev.tsv"), Split::Dev, pipeline).unwrap();
    corpus
}

pub struct Pipeline {
    pub text: TextPipeline,
    pub corpus: Corpus,
    pub graph: PhraseGraph,
}

pub fn fixture_pipeline() -> Pipeline {
    let text = TextPipeline::english();
    let corpus = fixture_corpus(&text);
    let graph = build_graph(&corpus.graph_input(), &ReductionRules::english());
    Pipeline { text, corpus, graph }
}

impl Pipeline {
    pub fn generate(&self, split: Split, config: &GenerateConfig) -> GenerateOutcome {
        generate_items(&self.corpus, &self.graph, &self.text, split, config).unwrap()
    }
}
