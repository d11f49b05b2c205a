//! Entailment classifiers over the autodiff tape: a conditional LSTM, a
//! word-by-word attention model and a sum of per-premise experts.

mod check;
mod lstm;
mod vocab;

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use mpe_autodiff::{read_checkpoint, write_checkpoint, ParamId, ParamStore, Tape, Tensor, Var};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::Label;

pub use check::{synthetic_gradcheck, SyntheticCheck};
pub use lstm::{lstm_cell, run_lstm, CellVars, LstmWeights};
pub use vocab::{concat_premises, read_embeddings, Embeddings, Vocab, SEP, SEP_TOKEN, UNK, UNK_TOKEN};

pub const MODEL_FORMAT: &str = "mpe-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Autodiff(#[from] mpe_autodiff::Error),
    #[error("empty {0} sequence")]
    EmptySequence(&'static str),
    #[error("{kind} model takes 1 or 4 premises, got {count}")]
    PremiseCount { kind: ModelKind, count: usize },
    #[error("{source_name}:{line}: {message}")]
    Embedding {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("embedding dimension {got} does not match model dimension {expected}")]
    EmbeddingDim { expected: usize, got: usize },
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("token id {id} outside vocabulary of {len}")]
    TokenId { id: usize, len: usize },
    #[error("model checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Conditional LSTM over the concatenated premises.
    Lstm,
    /// Conditional LSTM with word-by-word attention over the premise.
    Attention,
    /// Sum of experts: the conditional LSTM per premise, logits summed.
    Se,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Lstm, ModelKind::Attention, ModelKind::Se];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Lstm => "lstm",
            ModelKind::Attention => "attention",
            ModelKind::Se => "se",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lstm" => Ok(ModelKind::Lstm),
            "attention" | "attn" => Ok(ModelKind::Attention),
            "se" => Ok(ModelKind::Se),
            _ => Err(ModelError::Config(format!("unknown model kind {s:?}, expected lstm, attention or se"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Word vector size `d`.
    pub embed_dim: usize,
    /// LSTM state size `k`.
    pub hidden: usize,
    /// Dropout keep probability during training.
    pub keep_prob: f64,
    /// Keep word vectors fixed; the `<unk>` and `<sep>` rows still train.
    pub freeze_embeddings: bool,
    /// Seeds parameter initialization.
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(kind: ModelKind) -> Self {
        ModelConfig {
            kind,
            embed_dim: 50,
            hidden: 100,
            keep_prob: 0.8,
            freeze_embeddings: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.embed_dim == 0 || self.hidden == 0 {
            return Err(ModelError::Config("dimensions must be positive".into()));
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return Err(ModelError::Config(format!("keep_prob must lie in (0, 1], got {}", self.keep_prob)));
        }
        Ok(())
    }
}

/// Named hyperparameter sets. All use learning rate 0.001 and batch size 32.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    LstmMpe,
    SeMpe,
    AttnMpe,
    SnliPretrain,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::LstmMpe, Preset::SeMpe, Preset::AttnMpe, Preset::SnliPretrain];
    pub const LEARNING_RATE: f64 = 0.001;
    pub const BATCH_SIZE: usize = 32;
    pub const EPOCHS: usize = 10;

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::LstmMpe => "lstm-mpe",
            Preset::SeMpe => "se-mpe",
            Preset::AttnMpe => "attn-mpe",
            Preset::SnliPretrain => "snli-pretrain",
        }
    }

    /// The preset's model; `snli-pretrain` uses the attention model.
    pub fn model_config(self) -> ModelConfig {
        let (kind, hidden, keep_prob) = match self {
            Preset::LstmMpe => (ModelKind::Lstm, 75, 0.8),
            Preset::SeMpe => (ModelKind::Se, 100, 0.8),
            Preset::AttnMpe => (ModelKind::Attention, 100, 0.6),
            Preset::SnliPretrain => (ModelKind::Attention, 100, 0.8),
        };
        ModelConfig {
            hidden,
            keep_prob,
            ..ModelConfig::new(kind)
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Preset::ALL.iter().map(|p| p.as_str()).collect();
                ModelError::Config(format!("unknown preset {s:?}, expected one of {}", names.join(", ")))
            })
    }
}

/// Token ids of one item.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedPair {
    pub premises: Vec<Vec<usize>>,
    pub hypothesis: Vec<usize>,
}

impl EncodedPair {
    pub fn new(vocab: &Vocab, premises: &[Vec<String>], hypothesis: &[String]) -> Self {
        EncodedPair {
            premises: premises.iter().map(|p| vocab.encode(p)).collect(),
            hypothesis: vocab.encode(hypothesis),
        }
    }
}

/// Whether dropout is active, and the generator that draws its masks.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
}

pub struct Output {
    /// `[3]`, in (E, N, C) order.
    pub logits: Var,
    /// Attention model only: one row of weights over premise positions per
    /// hypothesis token.
    pub attention: Option<Vec<Vec<f64>>>,
    /// SE model only: per-premise logits in input order.
    pub premise_logits: Vec<Var>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct HeadIds {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct AttentionIds {
    wy: ParamId,
    wh: ParamId,
    wr: ParamId,
    w: ParamId,
    wt: ParamId,
    wp: ParamId,
    wx: ParamId,
    out_w: ParamId,
    out_b: ParamId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Top {
    Head(HeadIds),
    Attention(AttentionIds),
}

/// Parameter layout and forward passes; the values live in a separate
/// [`ParamStore`] so the same network can run against perturbed copies.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub config: ModelConfig,
    vocab_size: usize,
    special: ParamId,
    words: Option<ParamId>,
    premise: LstmWeights,
    hypothesis: LstmWeights,
    top: Top,
}

/// Glorot-uniform `[rows, cols]` matrix.
pub(crate) fn uniform_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.random_range(-a..a)).collect();
    Tensor::matrix(rows, cols, data).expect("sized")
}

fn uniform_vector<R: Rng>(rng: &mut R, n: usize, a: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-a..a)).collect()
}

const EMBED_INIT: f64 = 0.1;

impl Network {
    /// Adds freshly initialized parameters to `store`. Rows of `pretrained`
    /// replace the random vectors of matching vocabulary tokens.
    pub fn init(
        config: ModelConfig,
        vocab: &Vocab,
        pretrained: Option<&Embeddings>,
        store: &mut ParamStore,
    ) -> Result<Network, ModelError> {
        config.validate()?;
        let (d, k) = (config.embed_dim, config.hidden);
        if let Some(e) = pretrained {
            if e.dim != d {
                return Err(ModelError::EmbeddingDim { expected: d, got: e.dim });
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let special = store.add("embed.special", Tensor::matrix(2, d, uniform_vector(&mut rng, 2 * d, EMBED_INIT))?, true)?;
        let n_words = vocab.len() - 2;
        let words = if n_words > 0 {
            let mut data = uniform_vector(&mut rng, n_words * d, EMBED_INIT);
            if let Some(e) = pretrained {
                for (row, token) in vocab.tokens()[2..].iter().enumerate() {
                    if let Some(v) = e.vectors.get(token) {
                        data[row * d..(row + 1) * d].copy_from_slice(v);
                    }
                }
            }
            Some(store.add("embed.words", Tensor::matrix(n_words, d, data)?, !config.freeze_embeddings)?)
        } else {
            None
        };
        let premise = LstmWeights::init(store, "prem", d, k, &mut rng)?;
        let hypothesis = LstmWeights::init(store, "hyp", d, k, &mut rng)?;
        let top = match config.kind {
            ModelKind::Lstm | ModelKind::Se => Top::Head(HeadIds {
                w1: store.add("head.w1", uniform_matrix(&mut rng, 2 * k, k), true)?,
                b1: store.add("head.b1", Tensor::zeros(&[k]), true)?,
                w2: store.add("head.w2", uniform_matrix(&mut rng, k, 3), true)?,
                b2: store.add("head.b2", Tensor::zeros(&[3]), true)?,
            }),
            ModelKind::Attention => {
                let mut sq = |name: &str, rng: &mut ChaCha8Rng| store.add(name, uniform_matrix(rng, k, k), true);
                let wy = sq("att.wy", &mut rng)?;
                let wh = sq("att.wh", &mut rng)?;
                let wr = sq("att.wr", &mut rng)?;
                let wt = sq("att.wt", &mut rng)?;
                let wp = sq("att.wp", &mut rng)?;
                let wx = sq("att.wx", &mut rng)?;
                let a = (3.0 / k as f64).sqrt();
                let w = store.add("att.w", Tensor::vector(uniform_vector(&mut rng, k, a)), true)?;
                let out_w = store.add("out.w", uniform_matrix(&mut rng, k, 3), true)?;
                let out_b = store.add("out.b", Tensor::zeros(&[3]), true)?;
                Top::Attention(AttentionIds {
                    wy,
                    wh,
                    wr,
                    w,
                    wt,
                    wp,
                    wx,
                    out_w,
                    out_b,
                })
            }
        };
        Ok(Network {
            config,
            vocab_size: vocab.len(),
            special,
            words,
            premise,
            hypothesis,
            top,
        })
    }

    /// Rebuilds the layout from parameter names.
    pub fn from_store(config: ModelConfig, vocab_size: usize, store: &ParamStore) -> Result<Network, ModelError> {
        config.validate()?;
        let top = match config.kind {
            ModelKind::Lstm | ModelKind::Se => Top::Head(HeadIds {
                w1: store.id("head.w1")?,
                b1: store.id("head.b1")?,
                w2: store.id("head.w2")?,
                b2: store.id("head.b2")?,
            }),
            ModelKind::Attention => Top::Attention(AttentionIds {
                wy: store.id("att.wy")?,
                wh: store.id("att.wh")?,
                wr: store.id("att.wr")?,
                w: store.id("att.w")?,
                wt: store.id("att.wt")?,
                wp: store.id("att.wp")?,
                wx: store.id("att.wx")?,
                out_w: store.id("out.w")?,
                out_b: store.id("out.b")?,
            }),
        };
        let words = if vocab_size > 2 { Some(store.id("embed.words")?) } else { None };
        let net = Network {
            vocab_size,
            special: store.id("embed.special")?,
            words,
            premise: LstmWeights::lookup(store, "prem")?,
            hypothesis: LstmWeights::lookup(store, "hyp")?,
            top,
            config,
        };
        net.check_shapes(store)?;
        Ok(net)
    }

    fn check_shapes(&self, store: &ParamStore) -> Result<(), ModelError> {
        let (d, k) = (self.config.embed_dim, self.config.hidden);
        let mut expect: Vec<(ParamId, Vec<usize>)> = vec![(self.special, vec![2, d])];
        if let Some(w) = self.words {
            expect.push((w, vec![self.vocab_size - 2, d]));
        }
        for l in [self.premise, self.hypothesis] {
            expect.extend([(l.wx, vec![d, 4 * k]), (l.wh, vec![k, 4 * k]), (l.b, vec![4 * k])]);
        }
        match self.top {
            Top::Head(h) => expect.extend([(h.w1, vec![2 * k, k]), (h.b1, vec![k]), (h.w2, vec![k, 3]), (h.b2, vec![3])]),
            Top::Attention(a) => {
                for id in [a.wy, a.wh, a.wr, a.wt, a.wp, a.wx] {
                    expect.push((id, vec![k, k]));
                }
                expect.extend([(a.w, vec![k]), (a.out_w, vec![k, 3]), (a.out_b, vec![3])]);
            }
        }
        for (id, shape) in expect {
            let p = store.get(id);
            if p.value.shape() != shape.as_slice() {
                return Err(ModelError::Checkpoint(format!(
                    "parameter {} has shape {:?}, expected {:?}",
                    p.name,
                    p.value.shape(),
                    shape
                )));
            }
        }
        Ok(())
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Word vectors for `ids` as a `[T, d]` matrix.
    fn embed(&self, store: &ParamStore, tape: &mut Tape, ids: &[usize]) -> Result<Var, ModelError> {
        if let Some(&id) = ids.iter().find(|&&id| id >= self.vocab_size) {
            return Err(ModelError::TokenId { id, len: self.vocab_size });
        }
        let special = tape.param(store, self.special);
        let Some(words) = self.words else {
            return Ok(tape.gather(special, ids)?);
        };
        let d = self.config.embed_dim;
        let word_rows: Vec<usize> = ids.iter().map(|&i| i.saturating_sub(2)).collect();
        let special_rows: Vec<usize> = ids.iter().map(|&i| if i < 2 { i } else { 0 }).collect();
        let gw = if store.get(words).trainable {
            let table = tape.param(store, words);
            tape.gather(table, &word_rows)?
        } else {
            let table = store.value(words);
            let data = word_rows.iter().flat_map(|&r| table.row(r).iter().copied()).collect();
            tape.constant(Tensor::matrix(ids.len(), d, data)?)
        };
        let gs = tape.gather(special, &special_rows)?;
        let mask: Vec<f64> = ids.iter().flat_map(|&i| std::iter::repeat_n(f64::from(u8::from(i >= 2)), d)).collect();
        let inverse: Vec<f64> = mask.iter().map(|m| 1.0 - m).collect();
        let mw = tape.constant(Tensor::matrix(ids.len(), d, mask)?);
        let ms = tape.constant(Tensor::matrix(ids.len(), d, inverse)?);
        let a = tape.mul(gw, mw)?;
        let b = tape.mul(gs, ms)?;
        Ok(tape.add(a, b)?)
    }

    fn dropout(&self, tape: &mut Tape, v: Var, mode: &mut Mode<'_>) -> Result<Var, ModelError> {
        Ok(match mode {
            Mode::Eval => v,
            Mode::Train(rng) => tape.dropout(v, self.config.keep_prob, &mut **rng, true)?,
        })
    }

    fn zeros(&self, tape: &mut Tape) -> Var {
        tape.constant(Tensor::zeros(&[self.config.hidden]))
    }

    /// Reads the premise, then the hypothesis from the premise's final cell
    /// state and a zero hidden state. Returns both output sequences.
    fn read_pair(
        &self,
        store: &ParamStore,
        tape: &mut Tape,
        premise: &[usize],
        hypothesis: &[usize],
        mode: &mut Mode<'_>,
    ) -> Result<(Vec<Var>, Vec<Var>), ModelError> {
        if premise.is_empty() {
            return Err(ModelError::EmptySequence("premise"));
        }
        if hypothesis.is_empty() {
            return Err(ModelError::EmptySequence("hypothesis"));
        }
        let zero = self.zeros(tape);
        let xp = self.embed(store, tape, premise)?;
        let xp = self.dropout(tape, xp, mode)?;
        let pc = self.premise.vars(tape, store);
        let (hp, cp) = run_lstm(tape, xp, zero, zero, &pc)?;
        let xh = self.embed(store, tape, hypothesis)?;
        let xh = self.dropout(tape, xh, mode)?;
        let hc = self.hypothesis.vars(tape, store);
        let (hh, _) = run_lstm(tape, xh, zero, cp, &hc)?;
        Ok((hp, hh))
    }

    /// `concat(p, h) -> dropout -> tanh(W1 · + b1) -> W2 · + b2`.
    fn head(&self, store: &ParamStore, tape: &mut Tape, ids: HeadIds, p: Var, h: Var, mode: &mut Mode<'_>) -> Result<Var, ModelError> {
        let joined = tape.concat(&[p, h])?;
        let joined = self.dropout(tape, joined, mode)?;
        let w1 = tape.param(store, ids.w1);
        let b1 = tape.param(store, ids.b1);
        let w2 = tape.param(store, ids.w2);
        let b2 = tape.param(store, ids.b2);
        let z = tape.matmul(joined, w1)?;
        let z = tape.add(z, b1)?;
        let hidden = tape.tanh(z);
        let out = tape.matmul(hidden, w2)?;
        Ok(tape.add(out, b2)?)
    }

    fn conditional(&self, store: &ParamStore, tape: &mut Tape, premise: &[usize], hyp: &[usize], mode: &mut Mode<'_>) -> Result<Var, ModelError> {
        let Top::Head(ids) = self.top else { unreachable!("head layout") };
        let (hp, hh) = self.read_pair(store, tape, premise, hyp, mode)?;
        let (p, h) = (*hp.last().expect("non-empty"), *hh.last().expect("non-empty"));
        self.head(store, tape, ids, p, h, mode)
    }

    fn attention(
        &self,
        store: &ParamStore,
        tape: &mut Tape,
        premise: &[usize],
        hyp: &[usize],
        mode: &mut Mode<'_>,
    ) -> Result<(Var, Vec<Vec<f64>>), ModelError> {
        let Top::Attention(a) = self.top else { unreachable!("attention layout") };
        let (hp, hh) = self.read_pair(store, tape, premise, hyp, mode)?;
        let y = tape.stack_rows(&hp)?;
        let wy = tape.param(store, a.wy);
        let wh = tape.param(store, a.wh);
        let wr = tape.param(store, a.wr);
        let w = tape.param(store, a.w);
        let wt = tape.param(store, a.wt);
        let y_proj = tape.matmul(y, wy)?;
        let mut r = self.zeros(tape);
        let mut rows = Vec::with_capacity(hh.len());
        for &h in &hh {
            // M = tanh(Y Wy + (h Wh + r Wr) per row); α = softmax(M w)
            let hproj = tape.matmul(h, wh)?;
            let rproj = tape.matmul(r, wr)?;
            let u = tape.add(hproj, rproj)?;
            let pre = tape.add_rows(y_proj, u)?;
            let m = tape.tanh(pre);
            let scores = tape.matmul(m, w)?;
            let alpha = tape.softmax(scores, 0)?;
            rows.push(tape.value(alpha).data().to_vec());
            // r = α Y + tanh(r Wt)
            let attended = tape.matmul(alpha, y)?;
            let carried = tape.matmul(r, wt)?;
            let carried = tape.tanh(carried);
            r = tape.add(attended, carried)?;
        }
        let h_last = *hh.last().expect("non-empty");
        let wp = tape.param(store, a.wp);
        let wx = tape.param(store, a.wx);
        let rp = tape.matmul(r, wp)?;
        let hx = tape.matmul(h_last, wx)?;
        let sum = tape.add(rp, hx)?;
        let pair = tape.tanh(sum);
        let pair = self.dropout(tape, pair, mode)?;
        let out_w = tape.param(store, a.out_w);
        let out_b = tape.param(store, a.out_b);
        let logits = tape.matmul(pair, out_w)?;
        Ok((tape.add(logits, out_b)?, rows))
    }

    /// Logits for one item.
    pub fn forward(&self, store: &ParamStore, tape: &mut Tape, input: &EncodedPair, mut mode: Mode<'_>) -> Result<Output, ModelError> {
        let mode = &mut mode;
        match self.config.kind {
            ModelKind::Lstm => {
                let premise = concat_premises(&input.premises);
                let logits = self.conditional(store, tape, &premise, &input.hypothesis, mode)?;
                Ok(Output {
                    logits,
                    attention: None,
                    premise_logits: Vec::new(),
                })
            }
            ModelKind::Attention => {
                let premise = concat_premises(&input.premises);
                let (logits, rows) = self.attention(store, tape, &premise, &input.hypothesis, mode)?;
                Ok(Output {
                    logits,
                    attention: Some(rows),
                    premise_logits: Vec::new(),
                })
            }
            ModelKind::Se => {
                let n = input.premises.len();
                if n != 1 && n != 4 {
                    return Err(ModelError::PremiseCount {
                        kind: ModelKind::Se,
                        count: n,
                    });
                }
                let mut experts = Vec::with_capacity(n);
                for p in &input.premises {
                    experts.push(self.conditional(store, tape, p, &input.hypothesis, mode)?);
                }
                let logits = canonical_sum(tape, &experts)?;
                Ok(Output {
                    logits,
                    attention: None,
                    premise_logits: experts,
                })
            }
        }
    }
}

/// Sums equal-shape vectors in an order fixed by their values, so the result
/// is bitwise independent of input order. Four terms are added pairwise as
/// `(a + b) + (c + d)`.
pub fn canonical_sum(tape: &mut Tape, terms: &[Var]) -> Result<Var, ModelError> {
    let mut sorted = terms.to_vec();
    sorted.sort_by(|&a, &b| {
        let (x, y) = (tape.value(a).data(), tape.value(b).data());
        x.iter().zip(y).map(|(p, q)| p.total_cmp(q)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut level = sorted;
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        for pair in level.chunks(2) {
            next.push(match pair {
                [a, b] => tape.add(*a, *b)?,
                [a] => *a,
                _ => unreachable!(),
            });
        }
        level = next;
    }
    level.pop().ok_or(ModelError::Config("sum of no terms".into()))
}

/// Class probabilities from logits.
pub fn softmax3(logits: &[f64]) -> [f64; 3] {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let z: f64 = e.iter().sum();
    [e[0] / z, e[1] / z, e[2] / z]
}

/// Index of the largest logit; ties go to the earliest class.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prediction {
    pub label: Label,
    pub probs: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    format: String,
    version: u32,
    config: ModelConfig,
    vocab: Vocab,
}

/// A network together with its vocabulary and parameter values.
#[derive(Clone, Debug)]
pub struct Model {
    pub net: Network,
    pub vocab: Vocab,
    pub params: ParamStore,
}

impl Model {
    pub fn new(config: ModelConfig, vocab: Vocab, pretrained: Option<&Embeddings>) -> Result<Model, ModelError> {
        let mut params = ParamStore::new();
        let net = Network::init(config, &vocab, pretrained, &mut params)?;
        Ok(Model { net, vocab, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.net.config
    }

    pub fn encode(&self, premises: &[Vec<String>], hypothesis: &[String]) -> EncodedPair {
        EncodedPair::new(&self.vocab, premises, hypothesis)
    }

    pub fn forward(&self, tape: &mut Tape, input: &EncodedPair, mode: Mode<'_>) -> Result<Output, ModelError> {
        self.net.forward(&self.params, tape, input, mode)
    }

    /// Evaluation-mode logits.
    pub fn logits(&self, input: &EncodedPair) -> Result<[f64; 3], ModelError> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, input, Mode::Eval)?;
        let v = tape.value(out.logits).data();
        Ok([v[0], v[1], v[2]])
    }

    pub fn predict(&self, input: &EncodedPair) -> Result<Prediction, ModelError> {
        let logits = self.logits(input)?;
        Ok(Prediction {
            label: Label::from_index(argmax(&logits)).expect("three classes"),
            probs: softmax3(&logits),
        })
    }

    pub fn save<W: Write>(&self, w: W) -> Result<(), ModelError> {
        let header = CheckpointHeader {
            format: MODEL_FORMAT.into(),
            version: MODEL_FORMAT_VERSION,
            config: self.net.config.clone(),
            vocab: self.vocab.clone(),
        };
        write_checkpoint(w, &self.params, &serde_json::to_string(&header)?)?;
        Ok(())
    }

    pub fn load<R: Read>(r: R) -> Result<Model, ModelError> {
        let (params, meta) = read_checkpoint(r)?;
        let header: CheckpointHeader =
            serde_json::from_str(&meta).map_err(|e| ModelError::Checkpoint(format!("bad header: {e}")))?;
        if header.format != MODEL_FORMAT || header.version != MODEL_FORMAT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "expected {MODEL_FORMAT} version {MODEL_FORMAT_VERSION}, found {} version {}",
                header.format, header.version
            )));
        }
        let net = Network::from_store(header.config, header.vocab.len(), &params)?;
        Ok(Model {
            net,
            vocab: header.vocab,
            params,
        })
    }
}
