use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mpe_autodiff::GradCheckConfig;
use mpe_core::dataset::{
    adjudicate as apply_decisions, attach_pair_labels, corpus_stats, flagged_items, generate_items, parse_decisions, parse_judgments,
    parse_pair_labels, review_loop, write_items, GenerateConfig, Item, Split,
};
use mpe_core::graph::{build_graph as build_phrase_graph, write_graph, ReductionRules};
use mpe_core::models::{read_embeddings, synthetic_gradcheck, Embeddings, Model, ModelConfig, Preset, SyntheticCheck};
use mpe_core::text::TextPipeline;
use mpe_core::train::{
    best_point, build_vocab, encode_items, evaluate, grid_points, grid_search, item_tokens, EpochRecord, Example, Phase, TrainConfig, TrainError,
    TrainLog, Trainer,
};
use mpe_core::voting::score_baselines;
use serde_json::json;

use crate::files::{invalid, Inputs, Manifest, Outputs, Paths, ResultExt};
use crate::load;
use crate::{AdjudicateArgs, BuildDatasetArgs, BuildGraphArgs, CaptionFiles, EvalArgs, GradcheckArgs, StatsArgs, TrainArgs, VoteArgs};

fn caption_files(c: &CaptionFiles) -> Vec<(Split, &Path)> {
    let mut out = vec![(Split::Train, c.captions.as_path())];
    if let Some(p) = &c.dev_captions {
        out.push((Split::Dev, p.as_path()));
    }
    if let Some(p) = &c.test_captions {
        out.push((Split::Test, p.as_path()));
    }
    out
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

fn commit(out: Outputs, manifest: Manifest) -> Result<()> {
    for p in out.commit(manifest)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn check_fraction(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(format!("--{name} must be between 0 and 1, got {v}")))
    }
}

pub fn build_graph(paths: &Paths, a: BuildGraphArgs) -> Result<()> {
    let text = TextPipeline::english();
    let mut inputs = Inputs::new(paths.clone());
    let corpus = load::corpus(&mut inputs, &caption_files(&a.captions), &text)?;
    let graph = build_phrase_graph(&corpus.graph_input(), &ReductionRules::english());
    let mut buf = Vec::new();
    write_graph(&mut buf, &graph)?;
    println!(
        "{} captions, {} nodes, {} edges, {} truncated closures",
        corpus.num_captions(),
        graph.len(),
        graph.num_edges(),
        graph.diagnostics.truncated.len()
    );
    let mut out = Outputs::default();
    out.add(paths.resolve(&a.out), buf);
    let mut manifest = Manifest::new("build-graph", None, &json!({ "rules": "english" }), inputs)?;
    manifest.diagnostics = Some(json!({
        "captions": corpus.num_captions(),
        "nodes": graph.len(),
        "edges": graph.num_edges(),
        "truncated": graph.diagnostics.truncated.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
    }));
    commit(out, manifest)
}

pub fn build_dataset(paths: &Paths, a: BuildDatasetArgs) -> Result<()> {
    check_fraction("overlap-max", a.overlap_max)?;
    check_fraction("related-fraction", a.related_fraction)?;
    if a.n_items == 0 {
        return Err(invalid("--n-items must be at least 1"));
    }
    let text = TextPipeline::english();
    let mut inputs = Inputs::new(paths.clone());
    let corpus = load::corpus(&mut inputs, &caption_files(&a.captions), &text)?;
    if !corpus.groups().any(|g| g.split == a.split) {
        return Err(invalid(format!("no {} captions given", a.split)));
    }
    let graph = match &a.graph {
        Some(p) => load::graph(&mut inputs, p)?,
        None => build_phrase_graph(&corpus.graph_input(), &ReductionRules::english()),
    };
    let config = GenerateConfig {
        overlap_max: a.overlap_max,
        n_items: a.n_items,
        min_support: a.min_support,
        min_split_support: a.min_split_support,
        related_fraction: a.related_fraction,
        seed: a.seed,
        ..GenerateConfig::default()
    };
    let outcome = generate_items(&corpus, &graph, &text, a.split, &config).invalid(|| "graph does not match the captions".into())?;
    let d = &outcome.diagnostics;
    println!(
        "{} items ({} related, {} unrelated) from {} scene groups",
        outcome.items.len(),
        d.related_items,
        d.unrelated_items,
        d.premise_groups
    );
    if let Some(s) = &outcome.shortfall {
        eprintln!("warning: produced {} of {} requested items", s.produced, s.requested);
    }
    let mut buf = Vec::new();
    write_items(&mut buf, &outcome.items)?;
    let mut out = Outputs::default();
    out.add(paths.resolve(&a.out), buf);
    let mut manifest = Manifest::new(
        "build-dataset",
        Some(a.seed),
        &json!({
            "split": a.split,
            "overlap_max": config.overlap_max,
            "n_items": config.n_items,
            "min_support": config.min_support,
            "min_split_support": config.min_split_support,
            "related_fraction": config.related_fraction,
            "unrelated_attempts": config.unrelated_attempts,
        }),
        inputs,
    )?;
    manifest.diagnostics = Some(json!({ "generation": outcome.diagnostics, "shortfall": outcome.shortfall }));
    commit(out, manifest)
}

pub fn stats(paths: &Paths, a: StatsArgs) -> Result<()> {
    let mut inputs = Inputs::new(paths.clone());
    let items = load::items(&mut inputs, &a.items)?;
    let report = corpus_stats(&items, &TextPipeline::english()).invalid(|| format!("computing statistics for {}", a.items.display()))?;
    print!("{}", report.to_table());
    if let Some(p) = &a.out {
        let mut out = Outputs::default();
        out.add_json(paths.resolve(p), &report)?;
        commit(out, Manifest::new("stats", None, &json!({}), inputs)?)?;
    }
    Ok(())
}

fn decisions_tsv(decisions: &[(String, mpe_core::Label)]) -> Vec<u8> {
    let mut s = String::from("# item_id\tlabel\n");
    for (id, l) in decisions {
        s.push_str(&format!("{id}\t{l}\n"));
    }
    s.into_bytes()
}

fn review(items: &[Item], flagged: &[usize], input: impl BufRead, mut output: impl Write) -> Result<Vec<(String, mpe_core::Label)>> {
    writeln!(output, "{} items need a decision", flagged.len())?;
    Ok(review_loop(items, flagged, input, output)?)
}

pub fn adjudicate(paths: &Paths, a: AdjudicateArgs) -> Result<()> {
    let mut inputs = Inputs::new(paths.clone());
    let mut items = load::items(&mut inputs, &a.items)?;
    if let Some(p) = &a.judgments {
        let (bytes, name) = inputs.read(p)?;
        let judgments = parse_judgments(bytes.as_slice(), &name).invalid(|| format!("reading judgments from {name}"))?;
        let s = mpe_core::dataset::apply_judgments(&mut items, &judgments).invalid(|| format!("applying judgments from {name}"))?;
        println!("judgments: {} clear majority, {} split 3-2, {} split 2-2-1", s.clear_majority, s.split_32, s.split_221);
    }
    let flagged = flagged_items(&items);
    let mut out = Outputs::default();
    let decisions = match &a.decisions {
        Some(p) => {
            let (bytes, name) = inputs.read(p)?;
            parse_decisions(bytes.as_slice(), &name).invalid(|| format!("reading decisions from {name}"))?
        }
        None => {
            let stdin = std::io::stdin();
            let decisions = review(&items, &flagged, stdin.lock(), std::io::stdout().lock())?;
            out.add(paths.resolve(&with_suffix(&a.out, ".decisions.tsv")), decisions_tsv(&decisions));
            decisions
        }
    };
    let report = apply_decisions(&mut items, &decisions).invalid(|| "applying decisions".into())?;
    println!(
        "{} items with judgments: {:.1}% majority, {:.1}% split 3-2, {:.1}% split 2-2-1; {} adjudicated; {:.1}% of final labels equal the majority",
        report.items_with_judgments,
        100.0 * report.majority_fraction(),
        100.0 * report.split_32_fraction(),
        100.0 * report.split_221_fraction(),
        report.adjudicated,
        100.0 * report.final_equals_majority_fraction(),
    );
    if !report.unresolved.is_empty() {
        eprintln!("warning: {} flagged items remain unlabeled", report.unresolved.len());
    }
    let mut buf = Vec::new();
    write_items(&mut buf, &items)?;
    let mut all = Outputs::default();
    all.add(paths.resolve(&a.out), buf);
    for (p, b) in out.into_files() {
        all.add(p, b);
    }
    let mut manifest = Manifest::new("adjudicate", None, &json!({ "interactive": a.decisions.is_none() }), inputs)?;
    manifest.diagnostics = Some(serde_json::to_value(&report)?);
    commit(all, manifest)
}

pub fn vote(paths: &Paths, a: VoteArgs) -> Result<()> {
    let mut inputs = Inputs::new(paths.clone());
    let mut items = load::items(&mut inputs, &a.items)?;
    if let Some(p) = &a.pairs {
        let (bytes, name) = inputs.read(p)?;
        let pairs = parse_pair_labels(bytes.as_slice(), &name).invalid(|| format!("reading pair labels from {name}"))?;
        attach_pair_labels(&mut items, &pairs).invalid(|| format!("attaching pair labels from {name}"))?;
    }
    let report = score_baselines(&items);
    print!("{}", report.to_table());
    if report.scored == 0 {
        return Err(invalid("no item has both four pair labels and a gold label"));
    }
    if let Some(p) = &a.out {
        let mut out = Outputs::default();
        out.add_json(paths.resolve(p), &report)?;
        commit(out, Manifest::new("vote", None, &json!({}), inputs)?)?;
    }
    Ok(())
}

/// Input problems found by the trainer before any update.
fn train_error(e: TrainError) -> anyhow::Error {
    match e {
        TrainError::Unlabeled(_) | TrainError::Arity { .. } | TrainError::Config(_) | TrainError::Empty(_) => {
            anyhow::Error::new(e).context(crate::files::Invalid("invalid training input".into()))
        }
        other => other.into(),
    }
}

fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::Train => "train",
        Phase::Pretrain => "pretrain",
        Phase::Finetune => "finetune",
    }
}

fn print_epoch(r: &EpochRecord) {
    let phase = phase_name(r.phase);
    let dev = r.dev_accuracy.map(|d| format!(" dev {:.2}%", 100.0 * d)).unwrap_or_default();
    eprintln!("{phase} epoch {}: loss {:.4} train {:.2}%{dev}", r.epoch, r.loss, 100.0 * r.train_accuracy);
}

fn single<T: Copy>(values: &[T], default: T) -> T {
    values.first().copied().unwrap_or(default)
}

pub fn train(paths: &Paths, a: TrainArgs) -> Result<()> {
    let mut model_config = match (a.preset, a.model) {
        (Some(p), _) => p.model_config(),
        (None, Some(k)) => ModelConfig::new(k),
        (None, None) => return Err(invalid("one of --preset or --model is required")),
    };
    model_config.seed = a.seed;
    model_config.freeze_embeddings = a.freeze_embeddings;
    model_config.hidden = single(&a.hidden, model_config.hidden);
    model_config.keep_prob = single(&a.keep_prob, model_config.keep_prob);
    if let Some(d) = a.embed_dim {
        model_config.embed_dim = d;
    }
    let train_config = TrainConfig {
        epochs: a.epochs.unwrap_or(Preset::EPOCHS),
        batch_size: a.batch_size.unwrap_or(Preset::BATCH_SIZE),
        lr: single(&a.lr, Preset::LEARNING_RATE),
        seed: a.seed,
        keep_best: !a.keep_last,
    };
    train_config.validate().map_err(train_error)?;
    let grid = grid_points(
        &if a.lr.is_empty() { vec![train_config.lr] } else { a.lr.clone() },
        &if a.keep_prob.is_empty() { vec![model_config.keep_prob] } else { a.keep_prob.clone() },
        &if a.hidden.is_empty() { vec![model_config.hidden] } else { a.hidden.clone() },
    );
    for p in &grid {
        ModelConfig {
            hidden: p.hidden,
            keep_prob: p.keep_prob,
            ..model_config.clone()
        }
        .validate()
        .invalid(|| "invalid model settings".into())?;
        TrainConfig { lr: p.lr, ..train_config.clone() }.validate().map_err(train_error)?;
    }
    let is_grid = grid.len() > 1;
    if is_grid && a.dev.is_none() {
        return Err(invalid("several hyperparameter values need --dev to choose between them"));
    }
    if is_grid && a.pretrain.is_some() {
        return Err(invalid("grid search does not combine with --pretrain"));
    }

    let text = TextPipeline::english();
    let mut inputs = Inputs::new(paths.clone());
    let train_items = load::items(&mut inputs, &a.train)?;
    let dev_items = a.dev.as_ref().map(|p| load::items(&mut inputs, p)).transpose()?;
    let pretrain_items = a.pretrain.as_ref().map(|p| load::items(&mut inputs, p)).transpose()?;

    let vocab_items: Vec<Item> = train_items.iter().chain(pretrain_items.iter().flatten()).cloned().collect();
    let embeddings: Option<Embeddings> = match &a.embeddings {
        Some(p) => {
            let all: Vec<Item> = vocab_items.iter().chain(dev_items.iter().flatten()).cloned().collect();
            let keep = item_tokens(&all, &text).invalid(|| "reading item text".into())?;
            let (bytes, name) = inputs.read(p)?;
            let e = read_embeddings(bytes.as_slice(), &name, Some(&keep)).invalid(|| format!("reading embeddings from {name}"))?;
            match a.embed_dim {
                Some(d) if d != e.dim => return Err(invalid(format!("--embed-dim {d} but {name} has {}-dimensional vectors", e.dim))),
                _ => model_config.embed_dim = e.dim,
            }
            eprintln!("{} vectors of dimension {} from {name}", e.vectors.len(), e.dim);
            Some(e)
        }
        None => None,
    };
    model_config.validate().invalid(|| "invalid model settings".into())?;

    let vocab = build_vocab(&vocab_items, &text, a.min_count, embeddings.as_ref()).invalid(|| "building the vocabulary".into())?;
    let encode = |items: &[Item]| encode_items(&vocab, items, &text).invalid(|| "encoding items".into());
    let train_set = encode(&train_items)?;
    let dev_set = dev_items.as_deref().map(encode).transpose()?;
    let pretrain_set = pretrain_items.as_deref().map(encode).transpose()?;
    eprintln!("vocabulary of {} tokens, {} training items", vocab.len(), train_set.len());

    let mut out = Outputs::default();
    let (model, log, grid_summary) = if is_grid {
        let dev = dev_set.as_deref().expect("checked above");
        let runs = grid_search(&model_config, &vocab, embeddings.as_ref(), &grid, &train_set, dev, &train_config).map_err(train_error)?;
        let (results, models): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
        for r in &results {
            eprintln!(
                "lr {} keep {} hidden {}: best dev {:.2}%",
                r.point.lr,
                r.point.keep_prob,
                r.point.hidden,
                100.0 * r.best_dev_accuracy
            );
        }
        let best = best_point(&results).expect("non-empty grid");
        out.add_json(paths.resolve(&with_suffix(&a.out, ".grid.json")), &results)?;
        let summary = json!({ "points": grid, "chosen": results[best].point });
        let model = models.into_iter().nth(best).expect("one model per point");
        (model, results[best].log.clone(), Some(summary))
    } else {
        let mut model = Model::new(model_config.clone(), vocab.clone(), embeddings.as_ref()).invalid(|| "initializing the model".into())?;
        let (model, log) = run_single(&mut model, &train_config, pretrain_set.as_deref(), &train_set, dev_set.as_deref())?;
        (model, log, None)
    };
    if let Some(b) = &log.best {
        println!("best dev accuracy {:.2}% at {} epoch {}", 100.0 * b.dev_accuracy, phase_name(b.phase), b.epoch);
    }
    if let Some(last) = log.records.last() {
        println!("final training accuracy {:.2}%", 100.0 * last.train_accuracy);
    }

    let mut ckpt = Vec::new();
    model.save(&mut ckpt)?;
    let mut log_bytes = Vec::new();
    log.write_jsonl(&mut log_bytes)?;
    let mut files = Outputs::default();
    files.add(paths.resolve(&a.out), ckpt);
    files.add(paths.resolve(&a.log.clone().unwrap_or_else(|| with_suffix(&a.out, ".log.jsonl"))), log_bytes);
    for (p, b) in out.into_files() {
        files.add(p, b);
    }
    let manifest = Manifest::new(
        "train",
        Some(a.seed),
        &json!({
            "preset": a.preset,
            "model": model.config(),
            "train": train_config,
            "min_count": a.min_count,
            "regime": if a.pretrain.is_some() { "pretrain-then-finetune" } else { "single" },
            "grid": grid_summary,
        }),
        inputs,
    )?;
    commit(files, manifest)
}

fn run_single(
    model: &mut Model,
    config: &TrainConfig,
    pretrain: Option<&[Example]>,
    train_set: &[Example],
    dev: Option<&[Example]>,
) -> Result<(Model, TrainLog)> {
    let mut trainer = Trainer::new(config.clone()).map_err(train_error)?;
    let mut log = TrainLog::default();
    if let Some(pre) = pretrain {
        trainer.run_phase(model, Phase::Pretrain, pre, dev, &mut log, &mut print_epoch).map_err(train_error)?;
    }
    let phase = if pretrain.is_some() { Phase::Finetune } else { Phase::Train };
    trainer.run_phase(model, phase, train_set, dev, &mut log, &mut print_epoch).map_err(train_error)?;
    trainer.finish(model, &mut log);
    Ok((model.clone(), log))
}

pub fn eval(paths: &Paths, a: EvalArgs) -> Result<()> {
    let mut inputs = Inputs::new(paths.clone());
    let (bytes, name) = inputs.read(&a.model)?;
    let model = Model::load(bytes.as_slice()).invalid(|| format!("loading model {name}"))?;
    let items = load::items(&mut inputs, &a.items)?;
    let examples = encode_items(&model.vocab, &items, &TextPipeline::english()).invalid(|| "encoding items".into())?;
    let (report, preds) = evaluate(&model, &examples).map_err(train_error)?;
    print!("{}", report.to_table());
    if report.without_pair_labels > 0 {
        eprintln!("note: {} items have no pair labels and are left out of the agreement breakdown", report.without_pair_labels);
    }
    if report.by_phenomenon.is_empty() {
        eprintln!("note: no phenomenon tags; phenomenon breakdown skipped");
    } else if report.untagged > 0 {
        eprintln!("note: {} items carry no phenomenon tag", report.untagged);
    }
    let mut out = Outputs::default();
    if let Some(p) = &a.out {
        out.add_json(paths.resolve(p), &report)?;
    }
    if let Some(p) = &a.predictions {
        let mut buf = Vec::new();
        for r in &preds {
            serde_json::to_writer(&mut buf, r)?;
            buf.push(b'\n');
        }
        out.add(paths.resolve(p), buf);
    }
    if !out.is_empty() {
        commit(out, Manifest::new("eval", None, &json!({ "model": model.config() }), inputs)?)?;
    }
    Ok(())
}

pub fn gradcheck(paths: &Paths, a: GradcheckArgs) -> Result<()> {
    if a.dim == 0 {
        return Err(invalid("--dim must be at least 1"));
    }
    if !(a.epsilon > 0.0 && a.tolerance > 0.0) {
        return Err(invalid("--epsilon and --tolerance must be positive"));
    }
    let config = GradCheckConfig {
        epsilon: a.epsilon,
        tolerance: a.tolerance,
        seed: a.seed,
        ..GradCheckConfig::default()
    };
    let report = synthetic_gradcheck(&SyntheticCheck::new(a.model, a.dim, a.seed), &config).context("running the gradient check")?;
    for p in &report.params {
        println!("{:<16}{:>6} coords  max relative error {:.3e}", p.name, p.coords_checked, p.max_rel_error);
    }
    let verdict = if report.passed() { "PASS" } else { "FAIL" };
    println!("{verdict} {} max relative error {:.3e} (tolerance {:e})", a.model, report.max_rel_error, report.tolerance);
    if let Some(p) = &a.out {
        let params: Vec<_> = report
            .params
            .iter()
            .map(|p| json!({ "name": p.name, "coords_checked": p.coords_checked, "max_rel_error": p.max_rel_error }))
            .collect();
        let mut out = Outputs::default();
        out.add_json(paths.resolve(p), &json!({ "passed": report.passed(), "max_rel_error": report.max_rel_error, "params": params }))?;
        let manifest = Manifest::new(
            "gradcheck",
            Some(a.seed),
            &json!({ "model": a.model, "dim": a.dim, "epsilon": a.epsilon, "tolerance": a.tolerance }),
            Inputs::new(paths.clone()),
        )?;
        commit(out, manifest)?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(invalid("gradient check failed"))
    }
}
