//! End-to-end acceptance criteria, one PASS/FAIL line each.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use mpe_autodiff::{Adam, AdamConfig, GradCheckConfig, ParamStore, Tape, Tensor};
use mpe_core::dataset::{corpus_stats, import_released_tsv, write_items, GenerateConfig, Item, Split};
use mpe_core::graph::{apply_reductions, ReductionRules};
use mpe_core::models::{synthetic_gradcheck, EncodedPair, Model, ModelConfig, ModelKind, Mode, SyntheticCheck, Vocab};
use mpe_core::text::{tokenize, LemmaRules, StopwordList, TextPipeline};
use mpe_core::train::{separable_examples, Phase, TrainConfig, TrainLog, Trainer};
use mpe_core::voting::{ec_heuristic, majority_vote, score_baselines, Vote};
use mpe_core::Label::{self, *};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.1?}, limit {limit:?}"))
}

fn gradient_checks() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut runs = 0;
    for kind in ModelKind::ALL {
        for seed in 0..5 {
            let check = SyntheticCheck {
                vocab_size: 50,
                ..SyntheticCheck::new(kind, 8, seed)
            };
            let report = synthetic_gradcheck(&check, &GradCheckConfig::default()).map_err(|e| e.to_string())?;
            ensure(report.passed(), || format!("{kind} seed {seed}: max relative error {:e}", report.max_rel_error))?;
            worst = worst.max(report.max_rel_error);
            runs += 1;
        }
    }
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!("{runs} checks, max relative error {worst:.2e}, {:.1?}", start.elapsed()))
}

fn overfit() -> Outcome {
    let (vocab, data) = separable_examples(32, 0);
    let mut summary = Vec::new();
    for kind in ModelKind::ALL {
        let start = Instant::now();
        let config = ModelConfig {
            embed_dim: 16,
            hidden: 16,
            keep_prob: 1.0,
            ..ModelConfig::new(kind)
        };
        let mut model = Model::new(config, vocab.clone(), None).map_err(|e| e.to_string())?;
        let mut trainer = Trainer::new(TrainConfig {
            epochs: 1,
            batch_size: 8,
            lr: 0.01,
            seed: 0,
            keep_best: false,
        })
        .map_err(|e| e.to_string())?;
        let mut log = TrainLog::default();
        let mut solved_at = None;
        for epoch in 1..=200 {
            trainer
                .run_phase(&mut model, Phase::Train, &data, None, &mut log, &mut |_| {})
                .map_err(|e| e.to_string())?;
            if solved_at.is_none() && log.records.last().unwrap().train_accuracy == 1.0 {
                solved_at = Some(epoch);
            }
            if solved_at.is_some() && epoch >= 5 {
                break;
            }
        }
        let losses: Vec<f64> = log.records.iter().take(5).map(|r| r.loss).collect();
        ensure(losses.windows(2).all(|w| w[1] < w[0]), || format!("{kind}: losses {losses:?}"))?;
        let epoch = solved_at.ok_or_else(|| format!("{kind}: not fit in 200 epochs"))?;
        within(start.elapsed(), Duration::from_secs(300))?;
        summary.push(format!("{kind} fit at epoch {epoch}"));
    }
    Ok(summary.join(", "))
}

fn random_pair(rng: &mut ChaCha8Rng, vocab: usize) -> EncodedPair {
    let seq = |rng: &mut ChaCha8Rng| -> Vec<usize> { (0..rng.random_range(1..=10)).map(|_| rng.random_range(0..vocab)).collect() };
    EncodedPair {
        premises: (0..4).map(|_| seq(rng)).collect(),
        hypothesis: seq(rng),
    }
}

fn small_model(kind: ModelKind, seed: u64) -> Model {
    let config = ModelConfig {
        embed_dim: 8,
        hidden: 8,
        seed,
        ..ModelConfig::new(kind)
    };
    Model::new(config, Vocab::new((2..30).map(|i| format!("w{i}"))), None).unwrap()
}

fn permutations() -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    if BTreeSet::from([a, b, c, d]).len() == 4 {
                        out.push([a, b, c, d]);
                    }
                }
            }
        }
    }
    out
}

fn se_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let perms = permutations();
    ensure(perms.len() == 24, || "expected 24 permutations".into())?;
    let mut worst = 0.0f64;
    for fixture in 0..100 {
        let model = small_model(ModelKind::Se, fixture);
        let input = random_pair(&mut rng, 30);
        let base = model.logits(&input).map_err(|e| e.to_string())?;
        for p in &perms {
            let permuted = EncodedPair {
                premises: p.iter().map(|&i| input.premises[i].clone()).collect(),
                hypothesis: input.hypothesis.clone(),
            };
            let l = model.logits(&permuted).map_err(|e| e.to_string())?;
            for k in 0..3 {
                worst = worst.max((l[k] - base[k]).abs());
            }
        }
        let same = EncodedPair {
            premises: vec![input.premises[0].clone(); 4],
            hypothesis: input.hypothesis.clone(),
        };
        let one = EncodedPair {
            premises: vec![input.premises[0].clone()],
            hypothesis: input.hypothesis.clone(),
        };
        let (four, single) = (model.logits(&same).unwrap(), model.logits(&one).unwrap());
        ensure(four == single.map(|v| 4.0 * v), || format!("fixture {fixture}: {four:?} vs 4 x {single:?}"))?;
    }
    ensure(worst <= 1e-9, || format!("permutation difference {worst:e}"))?;
    Ok(format!("100 fixtures x 24 permutations, max difference {worst:e}"))
}

fn attention_rows(model: &Model, input: &EncodedPair) -> Vec<Vec<f64>> {
    let mut tape = Tape::new();
    model.forward(&mut tape, input, Mode::Eval).unwrap().attention.unwrap()
}

fn attention_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for fixture in 0..100 {
        let model = small_model(ModelKind::Attention, fixture);
        for row in attention_rows(&model, &random_pair(&mut rng, 30)) {
            worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("row sum off by {worst:e}"))?;

    let mut model = small_model(ModelKind::Attention, 1);
    let single = EncodedPair {
        premises: vec![vec![7]],
        hypothesis: vec![3, 4, 5],
    };
    let rows = attention_rows(&model, &single);
    ensure(rows.iter().all(|r| r == &[1.0]), || format!("single token rows {rows:?}"))?;

    let w = model.params.id("att.w").unwrap();
    model.params.value_mut(w).data_mut().fill(0.0);
    let input = EncodedPair {
        premises: vec![vec![2, 3], vec![4], vec![5, 6], vec![7]],
        hypothesis: vec![8, 9],
    };
    let rows = attention_rows(&model, &input);
    let n = rows[0].len() as f64;
    ensure(rows.iter().flatten().all(|&a| (a - 1.0 / n).abs() < 1e-15), || format!("uniform case {rows:?}"))?;
    Ok(format!("max row-sum error {worst:e}; single-token and uniform cases exact"))
}

fn voting_examples() -> Outcome {
    let rows = [
        ([Neutral, Neutral, Neutral, Neutral], Entailment),
        ([Neutral, Contradiction, Neutral, Neutral], Contradiction),
        ([Entailment, Entailment, Neutral, Neutral], Entailment),
        ([Neutral, Neutral, Entailment, Neutral], Neutral),
        ([Contradiction; 4], Contradiction),
    ];
    let majority: Vec<Vote> = rows.iter().map(|(p, _)| majority_vote(p)).collect();
    let heuristic: Vec<Label> = rows.iter().map(|(p, _)| ec_heuristic(p)).collect();
    let expected_majority = [
        Vote::Winner(Neutral),
        Vote::Winner(Neutral),
        Vote::NoMajority,
        Vote::Winner(Neutral),
        Vote::Winner(Contradiction),
    ];
    ensure(majority == expected_majority, || format!("majority {majority:?}"))?;
    ensure(heuristic == [Neutral, Contradiction, Entailment, Entailment, Contradiction], || format!("heuristic {heuristic:?}"))?;
    let correct: Vec<bool> = rows.iter().zip(&heuristic).map(|((_, g), h)| g == h).collect();
    ensure(correct[1] && !correct[3], || format!("heuristic correctness {correct:?}"))?;
    Ok("majority N N - N C, heuristic N C E E C".into())
}

fn voting_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let items: Vec<Item> = (0..1000)
        .map(|i| {
            let mut it = Item::new(format!("r{i}"), Split::Dev, "g", vec!["p".into(); 4], "h");
            it.pair_labels = Some((0..4).map(|_| Label::ALL[rng.random_range(0..3)]).collect());
            it.gold_label = Some(Label::ALL[rng.random_range(0..3)]);
            it
        })
        .collect();
    let r = score_baselines(&items);
    let mut strict = 0;
    let mut heuristic = 0;
    for it in &items {
        let pairs = it.pair_labels.as_ref().unwrap();
        let gold = it.gold_label.unwrap();
        let count = |l: Label| pairs.iter().filter(|&&p| p == l).count();
        strict += usize::from(count(gold) >= 3);
        let h = match count(Entailment).cmp(&count(Contradiction)) {
            std::cmp::Ordering::Greater => Entailment,
            std::cmp::Ordering::Less => Contradiction,
            std::cmp::Ordering::Equal => Neutral,
        };
        heuristic += usize::from(h == gold);
    }
    let top_two = r.category_histogram[3] + r.category_histogram[4];
    ensure((r.majority_acc_strict - top_two).abs() < 1e-12, || format!("strict {} vs categories 3+4 {top_two}", r.majority_acc_strict))?;
    ensure(r.majority_acc_strict == strict as f64 / 1000.0, || "strict accuracy differs from brute force".into())?;
    ensure(r.heuristic_acc == heuristic as f64 / 1000.0, || "heuristic accuracy differs from brute force".into())?;
    Ok(format!("strict {:.3} = categories 3+4 on 1000 items", r.majority_acc_strict))
}

fn find_file(dir: &Path, names: &[&str]) -> Option<PathBuf> {
    names.iter().map(|n| dir.join(n)).find(|p| p.is_file())
}

/// `None` when the released files are not available.
fn released_reproduction() -> Option<Outcome> {
    let dir = PathBuf::from(std::env::var_os("MPE_RELEASED_DIR")?);
    Some((|| {
        let start = Instant::now();
        let load = |names: &[&str], split| -> Result<Vec<Item>, String> {
            let path = find_file(&dir, names).ok_or_else(|| format!("none of {names:?} in {}", dir.display()))?;
            let f = std::io::BufReader::new(std::fs::File::open(&path).map_err(|e| e.to_string())?);
            import_released_tsv(f, split, &path.display().to_string()).map(|(items, _)| items).map_err(|e| e.to_string())
        };
        let train = load(&["mpe_train.txt", "mpe_train.tsv", "train.tsv"], Split::Train)?;
        let dev = load(&["mpe_dev.txt", "mpe_dev.tsv", "dev.tsv"], Split::Dev)?;
        let pipeline = TextPipeline::english();
        let close = |name: &str, got: f64, want: f64, tol: f64| ensure((got - want).abs() <= tol, || format!("{name}: {got:.4}, expected {want} +- {tol}"));

        let stats = corpus_stats(&train, &pipeline).map_err(|e| e.to_string())?;
        for (got, want) in stats.label_distribution.iter().zip([0.323, 0.263, 0.416]) {
            close("train label distribution", *got, want, 0.002)?;
        }
        close("lemma overlap", stats.overlap_lemma.overall.map_or(f64::NAN, |m| m.mean), 0.33, 0.03)?;
        close("agreement", stats.agreement.unwrap_or(f64::NAN), 0.70, 0.02)?;
        for (got, want) in stats.agreement_per_label.iter().zip([0.82, 0.42, 0.78]) {
            close("per-class agreement", got.unwrap_or(f64::NAN), want, 0.03)?;
        }

        let votes = score_baselines(&dev);
        ensure(votes.scored > 0, || "development items carry no pair labels".into())?;
        close("heuristic accuracy", votes.heuristic_acc, 0.417, 0.005)?;
        close("strict majority", votes.majority_acc_strict, 0.346, 0.005)?;
        for (got, want) in votes.category_histogram.iter().zip([0.218, 0.269, 0.167, 0.248, 0.098]) {
            close("category histogram", *got, want, 0.005)?;
        }
        within(start.elapsed(), Duration::from_secs(60))?;
        Ok(format!("{} train and {} dev items match the reference figures", train.len(), dev.len()))
    })())
}

fn pipeline_invariants() -> Outcome {
    let stop = StopwordList::english();
    let lemmas = LemmaRules::english();
    let content = |s: &str| -> BTreeSet<String> {
        tokenize(s)
            .into_iter()
            .filter(|t| !stop.contains(t) && !stop.contains(&lemmas.lemmatize(t)))
            .collect()
    };
    let rules = ReductionRules::english();
    let config = GenerateConfig {
        n_items: 100,
        seed: 42,
        ..GenerateConfig::default()
    };
    let mut checked = 0;
    let mut hashes = Vec::new();
    for run in 0..2 {
        let p = common::fixture_pipeline();
        let mut digest = Sha256::new();
        for split in [Split::Train, Split::Dev] {
            let items = p.generate(split, &config).items;
            let mut buf = Vec::new();
            write_items(&mut buf, &items).map_err(|e| e.to_string())?;
            digest.update(&buf);
            if run > 0 {
                continue;
            }
            for item in &items {
                let h = content(&item.hypothesis);
                let prem: BTreeSet<String> = item.premises.iter().flat_map(|s| content(s)).collect();
                let overlap = h.iter().filter(|t| prem.contains(*t)).count() as f64 / h.len() as f64;
                ensure(overlap <= 0.5, || format!("{}: overlap {overlap}", item.id))?;
                let key = &item.origin.as_ref().ok_or("item without origin")?.hypothesis_key;
                for premise in &item.premises {
                    let closure = apply_reductions(&p.text.normalize(premise).map_err(|e| e.to_string())?, &rules);
                    ensure(!closure.phrases.contains_key(key), || format!("{}: {key:?} generalizes premise {premise:?}", item.id))?;
                }
                checked += 1;
            }
        }
        hashes.push(hex::encode(digest.finalize()));
    }
    ensure(checked > 0, || "no items generated".into())?;
    ensure(hashes[0] == hashes[1], || format!("runs differ: {hashes:?}"))?;
    Ok(format!("{checked} items rechecked; output sha256 {}", &hashes[0][..16]))
}

fn numerical_core() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut tape = Tape::new();
    for _ in 0..200 {
        let rows = rng.random_range(1..5);
        let cols = rng.random_range(1..8);
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-50.0..50.0)).collect();
        let x = tape.constant(Tensor::matrix(rows, cols, data).unwrap());
        let s = tape.softmax(x, 1).map_err(|e| e.to_string())?;
        for r in tape.value(s).data().chunks(cols) {
            ensure((r.iter().sum::<f64>() - 1.0).abs() < 1e-12, || format!("softmax row {r:?}"))?;
        }
    }
    let logits = tape.constant(Tensor::vector(vec![1000.0, 0.0, -3.0]));
    let ce = tape.cross_entropy(logits, 0).map_err(|e| e.to_string())?;
    ensure(tape.value(ce).item() == 0.0, || format!("cross entropy at certainty {}", tape.value(ce).item()))?;

    let mut store = ParamStore::new();
    let id = store.add("w", Tensor::vector(vec![0.5, -1.5, 2.0]), true).unwrap();
    let mut adam = Adam::new(AdamConfig::default());
    for _ in 0..10 {
        store.zero_grad();
        store.accumulate_grad(id, &Tensor::zeros(&[3]));
        adam.step(&mut store).map_err(|e| e.to_string())?;
    }
    ensure(store.value(id).data() == [0.5, -1.5, 2.0], || format!("adam moved {:?}", store.value(id).data()))?;
    ensure(adam.steps() == 10, || "step counter".into())?;

    let n = 200_000;
    let ones = tape.constant(Tensor::vector(vec![1.0; n]));
    for keep in [0.5, 0.8] {
        let d = tape.dropout(ones, keep, &mut rng, true).map_err(|e| e.to_string())?;
        let mean = tape.value(d).data().iter().sum::<f64>() / n as f64;
        ensure((mean - 1.0).abs() < 0.02, || format!("dropout mean {mean} at keep {keep}"))?;
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok("softmax, cross-entropy, Adam fixpoint and dropout mean hold".into())
}

/// Id, name and check; a check returns `None` when its data is unavailable.
type Criterion = (&'static str, &'static str, fn() -> Option<Outcome>);

fn main() {
    let criteria: [Criterion; 9] = [
        ("AC1", "gradient checks", || Some(gradient_checks())),
        ("AC2", "overfit", || Some(overfit())),
        ("AC3", "sum-of-experts invariants", || Some(se_invariants())),
        ("AC4", "attention invariants", || Some(attention_invariants())),
        ("AC5", "voting worked examples", || Some(voting_examples())),
        ("AC6", "voting identities", || Some(voting_identity())),
        ("AC7", "released data reproduction", released_reproduction),
        ("AC8", "pipeline invariants", || Some(pipeline_invariants())),
        ("AC9", "numerical core", || Some(numerical_core())),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Some(Err(format!("panicked: {msg}")))
        });
        match outcome {
            Some(Ok(detail)) => println!("{id} PASS {name}: {detail}"),
            Some(Err(detail)) => {
                failed += 1;
                println!("{id} FAIL {name}: {detail}");
            }
            None => println!("{id} SKIP {name}: set MPE_RELEASED_DIR to the released data directory"),
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
