use mpe_autodiff::{grad_check, GradCheckConfig, GradCheckReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EncodedPair, Model, ModelConfig, ModelError, ModelKind, Mode, Vocab};

/// Random fixture for a finite-difference check of a whole model.
#[derive(Clone, Debug)]
pub struct SyntheticCheck {
    pub kind: ModelKind,
    /// Used for both the word vectors and the LSTM state.
    pub dim: usize,
    pub vocab_size: usize,
    /// Number of items whose summed loss is checked; at least one.
    pub items: usize,
    pub seed: u64,
}

impl SyntheticCheck {
    pub fn new(kind: ModelKind, dim: usize, seed: u64) -> Self {
        SyntheticCheck {
            kind,
            dim,
            vocab_size: 30,
            items: 2,
            seed,
        }
    }
}

/// Builds a small random model and items (four premises of one or two
/// tokens, hypotheses of two to five), perturbs every parameter away from its
/// initialization and compares tape gradients of the summed cross-entropy to
/// central differences.
pub fn synthetic_gradcheck(check: &SyntheticCheck, config: &GradCheckConfig) -> Result<GradCheckReport, ModelError> {
    if check.items == 0 {
        return Err(ModelError::Config("gradient check needs at least one item".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(check.seed);
    let vocab = Vocab::new((2..check.vocab_size.max(3)).map(|i| format!("w{i}")));
    let model_config = ModelConfig {
        embed_dim: check.dim,
        hidden: check.dim,
        keep_prob: 1.0,
        seed: check.seed,
        ..ModelConfig::new(check.kind)
    };
    let mut model = Model::new(model_config, vocab, None)?;
    let ids: Vec<_> = model.params.ids().collect();
    for id in ids {
        for v in model.params.value_mut(id).data_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    let v = model.vocab.len();
    let word = |rng: &mut ChaCha8Rng| rng.random_range(0..v);
    let items: Vec<(EncodedPair, usize)> = (0..check.items)
        .map(|_| {
            let premises = (0..4)
                .map(|p| {
                    let len = if p == 3 { 1 } else { rng.random_range(1..=2) };
                    (0..len).map(|_| word(&mut rng)).collect()
                })
                .collect();
            let hyp_len = rng.random_range(2..=5);
            let hypothesis = (0..hyp_len).map(|_| word(&mut rng)).collect();
            (EncodedPair { premises, hypothesis }, rng.random_range(0..3))
        })
        .collect();

    for (input, _) in &items {
        model.logits(input)?;
    }

    let Model { net, params, .. } = &mut model;
    let report = grad_check(
        params,
        |tape, store| {
            let mut total = None;
            for (input, class) in &items {
                let out = net.forward(store, tape, input, Mode::Eval).map_err(|e| match e {
                    ModelError::Autodiff(a) => a,
                    other => unreachable!("inputs validated above: {other}"),
                })?;
                let loss = tape.cross_entropy(out.logits, *class)?;
                total = Some(match total {
                    Some(t) => tape.add(t, loss)?,
                    None => loss,
                });
            }
            Ok(total.expect("at least one item"))
        },
        config,
    )?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_models_pass_at_dim_8() {
        for kind in ModelKind::ALL {
            let report = synthetic_gradcheck(&SyntheticCheck::new(kind, 8, 7), &GradCheckConfig::default()).unwrap();
            assert!(report.passed(), "{kind}: {report:#?}");
            assert!(report.params.iter().all(|p| p.coords_checked > 0));
        }
    }

    #[test]
    fn zero_items_is_an_error() {
        let check = SyntheticCheck {
            items: 0,
            ..SyntheticCheck::new(ModelKind::Lstm, 4, 0)
        };
        assert!(synthetic_gradcheck(&check, &GradCheckConfig::default()).is_err());
    }
}
