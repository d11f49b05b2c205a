use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::params::ParamStore;
use crate::tape::{Tape, Var};

/// Magnitude below which relative error is measured against this floor
/// instead of the gradient itself.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    pub epsilon: f64,
    /// Coordinates sampled per parameter; smaller parameters are checked in
    /// full.
    pub coords_per_param: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            coords_per_param: 16,
            tolerance: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParamCheck {
    pub name: String,
    pub coords_checked: usize,
    pub max_rel_error: f64,
    pub worst_coord: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares tape gradients of `loss_fn` against central differences on a
/// random subset of coordinates of every trainable parameter.
///
/// `loss_fn` must be deterministic (no dropout). Stored gradients are reset
/// before and after the check; parameter values are restored exactly.
pub fn grad_check<F>(store: &mut ParamStore, mut loss_fn: F, config: &GradCheckConfig) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &ParamStore) -> Result<Var>,
{
    store.zero_grad();
    let mut tape = Tape::new();
    let loss = loss_fn(&mut tape, store)?;
    tape.backward(loss)?.accumulate(store);
    let analytic: Vec<Option<Vec<f64>>> = store
        .iter()
        .map(|(_, p)| p.grad.as_ref().map(|g| g.data().to_vec()))
        .collect();
    store.zero_grad();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let loss = loss_fn(&mut tape, store)?;
        Ok(tape.value(loss).item())
    };

    let mut params = Vec::new();
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        if !store.get(id).trainable {
            continue;
        }
        let n = store.value(id).len();
        let coords: Vec<usize> = if n <= config.coords_per_param {
            (0..n).collect()
        } else {
            let mut c = sample(&mut rng, n, config.coords_per_param).into_vec();
            c.sort_unstable();
            c
        };
        let grad = analytic[id.index()].clone().unwrap_or_else(|| vec![0.0; n]);
        let mut check = ParamCheck {
            name: store.get(id).name.clone(),
            coords_checked: coords.len(),
            max_rel_error: 0.0,
            worst_coord: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for c in coords {
            let orig = store.value(id).data()[c];
            store.value_mut(id).data_mut()[c] = orig + config.epsilon;
            let plus = eval(store)?;
            store.value_mut(id).data_mut()[c] = orig - config.epsilon;
            let minus = eval(store)?;
            store.value_mut(id).data_mut()[c] = orig;
            let numeric = (plus - minus) / (2.0 * config.epsilon);
            let err = relative_error(grad[c], numeric);
            if err >= check.max_rel_error {
                check.max_rel_error = err;
                check.worst_coord = c;
                check.analytic = grad[c];
                check.numeric = numeric;
            }
        }
        params.push(check);
    }
    let max_rel_error = params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        params,
        max_rel_error,
        tolerance: config.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor;

    #[test]
    fn relative_error_uses_floor_for_tiny_values() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1e-9, 0.0) - 1e-3).abs() < 1e-15);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn check_restores_values_and_clears_grads() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::vector(vec![0.5, -0.25, 2.0]), true).unwrap();
        let before = store.value(w).clone();
        let report = grad_check(
            &mut store,
            |tape, store| {
                let wv = tape.param(store, w);
                let t = tape.tanh(wv);
                Ok(tape.sum(t))
            },
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(store.value(w), &before);
        assert!(store.grad(w).is_none());
    }
}
