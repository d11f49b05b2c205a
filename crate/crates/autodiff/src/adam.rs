use crate::error::{Error, Result};
use crate::params::ParamStore;

/// Adam hyperparameters. `Default` is the configuration from Kingma & Ba.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam with per-parameter moment buffers.
///
/// Frozen parameters (`trainable == false`) are skipped and need no gradient.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// First and second moment buffers of parameter `index`, once allocated.
    pub fn moments(&self, index: usize) -> Option<(&[f64], &[f64])> {
        Some((self.first.get(index)?.as_slice(), self.second.get(index)?.as_slice()))
    }

    /// Applies one update using the gradients accumulated in `store`.
    ///
    /// Fails without touching any parameter when a trainable parameter has
    /// no gradient.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        let missing: Vec<String> = store
            .iter()
            .filter(|(_, p)| p.trainable && p.grad.is_none())
            .map(|(_, p)| p.name.clone())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingGradients(missing));
        }

        while self.first.len() < store.len() {
            let n = store.get(crate::ParamId(self.first.len())).value.len();
            self.first.push(vec![0.0; n]);
            self.second.push(vec![0.0; n]);
        }

        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bias1 = 1.0 - beta1.powi(self.step as i32);
        let bias2 = 1.0 - beta2.powi(self.step as i32);

        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let param = store.get_mut(id);
            if !param.trainable {
                continue;
            }
            let grad = param.grad.as_ref().expect("checked above").data().to_vec();
            let m = &mut self.first[id.index()];
            let v = &mut self.second[id.index()];
            for (i, w) in param.value.data_mut().iter_mut().enumerate() {
                let g = grad[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
