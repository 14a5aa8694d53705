use ndarray::{Array1, Array2, Zip};

use super::layer::{Layer, LayerGrad};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment accumulators, one pair per layer.
#[derive(Debug, Clone)]
pub struct AdamState {
    config: AdamConfig,
    first_moment: Vec<(Array2<f64>, Array1<f64>)>,
    second_moment: Vec<(Array2<f64>, Array1<f64>)>,
    step: u64,
}

impl AdamState {
    pub fn new(layers: &[&Layer], config: AdamConfig) -> Self {
        let zeros: Vec<_> = layers
            .iter()
            .map(|l| (Array2::zeros(l.weight().dim()), Array1::zeros(l.bias().len())))
            .collect();
        AdamState {
            config,
            first_moment: zeros.clone(),
            second_moment: zeros,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update. Masked layers are re-masked afterwards.
    pub fn step(&mut self, mut layers: Vec<&mut Layer>, grads: &[LayerGrad], lr: f64) -> Result<()> {
        if layers.len() != grads.len() || layers.len() != self.first_moment.len() {
            return Err(Error::DimensionMismatch {
                context: "adam layer count",
                expected: self.first_moment.len(),
                actual: grads.len(),
            });
        }
        for (layer, g) in layers.iter().zip(grads) {
            if layer.weight().dim() != g.weight.dim() || layer.bias().len() != g.bias.len() {
                return Err(Error::DimensionMismatch {
                    context: "adam gradient shape",
                    expected: layer.weight().len(),
                    actual: g.weight.len(),
                });
            }
        }
        self.step += 1;
        let AdamConfig { beta1, beta2, epsilon } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
        };
        for (k, layer) in layers.iter_mut().enumerate() {
            let (w, b) = layer.params_mut();
            let (mw, mb) = &mut self.first_moment[k];
            let (vw, vb) = &mut self.second_moment[k];
            Zip::from(w)
                .and(mw)
                .and(vw)
                .and(&grads[k].weight)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            Zip::from(b)
                .and(mb)
                .and(vb)
                .and(&grads[k].bias)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            layer.apply_mask();
        }
        Ok(())
    }
}
