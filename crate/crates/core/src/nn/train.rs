use log::debug;
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::layer::{Layer, LayerGrad};
use crate::seed::{rng_from_seed, Rng};
use crate::{Error, Result};

/// A classifier the generic training loop can drive.
pub trait Trainable {
    fn input_dim(&self) -> usize;

    /// Inference-mode class probabilities (`n × 2`).
    fn predict_proba(&self, x: &Array2<f64>) -> Result<Array2<f64>>;

    /// Mean cross-entropy on the batch and gradients for every layer, in the
    /// same order as [`Trainable::layers`].
    fn loss_and_gradients(
        &self,
        x: &Array2<f64>,
        labels: &[u8],
        dropout: Option<(f64, &mut Rng)>,
    ) -> Result<(f64, Vec<LayerGrad>)>;

    fn layers(&self) -> Vec<&Layer>;

    fn layers_mut(&mut self) -> Vec<&mut Layer>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub early_stop_patience: usize,
    /// Minimum decrease in epoch loss that counts as an improvement.
    pub min_delta: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            epochs: 50,
            batch_size: 16,
            dropout_rate: 0.2,
            early_stop_patience: 5,
            min_delta: 1e-5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param(format!(
                "learning_rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::param(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size must be at least 1"));
        }
        if self.early_stop_patience == 0 {
            return Err(Error::param("early_stop_patience must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss (training-mode forward, dropout on) per epoch.
    pub loss_history: Vec<f64>,
    pub stopped_early: bool,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.loss_history.len()
    }
}

/// Mini-batch Adam training with per-epoch shuffling and early stopping on
/// the training loss. The final parameters (not the best epoch's) are kept.
///
/// The same `config.seed` always yields the same batches, dropout masks and
/// therefore bit-identical parameters.
pub fn train<M: Trainable + ?Sized>(
    model: &mut M,
    x: &Array2<f64>,
    labels: &[u8],
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    let n = x.nrows();
    if n == 0 {
        return Err(Error::Empty("training data"));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            context: "training labels",
            expected: n,
            actual: labels.len(),
        });
    }
    if x.ncols() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "training features",
            expected: model.input_dim(),
            actual: x.ncols(),
        });
    }
    if let Some(bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::InvalidLabels(format!("label {bad} is not binary")));
    }

    let mut rng = rng_from_seed(config.seed);
    let mut adam = AdamState::new(&model.layers(), AdamConfig::default());
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best = f64::INFINITY;
    let mut stale = 0usize;
    let mut stopped_early = false;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let xb = x.select(Axis(0), batch);
            let yb: Vec<u8> = batch.iter().map(|&i| labels[i]).collect();
            let dropout = (config.dropout_rate > 0.0).then_some((config.dropout_rate, &mut rng));
            let (loss, grads) = model.loss_and_gradients(&xb, &yb, dropout)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite("training loss"));
            }
            adam.step(model.layers_mut(), &grads, config.learning_rate)?;
            total += loss * batch.len() as f64;
        }
        let epoch_loss = total / n as f64;
        debug!("epoch {epoch}: loss {epoch_loss:.6}");
        history.push(epoch_loss);
        if epoch_loss < best - config.min_delta {
            best = epoch_loss;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.early_stop_patience {
                stopped_early = epoch + 1 < config.epochs;
                break;
            }
        }
    }
    Ok(TrainReport {
        loss_history: history,
        stopped_early,
    })
}

/// Fraction of rows whose argmax class equals the label.
pub fn accuracy(probs: &Array2<f64>, labels: &[u8]) -> f64 {
    let hits = probs
        .rows()
        .into_iter()
        .zip(labels)
        .filter(|(row, &y)| u8::from(row[1] > row[0]) == y)
        .count();
    hits as f64 / labels.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Network};

    fn separable(n: usize) -> (Array2<f64>, Vec<u8>) {
        let mut rng = rng_from_seed(42);
        use rand::Rng as _;
        let mut x = Array2::zeros((n, 4));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let label = (i % 2) as u8;
            let shift = if label == 1 { 1.5 } else { -1.5 };
            for j in 0..4 {
                x[[i, j]] = rng.random_range(-1.0..1.0) + if j < 2 { shift } else { 0.0 };
            }
            y.push(label);
        }
        (x, y)
    }

    fn small_net(seed: u64) -> Network {
        let mut rng = rng_from_seed(seed);
        Network::new(vec![
            Layer::init(4, 8, Activation::Relu, &mut rng),
            Layer::init(8, 2, Activation::Softmax, &mut rng),
        ])
        .unwrap()
    }

    #[test]
    fn separable_toy_reaches_full_accuracy() {
        let (x, y) = separable(40);
        let mut net = small_net(1);
        let cfg = TrainConfig {
            learning_rate: 0.01,
            epochs: 50,
            batch_size: 8,
            dropout_rate: 0.0,
            seed: 3,
            ..TrainConfig::default()
        };
        train(&mut net, &x, &y, &cfg).unwrap();
        assert_eq!(accuracy(&net.predict_proba(&x).unwrap(), &y), 1.0);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let (x, y) = separable(40);
        let mut net = small_net(2);
        let before = net.clone();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            dropout_rate: 0.0,
            ..TrainConfig::default()
        };
        let report = train(&mut net, &x, &y, &cfg).unwrap();
        assert_eq!(net, before);
        let first = report.loss_history[0];
        assert!(report.loss_history.iter().all(|l| (l - first).abs() < 1e-12));
        // flat loss trips early stopping after `patience` stale epochs
        assert_eq!(report.epochs_run(), 1 + cfg.early_stop_patience);
        assert!(report.stopped_early);
    }

    #[test]
    fn same_seed_same_history() {
        let (x, y) = separable(40);
        let cfg = TrainConfig {
            learning_rate: 0.005,
            epochs: 10,
            ..TrainConfig::default()
        };
        let mut a = small_net(4);
        let mut b = small_net(4);
        let ra = train(&mut a, &x, &y, &cfg).unwrap();
        let rb = train(&mut b, &x, &y, &cfg).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a, b);
    }

    #[test]
    fn empty_data_and_bad_config_rejected() {
        let mut net = small_net(0);
        let x = Array2::zeros((0, 4));
        assert!(matches!(
            train(&mut net, &x, &[], &TrainConfig::default()),
            Err(Error::Empty(_))
        ));
        let (x, y) = separable(4);
        let bad = TrainConfig {
            dropout_rate: 1.0,
            ..TrainConfig::default()
        };
        assert!(train(&mut net, &x, &y, &bad).is_err());
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(train(&mut net, &x, &y, &bad).is_err());
    }
}
