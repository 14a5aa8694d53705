//! Deterministic feedforward training engine.
//!
//! Only the layer vocabulary needed by the graph-embedded networks is
//! supported: dense layers with an optional 0/1 connectivity mask, ReLU /
//! identity / softmax activations, inverted dropout, softmax cross-entropy and
//! Adam. Everything is `f64`.

mod adam;
mod layer;
mod loss;
mod normalize;
mod stack;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use layer::{glorot_bound, Activation, Layer, LayerGrad, LayerOutput};
pub(crate) use loss::cross_entropy_grad;
pub use loss::{cross_entropy_loss, one_hot, softmax_rows, LOG_CLIP};
pub use normalize::{zscore_fit_apply, Standardizer};
pub use stack::{Network, Stack, StackCache};
pub use train::{accuracy, train, TrainConfig, TrainReport, Trainable};

use ndarray::Array2;

use crate::{Error, Result};

pub(crate) fn ensure_finite(m: &Array2<f64>, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
