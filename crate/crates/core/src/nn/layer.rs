use ndarray::{Array1, Array2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::ensure_finite;
use super::loss::softmax_rows;
use crate::seed::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
    Softmax,
}

impl Activation {
    fn apply(self, z: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Relu => z.mapv(|v| v.max(0.0)),
            Activation::Identity => z.clone(),
            Activation::Softmax => softmax_rows(z),
        }
    }
}

/// Uniform initialisation bound `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// A fully connected layer `act(X · W + b)` with an optional structural mask.
///
/// When a mask is present the stored weight is kept pre-multiplied by it, so
/// every masked-out position holds an exact zero at all times. Forward passes
/// therefore compute `X (W ⊙ Ã)` without materialising the product again.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weight: Array2<f64>,
    bias: Array1<f64>,
    mask: Option<Array2<f64>>,
    activation: Activation,
}

/// Gradients of one layer, shaped like its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Result of a single layer forward pass.
#[derive(Debug, Clone)]
pub struct LayerOutput {
    pub pre_activation: Array2<f64>,
    /// Activated output after dropout (if any).
    pub output: Array2<f64>,
    /// Inverted-dropout multipliers (0 or `1/(1-rate)`), when dropout ran.
    pub dropout: Option<Array2<f64>>,
}

impl Layer {
    pub fn new(weight: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.ncols() {
            return Err(Error::DimensionMismatch {
                context: "layer bias",
                expected: weight.ncols(),
                actual: bias.len(),
            });
        }
        ensure_finite(&weight, "layer weight")?;
        if !bias.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("layer bias"));
        }
        Ok(Layer {
            weight,
            bias,
            mask: None,
            activation,
        })
    }

    /// Attaches a square 0/1 mask and zeroes the weights it excludes.
    pub fn with_mask(mut self, mask: Array2<f64>) -> Result<Self> {
        if mask.dim() != self.weight.dim() || mask.nrows() != mask.ncols() {
            return Err(Error::DimensionMismatch {
                context: "layer mask",
                expected: self.weight.nrows(),
                actual: mask.nrows(),
            });
        }
        if mask.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::param("mask entries must be 0 or 1"));
        }
        self.weight *= &mask;
        self.mask = Some(mask);
        Ok(self)
    }

    /// Dense layer with uniform Glorot weights and zero bias.
    pub fn init(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut Rng) -> Self {
        let bound = glorot_bound(in_dim, out_dim);
        let weight = Array2::from_shape_fn((in_dim, out_dim), |_| rng.random_range(-bound..=bound));
        Layer {
            weight,
            bias: Array1::zeros(out_dim),
            mask: None,
            activation,
        }
    }

    /// Masked `p × p` layer. Weights are drawn for every position (so the RNG
    /// stream matches the dense layer of the same shape) and then masked.
    pub fn init_masked(mask: Array2<f64>, activation: Activation, rng: &mut Rng) -> Result<Self> {
        let (rows, cols) = mask.dim();
        Layer::init(rows, cols, activation, rng).with_mask(mask)
    }

    pub fn in_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn weight(&self) -> &Array2<f64> {
        &self.weight
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    pub fn mask(&self) -> Option<&Array2<f64>> {
        self.mask.as_ref()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Replaces the weight matrix; masked positions are forced back to zero.
    pub fn set_weight(&mut self, weight: Array2<f64>) -> Result<()> {
        if weight.dim() != self.weight.dim() {
            return Err(Error::DimensionMismatch {
                context: "set_weight",
                expected: self.weight.len(),
                actual: weight.len(),
            });
        }
        ensure_finite(&weight, "layer weight")?;
        self.weight = weight;
        self.apply_mask();
        Ok(())
    }

    pub fn set_bias(&mut self, bias: Array1<f64>) -> Result<()> {
        if bias.len() != self.bias.len() {
            return Err(Error::DimensionMismatch {
                context: "set_bias",
                expected: self.bias.len(),
                actual: bias.len(),
            });
        }
        self.bias = bias;
        Ok(())
    }

    pub(crate) fn params_mut(&mut self) -> (&mut Array2<f64>, &mut Array1<f64>) {
        (&mut self.weight, &mut self.bias)
    }

    pub(crate) fn apply_mask(&mut self) {
        if let Some(mask) = &self.mask {
            self.weight *= mask;
        }
    }

    /// `X · (W ⊙ Ã) + b`.
    pub fn pre_activation(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.in_dim() {
            return Err(Error::DimensionMismatch {
                context: "layer input",
                expected: self.in_dim(),
                actual: x.ncols(),
            });
        }
        ensure_finite(x, "layer input")?;
        Ok(x.dot(&self.weight) + &self.bias)
    }

    /// Full forward pass. Dropout is only drawn when `dropout` is given, the
    /// rate is positive and the layer is not a softmax output.
    pub fn forward(&self, x: &Array2<f64>, dropout: Option<(f64, &mut Rng)>) -> Result<LayerOutput> {
        let pre_activation = self.pre_activation(x)?;
        let mut output = self.activation.apply(&pre_activation);
        let mut kept = None;
        if let Some((rate, rng)) = dropout {
            if rate > 0.0 && self.activation != Activation::Softmax {
                let keep = 1.0 - rate;
                let scale = 1.0 / keep;
                let m = Array2::from_shape_fn(output.dim(), |_| if rng.random::<f64>() < keep { scale } else { 0.0 });
                output *= &m;
                kept = Some(m);
            }
        }
        Ok(LayerOutput {
            pre_activation,
            output,
            dropout: kept,
        })
    }

    /// Backpropagates `d_output` (gradient w.r.t. this layer's post-dropout
    /// output). Returns the parameter gradient and, when requested, the
    /// gradient w.r.t. the layer input.
    pub fn backward(
        &self,
        input: &Array2<f64>,
        out: &LayerOutput,
        d_output: &Array2<f64>,
        need_input_grad: bool,
    ) -> (LayerGrad, Option<Array2<f64>>) {
        let mut d_act = d_output.clone();
        if let Some(m) = &out.dropout {
            d_act *= m;
        }
        let d_pre = match self.activation {
            Activation::Identity => d_act,
            Activation::Relu => {
                ndarray::Zip::from(&mut d_act)
                    .and(&out.pre_activation)
                    .for_each(|d, &z| {
                        if z <= 0.0 {
                            *d = 0.0;
                        }
                    });
                d_act
            }
            Activation::Softmax => {
                // out.output holds the probabilities (no dropout on softmax).
                let p = &out.output;
                let dot = (p * &d_act).sum_axis(Axis(1)).insert_axis(Axis(1));
                p * &(d_act - &dot)
            }
        };
        let mut weight = input.t().dot(&d_pre);
        if let Some(mask) = &self.mask {
            weight *= mask;
        }
        let bias = d_pre.sum_axis(Axis(0));
        let d_input = need_input_grad.then(|| d_pre.dot(&self.weight.t()));
        (LayerGrad { weight, bias }, d_input)
    }
}

impl LayerGrad {
    pub fn zeros_like(layer: &Layer) -> Self {
        LayerGrad {
            weight: Array2::zeros(layer.weight.dim()),
            bias: Array1::zeros(layer.bias.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use ndarray::array;

    #[test]
    fn masked_forward_hand_example() {
        let layer = Layer::new(array![[1.0, 1.0], [1.0, 1.0]], array![0.0, 0.0], Activation::Relu)
            .unwrap()
            .with_mask(array![[1.0, 1.0], [0.0, 1.0]])
            .unwrap();
        let out = layer.forward(&array![[1.0, 2.0]], None).unwrap();
        assert_eq!(out.output, array![[1.0, 3.0]]);
    }

    #[test]
    fn all_ones_mask_matches_dense() {
        let mut rng = rng_from_seed(3);
        let dense = Layer::init(4, 4, Activation::Relu, &mut rng);
        let masked = dense.clone().with_mask(Array2::ones((4, 4))).unwrap();
        let x = Array2::from_shape_fn((3, 4), |(i, j)| (i as f64) - 0.7 * j as f64);
        let a = dense.forward(&x, None).unwrap().output;
        let b = masked.forward(&x, None).unwrap().output;
        assert_eq!(a, b);
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let layer = Layer::new(Array2::zeros((3, 2)), Array1::zeros(2), Activation::Relu).unwrap();
        let x = array![[1.0, -2.0, 3.0]];
        assert_eq!(layer.forward(&x, None).unwrap().output, Array2::<f64>::zeros((1, 2)));
    }

    #[test]
    fn dimension_mismatch_and_nan_rejected() {
        let layer = Layer::new(Array2::zeros((3, 2)), Array1::zeros(2), Activation::Relu).unwrap();
        assert!(matches!(
            layer.forward(&array![[1.0, 2.0]], None),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            layer.forward(&array![[1.0, f64::NAN, 0.0]], None),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn bad_mask_rejected() {
        let layer = Layer::new(Array2::zeros((2, 2)), Array1::zeros(2), Activation::Relu).unwrap();
        assert!(layer.clone().with_mask(array![[1.0, 0.5], [0.0, 1.0]]).is_err());
        assert!(layer.with_mask(Array2::ones((3, 3))).is_err());
    }

    #[test]
    fn masked_weight_gradient_is_zero() {
        let mut rng = rng_from_seed(11);
        let mask = array![[1.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 1.0, 1.0]];
        let layer = Layer::init_masked(mask.clone(), Activation::Identity, &mut rng).unwrap();
        let x = Array2::from_shape_fn((5, 3), |(i, j)| (i * 3 + j) as f64 * 0.1 - 0.4);
        let out = layer.forward(&x, None).unwrap();
        let d = Array2::ones((5, 3));
        let (g, _) = layer.backward(&x, &out, &d, false);
        for ((i, j), &m) in mask.indexed_iter() {
            if m == 0.0 {
                assert_eq!(g.weight[[i, j]], 0.0);
                assert_eq!(layer.weight()[[i, j]], 0.0);
            }
        }
    }

    #[test]
    fn inverted_dropout_is_unbiased() {
        let layer = Layer::new(array![[1.0, 0.5, -0.2]], array![0.1, 0.0, 2.0], Activation::Relu).unwrap();
        let x = array![[1.5]];
        let clean = layer.forward(&x, None).unwrap().output;
        let mut rng = rng_from_seed(99);
        let rate = 0.2;
        let draws = 10_000;
        let mut sum = Array2::<f64>::zeros(clean.dim());
        let mut sumsq = Array2::<f64>::zeros(clean.dim());
        for _ in 0..draws {
            let o = layer.forward(&x, Some((rate, &mut rng))).unwrap().output;
            sumsq += &(&o * &o);
            sum += &o;
        }
        let n = draws as f64;
        for ((i, j), &c) in clean.indexed_iter() {
            let mean = sum[[i, j]] / n;
            let var = (sumsq[[i, j]] / n - mean * mean).max(0.0);
            let se = (var / n).sqrt();
            assert!(
                (mean - c).abs() <= 3.0 * se + 1e-12,
                "unit {j}: {mean} vs {c} (se {se})"
            );
        }
    }
}
