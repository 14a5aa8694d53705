use ndarray::Array2;

use super::layer::{Activation, Layer, LayerGrad, LayerOutput};
use super::loss::{cross_entropy_grad, cross_entropy_loss, one_hot};
use super::train::Trainable;
use crate::seed::Rng;
use crate::{Error, Result};

/// An ordered chain of layers whose dimensions line up.
#[derive(Debug, Clone, PartialEq)]
pub struct Stack {
    layers: Vec<Layer>,
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct StackCache {
    pub input: Array2<f64>,
    pub layers: Vec<LayerOutput>,
}

impl StackCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.layers.last().expect("stack is never empty").output
    }
}

impl Stack {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("layer stack"));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::DimensionMismatch {
                    context: "layer chain",
                    expected: pair[0].out_dim(),
                    actual: pair[1].in_dim(),
                });
            }
        }
        Ok(Stack { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map(Layer::out_dim).unwrap_or(0)
    }

    pub fn forward(&self, x: &Array2<f64>, mut dropout: Option<(f64, &mut Rng)>) -> Result<StackCache> {
        let mut outs: Vec<LayerOutput> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = outs.last().map(|o| &o.output).unwrap_or(x);
            let d = dropout.as_mut().map(|(rate, rng)| (*rate, &mut **rng));
            outs.push(layer.forward(input, d)?);
        }
        Ok(StackCache {
            input: x.clone(),
            layers: outs,
        })
    }

    /// Backpropagates `d_output` (gradient w.r.t. the final output) through the
    /// whole stack.
    pub fn backward(
        &self,
        cache: &StackCache,
        d_output: &Array2<f64>,
        need_input_grad: bool,
    ) -> (Vec<LayerGrad>, Option<Array2<f64>>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = d_output.clone();
        let mut d_input = None;
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let input = if k == 0 {
                &cache.input
            } else {
                &cache.layers[k - 1].output
            };
            let want = k > 0 || need_input_grad;
            let (g, d) = layer.backward(input, &cache.layers[k], &upstream, want);
            grads.push(g);
            match d {
                Some(d) if k > 0 => upstream = d,
                d => d_input = d,
            }
        }
        grads.reverse();
        (grads, d_input)
    }
}

/// A stack terminated by a softmax layer, trained with cross-entropy.
///
/// This is both the plain DFN and the single-branch GEDFN (when its first
/// layer carries a mask).
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    stack: Stack,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let stack = Stack::new(layers)?;
        if stack.layers.last().map(Layer::activation) != Some(Activation::Softmax) {
            return Err(Error::param("final layer of a network must be softmax"));
        }
        Ok(Network { stack })
    }

    pub fn stack(&self) -> &Stack {
        &self.stack
    }

    pub fn forward(&self, x: &Array2<f64>, dropout: Option<(f64, &mut Rng)>) -> Result<StackCache> {
        self.stack.forward(x, dropout)
    }
}

impl Trainable for Network {
    fn input_dim(&self) -> usize {
        self.stack.in_dim()
    }

    fn predict_proba(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.stack.forward(x, None)?.output().clone())
    }

    fn loss_and_gradients(
        &self,
        x: &Array2<f64>,
        labels: &[u8],
        dropout: Option<(f64, &mut Rng)>,
    ) -> Result<(f64, Vec<LayerGrad>)> {
        let y = one_hot(labels)?;
        let cache = self.stack.forward(x, dropout)?;
        let probs = cache.output();
        let loss = cross_entropy_loss(probs, &y)?;
        let (grads, _) = self.stack.backward(&cache, &cross_entropy_grad(probs, &y), false);
        Ok((loss, grads))
    }

    fn layers(&self) -> Vec<&Layer> {
        self.stack.layers.iter().collect()
    }

    fn layers_mut(&mut self) -> Vec<&mut Layer> {
        self.stack.layers.iter_mut().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use ndarray::{Array1, Axis};

    fn random_net(seed: u64, mask: Option<Array2<f64>>) -> Network {
        let mut rng = rng_from_seed(seed);
        let first = match mask {
            Some(m) => Layer::init_masked(m, Activation::Relu, &mut rng).unwrap(),
            None => Layer::init(5, 5, Activation::Relu, &mut rng),
        };
        Network::new(vec![
            first,
            Layer::init(5, 3, Activation::Relu, &mut rng),
            Layer::init(3, 2, Activation::Softmax, &mut rng),
        ])
        .unwrap()
    }

    #[test]
    fn rejects_non_chaining_layers() {
        let mut rng = rng_from_seed(0);
        let err = Network::new(vec![
            Layer::init(4, 3, Activation::Relu, &mut rng),
            Layer::init(2, 2, Activation::Softmax, &mut rng),
        ]);
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
        let no_softmax = Network::new(vec![Layer::init(4, 2, Activation::Relu, &mut rng)]);
        assert!(no_softmax.is_err());
    }

    #[test]
    fn zero_final_layer_gives_uniform_probabilities() {
        let mut rng = rng_from_seed(1);
        let net = Network::new(vec![
            Layer::init(4, 3, Activation::Relu, &mut rng),
            Layer::new(Array2::zeros((3, 2)), Array1::zeros(2), Activation::Softmax).unwrap(),
        ])
        .unwrap();
        let x = Array2::from_shape_fn((6, 4), |(i, j)| i as f64 - j as f64);
        let p = net.predict_proba(&x).unwrap();
        assert!(p.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn identity_layer_cache_equals_input() {
        let stack = Stack::new(vec![
            Layer::new(Array2::eye(3), Array1::zeros(3), Activation::Identity).unwrap()
        ])
        .unwrap();
        let x = Array2::from_shape_fn((2, 3), |(i, j)| (i * 3 + j) as f64 - 2.5);
        let cache = stack.forward(&x, None).unwrap();
        assert_eq!(cache.output(), &x);
    }

    #[test]
    fn eval_forward_is_deterministic_and_normalised() {
        let net = random_net(5, None);
        let x = Array2::from_shape_fn((7, 5), |(i, j)| ((i * 5 + j) as f64).sin());
        let a = net.predict_proba(&x).unwrap();
        let b = net.predict_proba(&x).unwrap();
        assert_eq!(a, b);
        for s in a.sum_axis(Axis(1)) {
            assert!((s - 1.0).abs() < 1e-9);
        }
        assert!(a.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn full_mask_gradients_equal_dense_gradients() {
        let dense = random_net(8, None);
        let masked = random_net(8, Some(Array2::ones((5, 5))));
        let x = Array2::from_shape_fn((4, 5), |(i, j)| ((i + 2 * j) as f64 * 0.37).cos());
        let y = [0u8, 1, 1, 0];
        let (la, ga) = dense.loss_and_gradients(&x, &y, None).unwrap();
        let (lb, gb) = masked.loss_and_gradients(&x, &y, None).unwrap();
        assert_eq!(la, lb);
        for (a, b) in ga.iter().zip(&gb) {
            assert!((&a.weight - &b.weight).iter().all(|d| d.abs() < 1e-12));
            assert!((&a.bias - &b.bias).iter().all(|d| d.abs() < 1e-12));
        }
    }
}
