use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numkernel::{affine, affine_backward, relu, relu_backward, Matrix};
use crate::{Error, Result};

/// One fully connected layer, `x·W + b` with `W` of shape `in × out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Dense {
            weight: Matrix::zeros(fan_in, fan_out),
            bias: vec![0.0; fan_out],
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        let mut layer = Dense::zeros(fan_in, fan_out);
        for w in layer.weight.as_mut_slice() {
            *w = rng.gen_range(-limit..=limit);
        }
        layer
    }
}

/// Stack of dense layers with ReLU between them and none after the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    inputs: Vec<Matrix>,
    pre_activations: Vec<Matrix>,
}

impl Mlp {
    /// `dims = [input, hidden.., output]`.
    pub fn glorot<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        Mlp {
            layers: dims.windows(2).map(|w| Dense::glorot(w[0], w[1], rng)).collect(),
        }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Mlp {
            layers: dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.weight.rows(), l.weight.cols()))
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.weight.rows())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weight.cols())
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        self.forward_traced(x).map(|(out, _)| out)
    }

    pub fn forward_traced(&self, x: &Matrix) -> Result<(Matrix, MlpTrace)> {
        if x.cols() != self.input_dim() {
            return Err(Error::dim("mlp input", x.shape(), (self.input_dim(), self.output_dim())));
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = affine(&h, &layer.weight, &layer.bias)?;
            let next = if i == last { z.clone() } else { relu(&z) };
            inputs.push(h);
            pre_activations.push(z);
            h = next;
        }
        Ok((h, MlpTrace { inputs, pre_activations }))
    }

    /// Returns per-layer gradients (same shapes as `self`) and the gradient
    /// with respect to the input.
    pub fn backward(&self, trace: &MlpTrace, grad_out: &Matrix) -> Result<(Mlp, Matrix)> {
        let last = self.layers.len() - 1;
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        let mut g = grad_out.clone();
        for i in (0..self.layers.len()).rev() {
            if i != last {
                g = relu_backward(&trace.pre_activations[i], &g)?;
            }
            let ag = affine_backward(&trace.inputs[i], &self.layers[i].weight, &g)?;
            grads.push(Dense {
                weight: ag.weight,
                bias: ag.bias,
            });
            g = ag.input;
        }
        grads.reverse();
        Ok((Mlp { layers: grads }, g))
    }

    /// `self += s * other`, layer by layer.
    pub fn add_scaled(&mut self, other: &Mlp, s: f64) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::dim("Mlp::add_scaled", (self.layers.len(), 0), (other.layers.len(), 0)));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.add_scaled(&b.weight, s)?;
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += s * y;
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.as_slice().len() + l.bias.len()).sum()
    }

    /// Parameters flattened layer by layer, weight then bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weight.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn unflatten_from(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::dim("Mlp::unflatten_from", (self.param_count(), 1), (flat.len(), 1)));
        }
        let mut at = 0;
        for l in &mut self.layers {
            let w = l.weight.as_mut_slice();
            w.copy_from_slice(&flat[at..at + w.len()]);
            at += w.len();
            let n = l.bias.len();
            l.bias.copy_from_slice(&flat[at..at + n]);
            at += n;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn last_layer_has_no_activation() {
        let mlp = Mlp {
            layers: vec![
                Dense {
                    weight: Matrix::identity(2),
                    bias: vec![0.0, 0.0],
                },
                Dense {
                    weight: Matrix::from_rows(&[[-1.0], [-1.0]]).unwrap(),
                    bias: vec![0.0],
                },
            ],
        };
        let x = Matrix::from_rows(&[[1.0, -3.0]]).unwrap();
        // hidden relu gives [1, 0], final layer is linear and may go negative
        assert_eq!(mlp.forward(&x).unwrap().as_slice(), &[-1.0]);
    }

    #[test]
    fn glorot_bounds() {
        let mut r = rng::stream(3, rng::INIT_STREAM);
        let l = Dense::glorot(10, 6, &mut r);
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(l.weight.as_slice().iter().all(|w| w.abs() <= limit));
        assert!(l.bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn flatten_roundtrip() {
        let mut r = rng::stream(3, rng::INIT_STREAM);
        let mlp = Mlp::glorot(&[3, 4, 2], &mut r);
        let mut other = mlp.zeros_like();
        other.unflatten_from(&mlp.flatten()).unwrap();
        assert_eq!(mlp, other);
    }
}
