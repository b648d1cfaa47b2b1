//! Fully-connected networks with backpropagation and ADAM.
//!
//! Parameters live in one flat vector, layer by layer: the weight matrix
//! (row-major, `outputs × inputs`) followed by the bias vector. Gradients and
//! optimizer moments use the same layout.

mod adam;
pub mod codec;

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

pub use adam::AdamState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Tanh => libm::tanh(z),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    #[inline]
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
    hidden_activation: Activation,
    output_activation: Activation,
}

/// Activations of every layer for a batch, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct BatchCache {
    batch: usize,
    /// `activations[0]` is the input; `activations[l + 1]` is the output of layer `l`.
    activations: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
}

impl BatchCache {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Network outputs, row-major `batch × output_dim`.
    pub fn output(&self) -> &[f64] {
        self.activations
            .last()
            .expect("cache holds the input at least")
    }
}

impl Mlp {
    /// Network with every parameter zero.
    pub fn zeros(layer_sizes: &[usize], output_activation: Activation) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::Config(
                "an MLP needs at least two positive layer sizes".into(),
            ));
        }
        let count = layer_sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            params: vec![0.0; count],
            hidden_activation: Activation::Relu,
            output_activation,
        })
    }

    /// He-normal weights for ReLU layers, Xavier-normal for the output layer, zero biases.
    pub fn new<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        output_activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes, output_activation)?;
        let n_layers = net.n_layers();
        for l in 0..n_layers {
            let (fan_in, fan_out) = (net.layer_sizes[l], net.layer_sizes[l + 1]);
            let std = if l + 1 < n_layers {
                libm::sqrt(2.0 / fan_in as f64)
            } else {
                libm::sqrt(2.0 / (fan_in + fan_out) as f64)
            };
            let normal = Normal::new(0.0, std).expect("positive std");
            let (w, _) = net.layer_offsets(l);
            for p in &mut net.params[w..w + fan_in * fan_out] {
                *p = normal.sample(rng);
            }
        }
        Ok(net)
    }

    /// Multiplies the output-layer weights by `gain`.
    pub fn scale_output_layer(&mut self, gain: f64) {
        let l = self.n_layers() - 1;
        let (w, b) = self.layer_offsets(l);
        for p in &mut self.params[w..b] {
            *p *= gain;
        }
    }

    /// Builds a network from a flat parameter vector.
    pub fn from_parts(
        layer_sizes: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        params: Vec<f64>,
    ) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes, output_activation)?;
        if params.len() != net.params.len() {
            return Err(Error::Shape {
                expected: net.params.len(),
                actual: params.len(),
            });
        }
        net.params = params;
        net.hidden_activation = hidden_activation;
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        self.layer_sizes[self.layer_sizes.len() - 1]
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Start of the weights and of the biases of layer `l` in the flat vector.
    pub fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let mut offset = 0;
        for w in self.layer_sizes.windows(2).take(l) {
            offset += w[1] * (w[0] + 1);
        }
        let (inputs, outputs) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        (offset, offset + inputs * outputs)
    }

    fn activation_of(&self, l: usize) -> Activation {
        if l + 1 == self.n_layers() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut cache = self.forward_batch(input, 1)?;
        Ok(cache.activations.pop().expect("non-empty"))
    }

    /// Forward pass over `batch` row-major inputs.
    pub fn forward_batch(&self, inputs: &[f64], batch: usize) -> Result<BatchCache> {
        let expected = batch * self.input_dim();
        if inputs.len() != expected {
            return Err(Error::Shape {
                expected,
                actual: inputs.len(),
            });
        }
        let mut activations = Vec::with_capacity(self.n_layers() + 1);
        let mut pre_activations = Vec::with_capacity(self.n_layers());
        activations.push(inputs.to_vec());
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let (w, b) = self.layer_offsets(l);
            let weights = &self.params[w..b];
            let bias = &self.params[b..b + n_out];
            let mut z = Vec::with_capacity(batch * n_out);
            for _ in 0..batch {
                z.extend_from_slice(bias);
            }
            // Z (batch × out) += X (batch × in) · Wᵀ (in × out)
            gemm(
                batch,
                n_in,
                n_out,
                &activations[l],
                (n_in as isize, 1),
                weights,
                (1, n_in as isize),
                &mut z,
                1.0,
            );
            let act = self.activation_of(l);
            let y: Vec<f64> = z.iter().map(|&v| act.apply(v)).collect();
            pre_activations.push(z);
            activations.push(y);
        }
        Ok(BatchCache {
            batch,
            activations,
            pre_activations,
        })
    }

    /// Gradient of `Σ_batch output · output_grad` with respect to every parameter.
    pub fn backward(&self, cache: &BatchCache, output_grad: &[f64]) -> Result<Vec<f64>> {
        let batch = cache.batch;
        let expected = batch * self.output_dim();
        if output_grad.len() != expected {
            return Err(Error::Shape {
                expected,
                actual: output_grad.len(),
            });
        }
        if cache.activations.len() != self.n_layers() + 1
            || cache.activations[0].len() != batch * self.input_dim()
        {
            return Err(Error::Shape {
                expected: batch * self.input_dim(),
                actual: cache.activations[0].len(),
            });
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut upstream = output_grad.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let act = self.activation_of(l);
            let z = &cache.pre_activations[l];
            let y = &cache.activations[l + 1];
            let delta: Vec<f64> = upstream
                .iter()
                .zip(z.iter().zip(y))
                .map(|(&g, (&zi, &yi))| g * act.derivative(zi, yi))
                .collect();
            let (w, b) = self.layer_offsets(l);
            // dW (out × in) = δᵀ (out × batch) · X (batch × in)
            gemm(
                n_out,
                batch,
                n_in,
                &delta,
                (1, n_out as isize),
                &cache.activations[l],
                (n_in as isize, 1),
                &mut grads[w..b],
                0.0,
            );
            let gb = &mut grads[b..b + n_out];
            for row in delta.chunks_exact(n_out) {
                for (acc, d) in gb.iter_mut().zip(row) {
                    *acc += d;
                }
            }
            if l > 0 {
                // dX (batch × in) = δ (batch × out) · W (out × in)
                let mut dx = vec![0.0; batch * n_in];
                gemm(
                    batch,
                    n_out,
                    n_in,
                    &delta,
                    (n_out as isize, 1),
                    &self.params[w..b],
                    (n_in as isize, 1),
                    &mut dx,
                    0.0,
                );
                upstream = dx;
            }
        }
        Ok(grads)
    }

    /// Applies one ADAM update with loss gradients `grads`.
    pub fn adam_step(&mut self, grads: &[f64], opt: &mut AdamState) -> Result<()> {
        opt.step(&mut self.params, grads)
    }
}

/// `C = A · B + beta · C` for row-major `C` (m × n); strides are `(row, col)`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    c: &mut [f64],
    beta: f64,
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() == m * n);
    // SAFETY: the slices cover every index the strides address, checked above
    // for the two contiguous layouts used by the callers.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests;
