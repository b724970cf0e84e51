/*
Copyright 2026 The masr Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
//! A small fully connected network with tanh hidden layers, batched
//! forward/backward passes and an Adam optimizer.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Fully connected layers; hidden layers use tanh, the last layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

/// Activations kept from a forward pass for backpropagation.
pub struct ForwardCache {
    /// `activations[0]` is the input batch; the last entry is the linear output.
    pub activations: Vec<DMatrix<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &DMatrix<f64> {
        self.activations.last().expect("at least one layer")
    }
}

pub struct Gradients {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(layer_sizes: &[usize], rng: &mut R) -> Self {
        assert!(layer_sizes.len() >= 2, "need input and output sizes");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(DMatrix::from_fn(fan_out, fan_in, |_, _| rng.gen_range(-limit..limit)));
            biases.push(DVector::zeros(fan_out));
        }
        Self { weights, biases }
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.weights[0].ncols()];
        sizes.extend(self.weights.iter().map(|w| w.nrows()));
        sizes
    }

    pub fn input_size(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn output_size(&self) -> usize {
        self.weights.last().map(|w| w.nrows()).unwrap_or(0)
    }

    /// Forward pass over a batch stored column-wise.
    pub fn forward(&self, input: DMatrix<f64>) -> ForwardCache {
        let last = self.weights.len() - 1;
        let mut activations = Vec::with_capacity(self.weights.len() + 1);
        activations.push(input);
        for (k, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w * activations.last().expect("nonempty");
            for mut col in z.column_iter_mut() {
                col += b;
            }
            if k < last {
                z.apply(|v| *v = v.tanh());
            }
            activations.push(z);
        }
        ForwardCache { activations }
    }

    /// Backpropagates `d_output` (gradient w.r.t. the linear output).
    pub fn backward(&self, cache: &ForwardCache, d_output: DMatrix<f64>) -> Gradients {
        let layers = self.weights.len();
        let mut dw = vec![DMatrix::zeros(0, 0); layers];
        let mut db = vec![DVector::zeros(0); layers];
        let mut delta = d_output;
        for k in (0..layers).rev() {
            let input = &cache.activations[k];
            dw[k] = &delta * input.transpose();
            db[k] = delta.column_sum();
            if k > 0 {
                let mut next = self.weights[k].transpose() * &delta;
                next.zip_apply(input, |g, a| *g *= 1.0 - a * a);
                delta = next;
            }
        }
        Gradients {
            weights: dw,
            biases: db,
        }
    }
}

/// Adam with the usual defaults for the moment decay rates.
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m_w: Vec<DMatrix<f64>>,
    v_w: Vec<DMatrix<f64>>,
    m_b: Vec<DVector<f64>>,
    v_b: Vec<DVector<f64>>,
}

impl Adam {
    pub fn new(net: &Mlp, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m_w: net.weights.iter().map(|w| DMatrix::zeros(w.nrows(), w.ncols())).collect(),
            v_w: net.weights.iter().map(|w| DMatrix::zeros(w.nrows(), w.ncols())).collect(),
            m_b: net.biases.iter().map(|b| DVector::zeros(b.len())).collect(),
            v_b: net.biases.iter().map(|b| DVector::zeros(b.len())).collect(),
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) {
        self.step += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let lr = self.learning_rate * (1.0 - b2.powi(self.step)).sqrt() / (1.0 - b1.powi(self.step));
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                p[i] -= lr * m[i] / (v[i].sqrt() + eps);
            }
        };
        for k in 0..net.weights.len() {
            update(
                net.weights[k].as_mut_slice(),
                grads.weights[k].as_slice(),
                self.m_w[k].as_mut_slice(),
                self.v_w[k].as_mut_slice(),
            );
            update(
                net.biases[k].as_mut_slice(),
                grads.biases[k].as_slice(),
                self.m_b[k].as_mut_slice(),
                self.v_b[k].as_mut_slice(),
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[3, 5, 4, 2], &mut rng);
        let x = DMatrix::from_fn(3, 4, |_, _| rng.gen_range(-1.0..1.0));
        // scalar objective: sum of squared outputs / 2
        let objective = |n: &Mlp| n.forward(x.clone()).output().iter().map(|v| 0.5 * v * v).sum::<f64>();
        let cache = net.forward(x.clone());
        let grads = net.backward(&cache, cache.output().clone());
        let h = 1e-6;
        for k in 0..net.weights.len() {
            for idx in 0..net.weights[k].len() {
                let mut plus = net.clone();
                plus.weights[k].as_mut_slice()[idx] += h;
                let mut minus = net.clone();
                minus.weights[k].as_mut_slice()[idx] -= h;
                let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
                assert!((fd - grads.weights[k].as_slice()[idx]).abs() < 1e-7);
            }
            for idx in 0..net.biases[k].len() {
                let mut plus = net.clone();
                plus.biases[k][idx] += h;
                let mut minus = net.clone();
                minus.biases[k][idx] -= h;
                let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
                assert!((fd - grads.biases[k][idx]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn adam_fits_a_line() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = Mlp::new(&[1, 8, 1], &mut rng);
        let mut opt = Adam::new(&net, 1e-2);
        let x = DMatrix::from_fn(1, 32, |_, j| j as f64 / 16.0 - 1.0);
        let y = x.map(|v| 0.5 * v - 0.2);
        for _ in 0..2000 {
            let cache = net.forward(x.clone());
            let d = (cache.output() - &y) / 32.0;
            let g = net.backward(&cache, d);
            opt.step(&mut net, &g);
        }
        let err = (net.forward(x.clone()).output() - &y).abs().max();
        assert!(err < 0.02, "max error {err}");
    }
}
