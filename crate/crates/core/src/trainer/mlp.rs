//! Reverse-mode gradients and Adam for [`Network`] parameters.

use rand::Rng;

use crate::matrix::Matrix;
use crate::network::{Activation, Layer, Network};

/// Per-layer activations from one forward pass: `acts[0]` is the input and
/// `acts[l + 1]` the output of layer `l`.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    acts: Vec<Vec<f64>>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Runs `net` on `x`, keeping every layer output. Uses the same arithmetic
/// as [`Network::forward`].
pub fn forward_tape<'t>(net: &Network, x: &[f64], tape: &'t mut Tape) -> &'t [f64] {
    let n = net.layers().len();
    tape.acts.resize_with(n + 1, Vec::new);
    tape.acts[0].clear();
    tape.acts[0].extend_from_slice(x);
    for (l, layer) in net.layers().iter().enumerate() {
        let (done, rest) = tape.acts.split_at_mut(l + 1);
        let out = &mut rest[0];
        out.resize(layer.output_dim(), 0.0);
        layer.apply_into(&done[l], out);
    }
    tape.output()
}

/// Gradient (or any per-parameter quantity) with the same shapes as a network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// `(weights row-major, biases)` per layer.
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers()
                .iter()
                .map(|l| (vec![0.0; l.weights().as_slice().len()], vec![0.0; l.biases().len()]))
                .collect(),
        }
    }

    pub fn fill(&mut self, v: f64) {
        for (w, b) in &mut self.layers {
            w.fill(v);
            b.fill(v);
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.values().map(|g| g * g).sum()
    }

    pub fn scale(&mut self, s: f64) {
        for (w, b) in &mut self.layers {
            w.iter_mut().chain(b.iter_mut()).for_each(|g| *g *= s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }

    /// Values in parameter order: layer by layer, weights then biases.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|(w, b)| w.iter().chain(b)).copied()
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(|(w, b)| w.len() + b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Scratch buffers for [`backward`].
#[derive(Debug, Default)]
pub struct BackwardScratch {
    delta: Vec<f64>,
    prev: Vec<f64>,
}

/// Accumulates `∂L/∂θ` into `grads` given `dout = ∂L/∂output` for the pass
/// recorded in `tape`.
pub fn backward(net: &Network, tape: &Tape, dout: &[f64], grads: &mut Gradients, s: &mut BackwardScratch) {
    s.delta.clear();
    s.delta.extend_from_slice(dout);
    for (l, layer) in net.layers().iter().enumerate().rev() {
        let out = &tape.acts[l + 1];
        if layer.activation() == Activation::Relu {
            for (d, &o) in s.delta.iter_mut().zip(out) {
                if o <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        let input = &tape.acts[l];
        let cols = layer.input_dim();
        let (gw, gb) = &mut grads.layers[l];
        for (j, &d) in s.delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            gb[j] += d;
            for (g, &x) in gw[j * cols..(j + 1) * cols].iter_mut().zip(input) {
                *g += d * x;
            }
        }
        if l > 0 {
            s.prev.clear();
            s.prev.resize(cols, 0.0);
            let w = layer.weights();
            for (j, &d) in s.delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (p, &wji) in s.prev.iter_mut().zip(w.row(j)) {
                    *p += wji * d;
                }
            }
            std::mem::swap(&mut s.delta, &mut s.prev);
        }
    }
}

/// Mutable reference to the `index`-th parameter in [`Gradients::values`] order.
pub fn parameter_mut(net: &mut Network, mut index: usize) -> &mut f64 {
    for layer in net.layers_mut() {
        let nw = layer.weights().as_slice().len();
        if index < nw {
            return &mut layer.weights_mut().as_mut_slice()[index];
        }
        index -= nw;
        let nb = layer.biases().len();
        if index < nb {
            return &mut layer.biases_mut()[index];
        }
        index -= nb;
    }
    panic!("parameter index out of range");
}

/// Parameter values in [`Gradients::values`] order.
pub fn parameters(net: &Network) -> impl Iterator<Item = f64> + '_ {
    net.layers()
        .iter()
        .flat_map(|l| l.weights().as_slice().iter().chain(l.biases()))
        .copied()
}

pub fn is_finite(net: &Network) -> bool {
    net.layers()
        .iter()
        .all(|l| l.weights().as_slice().iter().chain(l.biases()).all(|v| v.is_finite()))
}

/// Dense network with ReLU hidden layers and an identity output. Weights are
/// uniform in `±1/√fan_in`, the output layer additionally scaled by
/// `output_scale`; biases start at zero.
pub fn init_network(sizes: &[usize], output_scale: f64, rng: &mut impl Rng) -> Network {
    let n = sizes.len() - 1;
    let layers = (0..n)
        .map(|l| {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let scale = if l + 1 == n { output_scale } else { 1.0 };
            let data = (0..fan_in * fan_out)
                .map(|_| scale * rng.random_range(-bound..bound))
                .collect();
            let activation = if l + 1 == n { Activation::Identity } else { Activation::Relu };
            Layer::new(Matrix::from_row_major(fan_out, fan_in, data).expect("shape"), vec![0.0; fan_out], activation)
                .expect("finite initial weights")
        })
        .collect();
    Network::new(layers).expect("compatible layer sizes")
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    t: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &Network, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    /// One descent step along `grads`.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) {
        self.t = self.t.saturating_add(1);
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);
        for (l, layer) in net.layers_mut().iter_mut().enumerate() {
            let (gw, gb) = &grads.layers[l];
            let (mw, mb) = &mut self.m.layers[l];
            let (vw, vb) = &mut self.v.layers[l];
            let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
                for i in 0..p.len() {
                    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                    p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                }
            };
            update(layer.weights_mut().as_mut_slice(), gw, mw, vw);
            update(layer.biases_mut(), gb, mb, vb);
        }
    }
}
