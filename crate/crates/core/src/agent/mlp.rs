//! Dense tanh network with a flat parameter vector and hand-written
//! reverse-mode gradients.
//!
//! Layer `l` stores its weights row-major as `out × in` followed by `out`
//! biases, so optimizers, target blending and checkpoints all operate on one
//! contiguous slice.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AgentError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutputActivation {
    Identity,
    /// `(tanh(a) + 1) / 2 * scale`, mapping onto `[0, scale]`.
    Squash { scale: f64 },
}

impl OutputActivation {
    #[inline]
    fn apply(&self, a: f64) -> f64 {
        match *self {
            Self::Identity => a,
            Self::Squash { scale } => (a.tanh() + 1.0) * 0.5 * scale,
        }
    }

    #[inline]
    fn derivative(&self, a: f64) -> f64 {
        match *self {
            Self::Identity => 1.0,
            Self::Squash { scale } => {
                let t = a.tanh();
                (1.0 - t * t) * 0.5 * scale
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    output: OutputActivation,
    params: Vec<f64>,
}

/// Intermediate values of a batched forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    /// `acts[0]` is the input; `acts[l + 1]` is the tanh output of hidden layer `l`.
    acts: Vec<Vec<f64>>,
    /// Final-layer pre-activations.
    logits: Vec<f64>,
    /// Final outputs, `batch × n_outputs`.
    pub output: Vec<f64>,
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, ra) = a.split_at(a.len() / 4 * 4);
    let (cb, rb) = b.split_at(ca.len());
    for (x, y) in ca.chunks_exact(4).zip(cb.chunks_exact(4)) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl Mlp {
    /// Uniform fan-in initialization; the last layer uses `±final_scale` so
    /// initial outputs sit near the activation's midpoint.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output: OutputActivation, final_scale: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "invalid layer sizes {sizes:?}");
        let mut params = Vec::with_capacity(param_count(sizes));
        let n_layers = sizes.len() - 1;
        for (l, w) in sizes.windows(2).enumerate() {
            let bound = if l + 1 == n_layers { final_scale } else { 1.0 / (w[0] as f64).sqrt() };
            for _ in 0..(w[0] * w[1] + w[1]) {
                params.push(rng.gen_range(-bound..=bound));
            }
        }
        Self { sizes: sizes.to_vec(), output, params }
    }

    pub fn zeros(sizes: &[usize], output: OutputActivation) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "invalid layer sizes {sizes:?}");
        Self { sizes: sizes.to_vec(), output, params: vec![0.0; param_count(sizes)] }
    }

    pub fn from_parts(sizes: Vec<usize>, output: OutputActivation, params: Vec<f64>) -> Result<Self, AgentError> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(AgentError::Shape(format!("invalid layer sizes {sizes:?}")));
        }
        let expected = param_count(&sizes);
        if params.len() != expected {
            return Err(AgentError::Shape(format!("expected {expected} parameters, got {}", params.len())));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(AgentError::NonFinite("network parameters"));
        }
        Ok(Self { sizes, output, params })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn n_inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// (weight offset, input width, output width) for each layer.
    fn layout(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut off = 0;
        self.sizes.windows(2).map(move |w| {
            let here = off;
            off += w[0] * w[1] + w[1];
            (here, w[0], w[1])
        })
    }

    pub fn forward_batch(&self, inputs: &[f64], batch: usize) -> ForwardCache {
        assert_eq!(inputs.len(), batch * self.n_inputs(), "input length mismatch");
        let last = self.n_layers() - 1;
        let mut acts = Vec::with_capacity(self.n_layers());
        acts.push(inputs.to_vec());
        let mut logits = Vec::new();
        for (l, (off, n_in, n_out)) in self.layout().enumerate() {
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let a_in = acts.last().unwrap();
            let mut z = vec![0.0; batch * n_out];
            for s in 0..batch {
                let x = &a_in[s * n_in..(s + 1) * n_in];
                let row = &mut z[s * n_out..(s + 1) * n_out];
                for o in 0..n_out {
                    row[o] = dot(&w[o * n_in..(o + 1) * n_in], x) + b[o];
                }
            }
            if l == last {
                logits = z;
            } else {
                z.iter_mut().for_each(|v| *v = v.tanh());
                acts.push(z);
            }
        }
        let output = logits.iter().map(|&a| self.output.apply(a)).collect();
        ForwardCache { batch, acts, logits, output }
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.forward_batch(input, 1).output
    }

    /// Accumulates `d(sum_s out_grad[s] · output[s]) / d params` into
    /// `param_grad` and returns the gradient with respect to the inputs.
    pub fn backward_batch(&self, cache: &ForwardCache, out_grad: &[f64], param_grad: &mut [f64]) -> Vec<f64> {
        let batch = cache.batch;
        assert_eq!(out_grad.len(), batch * self.n_outputs(), "output gradient length mismatch");
        assert_eq!(param_grad.len(), self.params.len(), "gradient buffer length mismatch");
        let mut delta: Vec<f64> =
            out_grad.iter().zip(&cache.logits).map(|(g, &a)| g * self.output.derivative(a)).collect();
        let layout: Vec<_> = self.layout().collect();
        for (l, &(off, n_in, n_out)) in layout.iter().enumerate().rev() {
            let a_in = &cache.acts[l];
            let w = &self.params[off..off + n_in * n_out];
            let (gw, gb) = param_grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            let mut delta_in = vec![0.0; batch * n_in];
            for s in 0..batch {
                let x = &a_in[s * n_in..(s + 1) * n_in];
                let d_row = &delta[s * n_out..(s + 1) * n_out];
                let back = &mut delta_in[s * n_in..(s + 1) * n_in];
                for (o, &d) in d_row.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    axpy(d, x, &mut gw[o * n_in..(o + 1) * n_in]);
                    gb[o] += d;
                    axpy(d, &w[o * n_in..(o + 1) * n_in], back);
                }
            }
            if l > 0 {
                // through the tanh that produced this layer's input
                for (d, &a) in delta_in.iter_mut().zip(a_in) {
                    *d *= 1.0 - a * a;
                }
            }
            delta = delta_in;
        }
        delta
    }

    /// Single-sample gradients: `(parameter gradient, input gradient)`.
    pub fn backprop(&self, input: &[f64], output_grad: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let cache = self.forward_batch(input, 1);
        let mut grad = vec![0.0; self.params.len()];
        let input_grad = self.backward_batch(&cache, output_grad, &mut grad);
        (grad, input_grad)
    }

    /// `self ← tau · source + (1 − tau) · self`, evaluated as
    /// `self + tau · (source − self)` so equal parameters stay fixed and
    /// `tau = 1` is an exact copy.
    pub fn blend_from(&mut self, source: &Mlp, tau: f64) {
        assert_eq!(self.params.len(), source.params.len(), "shape mismatch");
        if tau == 1.0 {
            self.params.copy_from_slice(&source.params);
            return;
        }
        for (t, &s) in self.params.iter_mut().zip(&source.params) {
            *t += tau * (s - *t);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}
