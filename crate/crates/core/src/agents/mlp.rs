use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Dense layer, `weights` row-major with one row per output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Layer<S> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<S>,
    pub biases: Vec<S>,
}

impl<S: Scalar> Layer<S> {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![S::zero(); inputs * outputs],
            biases: vec![S::zero(); outputs],
        }
    }

    fn uniform<R: Rng + ?Sized>(inputs: usize, outputs: usize, bound: f64, rng: &mut R) -> Self {
        let mut l = Self::zeros(inputs, outputs);
        for p in l.weights.iter_mut().chain(l.biases.iter_mut()) {
            *p = S::of(rng.random_range(-bound..=bound));
        }
        l
    }

    fn params(&self) -> impl Iterator<Item = &S> {
        self.weights.iter().chain(self.biases.iter())
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut S> {
        self.weights.iter_mut().chain(self.biases.iter_mut())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Linear,
    Tanh,
}

/// Fully connected network with ReLU hidden layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Mlp<S> {
    pub layers: Vec<Layer<S>>,
    pub output: Activation,
}

/// Gradients, shaped like the network's layers.
pub type Grads<S> = Vec<Layer<S>>;

/// Activations kept by [`Mlp::forward_trace`] for backpropagation.
pub struct Trace<S> {
    acts: Vec<Vec<S>>,
}

impl<S> Trace<S> {
    pub fn output(&self) -> &[S] {
        self.acts.last().expect("trace has the input at least")
    }
}

impl<S: Scalar> Mlp<S> {
    /// Weights and biases uniform in `±1/sqrt(fan_in)`; the last layer uses
    /// `±final_bound` when given.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output: Activation, final_bound: Option<f64>, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let bound = match final_bound {
                    Some(b) if i == last => b,
                    _ => 1.0 / (w[0] as f64).sqrt(),
                };
                Layer::uniform(w[0], w[1], bound, rng)
            })
            .collect();
        Self { layers, output }
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn zero_grads(&self) -> Grads<S> {
        self.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect()
    }

    fn activate(&self, layer: usize, z: S) -> S {
        if layer + 1 < self.layers.len() {
            z.max(S::zero())
        } else {
            match self.output {
                Activation::Linear => z,
                Activation::Tanh => z.tanh(),
            }
        }
    }

    pub fn forward(&self, x: &[S]) -> Vec<S> {
        let mut a = x.to_vec();
        for (li, l) in self.layers.iter().enumerate() {
            a = self.affine(li, l, &a);
        }
        a
    }

    fn affine(&self, li: usize, l: &Layer<S>, a: &[S]) -> Vec<S> {
        debug_assert_eq!(a.len(), l.inputs);
        (0..l.outputs)
            .map(|o| {
                let row = &l.weights[o * l.inputs..(o + 1) * l.inputs];
                let z = row.iter().zip(a).fold(l.biases[o], |acc, (&w, &x)| acc + w * x);
                self.activate(li, z)
            })
            .collect()
    }

    pub fn forward_trace(&self, x: &[S]) -> Trace<S> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for (li, l) in self.layers.iter().enumerate() {
            let next = self.affine(li, l, acts.last().expect("non-empty"));
            acts.push(next);
        }
        Trace { acts }
    }

    /// Accumulates `d(out . grad_out)/d(params)` into `grads` and returns the
    /// gradient with respect to the input.
    pub fn backward(&self, trace: &Trace<S>, grad_out: &[S], grads: &mut Grads<S>) -> Vec<S> {
        let mut g = grad_out.to_vec();
        for li in (0..self.layers.len()).rev() {
            let l = &self.layers[li];
            let y = &trace.acts[li + 1];
            let x = &trace.acts[li];
            let last = li + 1 == self.layers.len();
            for (o, go) in g.iter_mut().enumerate() {
                let d = if last {
                    match self.output {
                        Activation::Linear => S::one(),
                        Activation::Tanh => S::one() - y[o] * y[o],
                    }
                } else if y[o] > S::zero() {
                    S::one()
                } else {
                    S::zero()
                };
                *go *= d;
            }
            let gl = &mut grads[li];
            let mut gx = vec![S::zero(); l.inputs];
            for (o, &delta) in g.iter().enumerate() {
                if delta == S::zero() {
                    continue;
                }
                gl.biases[o] += delta;
                let row = o * l.inputs;
                for i in 0..l.inputs {
                    gl.weights[row + i] += delta * x[i];
                    gx[i] += l.weights[row + i] * delta;
                }
            }
            g = gx;
        }
        g
    }

    /// `self <- tau * src + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, src: &Mlp<S>, tau: S) {
        let keep = S::one() - tau;
        for (dst, s) in self.layers.iter_mut().zip(&src.layers) {
            for (d, &v) in dst.params_mut().zip(s.params()) {
                *d = tau * v + keep * *d;
            }
        }
    }

    pub fn max_abs_diff(&self, other: &Mlp<S>) -> S {
        self.layers
            .iter()
            .zip(&other.layers)
            .flat_map(|(a, b)| a.params().zip(b.params()))
            .fold(S::zero(), |m, (&x, &y)| m.max((x - y).abs()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut S> {
        self.layers.iter_mut().flat_map(Layer::params_mut)
    }

    pub fn params(&self) -> impl Iterator<Item = &S> {
        self.layers.iter().flat_map(Layer::params)
    }
}

/// Every gradient entry in parameter order (matches [`Mlp::params`]).
pub fn grads_iter<S: Scalar>(g: &Grads<S>) -> impl Iterator<Item = &S> {
    g.iter().flat_map(Layer::params)
}

pub(crate) fn scale_grads<S: Scalar>(g: &mut Grads<S>, k: S) {
    for p in g.iter_mut().flat_map(Layer::params_mut) {
        *p *= k;
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Adam<S> {
    pub lr: S,
    pub beta1: S,
    pub beta2: S,
    pub eps: S,
    pub t: u64,
    m: Vec<S>,
    v: Vec<S>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(params: usize, lr: f64) -> Self {
        Self {
            lr: S::of(lr),
            beta1: S::of(0.9),
            beta2: S::of(0.999),
            eps: S::of(1e-8),
            t: 0,
            m: vec![S::zero(); params],
            v: vec![S::zero(); params],
        }
    }

    /// Gradient descent step on `net` with gradient `grads`.
    pub fn step(&mut self, net: &mut Mlp<S>, grads: &Grads<S>) {
        self.t += 1;
        let t = i32::try_from(self.t).unwrap_or(i32::MAX);
        let c1 = S::one() - self.beta1.powi(t);
        let c2 = S::one() - self.beta2.powi(t);
        for (((p, &g), m), v) in net
            .params_mut()
            .zip(grads_iter(grads))
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = self.beta1 * *m + (S::one() - self.beta1) * g;
            *v = self.beta2 * *v + (S::one() - self.beta2) * g * g;
            let mh = *m / c1;
            let vh = *v / c2;
            *p -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}
