//! Stochastic UABS policy: a tanh MLP with a softmax head over the 9 actions.
//!
//! Parameters live in one flat vector. Each layer stores its weight matrix
//! row-major (one row per output unit) followed by its bias vector.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::env::Action;

pub const N_ACTIONS: usize = Action::COUNT;

/// Floor applied to probabilities before taking logs in losses.
pub const PROB_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyError {
    DimensionMismatch { expected: usize, got: usize },
    ParamLength { expected: usize, got: usize },
    OutputDim(usize),
}

impl fmt::Display for PolicyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyError::DimensionMismatch { expected, got } => {
                write!(f, "feature vector has length {got}, policy expects {expected}")
            }
            PolicyError::ParamLength { expected, got } => {
                write!(f, "parameter vector has length {got}, architecture needs {expected}")
            }
            PolicyError::OutputDim(d) => write!(f, "output dimension must be {N_ACTIONS}, got {d}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyArch {
    pub input_dim: usize,
    /// Hidden layer widths; empty means a linear softmax policy.
    pub hidden: Vec<usize>,
    pub output_dim: usize,
}

impl PolicyArch {
    pub fn new(input_dim: usize, hidden: Vec<usize>) -> Self {
        PolicyArch { input_dim, hidden, output_dim: N_ACTIONS }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.output_dim != N_ACTIONS {
            return Err(PolicyError::OutputDim(self.output_dim));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every layer, input to output.
    pub fn layers(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let widths: Vec<usize> = core::iter::once(self.input_dim)
            .chain(self.hidden.iter().copied())
            .chain(core::iter::once(self.output_dim))
            .collect();
        (0..widths.len() - 1).map(move |l| (widths[l], widths[l + 1]))
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(|(i, o)| i * o + o).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub theta: Vec<f64>,
    pub arch: PolicyArch,
}

/// Glorot-uniform weights, zero biases.
pub fn init_params<R: Rng + ?Sized>(arch: &PolicyArch, rng: &mut R) -> PolicyParams {
    let mut theta = Vec::with_capacity(arch.param_count());
    for (fan_in, fan_out) in arch.layers() {
        let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        theta.extend((0..fan_in * fan_out).map(|_| rng.gen_range(-limit..=limit)));
        theta.extend(core::iter::repeat_n(0.0, fan_out));
    }
    PolicyParams { theta, arch: arch.clone() }
}

/// Per-layer activations kept for the backward pass.
struct Trace {
    /// `acts[0]` is the input; `acts[l]` the tanh output of hidden layer `l`.
    acts: Vec<Vec<f64>>,
    logits: [f64; N_ACTIONS],
}

impl PolicyParams {
    pub fn new(theta: Vec<f64>, arch: PolicyArch) -> Result<Self, PolicyError> {
        arch.validate()?;
        let expected = arch.param_count();
        if theta.len() != expected {
            return Err(PolicyError::ParamLength { expected, got: theta.len() });
        }
        Ok(PolicyParams { theta, arch })
    }

    pub fn zeros(arch: &PolicyArch) -> Self {
        PolicyParams { theta: vec![0.0; arch.param_count()], arch: arch.clone() }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.theta.iter().map(|v| v * v).sum())
    }

    fn forward(&self, features: &[f64]) -> Result<Trace, PolicyError> {
        if features.len() != self.arch.input_dim {
            return Err(PolicyError::DimensionMismatch {
                expected: self.arch.input_dim,
                got: features.len(),
            });
        }
        let n_layers = self.arch.hidden.len() + 1;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        acts.push(features.to_vec());
        let mut logits = [0.0; N_ACTIONS];
        let mut offset = 0;
        for (l, (fan_in, fan_out)) in self.arch.layers().enumerate() {
            let w = &self.theta[offset..offset + fan_in * fan_out];
            let b = &self.theta[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let input = &acts[l];
            let pre = (0..fan_out).map(|o| {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                b[o] + row.iter().zip(input).map(|(wi, xi)| wi * xi).sum::<f64>()
            });
            if l + 1 == n_layers {
                for (z, v) in logits.iter_mut().zip(pre) {
                    *z = v;
                }
            } else {
                let h: Vec<f64> = pre.map(libm::tanh).collect();
                acts.push(h);
            }
        }
        Ok(Trace { acts, logits })
    }

    pub fn logits(&self, features: &[f64]) -> Result<[f64; N_ACTIONS], PolicyError> {
        Ok(self.forward(features)?.logits)
    }

    pub fn log_probs(&self, features: &[f64]) -> Result<[f64; N_ACTIONS], PolicyError> {
        Ok(log_softmax(&self.forward(features)?.logits))
    }

    /// `pi(. | features)`.
    pub fn action_probs(&self, features: &[f64]) -> Result<[f64; N_ACTIONS], PolicyError> {
        Ok(softmax(&self.forward(features)?.logits))
    }

    /// `grad_theta log pi(a | features)`.
    pub fn log_prob_grad(&self, features: &[f64], a: Action) -> Result<Vec<f64>, PolicyError> {
        let mut g = vec![0.0; self.theta.len()];
        self.accumulate_log_prob_grad(features, a, 1.0, &mut g)?;
        Ok(g)
    }

    /// Adds `scale * grad log pi(a | features)` into `grad` and returns
    /// the probability `pi(a | features)`.
    pub fn accumulate_log_prob_grad(
        &self,
        features: &[f64],
        a: Action,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<f64, PolicyError> {
        self.accumulate_log_prob_grad_with(features, a, |_| scale, grad)
    }

    /// Like [`accumulate_log_prob_grad`](Self::accumulate_log_prob_grad) but
    /// the scale is computed from `pi(a | features)` after the forward pass.
    pub fn accumulate_log_prob_grad_with<F: FnOnce(f64) -> f64>(
        &self,
        features: &[f64],
        a: Action,
        scale: F,
        grad: &mut [f64],
    ) -> Result<f64, PolicyError> {
        let trace = self.forward(features)?;
        let probs = softmax(&trace.logits);
        let pa = probs[a.index()];
        let scale = scale(pa);
        if scale != 0.0 {
            let mut delta: Vec<f64> = probs.iter().map(|p| -p * scale).collect();
            delta[a.index()] += scale;
            self.backward(&trace, delta, grad);
        }
        Ok(pa)
    }

    /// Backpropagates `delta = d(objective)/d(logits)` into `grad`.
    fn backward(&self, trace: &Trace, mut delta: Vec<f64>, grad: &mut [f64]) {
        let layers: Vec<(usize, usize)> = self.arch.layers().collect();
        let mut offsets = Vec::with_capacity(layers.len());
        let mut off = 0;
        for &(i, o) in &layers {
            offsets.push(off);
            off += i * o + o;
        }
        for l in (0..layers.len()).rev() {
            let (fan_in, fan_out) = layers[l];
            let base = offsets[l];
            let input = &trace.acts[l];
            for o in 0..fan_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[base + o * fan_in..base + (o + 1) * fan_in];
                for (g, x) in row.iter_mut().zip(input) {
                    *g += d * x;
                }
                grad[base + fan_in * fan_out + o] += d;
            }
            if l == 0 {
                break;
            }
            let w = &self.theta[base..base + fan_in * fan_out];
            let mut below = vec![0.0; fan_in];
            for o in 0..fan_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for (b, wi) in below.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                    *b += d * wi;
                }
            }
            for (b, h) in below.iter_mut().zip(input) {
                *b *= 1.0 - h * h;
            }
            delta = below;
        }
    }
}

fn log_softmax(z: &[f64; N_ACTIONS]) -> [f64; N_ACTIONS] {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + libm::log(z.iter().map(|v| libm::exp(v - m)).sum::<f64>());
    let mut out = [0.0; N_ACTIONS];
    for (o, v) in out.iter_mut().zip(z) {
        *o = v - lse;
    }
    out
}

fn softmax(z: &[f64; N_ACTIONS]) -> [f64; N_ACTIONS] {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; N_ACTIONS];
    let mut total = 0.0;
    for (o, v) in out.iter_mut().zip(z) {
        *o = libm::exp(v - m);
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
    out
}

/// Draws an action from `probs` using one uniform variate; returns it with
/// its probability.
pub fn sample_action<R: Rng + ?Sized>(rng: &mut R, probs: &[f64; N_ACTIONS]) -> (Action, f64) {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        last = i;
        acc += p;
        if u < acc {
            return (Action::ALL[i], p);
        }
    }
    // rounding left u above the cumulative sum
    (Action::ALL[last], probs[last])
}
