//! Fully connected Q-network with rectifier hidden layers and hand-written
//! backpropagation of the squared Bellman error.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::env::ACTIONS;
use super::PlannerState;
use crate::error::{Error, Result};

pub const WEIGHTS_SCHEMA: &str = "satuav.qnet.v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major `n_out x n_in`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    fn new<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let bound = (6.0 / n_in as f64).sqrt();
        Self {
            n_in,
            n_out,
            weights: (0..n_in * n_out).map(|_| rng.random_range(-bound..bound)).collect(),
            biases: vec![0.0; n_out],
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            n_in: self.n_in,
            n_out: self.n_out,
            weights: vec![0.0; self.weights.len()],
            biases: vec![0.0; self.biases.len()],
        }
    }

    fn forward_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.n_out {
            let row = &self.weights[o * self.n_in..(o + 1) * self.n_in];
            let mut acc = self.biases[o];
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            out.push(acc);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetwork {
    pub schema: String,
    pub layers: Vec<Dense>,
    /// Input normalization `[d_max, v_max]`; distances beyond `d_max` are
    /// presented as `d_max`.
    pub input_scale: [f64; 2],
}

/// One replay entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: PlannerState,
    pub action: usize,
    pub reward: f64,
    pub next_state: PlannerState,
    pub terminal: bool,
}

/// Gradients with the same layout as the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }
}

impl QNetwork {
    /// `2 → hidden → hidden → 11` with He-uniform weights and zero biases.
    pub fn new<R: Rng + ?Sized>(hidden: usize, d_max: f64, v_max: f64, rng: &mut R) -> Self {
        Self {
            schema: WEIGHTS_SCHEMA.to_string(),
            layers: vec![
                Dense::new(2, hidden, rng),
                Dense::new(hidden, hidden, rng),
                Dense::new(hidden, ACTIONS, rng),
            ],
            input_scale: [d_max, v_max],
        }
    }

    pub fn features(&self, s: &PlannerState) -> [f64; 2] {
        let [d_max, v_max] = self.input_scale;
        [s.d.clamp(0.0, d_max) / d_max, s.v / v_max]
    }

    pub fn q_values(&self, s: &PlannerState) -> Vec<f64> {
        let mut a = self.features(s).to_vec();
        let mut b = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward_into(&a, &mut b);
            if i < last {
                b.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut a, &mut b);
        }
        a
    }

    /// Highest-valued action; ties go to the smaller acceleration.
    pub fn greedy_action(&self, s: &PlannerState) -> usize {
        argmax(&self.q_values(s))
    }

    pub fn max_q(&self, s: &PlannerState) -> f64 {
        self.q_values(s).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Flat view of all parameters, layer by layer, weights then biases.
    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
            .collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.biases.iter_mut()) {
                *w = it.next().expect("parameter vector too short");
            }
        }
    }

    /// Mean half squared error `1/(2B) Σ (Q(s_i, a_i) − y_i)²` over the batch.
    pub fn loss(&self, batch: &[Transition], targets: &[f64]) -> f64 {
        let n = batch.len() as f64;
        batch
            .iter()
            .zip(targets)
            .map(|(t, y)| {
                let e = self.q_values(&t.state)[t.action] - y;
                e * e
            })
            .sum::<f64>()
            / (2.0 * n)
    }

    /// Loss and its gradient with respect to every weight and bias. The
    /// targets are constants (computed from the target network).
    pub fn loss_and_gradients(&self, batch: &[Transition], targets: &[f64]) -> (f64, Gradients) {
        let mut grads = Gradients {
            layers: self.layers.iter().map(Dense::zeros_like).collect(),
        };
        let n = batch.len() as f64;
        let last = self.layers.len() - 1;
        let mut loss = 0.0;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        let mut delta = Vec::new();
        let mut prev_delta = Vec::new();

        for (t, y) in batch.iter().zip(targets) {
            acts.clear();
            acts.push(self.features(&t.state).to_vec());
            for (i, layer) in self.layers.iter().enumerate() {
                let mut out = Vec::with_capacity(layer.n_out);
                layer.forward_into(&acts[i], &mut out);
                if i < last {
                    out.iter_mut().for_each(|v| *v = v.max(0.0));
                }
                acts.push(out);
            }
            let err = acts[last + 1][t.action] - y;
            loss += err * err;

            delta.clear();
            delta.resize(ACTIONS, 0.0);
            delta[t.action] = err / n;

            for i in (0..self.layers.len()).rev() {
                let layer = &self.layers[i];
                let g = &mut grads.layers[i];
                let input = &acts[i];
                for o in 0..layer.n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    g.biases[o] += d;
                    let row = &mut g.weights[o * layer.n_in..(o + 1) * layer.n_in];
                    for (gw, x) in row.iter_mut().zip(input) {
                        *gw += d * x;
                    }
                }
                if i == 0 {
                    break;
                }
                prev_delta.clear();
                prev_delta.resize(layer.n_in, 0.0);
                for o in 0..layer.n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
                    for (pd, w) in prev_delta.iter_mut().zip(row) {
                        *pd += d * w;
                    }
                }
                // Rectifier derivative on the hidden activation feeding layer i.
                for (pd, a) in prev_delta.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *pd = 0.0;
                    }
                }
                std::mem::swap(&mut delta, &mut prev_delta);
            }
        }
        (loss / (2.0 * n), grads)
    }

    pub fn apply_sgd(&mut self, grads: &Gradients, lr: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, gw) in l.weights.iter_mut().zip(&g.weights) {
                *w -= lr * gw;
            }
            for (b, gb) in l.biases.iter_mut().zip(&g.biases) {
                *b -= lr * gb;
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: QNetwork = serde_json::from_str(text).map_err(|e| Error::Weights(e.to_string()))?;
        if net.schema != WEIGHTS_SCHEMA {
            return Err(Error::Weights(format!(
                "schema `{}` is not `{WEIGHTS_SCHEMA}`",
                net.schema
            )));
        }
        let mut n_in = 2;
        for (i, l) in net.layers.iter().enumerate() {
            if l.n_in != n_in
                || l.weights.len() != l.n_in * l.n_out
                || l.biases.len() != l.n_out
            {
                return Err(Error::Weights(format!("layer {i} has inconsistent dimensions")));
            }
            n_in = l.n_out;
        }
        if net.layers.is_empty() || n_in != ACTIONS {
            return Err(Error::Weights(format!("output size must be {ACTIONS}")));
        }
        if !net.is_finite() || !net.input_scale.iter().all(|s| *s > 0.0) {
            return Err(Error::Weights("non-finite or non-positive values".into()));
        }
        Ok(net)
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Adam moment estimates for one network.
#[derive(Debug, Clone)]
pub(crate) struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub(crate) fn new(params: usize) -> Self {
        Self {
            m: vec![0.0; params],
            v: vec![0.0; params],
            t: 0,
        }
    }

    pub(crate) fn step(&mut self, net: &mut QNetwork, grads: &Gradients, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        let mut params = net.params();
        for (i, g) in grads.flat().into_iter().enumerate() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * g;
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + Self::EPS);
        }
        net.set_params(&params);
    }
}
