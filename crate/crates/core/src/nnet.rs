//! Fully-connected ReLU network with MSE loss and plain SGD.
//!
//! Weights are stored row-major per layer with shape `(out_dim, in_dim)`.
//! Hidden layers use ReLU, the output layer is linear. Everything is `f64`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("invalid layer dimensions {0:?}: need at least two layers, all positive")]
    InvalidDims(Vec<usize>),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("gradient shape does not match network shape")]
    ShapeMismatch,
    #[error("learning rate must be positive and finite, got {0}")]
    InvalidLearningRate(f64),
}

pub type Result<T> = std::result::Result<T, NetError>;

/// Network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Gradients of the mean-squared-error loss, shape-congruent with a [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub loss: f64,
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
        return Err(NetError::InvalidDims(dims.to_vec()));
    }
    Ok(())
}

impl Network {
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
    pub fn init(dims: &[usize], seed: u64) -> Result<Self> {
        Self::init_with(dims, seed, BiasInit::Zero)
    }

    /// Like [`Network::init`], with a choice of bias initialisation. Weights
    /// are drawn first for every layer, so they do not depend on `bias`.
    pub fn init_with(dims: &[usize], seed: u64, bias: BiasInit) -> Result<Self> {
        check_dims(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let bound = 1.0 / (pair[0] as f64).sqrt();
            weights.push((0..pair[0] * pair[1]).map(|_| rng.gen_range(-bound..=bound)).collect());
        }
        let biases = dims
            .windows(2)
            .map(|pair| {
                let bound = 1.0 / (pair[0] as f64).sqrt();
                match bias {
                    BiasInit::Zero => vec![0.0; pair[1]],
                    BiasInit::Uniform => (0..pair[1]).map(|_| rng.gen_range(-bound..=bound)).collect(),
                }
            })
            .collect();
        Ok(Self {
            dims: dims.to_vec(),
            weights,
            biases,
        })
    }

    /// Builds a network from explicit parameters, validating every shape.
    pub fn from_parts(dims: Vec<usize>, weights: Vec<Vec<f64>>, biases: Vec<Vec<f64>>) -> Result<Self> {
        check_dims(&dims)?;
        if weights.len() != dims.len() - 1 || biases.len() != dims.len() - 1 {
            return Err(NetError::ShapeMismatch);
        }
        for (l, pair) in dims.windows(2).enumerate() {
            if weights[l].len() != pair[0] * pair[1] || biases[l].len() != pair[1] {
                return Err(NetError::ShapeMismatch);
            }
        }
        Ok(Self {
            dims,
            weights,
            biases,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("dims validated non-empty")
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    /// Row-major `(out, in)` weight matrix of layer `l`.
    pub fn weights(&self, l: usize) -> &[f64] {
        &self.weights[l]
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        &self.biases[l]
    }

    pub fn weights_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.weights[l]
    }

    pub fn biases_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.biases[l]
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// All parameters flattened layer by layer: weights then biases of layer 0, then layer 1, ...
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    /// Inverse of [`Network::flat_params`].
    pub fn from_flat(dims: &[usize], flat: &[f64]) -> Result<Self> {
        check_dims(dims)?;
        let expected: usize = dims.windows(2).map(|p| p[0] * p[1] + p[1]).sum();
        if flat.len() != expected {
            return Err(NetError::LengthMismatch {
                expected,
                got: flat.len(),
            });
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let mut at = 0;
        for pair in dims.windows(2) {
            let nw = pair[0] * pair[1];
            weights.push(flat[at..at + nw].to_vec());
            at += nw;
            biases.push(flat[at..at + pair[1]].to_vec());
            at += pair[1];
        }
        Ok(Self {
            dims: dims.to_vec(),
            weights,
            biases,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).flatten().all(|v| v.is_finite())
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(NetError::LengthMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        Ok(())
    }

    /// Returns the activations of every layer; `acts[0]` is the input and the
    /// last entry the (linear) output.
    fn activations(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let last = self.num_layers() - 1;
        let mut acts = Vec::with_capacity(self.dims.len());
        acts.push(input.to_vec());
        for l in 0..self.num_layers() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let prev = &acts[l];
            let w = &self.weights[l];
            let mut out = self.biases[l].clone();
            for (o, slot) in out.iter_mut().enumerate() {
                let row = &w[o * n_in..(o + 1) * n_in];
                *slot += dot(row, prev);
            }
            debug_assert_eq!(out.len(), n_out);
            if l != last {
                for v in &mut out {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            acts.push(out);
        }
        acts
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        Ok(self.activations(input).pop().expect("at least one layer"))
    }

    /// Exact gradients of `mean((forward(input) - target)^2)`.
    pub fn backward_mse(&self, input: &[f64], target: &[f64]) -> Result<Gradients> {
        self.check_input(input)?;
        if target.len() != self.output_dim() {
            return Err(NetError::LengthMismatch {
                expected: self.output_dim(),
                got: target.len(),
            });
        }
        let acts = self.activations(input);
        let mut weights: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut biases: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        let loss = self.backprop(&acts, target, |l, o, delta, prev| {
            biases[l][o] += delta;
            let n_in = prev.len();
            for (g, &a) in weights[l][o * n_in..(o + 1) * n_in].iter_mut().zip(prev) {
                *g += delta * a;
            }
        });
        Ok(Gradients {
            weights,
            biases,
            loss,
        })
    }

    /// Walks the layers backwards, handing `(layer, out_index, delta, prev_activations)`
    /// to `sink` for every output neuron with a non-zero delta. Returns the loss.
    fn backprop(&self, acts: &[Vec<f64>], target: &[f64], mut sink: impl FnMut(usize, usize, f64, &[f64])) -> f64 {
        let out = acts.last().expect("output layer");
        let n = out.len() as f64;
        let mut loss = 0.0;
        let mut delta: Vec<f64> = out
            .iter()
            .zip(target)
            .map(|(p, t)| {
                let d = p - t;
                loss += d * d;
                2.0 * d / n
            })
            .collect();
        loss /= n;

        for l in (0..self.num_layers()).rev() {
            let n_in = self.dims[l];
            let prev = &acts[l];
            let w = &self.weights[l];
            let mut next_delta = if l > 0 { vec![0.0; n_in] } else { Vec::new() };
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                if l > 0 {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    for (nd, &wv) in next_delta.iter_mut().zip(row) {
                        *nd += d * wv;
                    }
                }
                sink(l, o, d, prev);
            }
            if l > 0 {
                // ReLU derivative, taken as 0 at the kink.
                for (nd, &a) in next_delta.iter_mut().zip(prev) {
                    if a <= 0.0 {
                        *nd = 0.0;
                    }
                }
            }
            delta = next_delta;
        }
        loss
    }

    /// `param -= lr * grad` for every parameter.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(NetError::InvalidLearningRate(lr));
        }
        let congruent = grads.weights.len() == self.weights.len()
            && grads.biases.len() == self.biases.len()
            && grads.weights.iter().zip(&self.weights).all(|(g, w)| g.len() == w.len())
            && grads.biases.iter().zip(&self.biases).all(|(g, b)| g.len() == b.len());
        if !congruent {
            return Err(NetError::ShapeMismatch);
        }
        for (w, g) in self.weights.iter_mut().zip(&grads.weights) {
            for (p, d) in w.iter_mut().zip(g) {
                *p -= lr * d;
            }
        }
        for (b, g) in self.biases.iter_mut().zip(&grads.biases) {
            for (p, d) in b.iter_mut().zip(g) {
                *p -= lr * d;
            }
        }
        Ok(())
    }

    /// Fused `backward_mse` + `sgd_step` on one sample. Produces the same
    /// parameters as the two-call sequence, without materialising gradients.
    /// Returns the pre-update loss.
    pub fn fit_sample(&mut self, input: &[f64], target: &[f64], lr: f64) -> Result<f64> {
        self.check_input(input)?;
        if target.len() != self.output_dim() {
            return Err(NetError::LengthMismatch {
                expected: self.output_dim(),
                got: target.len(),
            });
        }
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(NetError::InvalidLearningRate(lr));
        }
        let acts = self.activations(input);
        // Deltas are computed from the pre-update weights, so collect the
        // updates first and apply them afterwards.
        let mut updates: Vec<(usize, usize, f64)> = Vec::new();
        let loss = self.backprop(&acts, target, |l, o, delta, _| updates.push((l, o, delta)));
        for (l, o, delta) in updates {
            let n_in = self.dims[l];
            let prev = &acts[l];
            self.biases[l][o] -= lr * delta;
            for (p, &a) in self.weights[l][o * n_in..(o + 1) * n_in].iter_mut().zip(prev) {
                *p -= lr * (delta * a);
            }
        }
        Ok(loss)
    }

    /// Pre-activation values of every non-output layer, used by gradient
    /// checks to skip coordinates sitting on a ReLU kink.
    pub fn hidden_preactivations(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_input(input)?;
        let mut out = Vec::new();
        let mut prev = input.to_vec();
        for l in 0..self.num_layers() - 1 {
            let n_in = self.dims[l];
            let pre: Vec<f64> = (0..self.dims[l + 1])
                .map(|o| self.biases[l][o] + dot(&self.weights[l][o * n_in..(o + 1) * n_in], &prev))
                .collect();
            prev = pre.iter().map(|&v| v.max(0.0)).collect();
            out.push(pre);
        }
        Ok(out)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Bias initialisation.
///
/// With zero biases and non-negative inputs every hidden unit is
/// positively homogeneous, so `f(2x) = 2 f(x)` until the biases move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasInit {
    Zero,
    /// Same bound as the weights.
    Uniform,
}

impl std::str::FromStr for BiasInit {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "zero" => Ok(Self::Zero),
            "uniform" => Ok(Self::Uniform),
            _ => Err(format!("unknown bias init `{s}`")),
        }
    }
}

impl BiasInit {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::Uniform => "uniform",
        }
    }
}

/// Index of the largest value; the first index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(dims: &[usize], w: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> Network {
        Network::from_parts(dims.to_vec(), w, b).unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        let a = Network::init(&[2, 512, 4], 7).unwrap();
        let b = Network::init(&[2, 512, 4], 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.weights(0).len() + a.weights(1).len(), 2 * 512 + 512 * 4);
        assert_ne!(a, Network::init(&[2, 512, 4], 8).unwrap());
    }

    #[test]
    fn init_shapes_intersection_arch() {
        let n = Network::init(&[16, 1024, 2], 0).unwrap();
        assert_eq!(n.weights(0).len(), 1024 * 16);
        assert_eq!(n.weights(1).len(), 2 * 1024);
        assert!(n.biases(0).iter().chain(n.biases(1)).all(|&b| b == 0.0));
        let bound = 1.0 / 16f64.sqrt();
        assert!(n.weights(0).iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn init_minimal() {
        let n = Network::init(&[1, 1], 3).unwrap();
        assert_eq!(n.weights(0).len(), 1);
        assert_eq!(n.biases(0), &[0.0]);
    }

    #[test]
    fn init_rejects_bad_dims() {
        assert!(matches!(Network::init(&[], 0), Err(NetError::InvalidDims(_))));
        assert!(matches!(Network::init(&[3], 0), Err(NetError::InvalidDims(_))));
        assert!(matches!(Network::init(&[2, 0, 4], 0), Err(NetError::InvalidDims(_))));
    }

    #[test]
    fn zero_network_outputs_zero() {
        let n = net(&[3, 5, 2], vec![vec![0.0; 15], vec![0.0; 10]], vec![vec![0.0; 5], vec![0.0; 2]]);
        assert_eq!(n.forward(&[1.0, -2.0, 7.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_layer_linear() {
        let n = net(&[2, 1], vec![vec![1.0, -1.0]], vec![vec![0.0]]);
        assert_eq!(n.forward(&[3.0, 5.0]).unwrap(), vec![-2.0]);
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let n = Network::init(&[2, 4, 1], 0).unwrap();
        assert_eq!(
            n.forward(&[1.0]),
            Err(NetError::LengthMismatch { expected: 2, got: 1 })
        );
    }

    #[test]
    fn perfect_prediction_has_zero_gradient() {
        let n = Network::init(&[2, 16, 4], 1).unwrap();
        let x = [1.0, 2.0];
        let y = n.forward(&x).unwrap();
        let g = n.backward_mse(&x, &y).unwrap();
        assert_eq!(g.loss, 0.0);
        assert!(g.weights.iter().chain(&g.biases).flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_hand_gradient() {
        let n = net(&[1, 1], vec![vec![2.0]], vec![vec![0.0]]);
        let g = n.backward_mse(&[1.0], &[0.0]).unwrap();
        assert_eq!(g.loss, 4.0);
        assert_eq!(g.weights[0][0], 4.0);
        assert_eq!(g.biases[0][0], 4.0);
    }

    #[test]
    fn backward_rejects_wrong_target() {
        let n = Network::init(&[2, 4, 3], 0).unwrap();
        assert!(matches!(
            n.backward_mse(&[0.0, 0.0], &[1.0]),
            Err(NetError::LengthMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn sgd_arithmetic() {
        let mut n = net(&[1, 1], vec![vec![2.0]], vec![vec![0.0]]);
        let g = n.backward_mse(&[1.0], &[0.0]).unwrap();
        n.sgd_step(&g, 0.1).unwrap();
        assert!((n.weights(0)[0] - 1.6).abs() < 1e-15);
    }

    #[test]
    fn sgd_zero_gradient_is_noop() {
        let mut n = Network::init(&[2, 8, 4], 5).unwrap();
        let before = n.clone();
        let g = Gradients {
            weights: vec![vec![0.0; 16], vec![0.0; 32]],
            biases: vec![vec![0.0; 8], vec![0.0; 4]],
            loss: 0.0,
        };
        n.sgd_step(&g, 0.5).unwrap();
        assert_eq!(n, before);
    }

    #[test]
    fn sgd_rejects_shape_mismatch_and_bad_lr() {
        let mut n = Network::init(&[2, 8, 4], 5).unwrap();
        let other = Network::init(&[2, 4, 4], 5).unwrap();
        let g = other.backward_mse(&[1.0, 1.0], &[0.0; 4]).unwrap();
        assert_eq!(n.sgd_step(&g, 0.1), Err(NetError::ShapeMismatch));
        let g = n.backward_mse(&[1.0, 1.0], &[0.0; 4]).unwrap();
        assert!(matches!(n.sgd_step(&g, 0.0), Err(NetError::InvalidLearningRate(_))));
    }

    #[test]
    fn fused_step_matches_two_call_sequence() {
        let mut a = Network::init(&[3, 32, 4], 11).unwrap();
        let mut b = a.clone();
        let x = [0.3, -1.2, 2.0];
        let t = [1.0, -3.0, 0.5, 20.0];
        for _ in 0..5 {
            let g = a.backward_mse(&x, &t).unwrap();
            a.sgd_step(&g, 1e-3).unwrap();
            b.fit_sample(&x, &t, 1e-3).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn loss_non_increasing_on_fixed_sample() {
        let mut n = Network::init(&[2, 512, 4], 7).unwrap();
        let x = [2.0, 2.0];
        let t = [-20.0, -100.0, 17.0, -100.0];
        let mut prev = f64::INFINITY;
        for _ in 0..200 {
            let loss = n.fit_sample(&x, &t, 1e-3).unwrap();
            assert!(loss <= prev, "loss went up: {prev} -> {loss}");
            prev = loss;
        }
        assert!(n.is_finite());
    }

    #[test]
    fn flat_round_trip() {
        let n = Network::init(&[2, 6, 3], 2).unwrap();
        let back = Network::from_flat(n.dims(), &n.flat_params()).unwrap();
        assert_eq!(n, back);
        assert!(Network::from_flat(n.dims(), &[0.0; 3]).is_err());
    }

    #[test]
    fn argmax_first_wins_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 2.0, 0.0]), 1);
        assert_eq!(argmax(&[5.0, 5.0, 5.0, 5.0]), 0);
        assert_eq!(argmax(&[0.0, 2.0, 2.0]), 1);
    }
}
