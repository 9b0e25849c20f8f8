//! Dense feed-forward networks with analytic backpropagation, and the
//! diagonal-Gaussian policy head built from two of them (one for the
//! state mean, one for the log-variances).
//!
//! This is deliberately minimal: tanh hidden layers, linear outputs,
//! f64 throughout, no autodiff. Every gradient here is checked against
//! central finite differences in the tests.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NeuralError {
    #[error("input length {got} does not match layer size {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("network needs at least an input and an output layer")]
    TooFewLayers,
    #[error("layer size must be positive")]
    ZeroWidth,
    #[error("parameter vector length {got} does not match architecture ({expected})")]
    ParamCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    /// row-major `out_dim x in_dim`
    w: Vec<f64>,
    b: Vec<f64>,
}

impl DenseLayer {
    fn affine(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.out_dim {
            let mut acc = self.b[o];
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            for (wi, xi) in row.iter().zip(input) {
                acc += wi * xi;
            }
            out.push(acc);
        }
    }
}

/// Multi-layer perceptron: tanh on hidden layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    layers: Vec<DenseLayer>,
}

/// Per-layer activations kept from a forward pass for backprop.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Vec<f64>,
    /// post-activation output of every layer
    outputs: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().expect("at least one layer")
    }
}

/// Gradients of a scalar with respect to every parameter, flat in the
/// same order as [`Mlp::params_flat`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradients {
    pub flat: Vec<f64>,
}

impl MlpGradients {
    pub fn norm_inf(&self) -> f64 {
        self.flat.iter().fold(0.0f64, |m, g| m.max(g.abs()))
    }
}

impl Mlp {
    fn check_sizes(sizes: &[usize]) -> Result<(), NeuralError> {
        if sizes.len() < 2 {
            return Err(NeuralError::TooFewLayers);
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(NeuralError::ZeroWidth);
        }
        Ok(())
    }

    /// Xavier-uniform initialization, biases zero.
    pub fn xavier(sizes: &[usize], rng: &mut impl Rng) -> Result<Self, NeuralError> {
        Self::check_sizes(sizes)?;
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for win in sizes.windows(2) {
            let (fan_in, fan_out) = (win[0], win[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w = (0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)).collect();
            layers.push(DenseLayer { in_dim: fan_in, out_dim: fan_out, w, b: vec![0.0; fan_out] });
        }
        Ok(Self { sizes: sizes.to_vec(), layers })
    }

    /// All-zero parameters; forward output is identically zero.
    pub fn zeros(sizes: &[usize]) -> Result<Self, NeuralError> {
        Self::check_sizes(sizes)?;
        let layers = sizes
            .windows(2)
            .map(|win| DenseLayer {
                in_dim: win[0],
                out_dim: win[1],
                w: vec![0.0; win[0] * win[1]],
                b: vec![0.0; win[1]],
            })
            .collect();
        Ok(Self { sizes: sizes.to_vec(), layers })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("checked at construction")
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Parameters flattened layer by layer, weights row-major then biases.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<(), NeuralError> {
        if flat.len() != self.param_count() {
            return Err(NeuralError::ParamCount { expected: self.param_count(), got: flat.len() });
        }
        let mut at = 0;
        for l in &mut self.layers {
            let wn = l.w.len();
            l.w.copy_from_slice(&flat[at..at + wn]);
            at += wn;
            let bn = l.b.len();
            l.b.copy_from_slice(&flat[at..at + bn]);
            at += bn;
        }
        Ok(())
    }

    pub fn from_params(sizes: &[usize], flat: &[f64]) -> Result<Self, NeuralError> {
        let mut net = Self::zeros(sizes)?;
        net.set_params_flat(flat)?;
        Ok(net)
    }

    /// Adds `scale * delta` to the flat parameter vector.
    pub fn add_scaled(&mut self, delta: &[f64], scale: f64) -> Result<(), NeuralError> {
        if delta.len() != self.param_count() {
            return Err(NeuralError::ParamCount { expected: self.param_count(), got: delta.len() });
        }
        let mut at = 0;
        for l in &mut self.layers {
            for w in &mut l.w {
                *w += scale * delta[at];
                at += 1;
            }
            for b in &mut l.b {
                *b += scale * delta[at];
                at += 1;
            }
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NeuralError> {
        let cache = self.forward_cached(input)?;
        Ok(cache.outputs.into_iter().last().expect("at least one layer"))
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache, NeuralError> {
        if input.len() != self.input_dim() {
            return Err(NeuralError::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let n_layers = self.layers.len();
        let mut outputs = Vec::with_capacity(n_layers);
        let mut cur = input.to_vec();
        for (li, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.out_dim);
            layer.affine(&cur, &mut z);
            if li + 1 < n_layers {
                for v in &mut z {
                    *v = v.tanh();
                }
            }
            outputs.push(z.clone());
            cur = z;
        }
        Ok(ForwardCache { input: input.to_vec(), outputs })
    }

    /// Exact gradients of `output . output_grad` with respect to all
    /// parameters and the input, from a cached forward pass.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_grad: &[f64],
    ) -> Result<(MlpGradients, Vec<f64>), NeuralError> {
        if output_grad.len() != self.output_dim() {
            return Err(NeuralError::DimensionMismatch {
                expected: self.output_dim(),
                got: output_grad.len(),
            });
        }
        let n_layers = self.layers.len();
        let mut flat = vec![0.0; self.param_count()];
        let mut offsets = Vec::with_capacity(n_layers);
        let mut at = 0;
        for l in &self.layers {
            offsets.push(at);
            at += l.w.len() + l.b.len();
        }
        let mut delta = output_grad.to_vec(); // dL/d(post-activation of layer li)
        for li in (0..n_layers).rev() {
            let layer = &self.layers[li];
            // through the activation (linear on the last layer)
            let mut dz = delta.clone();
            if li + 1 < n_layers {
                for (d, a) in dz.iter_mut().zip(&cache.outputs[li]) {
                    *d *= 1.0 - a * a;
                }
            }
            let below: &[f64] = if li == 0 { &cache.input } else { &cache.outputs[li - 1] };
            let base = offsets[li];
            for o in 0..layer.out_dim {
                let row = base + o * layer.in_dim;
                for (i, x) in below.iter().enumerate() {
                    flat[row + i] = dz[o] * x;
                }
                flat[base + layer.w.len() + o] = dz[o];
            }
            // propagate to the layer below: dL/d(below) = W^T dz
            let mut dbelow = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (i, wi) in row.iter().enumerate() {
                    dbelow[i] += wi * dz[o];
                }
            }
            delta = dbelow;
        }
        Ok((MlpGradients { flat }, delta))
    }
}

/// Adam optimizer over a flat parameter vector. Used for the supervised
/// warm start and to scale-normalize the online actor/critic updates,
/// whose raw magnitudes span many orders of magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64, n_params: usize) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    /// One descent step: returns the delta to *add* to the parameters
    /// for gradient `grad` of the loss (the minus sign is included).
    pub fn step(&mut self, grad: &[f64]) -> Vec<f64> {
        assert_eq!(grad.len(), self.m.len(), "gradient length fixed at construction");
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        let mut delta = Vec::with_capacity(grad.len());
        for i in 0..grad.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / b1t;
            let vhat = self.v[i] / b2t;
            delta.push(-self.lr * mhat / (vhat.sqrt() + self.eps));
        }
        delta
    }
}

/// Diagonal-Gaussian policy: one network for the mean, one for the
/// per-dimension log-variances, clamped so the covariance stays
/// positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub mean_net: Mlp,
    pub logvar_net: Mlp,
    pub logvar_min: f64,
    pub logvar_max: f64,
}

pub const DEFAULT_LOGVAR_MIN: f64 = -10.0;
pub const DEFAULT_LOGVAR_MAX: f64 = 2.0;

/// Result of one policy evaluation.
#[derive(Debug, Clone)]
pub struct PolicyEval {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// clamped log-variances
    pub logvar: Vec<f64>,
    /// 1.0 where the raw log-variance was strictly inside the clamp
    clamp_gate: Vec<f64>,
    mean_cache: ForwardCache,
    logvar_cache: ForwardCache,
}

/// Density and its parameter gradients at a sampled state.
#[derive(Debug, Clone)]
pub struct PolicyGradients {
    pub density: f64,
    pub log_density: f64,
    /// d(density)/d(mean-net params), flat
    pub mean_net: Vec<f64>,
    /// d(density)/d(logvar-net params), flat
    pub logvar_net: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new(mean_net: Mlp, logvar_net: Mlp) -> Self {
        Self {
            mean_net,
            logvar_net,
            logvar_min: DEFAULT_LOGVAR_MIN,
            logvar_max: DEFAULT_LOGVAR_MAX,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.mean_net.output_dim()
    }

    /// Mean and per-dimension variance at the given input.
    pub fn eval(&self, input: &[f64]) -> Result<PolicyEval, NeuralError> {
        let mean_cache = self.mean_net.forward_cached(input)?;
        let logvar_cache = self.logvar_net.forward_cached(input)?;
        let mean = mean_cache.output().to_vec();
        let mut logvar = logvar_cache.output().to_vec();
        let mut clamp_gate = vec![1.0; logvar.len()];
        for (l, g) in logvar.iter_mut().zip(clamp_gate.iter_mut()) {
            if *l <= self.logvar_min {
                *l = self.logvar_min;
                *g = 0.0;
            } else if *l >= self.logvar_max {
                *l = self.logvar_max;
                *g = 0.0;
            }
        }
        let variance = logvar.iter().map(|l| l.exp()).collect();
        Ok(PolicyEval { mean, variance, logvar, clamp_gate, mean_cache, logvar_cache })
    }

    /// Draws `mean + sigma .* eps` with standard-normal `eps`
    /// (Box-Muller over the supplied RNG; deterministic per seed).
    pub fn sample(&self, input: &[f64], rng: &mut impl Rng) -> Result<Vec<f64>, NeuralError> {
        let eval = self.eval(input)?;
        Ok(sample_from(&eval, rng))
    }

    /// Gaussian density at `x` and its gradients with respect to both
    /// networks' parameters (the score scaled by the density, chained
    /// through each network).
    pub fn log_density_and_grads(
        &self,
        input: &[f64],
        x: &[f64],
    ) -> Result<PolicyGradients, NeuralError> {
        let eval = self.eval(input)?;
        if x.len() != eval.mean.len() {
            return Err(NeuralError::DimensionMismatch { expected: eval.mean.len(), got: x.len() });
        }
        let log_density = log_density(&eval, x);
        let density = log_density.exp();
        let (dmu, dlv) = score_vectors(&eval, x);
        let gmu: Vec<f64> = dmu.iter().map(|s| s * density).collect();
        let glv: Vec<f64> = dlv.iter().map(|s| s * density).collect();
        let (g_mean, _) = self.mean_net.backward(&eval.mean_cache, &gmu)?;
        let (g_logvar, _) = self.logvar_net.backward(&eval.logvar_cache, &glv)?;
        Ok(PolicyGradients { density, log_density, mean_net: g_mean.flat, logvar_net: g_logvar.flat })
    }

    /// Backpropagates a vector of per-dimension weights through the
    /// mean network's Jacobian: the parameter direction for an update
    /// proportional to `weights . dmu/dtheta`.
    pub fn backprop_mean(&self, eval: &PolicyEval, weights: &[f64]) -> Result<Vec<f64>, NeuralError> {
        let (g, _) = self.mean_net.backward(&eval.mean_cache, weights)?;
        Ok(g.flat)
    }

    /// Same for the log-variance network.
    pub fn backprop_logvar(
        &self,
        eval: &PolicyEval,
        weights: &[f64],
    ) -> Result<Vec<f64>, NeuralError> {
        let (g, _) = self.logvar_net.backward(&eval.logvar_cache, weights)?;
        Ok(g.flat)
    }
}

/// `x = mean + sigma .* eps` for an existing evaluation.
pub fn sample_from(eval: &PolicyEval, rng: &mut impl Rng) -> Vec<f64> {
    eval.mean
        .iter()
        .zip(&eval.variance)
        .map(|(m, v)| m + v.sqrt() * standard_normal(rng))
        .collect()
}

/// One standard-normal draw via Box-Muller.
pub fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Log of the diagonal-Gaussian density.
pub fn log_density(eval: &PolicyEval, x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..x.len() {
        let d = x[i] - eval.mean[i];
        acc += (2.0 * PI).ln() + eval.logvar[i] + d * d / eval.variance[i];
    }
    -0.5 * acc
}

/// Per-dimension derivatives of the log density with respect to the
/// mean and the (clamp-gated) log-variance outputs.
pub fn score_vectors(eval: &PolicyEval, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut dmu = Vec::with_capacity(x.len());
    let mut dlv = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let d = x[i] - eval.mean[i];
        dmu.push(d / eval.variance[i]);
        dlv.push(eval.clamp_gate[i] * 0.5 * (d * d / eval.variance[i] - 1.0));
    }
    (dmu, dlv)
}
