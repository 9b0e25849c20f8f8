//! Per-transformer actor-critic estimation modules.
//!
//! Each secondary circuit gets one module. Online, the module maps its
//! external input (smart-meter readings plus the transformer voltage
//! estimated by the primary layer) to circuit branch currents and
//! returns the net transformer power injection with its variance.
//! Offline, it perturbs its own policy, measures the realized
//! smart-meter voltage residual, and updates critic and actor from the
//! temporal-difference error.
//!
//! The policy operates in standardized state coordinates (per-dimension
//! affine maps fitted during the supervised warm start); variances are
//! mapped back through the squares of the scales before they reach the
//! primary layer.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::model::{CircuitId, FeederModel, ModelError, NodeId, RadialTree};
use crate::neural::{
    sample_from, score_vectors, Adam, GaussianPolicy, Mlp, NeuralError, PolicyEval,
};
use crate::powerflow::{forward_sweep, PowerFlowError, StateVector};
use crate::rng::{stream_rng, streams};

#[derive(Debug, Error, PartialEq)]
pub enum AcError {
    #[error("input has length {got}, module expects {expected}")]
    InputLength { expected: usize, got: usize },
    #[error("circuit {0} has no metered customers; residual undefined")]
    NoMeteredCustomers(u32),
    #[error("state vector has length {got}, circuit expects {expected}")]
    StateLength { expected: usize, got: usize },
    #[error("pretraining dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
}

/// Per-element affine standardization `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(n: usize) -> Self {
        Self { mean: vec![0.0; n], scale: vec![1.0; n] }
    }

    /// Fits mean and standard deviation per element; scales are floored
    /// to keep constant columns harmless.
    pub fn fit(rows: &[&[f64]]) -> Self {
        let n = rows.first().map_or(0, |r| r.len());
        let count = rows.len().max(1) as f64;
        let mut mean = vec![0.0; n];
        for row in rows {
            for (m, x) in mean.iter_mut().zip(*row) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= count;
        }
        let mut var = vec![0.0; n];
        for row in rows {
            for ((v, x), m) in var.iter_mut().zip(*row).zip(&mean) {
                let d = x - m;
                *v += d * d;
            }
        }
        let scale = var.iter().map(|v| (v / count).sqrt().max(1e-9)).collect();
        Self { mean, scale }
    }

    pub fn standardize(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().zip(&self.mean).zip(&self.scale).map(|((x, m), s)| (x - m) / s).collect()
    }

    pub fn destandardize(&self, std: &[f64]) -> Vec<f64> {
        std.iter().zip(&self.mean).zip(&self.scale).map(|((x, m), s)| x * s + m).collect()
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Fixed ordering of a module's external input vector:
/// `[|V| per metered customer.., avg P per metered customer.., |V_n|, angle V_n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AcInputLayout {
    pub circuit: CircuitId,
    pub metered_nodes: Vec<NodeId>,
}

impl AcInputLayout {
    pub fn from_model(model: &FeederModel, circuit: CircuitId) -> Result<Self, ModelError> {
        let c = model.circuit(circuit)?;
        let metered_nodes =
            c.customers.iter().filter(|cu| cu.has_smart_meter).map(|cu| cu.node).collect();
        Ok(Self { circuit, metered_nodes })
    }

    pub fn n_metered(&self) -> usize {
        self.metered_nodes.len()
    }

    pub fn len(&self) -> usize {
        2 * self.metered_nodes.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// External input for one module at one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct AcInput {
    pub values: Vec<f64>,
}

impl AcInput {
    /// Assembles the input in layout order from meter readings and the
    /// boundary voltage handed down by the primary layer.
    pub fn assemble(
        layout: &AcInputLayout,
        meter_voltages: &[f64],
        meter_powers: &[f64],
        boundary_voltage: Complex64,
    ) -> Result<Self, AcError> {
        let nm = layout.n_metered();
        if meter_voltages.len() != nm || meter_powers.len() != nm {
            return Err(AcError::InputLength {
                expected: nm,
                got: meter_voltages.len().max(meter_powers.len()),
            });
        }
        let mut values = Vec::with_capacity(layout.len());
        values.extend_from_slice(meter_voltages);
        values.extend_from_slice(meter_powers);
        values.push(boundary_voltage.norm());
        values.push(boundary_voltage.arg());
        Ok(Self { values })
    }

    pub fn meter_voltages<'a>(&'a self, layout: &AcInputLayout) -> &'a [f64] {
        &self.values[..layout.n_metered()]
    }

    pub fn boundary_voltage(&self, layout: &AcInputLayout) -> Complex64 {
        let mag = self.values[2 * layout.n_metered()];
        let ang = self.values[2 * layout.n_metered() + 1];
        Complex64::new(mag * ang.cos(), mag * ang.sin())
    }
}

/// Upward boundary message: net transformer injection and its variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryUp {
    pub p: f64,
    pub q: f64,
    pub var_p: f64,
    pub var_q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InferMode {
    /// Deterministic policy mean; used for online reporting.
    Mean,
    /// Draw from the policy; used during training.
    Sample,
}

/// Module hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AcConfig {
    /// Hidden layer widths shared by all three networks.
    pub hidden: Vec<usize>,
    /// Actor learning rate.
    pub actor_rate: f64,
    /// Critic learning rate.
    pub critic_rate: f64,
    /// Initial half-width of the uniform exploratory perturbation, in
    /// standardized state units.
    pub perturb_halfwidth: f64,
    /// Multiplicative per-step decay of the half-width.
    pub perturb_decay: f64,
    /// Half-width floor.
    pub perturb_floor: f64,
    pub seed: u64,
}

impl Default for AcConfig {
    fn default() -> Self {
        Self {
            hidden: vec![10, 10, 10],
            actor_rate: 0.01,
            critic_rate: 0.01,
            perturb_halfwidth: 0.05,
            perturb_decay: 0.999,
            perturb_floor: 0.005,
            seed: 0,
        }
    }
}

/// Outcome of one training step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    /// `predicted - realized` residual (positive: outcome better than
    /// the critic expected).
    pub tde: f64,
    pub realized_residual: f64,
    pub predicted_residual: f64,
    /// Step skipped because the residual was non-finite.
    pub skipped: bool,
}

/// Supervised warm-start report.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainReport {
    pub samples: usize,
    /// Mean-squared state error per epoch (standardized units).
    pub mean_loss: Vec<f64>,
    /// Gaussian NLL per epoch for the log-variance fit.
    pub logvar_loss: Vec<f64>,
    /// Mean-squared residual-prediction error per epoch.
    pub critic_loss: Vec<f64>,
    /// Critic fit skipped (no metered customers).
    pub critic_skipped: bool,
}

/// EMA weight for a 20-step half-life.
const EMA_ALPHA: f64 = 0.034_063_485_340_777_82;

/// One actor-critic estimation module for a secondary circuit.
#[derive(Debug, Clone)]
pub struct AcModule {
    pub layout: AcInputLayout,
    tree: RadialTree,
    /// tree-local indices of the branches leaving the transformer node
    head_branches: Vec<usize>,
    pub policy: GaussianPolicy,
    pub critic: Mlp,
    pub input_std: Standardizer,
    pub state_std: Standardizer,
    pub actor_rate: f64,
    pub critic_rate: f64,
    pub perturb_halfwidth: f64,
    pub perturb_decay: f64,
    pub perturb_floor: f64,
    rng: ChaCha12Rng,
    opt_critic: Adam,
    resid_ema: f64,
    tde_abs_ema: f64,
    ema_seen: bool,
    pub train_steps: u64,
}

impl AcModule {
    pub fn new(model: &FeederModel, circuit: CircuitId, config: &AcConfig) -> Result<Self, AcError> {
        let layout = AcInputLayout::from_model(model, circuit)?;
        let tree = model.secondary_tree(circuit)?.clone();
        let head_branches = tree.child_branches_of(tree.root())?.to_vec();
        let state_dim = tree.state_len();
        let input_dim = layout.len();
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(&config.hidden);
        let mut mean_sizes = sizes.clone();
        mean_sizes.push(state_dim);
        let mut logvar_sizes = sizes.clone();
        logvar_sizes.push(state_dim);
        let mut critic_sizes = sizes;
        critic_sizes.push(1);

        let mut init_rng = stream_rng(config.seed, streams::NET_INIT, circuit.0 as u64);
        // zero output layers: the cold-start policy proposes zero
        // currents (the no-knowledge baseline) rather than O(1) noise,
        // and the initial policy sigma (~0.01 standardized) sits well
        // below the exploratory perturbation so the TDE carries its
        // signal and the perturbation decay anneals the residual
        let mut mean_net = Mlp::xavier(&mean_sizes, &mut init_rng)?;
        zero_output_layer(&mut mean_net, state_dim, 0.0);
        let mut logvar_net = Mlp::xavier(&logvar_sizes, &mut init_rng)?;
        zero_output_layer(&mut logvar_net, state_dim, -9.0);
        let mut critic = Mlp::xavier(&critic_sizes, &mut init_rng)?;
        zero_output_layer(&mut critic, 1, 0.0);
        let policy = GaussianPolicy::new(mean_net, logvar_net);

        let opt_critic = Adam::new(config.critic_rate, critic.param_count());
        Ok(Self {
            layout,
            tree,
            head_branches,
            policy,
            critic,
            input_std: Standardizer::identity(input_dim),
            state_std: Standardizer::identity(state_dim),
            actor_rate: config.actor_rate,
            critic_rate: config.critic_rate,
            perturb_halfwidth: config.perturb_halfwidth,
            perturb_decay: config.perturb_decay,
            perturb_floor: config.perturb_floor,
            rng: stream_rng(config.seed, streams::TRAIN, circuit.0 as u64),
            opt_critic,
            resid_ema: 0.0,
            tde_abs_ema: 0.0,
            ema_seen: false,
            train_steps: 0,
        })
    }

    pub fn circuit(&self) -> CircuitId {
        self.layout.circuit
    }

    /// Resets all three networks to zero parameters: the no-knowledge
    /// baseline (zero currents, unit variance, zero residual forecast).
    pub fn zero_networks(&mut self) {
        let sizes = self.policy.mean_net.layer_sizes().to_vec();
        self.policy.mean_net = Mlp::zeros(&sizes).expect("sizes already validated");
        let sizes = self.policy.logvar_net.layer_sizes().to_vec();
        self.policy.logvar_net = Mlp::zeros(&sizes).expect("sizes already validated");
        let sizes = self.critic.layer_sizes().to_vec();
        self.critic = Mlp::zeros(&sizes).expect("sizes already validated");
    }

    pub fn tree(&self) -> &RadialTree {
        &self.tree
    }

    pub fn state_dim(&self) -> usize {
        self.tree.state_len()
    }

    fn check_input(&self, input: &AcInput) -> Result<(), AcError> {
        if input.values.len() != self.layout.len() {
            return Err(AcError::InputLength {
                expected: self.layout.len(),
                got: input.values.len(),
            });
        }
        Ok(())
    }

    fn eval_policy(&self, input: &AcInput) -> Result<PolicyEval, AcError> {
        self.check_input(input)?;
        let c = self.input_std.standardize(&input.values);
        Ok(self.policy.eval(&c)?)
    }

    /// Circuit branch currents for the given input. `Mean` is
    /// deterministic; `Sample` draws from the policy.
    pub fn infer_states(&mut self, input: &AcInput, mode: InferMode) -> Result<StateVector, AcError> {
        let eval = self.eval_policy(input)?;
        let x_std = match mode {
            InferMode::Mean => eval.mean.clone(),
            InferMode::Sample => sample_from(&eval, &mut self.rng),
        };
        Ok(StateVector::from_values(self.state_std.destandardize(&x_std)))
    }

    /// Net transformer injection from the head-branch currents:
    /// `S = V conj(I)`, with variances `|V|^2` times the summed policy
    /// variances of the head-branch current components (mapped back
    /// from standardized units through the squared scales).
    pub fn boundary_up(
        &self,
        boundary_voltage: Complex64,
        states: &StateVector,
        var_std: &[f64],
    ) -> Result<BoundaryUp, AcError> {
        if states.len() != self.state_dim() {
            return Err(AcError::StateLength { expected: self.state_dim(), got: states.len() });
        }
        let mut head_current = Complex64::new(0.0, 0.0);
        let mut var_re = 0.0;
        let mut var_im = 0.0;
        for &bi in &self.head_branches {
            head_current += states.current(bi);
            let sr = self.state_std.scale[2 * bi];
            let si = self.state_std.scale[2 * bi + 1];
            var_re += sr * sr * var_std[2 * bi];
            var_im += si * si * var_std[2 * bi + 1];
        }
        let s = boundary_voltage * head_current.conj();
        let vmag2 = boundary_voltage.norm_sqr();
        Ok(BoundaryUp { p: s.re, q: s.im, var_p: vmag2 * var_re, var_q: vmag2 * var_im })
    }

    /// Mean-mode states plus the boundary message, in one call.
    pub fn estimate(&self, input: &AcInput) -> Result<(StateVector, BoundaryUp), AcError> {
        let eval = self.eval_policy(input)?;
        let states = StateVector::from_values(self.state_std.destandardize(&eval.mean));
        let v_n = input.boundary_voltage(&self.layout);
        let boundary = self.boundary_up(v_n, &states, &eval.variance)?;
        Ok((states, boundary))
    }

    /// Sum of squared deviations between swept and measured voltage
    /// magnitudes at the metered customers.
    pub fn realized_residual(&self, input: &AcInput, states: &StateVector) -> Result<f64, AcError> {
        self.check_input(input)?;
        if self.layout.metered_nodes.is_empty() {
            return Err(AcError::NoMeteredCustomers(self.layout.circuit.0));
        }
        if states.len() != self.state_dim() {
            return Err(AcError::StateLength { expected: self.state_dim(), got: states.len() });
        }
        let v_n = input.boundary_voltage(&self.layout);
        let voltages = forward_sweep(&self.tree, v_n, states)?;
        let readings = input.meter_voltages(&self.layout);
        let mut r = 0.0;
        for (node, z) in self.layout.metered_nodes.iter().zip(readings) {
            let v_hat = voltages.at(&self.tree, *node)?.norm();
            let d = v_hat - z;
            r += d * d;
        }
        Ok(r)
    }

    /// Scale used to normalize the TD error for the actor step:
    /// running average of realized residuals.
    pub fn residual_scale(&self) -> f64 {
        if self.ema_seen {
            self.resid_ema.max(1e-12)
        } else {
            1.0
        }
    }

    /// Running mean of |TDE|; feeds the confidence weighting of the
    /// primary layer.
    pub fn tde_abs_mean(&self) -> f64 {
        self.tde_abs_ema
    }

    /// Boundary-variance inflation factor `1 + kappa * |TDE| / scale`.
    /// Larger recent TD errors always inflate (never shrink) the
    /// variance the primary layer sees.
    pub fn variance_inflation(&self, kappa: f64) -> f64 {
        if !self.ema_seen {
            return 1.0;
        }
        1.0 + kappa * self.tde_abs_ema / self.resid_ema.max(1e-12)
    }

    /// One offline update: perturbed policy sample, realized residual,
    /// critic regression step, and the TDE-weighted actor step.
    pub fn train_step(&mut self, input: &AcInput) -> Result<TrainReport, AcError> {
        let eval = self.eval_policy(input)?;
        let c_std = self.input_std.standardize(&input.values);
        let dim = eval.mean.len();

        // perturbed sample in standardized coordinates
        let half = self.perturb_halfwidth;
        let mut perturb = vec![0.0; dim];
        if half > 0.0 {
            for u in perturb.iter_mut() {
                *u = self.rng.random_range(-half..=half);
            }
        }
        let base = sample_from(&eval, &mut self.rng);
        let x_std: Vec<f64> = base.iter().zip(&perturb).map(|(b, u)| b + u).collect();

        let predicted = self.critic.forward(&c_std)?[0];
        let states = StateVector::from_values(self.state_std.destandardize(&x_std));
        let realized = self.realized_residual(input, &states)?;
        if !realized.is_finite() {
            return Ok(TrainReport {
                tde: f64::NAN,
                realized_residual: realized,
                predicted_residual: predicted,
                skipped: true,
            });
        }

        // critic: descend the squared prediction error
        let pred_err = predicted - realized;
        if pred_err != 0.0 {
            let cache = self.critic.forward_cached(&c_std)?;
            let (g, _) = self.critic.backward(&cache, &[pred_err])?;
            let delta = self.opt_critic.step(&g.flat);
            self.critic.add_scaled(&delta, 1.0)?;
        }

        // actor: plain gradient ascent, reinforcing only perturbations
        // that realized a lower residual than the critic predicted (a
        // symmetric update random-walks while the critic still lags).
        // The mean moves along the TDE-weighted perturbation through
        // the mean-net Jacobian, so step sizes inherit the perturbation
        // scale and anneal with it; the variance head follows the
        // perturbation-weighted log-density score. The TDE itself is
        // normalized by the running residual scale.
        let tde = predicted - realized;
        let tde_norm = (tde / self.residual_scale()).clamp(-10.0, 10.0);
        let perturb_active = perturb.iter().any(|&u| u != 0.0);
        if perturb_active && tde_norm > 0.0 {
            let w_mean: Vec<f64> = perturb.iter().map(|u| tde_norm * u).collect();
            let gm = self.policy.backprop_mean(&eval, &w_mean)?;
            self.policy.mean_net.add_scaled(&gm, self.actor_rate)?;

            let (_, dlv) = score_vectors(&eval, &x_std);
            let w_lv: Vec<f64> =
                dlv.iter().zip(&perturb).map(|(s, u)| tde_norm * (u / half) * s).collect();
            let gl = self.policy.backprop_logvar(&eval, &w_lv)?;
            self.policy.logvar_net.add_scaled(&gl, 0.3 * self.actor_rate)?;
        }

        // bookkeeping
        if self.ema_seen {
            self.resid_ema += EMA_ALPHA * (realized - self.resid_ema);
            self.tde_abs_ema += EMA_ALPHA * (tde.abs() - self.tde_abs_ema);
        } else {
            self.resid_ema = realized;
            self.tde_abs_ema = tde.abs();
            self.ema_seen = true;
        }
        self.perturb_halfwidth = (self.perturb_halfwidth * self.perturb_decay).max(self.perturb_floor);
        self.train_steps += 1;

        Ok(TrainReport {
            tde,
            realized_residual: realized,
            predicted_residual: predicted,
            skipped: false,
        })
    }

    /// Supervised warm start from oracle-labelled samples: fits the
    /// standardizers, the mean network (squared error), the
    /// log-variance network (Gaussian NLL at the frozen mean), and the
    /// critic (squared error against realized residuals at the fitted
    /// mean).
    pub fn pretrain(
        &mut self,
        dataset: &[(AcInput, Vec<f64>)],
        epochs: usize,
    ) -> Result<PretrainReport, AcError> {
        if dataset.is_empty() {
            return Err(AcError::EmptyDataset);
        }
        for (input, states) in dataset {
            self.check_input(input)?;
            if states.len() != self.state_dim() {
                return Err(AcError::StateLength {
                    expected: self.state_dim(),
                    got: states.len(),
                });
            }
        }
        let input_rows: Vec<&[f64]> = dataset.iter().map(|(i, _)| i.values.as_slice()).collect();
        let state_rows: Vec<&[f64]> = dataset.iter().map(|(_, s)| s.as_slice()).collect();
        self.input_std = Standardizer::fit(&input_rows);
        self.state_std = Standardizer::fit(&state_rows);

        let inputs_std: Vec<Vec<f64>> =
            dataset.iter().map(|(i, _)| self.input_std.standardize(&i.values)).collect();
        let states_std: Vec<Vec<f64>> =
            dataset.iter().map(|(_, s)| self.state_std.standardize(s)).collect();

        let n = dataset.len();
        let dim = self.state_dim() as f64;
        let mut order: Vec<usize> = (0..n).collect();
        let mut shuffle_rng = stream_rng(
            self.layout.circuit.0 as u64,
            streams::PRETRAIN,
            self.train_steps,
        );

        // stage 1: mean network, squared error
        let mut opt = Adam::new(3e-3, self.policy.mean_net.param_count());
        let mut mean_loss = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            shuffle(&mut order, &mut shuffle_rng);
            let mut loss = 0.0;
            for &i in &order {
                let cache = self.policy.mean_net.forward_cached(&inputs_std[i])?;
                let err: Vec<f64> =
                    cache.output().iter().zip(&states_std[i]).map(|(o, t)| o - t).collect();
                loss += err.iter().map(|e| e * e).sum::<f64>() / dim;
                let (g, _) = self.policy.mean_net.backward(&cache, &err)?;
                let delta = opt.step(&g.flat);
                self.policy.mean_net.add_scaled(&delta, 1.0)?;
            }
            mean_loss.push(loss / n as f64);
        }

        // stage 2: log-variance network, NLL with the mean frozen
        let residuals: Vec<Vec<f64>> = inputs_std
            .iter()
            .zip(&states_std)
            .map(|(c, t)| {
                let mu = self.policy.mean_net.forward(c).expect("dims fitted");
                mu.iter().zip(t).map(|(m, x)| x - m).collect()
            })
            .collect();
        let mut opt = Adam::new(3e-3, self.policy.logvar_net.param_count());
        let mut logvar_loss = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            shuffle(&mut order, &mut shuffle_rng);
            let mut loss = 0.0;
            for &i in &order {
                let cache = self.policy.logvar_net.forward_cached(&inputs_std[i])?;
                let l = cache.output();
                let mut grad = Vec::with_capacity(l.len());
                let mut nll = 0.0;
                for (lv, e) in l.iter().zip(&residuals[i]) {
                    let e2 = e * e + 1e-10;
                    nll += 0.5 * (lv + e2 * (-lv).exp());
                    grad.push(0.5 * (1.0 - e2 * (-lv).exp()));
                }
                loss += nll / dim;
                let (g, _) = self.policy.logvar_net.backward(&cache, &grad)?;
                let delta = opt.step(&g.flat);
                self.policy.logvar_net.add_scaled(&delta, 1.0)?;
            }
            logvar_loss.push(loss / n as f64);
        }

        // stage 3: critic against realized residuals at the fitted mean
        let mut critic_loss = Vec::new();
        let critic_skipped = self.layout.metered_nodes.is_empty();
        if !critic_skipped {
            let targets: Vec<f64> = dataset
                .iter()
                .zip(&inputs_std)
                .map(|((input, _), c)| {
                    let mu = self.policy.mean_net.forward(c).expect("dims fitted");
                    let states = StateVector::from_values(self.state_std.destandardize(&mu));
                    self.realized_residual(input, &states).expect("metered circuit")
                })
                .collect();
            let mut opt = Adam::new(3e-3, self.critic.param_count());
            for _ in 0..epochs {
                shuffle(&mut order, &mut shuffle_rng);
                let mut loss = 0.0;
                for &i in &order {
                    let cache = self.critic.forward_cached(&inputs_std[i])?;
                    let err = cache.output()[0] - targets[i];
                    loss += err * err;
                    let (g, _) = self.critic.backward(&cache, &[err])?;
                    let delta = opt.step(&g.flat);
                    self.critic.add_scaled(&delta, 1.0)?;
                }
                critic_loss.push(loss / n as f64);
            }
        }

        Ok(PretrainReport { samples: n, mean_loss, logvar_loss, critic_loss, critic_skipped })
    }
}

/// Zeroes the last layer's weights and sets its biases to `bias`.
fn zero_output_layer(net: &mut Mlp, out_dim: usize, bias: f64) {
    let mut flat = net.params_flat();
    let n = flat.len();
    let sizes = net.layer_sizes();
    let last_in = sizes[sizes.len() - 2];
    let w_start = n - out_dim * (last_in + 1);
    for w in flat[w_start..n - out_dim].iter_mut() {
        *w = 0.0;
    }
    for b in flat[n - out_dim..].iter_mut() {
        *b = bias;
    }
    net.set_params_flat(&flat).expect("same length");
}

fn shuffle(order: &mut [usize], rng: &mut ChaCha12Rng) {
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Customer, ModelBuilder, NodeRole, SecondaryCircuit};
    use crate::powerflow::{solve_powerflow, Injections, PowerInjection};
    use approx::assert_relative_eq;

    /// One transformer with a 3-branch, 2-customer circuit.
    fn model() -> FeederModel {
        let mut b = ModelBuilder::new();
        let root = b.node(NodeRole::Substation);
        let t = b.node(NodeRole::SecondaryTransformer);
        b.branch(root, t, 0.01, 0.02);
        let j = b.node(NodeRole::SecondaryJunction);
        let c1 = b.node(NodeRole::Customer);
        let c2 = b.node(NodeRole::Customer);
        let bh = b.branch(t, j, 0.2, 0.08);
        let b1 = b.branch(j, c1, 0.1, 0.04);
        let b2 = b.branch(j, c2, 0.15, 0.05);
        b.transformers.push((t, CircuitId(0)));
        b.secondaries.push(SecondaryCircuit {
            id: CircuitId(0),
            transformer_node: t,
            nodes: vec![j, c1, c2],
            branches: vec![bh, b1, b2],
            customers: vec![
                Customer { node: c1, has_smart_meter: true, has_pv: false },
                Customer { node: c2, has_smart_meter: true, has_pv: false },
            ],
        });
        b.build().unwrap()
    }

    fn module(m: &FeederModel) -> AcModule {
        AcModule::new(m, CircuitId(0), &AcConfig::default()).unwrap()
    }

    fn zeroed_module(m: &FeederModel) -> AcModule {
        let mut md = module(m);
        let dims = md.policy.mean_net.layer_sizes().to_vec();
        md.policy.mean_net = Mlp::zeros(&dims).unwrap();
        let dims = md.policy.logvar_net.layer_sizes().to_vec();
        md.policy.logvar_net = Mlp::zeros(&dims).unwrap();
        let dims = md.critic.layer_sizes().to_vec();
        md.critic = Mlp::zeros(&dims).unwrap();
        md
    }

    fn input_for(module: &AcModule, meter_v: &[f64], meter_p: &[f64], v: Complex64) -> AcInput {
        AcInput::assemble(&module.layout, meter_v, meter_p, v).unwrap()
    }

    #[test]
    fn zero_policy_infers_zero_states_in_mean_mode() {
        let m = model();
        let mut md = zeroed_module(&m);
        let input = input_for(&md, &[1.0, 1.0], &[0.0, 0.0], Complex64::new(1.0, 0.0));
        let s = md.infer_states(&input, InferMode::Mean).unwrap();
        assert!(s.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sample_mode_is_reproducible_per_seed() {
        let m = model();
        let mk = || {
            let mut md = module(&m);
            let input = input_for(&md, &[1.0, 1.0], &[0.0, 0.0], Complex64::new(1.0, 0.0));
            md.infer_states(&input, InferMode::Sample).unwrap()
        };
        assert_eq!(mk(), mk());
    }

    #[test]
    fn boundary_up_direct_formula() {
        let m = model();
        let md = zeroed_module(&m);
        // head branch is tree-local 0; set its current to 0.5 + 0j
        let mut states = StateVector::zeros(md.tree());
        states.set_current(0, Complex64::new(0.5, 0.0));
        let var_std = vec![0.0; md.state_dim()];
        let b = md.boundary_up(Complex64::new(1.0, 0.0), &states, &var_std).unwrap();
        assert_relative_eq!(b.p, 0.5, epsilon = 1e-15);
        assert_relative_eq!(b.q, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn boundary_variance_scales_with_voltage_squared() {
        let m = model();
        let md = zeroed_module(&m); // identity state scales
        let states = StateVector::zeros(md.tree());
        let mut var_std = vec![0.0; md.state_dim()];
        var_std[0] = 4e-4; // re component of the head branch
        let b = md.boundary_up(Complex64::new(1.0, 0.0), &states, &var_std).unwrap();
        assert_relative_eq!(b.var_p, 4e-4, epsilon = 1e-18);
        assert_eq!(b.var_q, 0.0);
    }

    #[test]
    fn boundary_up_matches_complex_arithmetic_oracle() {
        let m = model();
        let md = zeroed_module(&m);
        let mut states = StateVector::zeros(md.tree());
        states.set_current(0, Complex64::new(0.31, -0.11));
        states.set_current(1, Complex64::new(0.2, 0.05));
        states.set_current(2, Complex64::new(0.11, -0.16));
        let v = Complex64::new(0.98, 0.04);
        let b = md.boundary_up(v, &states, &vec![0.0; md.state_dim()]).unwrap();
        let s = v * states.current(0).conj(); // single head branch
        assert_relative_eq!(b.p, s.re, epsilon = 1e-15);
        assert_relative_eq!(b.q, s.im, epsilon = 1e-15);
    }

    /// Builds an input whose meter readings are exactly consistent with
    /// the given circuit loading, and returns the matching true states.
    fn consistent_case(
        m: &FeederModel,
        md: &AcModule,
        v_n: Complex64,
        loads: &[(NodeId, PowerInjection)],
    ) -> (AcInput, StateVector) {
        let tree = m.secondary_tree(CircuitId(0)).unwrap();
        let mut inj = Injections::zeros(m.n_nodes());
        for &(node, s) in loads {
            inj.set(node, s);
        }
        let sol = solve_powerflow(tree, &inj, v_n, 1e-13, 200).unwrap();
        let meter_v: Vec<f64> = md
            .layout
            .metered_nodes
            .iter()
            .map(|&n| sol.voltages.at(tree, n).unwrap().norm())
            .collect();
        let meter_p: Vec<f64> = md
            .layout
            .metered_nodes
            .iter()
            .map(|&n| loads.iter().find(|(ln, _)| *ln == n).map_or(0.0, |(_, s)| s.p))
            .collect();
        let input = AcInput::assemble(&md.layout, &meter_v, &meter_p, v_n).unwrap();
        (input, sol.currents)
    }

    #[test]
    fn residual_zero_when_states_reproduce_readings() {
        let m = model();
        let md = zeroed_module(&m);
        let v_n = Complex64::new(1.0, 0.0);
        let loads = [
            (NodeId(3), PowerInjection::new(0.004, 0.001)),
            (NodeId(4), PowerInjection::new(0.006, 0.002)),
        ];
        let (input, states) = consistent_case(&m, &md, v_n, &loads);
        let r = md.realized_residual(&input, &states).unwrap();
        assert!(r < 1e-12, "residual {r}");
    }

    #[test]
    fn residual_single_meter_squared_deviation() {
        // one metered customer reading 1.00 while the sweep gives 0.98
        let mut b = ModelBuilder::new();
        let root = b.node(NodeRole::Substation);
        let t = b.node(NodeRole::SecondaryTransformer);
        b.branch(root, t, 0.01, 0.02);
        let c1 = b.node(NodeRole::Customer);
        let bh = b.branch(t, c1, 0.2, 0.0);
        b.transformers.push((t, CircuitId(0)));
        b.secondaries.push(SecondaryCircuit {
            id: CircuitId(0),
            transformer_node: t,
            nodes: vec![c1],
            branches: vec![bh],
            customers: vec![Customer { node: c1, has_smart_meter: true, has_pv: false }],
        });
        let m = b.build().unwrap();
        let md = zeroed_module(&m);
        let mut states = StateVector::zeros(md.tree());
        states.set_current(0, Complex64::new(0.1, 0.0)); // drop = 0.02
        let input = input_for(&md, &[1.0], &[0.0], Complex64::new(1.0, 0.0));
        let r = md.realized_residual(&input, &states).unwrap();
        assert_relative_eq!(r, 4.0e-4, epsilon = 1e-12);
    }

    #[test]
    fn residual_requires_metered_customers() {
        let mut b = ModelBuilder::new();
        let root = b.node(NodeRole::Substation);
        let t = b.node(NodeRole::SecondaryTransformer);
        b.branch(root, t, 0.01, 0.02);
        let c1 = b.node(NodeRole::Customer);
        let bh = b.branch(t, c1, 0.2, 0.0);
        b.transformers.push((t, CircuitId(0)));
        b.secondaries.push(SecondaryCircuit {
            id: CircuitId(0),
            transformer_node: t,
            nodes: vec![c1],
            branches: vec![bh],
            customers: vec![Customer { node: c1, has_smart_meter: false, has_pv: false }],
        });
        let m = b.build().unwrap();
        let md = zeroed_module(&m);
        let states = StateVector::zeros(md.tree());
        let input = input_for(&md, &[], &[], Complex64::new(1.0, 0.0));
        assert_eq!(
            md.realized_residual(&input, &states).unwrap_err(),
            AcError::NoMeteredCustomers(0)
        );
    }

    #[test]
    fn actor_unchanged_without_perturbation() {
        let m = model();
        let mut md = module(&m);
        md.perturb_halfwidth = 0.0;
        md.perturb_floor = 0.0;
        let input = input_for(&md, &[0.99, 0.98], &[0.004, 0.006], Complex64::new(1.0, 0.0));
        let before_mean = md.policy.mean_net.params_flat();
        let before_logvar = md.policy.logvar_net.params_flat();
        for _ in 0..5 {
            md.train_step(&input).unwrap();
        }
        assert_eq!(md.policy.mean_net.params_flat(), before_mean);
        assert_eq!(md.policy.logvar_net.params_flat(), before_logvar);
    }

    #[test]
    fn critic_unchanged_when_prediction_exact() {
        let m = model();
        let mut md = zeroed_module(&m);
        md.perturb_halfwidth = 0.0;
        md.perturb_floor = 0.0;
        // policy variance small enough that the sampled drop rounds away
        // and the residual is exactly zero
        md.policy.logvar_min = -300.0;
        let sizes = md.policy.logvar_net.layer_sizes().to_vec();
        let mut lv = Mlp::zeros(&sizes).unwrap();
        let mut flat = lv.params_flat();
        let n = flat.len();
        let out_dim = md.state_dim();
        for b in flat.iter_mut().skip(n - out_dim) {
            *b = -200.0;
        }
        lv.set_params_flat(&flat).unwrap();
        md.policy.logvar_net = lv;

        let input = input_for(&md, &[1.0, 1.0], &[0.0, 0.0], Complex64::new(1.0, 0.0));
        // zero states reproduce flat readings of exactly 1.0: r = 0, and the
        // zero critic predicts 0: perfect
        let before = md.critic.params_flat();
        let report = md.train_step(&input).unwrap();
        assert_eq!(report.realized_residual, 0.0);
        assert_eq!(report.predicted_residual, 0.0);
        assert_eq!(md.critic.params_flat(), before);
    }

    #[test]
    fn train_step_is_deterministic_for_cloned_modules() {
        let m = model();
        let input = {
            let md = module(&m);
            input_for(&md, &[0.99, 0.98], &[0.004, 0.006], Complex64::new(1.0, 0.0))
        };
        let mut a = module(&m);
        let mut b = a.clone();
        for _ in 0..3 {
            let ra = a.train_step(&input).unwrap();
            let rb = b.train_step(&input).unwrap();
            assert_eq!(ra, rb);
        }
        assert_eq!(a.policy.mean_net.params_flat(), b.policy.mean_net.params_flat());
        assert_eq!(a.critic.params_flat(), b.critic.params_flat());
    }

    #[test]
    fn pretrain_on_identical_samples_converges_to_state() {
        let m = model();
        let mut md = module(&m);
        let v_n = Complex64::new(1.0, 0.0);
        let loads = [
            (NodeId(3), PowerInjection::new(0.004, 0.001)),
            (NodeId(4), PowerInjection::new(0.006, 0.002)),
        ];
        let (input, states) = consistent_case(&m, &md, v_n, &loads);
        let dataset: Vec<(AcInput, Vec<f64>)> =
            (0..50).map(|_| (input.clone(), states.values.clone())).collect();
        let report = md.pretrain(&dataset, 60).unwrap();
        assert!(report.mean_loss.last().unwrap() < &1e-6, "loss {:?}", report.mean_loss.last());
        let inferred = md.infer_states(&input, InferMode::Mean).unwrap();
        for (a, b) in inferred.values.iter().zip(&states.values) {
            assert!((a - b).abs() < 1e-4, "state {a} vs {b}");
        }
    }

    #[test]
    fn pretrain_empty_dataset_rejected() {
        let m = model();
        let mut md = module(&m);
        assert_eq!(md.pretrain(&[], 5).unwrap_err(), AcError::EmptyDataset);
    }

    #[test]
    fn boundary_variances_strictly_positive_for_any_policy() {
        let m = model();
        let mut md = module(&m); // xavier nets, identity standardizers
        let input = input_for(&md, &[0.97, 1.01], &[0.002, 0.007], Complex64::new(1.0, 0.02));
        let (_, boundary) = md.estimate(&input).unwrap();
        assert!(boundary.var_p > 0.0);
        assert!(boundary.var_q > 0.0);
    }

    #[test]
    fn variance_inflation_is_monotone_in_tde() {
        let m = model();
        let mut md = module(&m);
        md.ema_seen = true;
        md.resid_ema = 1e-4;
        md.tde_abs_ema = 0.0;
        let f0 = md.variance_inflation(1.0);
        md.tde_abs_ema = 5e-5;
        let f1 = md.variance_inflation(1.0);
        md.tde_abs_ema = 2e-4;
        let f2 = md.variance_inflation(1.0);
        assert!(f0 < f1 && f1 < f2);
        assert_relative_eq!(f0, 1.0, epsilon = 1e-15);
    }
}
