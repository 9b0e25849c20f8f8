//! Weighted-least-squares branch-current state estimation.
//!
//! States are the real/imaginary branch currents of one tree layer.
//! Each Gauss-Newton iteration holds node voltages fixed at the values
//! swept from the previous iterate, which makes power-injection rows
//! linear; voltage-magnitude rows differentiate the explicit
//! root-minus-path-drops expression, and current-magnitude rows the
//! plain modulus. Voltages are re-swept between iterations.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{norm_inf, LinalgError, SymMatrix};
use crate::model::{BranchId, ModelError, NodeId, RadialTree};
use crate::powerflow::{forward_sweep, NodeVoltages, PowerFlowError};

pub use crate::powerflow::StateVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementKind {
    /// Net active power drawn at a node (consumption positive).
    NodeActivePower,
    /// Net reactive power drawn at a node.
    NodeReactivePower,
    /// Voltage magnitude at a node.
    VoltageMagnitude,
    /// Current magnitude in a branch.
    BranchCurrentMagnitude,
    /// Boundary active-power pseudo-measurement at a transformer node.
    TransformerActivePower,
    /// Boundary reactive-power pseudo-measurement at a transformer node.
    TransformerReactivePower,
}

impl MeasurementKind {
    pub fn is_active_power(self) -> bool {
        matches!(self, MeasurementKind::NodeActivePower | MeasurementKind::TransformerActivePower)
    }

    pub fn is_reactive_power(self) -> bool {
        matches!(
            self,
            MeasurementKind::NodeReactivePower | MeasurementKind::TransformerReactivePower
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Node(NodeId),
    Branch(BranchId),
}

/// One sensor reading with its error variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub kind: MeasurementKind,
    pub location: Location,
    pub value: f64,
    pub variance: f64,
}

impl Measurement {
    pub fn node_p(node: NodeId, value: f64, variance: f64) -> Self {
        Self { kind: MeasurementKind::NodeActivePower, location: Location::Node(node), value, variance }
    }
    pub fn node_q(node: NodeId, value: f64, variance: f64) -> Self {
        Self { kind: MeasurementKind::NodeReactivePower, location: Location::Node(node), value, variance }
    }
    pub fn voltage_mag(node: NodeId, value: f64, variance: f64) -> Self {
        Self { kind: MeasurementKind::VoltageMagnitude, location: Location::Node(node), value, variance }
    }
    pub fn branch_current_mag(branch: BranchId, value: f64, variance: f64) -> Self {
        Self {
            kind: MeasurementKind::BranchCurrentMagnitude,
            location: Location::Branch(branch),
            value,
            variance,
        }
    }
    pub fn transformer_p(node: NodeId, value: f64, variance: f64) -> Self {
        Self {
            kind: MeasurementKind::TransformerActivePower,
            location: Location::Node(node),
            value,
            variance,
        }
    }
    pub fn transformer_q(node: NodeId, value: f64, variance: f64) -> Self {
        Self {
            kind: MeasurementKind::TransformerReactivePower,
            location: Location::Node(node),
            value,
            variance,
        }
    }

    fn node(&self) -> Option<NodeId> {
        match self.location {
            Location::Node(n) => Some(n),
            Location::Branch(_) => None,
        }
    }
}

/// Default variance floor; degenerate (zero) sensor variances are
/// lifted here so weights stay finite.
pub const MIN_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WlsConfig {
    /// Convergence threshold on the infinity norm of the state change.
    pub delta: f64,
    pub max_iter: usize,
    /// Floor applied to every measurement variance.
    pub variance_floor: f64,
}

impl Default for WlsConfig {
    fn default() -> Self {
        Self { delta: 1e-6, max_iter: 50, variance_floor: MIN_VARIANCE }
    }
}

#[derive(Debug, Clone)]
pub struct WlsSolution {
    pub state: StateVector,
    pub iterations: usize,
    /// Final weighted sum of squared residuals.
    pub objective: f64,
    /// Objective evaluated at the start of each iteration (element 0 is
    /// the objective at `x0`).
    pub objective_trace: Vec<f64>,
    /// Node voltages from the final forward sweep, in tree node order.
    pub node_voltages: NodeVoltages,
    /// Condition estimate of the last gain matrix factored.
    pub gain_condition: f64,
    /// Current-magnitude rows skipped in the last iteration because the
    /// operating point made their derivative singular.
    pub rows_skipped: usize,
}

impl WlsSolution {
    pub fn voltage_at(&self, tree: &RadialTree, n: NodeId) -> Result<Complex64, ModelError> {
        self.node_voltages.at(tree, n)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum WlsError {
    #[error("{got} measurements cannot determine {states} states")]
    Underdetermined { states: usize, got: usize },
    #[error("measurement {index} has non-positive variance {variance}")]
    BadVariance { index: usize, variance: f64 },
    #[error("measurement {index}: {kind:?} cannot sit at {location:?}")]
    BadLocation { index: usize, kind: MeasurementKind, location: Location },
    #[error("gain matrix is singular or ill-conditioned (condition estimate {cond_estimate:.3e}); network unobservable")]
    SingularGain { cond_estimate: f64 },
    #[error("gain matrix asymmetry {0:.3e} exceeds 1e-10")]
    AsymmetricGain(f64),
    #[error("current-magnitude measurement on branch {0} has singular derivative (|I| ~ 0)")]
    CurrentMagnitudeSingular(u32),
    #[error("no convergence after {iterations} iterations (last step {last_step:.3e})")]
    NotConverged { iterations: usize, last_step: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
}

/// Sparse Jacobian row: `(state column, coefficient)` pairs.
pub type SparseRow = Vec<(usize, f64)>;

/// Net injection current drawn at a node: feed-branch current minus the
/// currents leaving towards children (for the root, just minus the
/// children).
fn injection_current(
    tree: &RadialTree,
    state: &StateVector,
    node: NodeId,
) -> Result<Complex64, ModelError> {
    let mut inj = Complex64::new(0.0, 0.0);
    if let Some(feed) = tree.feed_branch_of(node)? {
        inj += state.current(feed);
    }
    for &cb in tree.child_branches_of(node)? {
        inj -= state.current(cb);
    }
    Ok(inj)
}

/// Voltage at a node expressed explicitly in the state: root voltage
/// minus the impedance-weighted currents along the path.
fn voltage_of_state(
    tree: &RadialTree,
    state: &StateVector,
    root_voltage: Complex64,
    node: NodeId,
) -> Result<Complex64, ModelError> {
    let mut v = root_voltage;
    for bi in tree.path_indices(node)? {
        v -= tree.branches()[bi].z * state.current(bi);
    }
    Ok(v)
}

/// Evaluates the measurement function `h(x)` for every measurement.
///
/// `aux_voltages` are the node voltages swept from the linearization
/// point; power rows read the node voltage from them, while magnitude
/// rows depend on the state directly (the root entry of `aux_voltages`
/// anchors the voltage expression).
pub fn measurement_function(
    tree: &RadialTree,
    state: &StateVector,
    aux_voltages: &NodeVoltages,
    measurements: &[Measurement],
) -> Result<Vec<f64>, WlsError> {
    state.check_dim(tree)?;
    let root_v = aux_voltages.at(tree, tree.root())?;
    let mut out = Vec::with_capacity(measurements.len());
    for (index, m) in measurements.iter().enumerate() {
        let h = match m.kind {
            MeasurementKind::NodeActivePower
            | MeasurementKind::NodeReactivePower
            | MeasurementKind::TransformerActivePower
            | MeasurementKind::TransformerReactivePower => {
                let node = m.node().ok_or(WlsError::BadLocation {
                    index,
                    kind: m.kind,
                    location: m.location,
                })?;
                let v = aux_voltages.at(tree, node)?;
                let s = v * injection_current(tree, state, node)?.conj();
                if m.kind.is_active_power() {
                    s.re
                } else {
                    s.im
                }
            }
            MeasurementKind::VoltageMagnitude => {
                let node = m.node().ok_or(WlsError::BadLocation {
                    index,
                    kind: m.kind,
                    location: m.location,
                })?;
                voltage_of_state(tree, state, root_v, node)?.norm()
            }
            MeasurementKind::BranchCurrentMagnitude => {
                let Location::Branch(b) = m.location else {
                    return Err(WlsError::BadLocation { index, kind: m.kind, location: m.location });
                };
                state.current(tree.branch_index(b)?).norm()
            }
        };
        out.push(h);
    }
    Ok(out)
}

/// Builds the sparse Jacobian `H = dh/dx` at the given state, with the
/// aux voltages held constant (the linearization device for power
/// rows).
pub fn jacobian(
    tree: &RadialTree,
    state: &StateVector,
    aux_voltages: &NodeVoltages,
    measurements: &[Measurement],
) -> Result<Vec<SparseRow>, WlsError> {
    state.check_dim(tree)?;
    let root_v = aux_voltages.at(tree, tree.root())?;
    let mut rows = Vec::with_capacity(measurements.len());
    for (index, m) in measurements.iter().enumerate() {
        let mut row: SparseRow = Vec::new();
        match m.kind {
            MeasurementKind::NodeActivePower
            | MeasurementKind::NodeReactivePower
            | MeasurementKind::TransformerActivePower
            | MeasurementKind::TransformerReactivePower => {
                let node = m.node().ok_or(WlsError::BadLocation {
                    index,
                    kind: m.kind,
                    location: m.location,
                })?;
                let v = aux_voltages.at(tree, node)?;
                let active = m.kind.is_active_power();
                let mut push = |branch_local: usize, sign: f64| {
                    // d(V conj(I))/dI_re = V, d/dI_im = -iV
                    let d_re = v * sign;
                    let d_im = v * Complex64::new(0.0, -1.0) * sign;
                    if active {
                        row.push((2 * branch_local, d_re.re));
                        row.push((2 * branch_local + 1, d_im.re));
                    } else {
                        row.push((2 * branch_local, d_re.im));
                        row.push((2 * branch_local + 1, d_im.im));
                    }
                };
                if let Some(feed) = tree.feed_branch_of(node)? {
                    push(feed, 1.0);
                }
                for &cb in tree.child_branches_of(node)? {
                    push(cb, -1.0);
                }
            }
            MeasurementKind::VoltageMagnitude => {
                let node = m.node().ok_or(WlsError::BadLocation {
                    index,
                    kind: m.kind,
                    location: m.location,
                })?;
                let v = voltage_of_state(tree, state, root_v, node)?;
                let mag = v.norm();
                if mag > 0.0 {
                    for bi in tree.path_indices(node)? {
                        let z = tree.branches()[bi].z;
                        // dV/dI_re = -z, dV/dI_im = -iz; d|V|/dt = Re(conj(V) dV/dt)/|V|
                        let d_re = (v.conj() * (-z)).re / mag;
                        let d_im = (v.conj() * (-z) * Complex64::new(0.0, 1.0)).re / mag;
                        row.push((2 * bi, d_re));
                        row.push((2 * bi + 1, d_im));
                    }
                }
                // an empty path (root measurement) leaves a zero row
            }
            MeasurementKind::BranchCurrentMagnitude => {
                let Location::Branch(b) = m.location else {
                    return Err(WlsError::BadLocation { index, kind: m.kind, location: m.location });
                };
                let bi = tree.branch_index(b)?;
                let cur = state.current(bi);
                let mag = cur.norm();
                if mag < 1e-12 {
                    return Err(WlsError::CurrentMagnitudeSingular(b.0));
                }
                row.push((2 * bi, cur.re / mag));
                row.push((2 * bi + 1, cur.im / mag));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

fn weighted_objective(residuals: &[f64], weights: &[f64]) -> f64 {
    residuals.iter().zip(weights).map(|(r, w)| w * r * r).sum()
}

/// Root voltage used for all sweeps: the first voltage-magnitude
/// measurement at the root if present (angle reference 0), else 1 p.u.
fn sweep_reference(tree: &RadialTree, measurements: &[Measurement]) -> Complex64 {
    for m in measurements {
        if m.kind == MeasurementKind::VoltageMagnitude {
            if let Location::Node(n) = m.location {
                if n == tree.root() {
                    return Complex64::new(m.value, 0.0);
                }
            }
        }
    }
    Complex64::new(1.0, 0.0)
}

/// Gauss-Newton WLS iteration (normal equations via Cholesky).
pub fn wls_solve(
    tree: &RadialTree,
    measurements: &[Measurement],
    config: &WlsConfig,
    x0: &StateVector,
) -> Result<WlsSolution, WlsError> {
    let n_states = tree.state_len();
    if measurements.len() < n_states {
        return Err(WlsError::Underdetermined { states: n_states, got: measurements.len() });
    }
    let mut weights = Vec::with_capacity(measurements.len());
    for (index, m) in measurements.iter().enumerate() {
        if !(m.variance > 0.0) {
            return Err(WlsError::BadVariance { index, variance: m.variance });
        }
        weights.push(1.0 / m.variance.max(config.variance_floor));
    }

    x0.check_dim(tree)?;
    let v_ref = sweep_reference(tree, measurements);
    let mut x = x0.clone();
    let mut aux = forward_sweep(tree, v_ref, &x)?;
    let mut objective_trace = Vec::new();
    let mut gain_condition;
    let mut rows_skipped;
    let mut iterations = 0;
    let mut last_step = f64::INFINITY;

    for k in 1..=config.max_iter {
        // current-magnitude rows are skipped while their derivative is
        // singular at the iterate (zero current)
        let mut active: Vec<usize> = Vec::with_capacity(measurements.len());
        rows_skipped = 0;
        for (i, m) in measurements.iter().enumerate() {
            if m.kind == MeasurementKind::BranchCurrentMagnitude {
                if let Location::Branch(b) = m.location {
                    let bi = tree.branch_index(b)?;
                    if x.current(bi).norm() < 1e-12 {
                        rows_skipped += 1;
                        continue;
                    }
                }
            }
            active.push(i);
        }
        let act_meas: Vec<Measurement> = active.iter().map(|&i| measurements[i]).collect();
        let act_w: Vec<f64> = active.iter().map(|&i| weights[i]).collect();
        if act_meas.len() < n_states {
            return Err(WlsError::Underdetermined { states: n_states, got: act_meas.len() });
        }

        let h = measurement_function(tree, &x, &aux, &act_meas)?;
        let rows = jacobian(tree, &x, &aux, &act_meas)?;
        let residuals: Vec<f64> =
            act_meas.iter().zip(&h).map(|(m, hi)| m.value - hi).collect();
        objective_trace.push(weighted_objective(&residuals, &act_w));

        // G = H^T W H and rhs = H^T W r, accumulated from sparse rows
        let mut gain = SymMatrix::zeros(n_states);
        let mut rhs = vec![0.0; n_states];
        for ((row, &w), &res) in rows.iter().zip(&act_w).zip(&residuals) {
            for &(ci, vi) in row {
                rhs[ci] += w * vi * res;
                for &(cj, vj) in row {
                    // (vi*vj)*w is bit-symmetric under i<->j
                    gain.add(ci, cj, (vi * vj) * w);
                }
            }
        }
        let asym = gain.asymmetry();
        if asym > 1e-10 {
            return Err(WlsError::AsymmetricGain(asym));
        }
        let factor = gain.cholesky().map_err(|e| match e {
            LinalgError::NotPositiveDefinite { cond_estimate, .. } => {
                WlsError::SingularGain { cond_estimate }
            }
            LinalgError::DimensionMismatch { .. } => unreachable!("square by construction"),
        })?;
        gain_condition = factor.condition_estimate();
        let dx = factor.solve(&rhs).expect("rhs dimension matches");
        for (xi, di) in x.values.iter_mut().zip(&dx) {
            *xi += di;
        }
        aux = forward_sweep(tree, v_ref, &x)?;
        iterations = k;
        last_step = norm_inf(&dx);
        if last_step <= config.delta {
            let h_final = measurement_function(tree, &x, &aux, &act_meas)?;
            let res_final: Vec<f64> =
                act_meas.iter().zip(&h_final).map(|(m, hi)| m.value - hi).collect();
            let objective = weighted_objective(&res_final, &act_w);
            return Ok(WlsSolution {
                state: x,
                iterations,
                objective,
                objective_trace,
                node_voltages: aux,
                gain_condition,
                rows_skipped,
            });
        }
    }
    Err(WlsError::NotConverged { iterations, last_step })
}

/// Sensor accuracy metadata turned into a measurement variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightSource {
    /// Nominal sensor class: stated maximum error treated as 3 sigma of
    /// a Gaussian over the class full scale.
    SensorClass { max_error: f64, full_scale: f64 },
    /// Variance handed over directly (layer-2 boundary variances).
    Variance(f64),
}

/// Maps weight sources to floored measurement variances.
pub fn assemble_weights(sources: &[WeightSource], variance_floor: f64) -> Vec<f64> {
    sources
        .iter()
        .map(|s| {
            let var = match *s {
                WeightSource::SensorClass { max_error, full_scale } => {
                    let sigma = max_error * full_scale / 3.0;
                    sigma * sigma
                }
                WeightSource::Variance(v) => v,
            };
            var.max(variance_floor)
        })
        .collect()
}
