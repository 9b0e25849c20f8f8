//! Synthetic benchmark data: customer load and photovoltaic time
//! series, ground-truth system states from the power-flow oracle, and
//! noisy sensor streams with observability masking.
//!
//! Everything is seeded and reproducible: identical config and seed
//! give bit-identical series, truth, and measurements.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use thiserror::Error;

use crate::ac::AcInput;
use crate::model::{CircuitId, FeederModel, ModelError, NodeId, NodeRole};
use crate::neural::standard_normal;
use crate::powerflow::{
    restrict_state, restrict_voltages, solve_powerflow, Injections, NodeVoltages, PowerFlowError,
    PowerInjection, StateVector,
};
use crate::rng::{stream_rng, streams};
use crate::wls::Measurement;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("power flow diverged at timestep {t}: {source}")]
    Divergence { t: usize, source: PowerFlowError },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
}

/// Sensor accuracy class: the stated maximum error is treated as three
/// standard deviations over the class full scale, and samples are
/// truncated at that maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorClass {
    pub max_error: f64,
    pub full_scale: f64,
}

impl SensorClass {
    pub fn sigma(&self) -> f64 {
        self.max_error * self.full_scale / 3.0
    }

    /// Measurement variance, floored so noiseless classes still give a
    /// legal (finite) weight.
    pub fn variance(&self) -> f64 {
        let s = self.sigma();
        (s * s).max(crate::wls::MIN_VARIANCE)
    }

    pub fn bound(&self) -> f64 {
        self.max_error * self.full_scale
    }
}

/// Noise levels per sensor class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Substation P/Q telemetry.
    pub scada_power: SensorClass,
    /// Substation voltage magnitude.
    pub scada_voltage: SensorClass,
    /// Smart-meter voltage magnitude.
    pub meter_voltage: SensorClass,
    /// Smart-meter interval energy (reported as average power).
    pub meter_energy: SensorClass,
    /// Load pseudo-measurements for unmetered customers.
    pub pseudo_power: SensorClass,
    /// Variance of the zero-injection constraints at junction nodes.
    pub virtual_injection_variance: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            scada_power: SensorClass { max_error: 0.03, full_scale: 1.0 },
            scada_voltage: SensorClass { max_error: 0.01, full_scale: 1.0 },
            meter_voltage: SensorClass { max_error: 0.002, full_scale: 1.0 },
            meter_energy: SensorClass { max_error: 0.03, full_scale: 0.01 },
            pseudo_power: SensorClass { max_error: 0.5, full_scale: 0.01 },
            virtual_injection_variance: 1e-10,
        }
    }
}

/// Parameters of the diurnal double-peak load generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadShape {
    /// Mean customer active power, per unit.
    pub mean_p_pu: f64,
    /// Lognormal dispersion of per-customer scale.
    pub lognormal_sigma: f64,
    /// Displacement power factor of customer load.
    pub power_factor: f64,
    /// AR(1) coefficient of the multiplicative noise.
    pub ar1_rho: f64,
    /// Stationary standard deviation of the AR(1) noise.
    pub ar1_sigma: f64,
}

impl Default for LoadShape {
    fn default() -> Self {
        Self {
            mean_p_pu: 3.0e-3,
            lognormal_sigma: 0.4,
            power_factor: 0.95,
            ar1_rho: 0.9,
            ar1_sigma: 0.12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub timesteps: usize,
    pub seed: u64,
    /// Photovoltaic capacity as a fraction of aggregate peak load.
    pub pv_penetration: f64,
    /// Overrides the model's smart-meter flags when set: this fraction
    /// of all customers is metered, drawn from a seeded permutation
    /// (nested across fractions).
    pub meter_penetration: Option<f64>,
    /// Smart-meter reporting interval; one timestep per interval.
    pub meter_interval_min: f64,
    pub noise: NoiseSpec,
    pub load: LoadShape,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            timesteps: 96,
            seed: 1,
            pv_penetration: 0.5,
            meter_penetration: None,
            meter_interval_min: 15.0,
            noise: NoiseSpec::default(),
            load: LoadShape::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn steps_per_day(&self) -> usize {
        ((24.0 * 60.0 / self.meter_interval_min).round() as usize).max(1)
    }
}

/// Which customers report smart-meter data, per circuit, in the
/// model's canonical customer order.
#[derive(Debug, Clone, PartialEq)]
pub struct MeterPlan {
    pub metered: Vec<Vec<NodeId>>,
}

impl MeterPlan {
    /// Metered set from the model's own flags.
    pub fn from_model(model: &FeederModel) -> Self {
        let metered = model
            .secondaries()
            .iter()
            .map(|c| {
                c.customers.iter().filter(|cu| cu.has_smart_meter).map(|cu| cu.node).collect()
            })
            .collect();
        Self { metered }
    }

    /// Metered set as the first `round(fraction * n)` entries of a
    /// seeded permutation of all customers. Larger fractions are
    /// supersets of smaller ones for the same seed.
    pub fn with_penetration(model: &FeederModel, fraction: f64, seed: u64) -> Self {
        let customers: Vec<(CircuitId, NodeId)> =
            model.customers().map(|(cid, cu)| (cid, cu.node)).collect();
        let n = customers.len();
        let k = ((fraction * n as f64).round() as usize).min(n);
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = stream_rng(seed, streams::METER_PICK, 0);
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut picked = vec![false; n];
        for &i in order.iter().take(k) {
            picked[i] = true;
        }
        let mut metered = vec![Vec::new(); model.secondaries().len()];
        for (i, (cid, node)) in customers.iter().enumerate() {
            if picked[i] {
                metered[cid.index()].push(*node);
            }
        }
        Self { metered }
    }

    pub fn for_scenario(model: &FeederModel, config: &ScenarioConfig) -> Self {
        match config.meter_penetration {
            Some(f) => Self::with_penetration(model, f, config.seed),
            None => Self::from_model(model),
        }
    }

    pub fn n_metered(&self) -> usize {
        self.metered.iter().map(|v| v.len()).sum()
    }

    pub fn circuit(&self, id: CircuitId) -> &[NodeId] {
        &self.metered[id.index()]
    }
}

/// Per-customer load and generation series, canonical customer order.
#[derive(Debug, Clone, PartialEq)]
pub struct Profiles {
    pub customers: Vec<(CircuitId, NodeId)>,
    /// consumption, `[timestep][customer]`
    pub p_load: Vec<Vec<f64>>,
    pub q_load: Vec<Vec<f64>>,
    /// photovoltaic generation (non-negative)
    pub pv: Vec<Vec<f64>>,
}

impl Profiles {
    pub fn net_injection(&self, t: usize, c: usize) -> PowerInjection {
        PowerInjection::new(self.p_load[t][c] - self.pv[t][c], self.q_load[t][c])
    }
}

/// Diurnal double-peak template, hour in [0, 24).
fn diurnal(h: f64) -> f64 {
    let morning = 0.35 * (-((h - 8.0) / 2.5) * ((h - 8.0) / 2.5)).exp();
    let evening = 0.55 * (-((h - 19.0) / 3.0) * ((h - 19.0) / 3.0)).exp();
    0.5 + morning + evening
}

/// Clear-sky photovoltaic bell, hour in [0, 24).
fn solar_shape(h: f64) -> f64 {
    if !(6.5..=17.5).contains(&h) {
        return 0.0;
    }
    let s = (PI * (h - 6.5) / 11.0).sin();
    s * s.abs().sqrt()
}

/// Seeded per-customer load/PV series. Photovoltaic capacity is scaled
/// so the aggregate PV peak equals `pv_penetration` times the aggregate
/// load peak.
pub fn generate_profiles(model: &FeederModel, config: &ScenarioConfig) -> Profiles {
    let customers: Vec<(CircuitId, NodeId)> =
        model.customers().map(|(cid, cu)| (cid, cu.node)).collect();
    let has_pv: Vec<bool> = model.customers().map(|(_, cu)| cu.has_pv).collect();
    let n = customers.len();
    let t_count = config.timesteps;
    let steps_per_day = config.steps_per_day() as f64;
    let shape = &config.load;

    let mut p_load = vec![vec![0.0; n]; t_count];
    let mut q_load = vec![vec![0.0; n]; t_count];
    let mut pv = vec![vec![0.0; n]; t_count];

    let tan_phi = (shape.power_factor.acos()).tan();
    for c in 0..n {
        let mut rng = stream_rng(config.seed, streams::LOAD_PROFILE, c as u64);
        let z = standard_normal(&mut rng);
        let scale = shape.mean_p_pu
            * (shape.lognormal_sigma * z - 0.5 * shape.lognormal_sigma * shape.lognormal_sigma)
                .exp();
        let innovation = shape.ar1_sigma * (1.0 - shape.ar1_rho * shape.ar1_rho).sqrt();
        let mut ar = 0.0;
        for (t, row) in p_load.iter_mut().enumerate() {
            let h = 24.0 * ((t as f64) % steps_per_day) / steps_per_day;
            ar = shape.ar1_rho * ar + innovation * standard_normal(&mut rng);
            let factor = (1.0 + ar).max(0.05);
            let p = scale * diurnal(h) * factor;
            row[c] = p;
            q_load[t][c] = p * tan_phi;
        }
    }

    if config.pv_penetration > 0.0 {
        for c in 0..n {
            if !has_pv[c] {
                continue;
            }
            let mut rng = stream_rng(config.seed, streams::PV_PROFILE, c as u64);
            let z = standard_normal(&mut rng);
            let capacity = (0.25 * z).exp();
            let mut cloud = 0.0;
            for (t, row) in pv.iter_mut().enumerate() {
                let h = 24.0 * ((t as f64) % steps_per_day) / steps_per_day;
                cloud = 0.85 * cloud + 0.15 * standard_normal(&mut rng);
                let attenuation = (1.0 - 0.4 * cloud.abs()).clamp(0.1, 1.0);
                row[c] = capacity * solar_shape(h) * attenuation;
            }
        }
        // scale so max_t(sum pv) = penetration * max_t(sum load)
        let peak_load = p_load
            .iter()
            .map(|row| row.iter().sum::<f64>())
            .fold(0.0f64, f64::max);
        let peak_pv = pv.iter().map(|row| row.iter().sum::<f64>()).fold(0.0f64, f64::max);
        if peak_pv > 0.0 {
            let k = config.pv_penetration * peak_load / peak_pv;
            for row in pv.iter_mut() {
                for v in row.iter_mut() {
                    *v *= k;
                }
            }
        }
    }

    Profiles { customers, p_load, q_load, pv }
}

/// Ground-truth states per timestep, over the model's full tree.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub root_voltage: Vec<Complex64>,
    pub voltages: Vec<NodeVoltages>,
    pub currents: Vec<StateVector>,
    pub injections: Vec<Injections>,
}

impl GroundTruth {
    pub fn timesteps(&self) -> usize {
        self.root_voltage.len()
    }
}

/// Substation voltage schedule: slow regulation around 1 p.u.
fn root_voltage_at(t: usize, steps_per_day: usize) -> Complex64 {
    let phase = 2.0 * PI * (t as f64) / (steps_per_day as f64);
    Complex64::new(1.0 + 0.005 * phase.sin(), 0.0)
}

/// Solves the joint power flow per timestep; this is the oracle the
/// estimators are benchmarked against.
pub fn generate_truth(
    model: &FeederModel,
    profiles: &Profiles,
    config: &ScenarioConfig,
) -> Result<GroundTruth, ScenarioError> {
    let tree = model.full_tree();
    let t_count = profiles.p_load.len();
    let mut truth = GroundTruth {
        root_voltage: Vec::with_capacity(t_count),
        voltages: Vec::with_capacity(t_count),
        currents: Vec::with_capacity(t_count),
        injections: Vec::with_capacity(t_count),
    };
    for t in 0..t_count {
        let mut inj = Injections::zeros(model.n_nodes());
        for (c, (_, node)) in profiles.customers.iter().enumerate() {
            inj.add(*node, profiles.net_injection(t, c));
        }
        let v0 = root_voltage_at(t, config.steps_per_day());
        let sol = solve_powerflow(tree, &inj, v0, 1e-12, 100)
            .map_err(|source| ScenarioError::Divergence { t, source })?;
        truth.root_voltage.push(v0);
        truth.voltages.push(sol.voltages);
        truth.currents.push(sol.currents);
        truth.injections.push(inj);
    }
    Ok(truth)
}

/// Smart-meter readings for one circuit at one timestep, aligned with
/// the meter plan's node order.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitTelemetry {
    pub circuit: CircuitId,
    pub meter_voltages: Vec<f64>,
    pub meter_powers: Vec<f64>,
}

/// Everything the hierarchical estimator sees at one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct TimestepData {
    /// Primary-layer sensor set: substation SCADA plus zero-injection
    /// constraints at primary junctions. Boundary pseudo-measurements
    /// are appended by the coordinator.
    pub primary: Vec<Measurement>,
    pub telemetry: Vec<CircuitTelemetry>,
}

/// Truncated Gaussian: sigma from the class, rejected beyond the
/// class's maximum error.
fn truncated_noise(rng: &mut impl Rng, class: SensorClass) -> f64 {
    let sigma = class.sigma();
    if sigma == 0.0 {
        return 0.0;
    }
    let bound = class.bound();
    loop {
        let e = sigma * standard_normal(rng);
        if e.abs() <= bound {
            return e;
        }
    }
}

/// True net active power drawn at the substation node of the primary
/// tree (negative of the feeder supply).
fn root_injection(model: &FeederModel, truth: &GroundTruth, t: usize) -> Complex64 {
    let tree = model.full_tree();
    let root = tree.root();
    let mut inj = Complex64::new(0.0, 0.0);
    for &cb in tree.child_branches_of(root).expect("root in tree") {
        inj -= truth.currents[t].current(cb);
    }
    truth.root_voltage[t] * inj.conj()
}

/// Builds the per-timestep sensor streams.
pub fn synthesize_measurements(
    model: &FeederModel,
    truth: &GroundTruth,
    plan: &MeterPlan,
    config: &ScenarioConfig,
) -> Vec<TimestepData> {
    let tree = model.full_tree();
    let noise = &config.noise;
    let mut out = Vec::with_capacity(truth.timesteps());
    for t in 0..truth.timesteps() {
        let mut rng = stream_rng(config.seed, streams::MEAS_NOISE, t as u64);
        let mut primary = Vec::new();
        // substation SCADA
        let v_root = truth.root_voltage[t].norm();
        primary.push(Measurement::voltage_mag(
            model.root(),
            v_root + truncated_noise(&mut rng, noise.scada_voltage),
            noise.scada_voltage.variance(),
        ));
        let s_root = root_injection(model, truth, t);
        primary.push(Measurement::node_p(
            model.root(),
            s_root.re + truncated_noise(&mut rng, noise.scada_power),
            noise.scada_power.variance(),
        ));
        primary.push(Measurement::node_q(
            model.root(),
            s_root.im + truncated_noise(&mut rng, noise.scada_power),
            noise.scada_power.variance(),
        ));
        // zero-injection constraints at pass-through primary junctions
        for info in model.nodes() {
            if info.role == NodeRole::PrimaryJunction {
                primary.push(Measurement::node_p(
                    info.id,
                    0.0,
                    noise.virtual_injection_variance,
                ));
                primary.push(Measurement::node_q(
                    info.id,
                    0.0,
                    noise.virtual_injection_variance,
                ));
            }
        }
        // smart meters
        let mut telemetry = Vec::with_capacity(model.secondaries().len());
        for circuit in model.secondaries() {
            let nodes = plan.circuit(circuit.id);
            let mut meter_voltages = Vec::with_capacity(nodes.len());
            let mut meter_powers = Vec::with_capacity(nodes.len());
            for &node in nodes {
                let v = truth.voltages[t].at(tree, node).expect("customer in tree").norm();
                meter_voltages.push(v + truncated_noise(&mut rng, noise.meter_voltage));
                let p = truth.injections[t].get(node).p;
                meter_powers.push(p + truncated_noise(&mut rng, noise.meter_energy));
            }
            telemetry.push(CircuitTelemetry {
                circuit: circuit.id,
                meter_voltages,
                meter_powers,
            });
        }
        out.push(TimestepData { primary, telemetry });
    }
    out
}

/// Measurement set for the monolithic joint-WLS baseline over the full
/// network: the primary SCADA set, zero-injection constraints at every
/// pass-through node, smart-meter readings where available, and load
/// pseudo-measurements elsewhere.
pub fn monolithic_measurements(
    model: &FeederModel,
    truth: &GroundTruth,
    data: &TimestepData,
    plan: &MeterPlan,
    config: &ScenarioConfig,
    t: usize,
) -> Vec<Measurement> {
    let noise = &config.noise;
    let mut meas = data.primary.clone();
    // transformer and secondary junction nodes are pass-through too
    for info in model.nodes() {
        match info.role {
            NodeRole::SecondaryTransformer | NodeRole::SecondaryJunction => {
                meas.push(Measurement::node_p(info.id, 0.0, noise.virtual_injection_variance));
                meas.push(Measurement::node_q(info.id, 0.0, noise.virtual_injection_variance));
            }
            _ => {}
        }
    }
    let mut rng = stream_rng(config.seed, streams::PSEUDO_NOISE, t as u64);
    let tan_phi = (config.load.power_factor.acos()).tan();
    for circuit in model.secondaries() {
        let metered = plan.circuit(circuit.id);
        let telem = &data.telemetry[circuit.id.index()];
        for cu in &circuit.customers {
            // pseudo draws happen for every customer so the stream is
            // independent of the metering plan
            let p_noise = truncated_noise(&mut rng, noise.pseudo_power);
            let q_noise = truncated_noise(&mut rng, noise.pseudo_power);
            if let Some(pos) = metered.iter().position(|&n| n == cu.node) {
                let p_read = telem.meter_powers[pos];
                meas.push(Measurement::node_p(cu.node, p_read, noise.meter_energy.variance()));
                // reactive power inferred from an assumed power factor
                meas.push(Measurement::node_q(
                    cu.node,
                    p_read * tan_phi,
                    noise.pseudo_power.variance(),
                ));
                meas.push(Measurement::voltage_mag(
                    cu.node,
                    telem.meter_voltages[pos],
                    noise.meter_voltage.variance(),
                ));
            } else {
                // forecast stand-in: truth-centered wide-noise pseudos
                let true_inj = truth.injections[t].get(cu.node);
                meas.push(Measurement::node_p(
                    cu.node,
                    true_inj.p + p_noise,
                    noise.pseudo_power.variance(),
                ));
                meas.push(Measurement::node_q(
                    cu.node,
                    true_inj.q + q_noise,
                    noise.pseudo_power.variance(),
                ));
            }
        }
    }
    meas
}

/// Supervised warm-start samples for one circuit: inputs built from the
/// telemetry stream and the true transformer voltage, labels are the
/// true circuit branch currents.
pub fn build_pretrain_dataset(
    model: &FeederModel,
    truth: &GroundTruth,
    data: &[TimestepData],
    plan: &MeterPlan,
    circuit: CircuitId,
    layout: &crate::ac::AcInputLayout,
) -> Result<Vec<(AcInput, Vec<f64>)>, ScenarioError> {
    let full = model.full_tree();
    let ctree = model.secondary_tree(circuit)?;
    let tnode = model.circuit(circuit)?.transformer_node;
    let _ = plan;
    let mut out = Vec::with_capacity(data.len());
    for (t, step) in data.iter().enumerate() {
        let telem = &step.telemetry[circuit.index()];
        let v_n = truth.voltages[t].at(full, tnode)?;
        let input = AcInput::assemble(layout, &telem.meter_voltages, &telem.meter_powers, v_n)
            .expect("telemetry matches layout");
        let states = restrict_state(full, &truth.currents[t], ctree)?;
        out.push((input, states.values));
    }
    Ok(out)
}

/// True circuit states and transformer voltages restricted to a tree;
/// used by benchmarks to compare estimates against the oracle.
pub fn truth_for_tree(
    model: &FeederModel,
    truth: &GroundTruth,
    tree: &crate::model::RadialTree,
    t: usize,
) -> Result<(StateVector, NodeVoltages), ScenarioError> {
    let full = model.full_tree();
    let state = restrict_state(full, &truth.currents[t], tree)?;
    let voltages = restrict_voltages(full, &truth.voltages[t], tree)?;
    Ok((state, voltages))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::{build_feeder, feeder60, SynthFeederSpec};
    use crate::powerflow::{energy_balance_residual, kcl_residual_max};

    fn small_config(timesteps: usize) -> ScenarioConfig {
        ScenarioConfig { timesteps, seed: 7, ..ScenarioConfig::default() }
    }

    #[test]
    fn zero_pv_penetration_means_zero_series() {
        let m = build_feeder(&SynthFeederSpec::small(3)).unwrap();
        let cfg = ScenarioConfig { pv_penetration: 0.0, ..small_config(48) };
        let p = generate_profiles(&m, &cfg);
        assert!(p.pv.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn profiles_are_reproducible() {
        let m = build_feeder(&SynthFeederSpec::small(3)).unwrap();
        let cfg = small_config(48);
        assert_eq!(generate_profiles(&m, &cfg), generate_profiles(&m, &cfg));
    }

    #[test]
    fn pv_peak_ratio_matches_penetration() {
        let m = feeder60();
        let cfg = ScenarioConfig { pv_penetration: 0.5, ..small_config(192) };
        let p = generate_profiles(&m, &cfg);
        let peak_load =
            p.p_load.iter().map(|r| r.iter().sum::<f64>()).fold(0.0f64, f64::max);
        let peak_pv = p.pv.iter().map(|r| r.iter().sum::<f64>()).fold(0.0f64, f64::max);
        let ratio = peak_pv / peak_load;
        assert!((ratio - 0.5).abs() < 0.005, "ratio {ratio}");
    }

    #[test]
    fn zero_profiles_give_flat_truth() {
        let m = build_feeder(&SynthFeederSpec::small(2)).unwrap();
        let cfg = ScenarioConfig { pv_penetration: 0.0, ..small_config(3) };
        let mut p = generate_profiles(&m, &cfg);
        for row in p.p_load.iter_mut().chain(p.q_load.iter_mut()) {
            for v in row.iter_mut() {
                *v = 0.0;
            }
        }
        let truth = generate_truth(&m, &p, &cfg).unwrap();
        for t in 0..3 {
            assert!(truth.currents[t].values.iter().all(|&c| c == 0.0));
            for &v in truth.voltages[t].values() {
                assert_eq!(v, truth.root_voltage[t]);
            }
        }
    }

    #[test]
    fn truth_satisfies_kcl_and_energy_balance() {
        let m = feeder60();
        let cfg = small_config(5);
        let p = generate_profiles(&m, &cfg);
        let truth = generate_truth(&m, &p, &cfg).unwrap();
        let tree = m.full_tree();
        for t in 0..truth.timesteps() {
            let kcl =
                kcl_residual_max(tree, &truth.injections[t], &truth.voltages[t], &truth.currents[t])
                    .unwrap();
            assert!(kcl < 1e-8, "kcl {kcl} at t={t}");
            let eb = energy_balance_residual(
                tree,
                &truth.injections[t],
                &truth.voltages[t],
                &truth.currents[t],
            )
            .unwrap();
            assert!(eb < 1e-8, "energy {eb} at t={t}");
            // all voltages in a sane band
            for v in truth.voltages[t].values() {
                let mag = v.norm();
                assert!((0.9..=1.1).contains(&mag), "|V| = {mag}");
            }
        }
    }

    #[test]
    fn noiseless_classes_reproduce_truth() {
        let m = build_feeder(&SynthFeederSpec::small(2)).unwrap();
        let mut cfg = small_config(2);
        cfg.noise = NoiseSpec {
            scada_power: SensorClass { max_error: 0.0, full_scale: 1.0 },
            scada_voltage: SensorClass { max_error: 0.0, full_scale: 1.0 },
            meter_voltage: SensorClass { max_error: 0.0, full_scale: 1.0 },
            meter_energy: SensorClass { max_error: 0.0, full_scale: 1.0 },
            pseudo_power: SensorClass { max_error: 0.0, full_scale: 1.0 },
            virtual_injection_variance: 1e-10,
        };
        let p = generate_profiles(&m, &cfg);
        let truth = generate_truth(&m, &p, &cfg).unwrap();
        let plan = MeterPlan::from_model(&m);
        let data = synthesize_measurements(&m, &truth, &plan, &cfg);
        let tree = m.full_tree();
        for (t, step) in data.iter().enumerate() {
            assert_eq!(step.primary[0].value, truth.root_voltage[t].norm());
            for telem in &step.telemetry {
                for (node, v) in plan.circuit(telem.circuit).iter().zip(&telem.meter_voltages) {
                    let tv = truth.voltages[t].at(tree, *node).unwrap().norm();
                    assert_eq!(*v, tv);
                }
            }
        }
    }

    #[test]
    fn truncation_bound_holds_and_std_is_close() {
        let class = SensorClass { max_error: 0.03, full_scale: 1.0 };
        let mut rng = stream_rng(3, 99, 0);
        let n = 10_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let e = truncated_noise(&mut rng, class);
            assert!(e.abs() <= 0.03 + 1e-15);
            sum += e;
            sumsq += e * e;
        }
        let mean = sum / n as f64;
        let std = (sumsq / n as f64 - mean * mean).sqrt();
        assert!((std - 0.01).abs() < 0.0008, "std {std}");
    }

    #[test]
    fn meter_penetration_rounds_and_nests() {
        let m = feeder60();
        let p10 = MeterPlan::with_penetration(&m, 0.1, 42);
        assert_eq!(p10.n_metered(), 24); // round(23.8)
        let p25 = MeterPlan::with_penetration(&m, 0.25, 42);
        assert_eq!(p25.n_metered(), 60); // round(59.5) = 60
        // nested: every metered node at 10% is metered at 25%
        for (c10, c25) in p10.metered.iter().zip(&p25.metered) {
            for n in c10 {
                assert!(c25.contains(n));
            }
        }
        let p100 = MeterPlan::with_penetration(&m, 1.0, 42);
        assert_eq!(p100.n_metered(), 238);
    }

    #[test]
    fn monolithic_set_observes_the_joint_network() {
        let m = build_feeder(&SynthFeederSpec::small(3)).unwrap();
        let cfg = small_config(1);
        let p = generate_profiles(&m, &cfg);
        let truth = generate_truth(&m, &p, &cfg).unwrap();
        let plan = MeterPlan::from_model(&m);
        let data = synthesize_measurements(&m, &truth, &plan, &cfg);
        let meas = monolithic_measurements(&m, &truth, &data[0], &plan, &cfg, 0);
        assert!(meas.len() >= m.full_tree().state_len());
    }
}
