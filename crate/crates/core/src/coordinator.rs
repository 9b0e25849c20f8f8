//! The closed estimation loop: per timestep, the primary WLS and the
//! per-transformer modules exchange boundary information (transformer
//! voltages down, net injections with variances up) until the boundary
//! stabilizes. Offline, the same loop drives the modules' training
//! steps. Primary-side switching is applied here too, rebuilding the
//! model while leaving the secondary circuits untouched.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
use thiserror::Error;

use crate::ac::{AcError, AcInput, AcModule, BoundaryUp, TrainReport};
use crate::model::{
    Branch, BranchId, FeederModel, ModelError, NodeId, NodeRole, SecondaryCircuit,
};
use crate::powerflow::StateVector;
use crate::scenario::TimestepData;
use crate::wls::{wls_solve, Measurement, WlsConfig, WlsError, WlsSolution};

#[derive(Debug, Error, PartialEq)]
pub enum CoordError {
    #[error("primary WLS failed at stage-A iteration {iteration}: {source}")]
    WlsAt { iteration: usize, source: WlsError },
    #[error("module for circuit {circuit}: {source}")]
    Module { circuit: u32, source: AcError },
    #[error("switch op opens branch {0} which belongs to a secondary circuit")]
    OpenSecondaryBranch(u32),
    #[error("switch op endpoint node {0} is not on the primary feeder")]
    CloseOffPrimary(u32),
    #[error("telemetry stream has {got} circuits, model has {expected}")]
    TelemetryShape { expected: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Wall-clock source; the std companion crate provides one backed by a
/// monotonic clock, tests use [`NoClock`].
pub trait Clock {
    fn now_seconds(&self) -> f64;
}

/// Zero clock: all reported timings are 0.
pub struct NoClock;

impl Clock for NoClock {
    fn now_seconds(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HierarchyConfig {
    /// Stage-A iteration cap.
    pub max_stage_a_iters: usize,
    /// Boundary voltage stabilization tolerance (per unit).
    pub boundary_voltage_tol: f64,
    /// Confidence mixing factor: boundary variances are inflated by
    /// `1 + kappa * |recent mean TDE| / residual scale`.
    pub confidence_kappa: f64,
    /// Variance attached to bootstrap boundary injections.
    pub initial_boundary_variance: f64,
    pub wls: WlsConfig,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self {
            max_stage_a_iters: 20,
            boundary_voltage_tol: 1e-4,
            confidence_kappa: 1.0,
            initial_boundary_variance: 1e-2,
            wls: WlsConfig::default(),
        }
    }
}

/// Boundary injections per transformer, in `model.transformers()`
/// order; carried between timesteps as the warm start.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryState {
    pub per_transformer: Vec<BoundaryUp>,
}

impl BoundaryState {
    /// Cold start: per-circuit smart-meter power sums, wide variance.
    pub fn cold_start(model: &FeederModel, data: &TimestepData, variance: f64) -> Self {
        let per_transformer = model
            .transformers()
            .iter()
            .map(|&(_, circuit)| {
                let telem = &data.telemetry[circuit.index()];
                let p: f64 = telem.meter_powers.iter().sum();
                BoundaryUp { p, q: 0.0, var_p: variance, var_q: variance }
            })
            .collect();
        Self { per_transformer }
    }
}

/// One circuit's share of a timestep result.
#[derive(Debug, Clone)]
pub struct SecondaryEstimate {
    pub circuit: crate::model::CircuitId,
    pub states: StateVector,
    pub boundary: BoundaryUp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageAOutcome {
    Converged,
    IterationCapped,
    /// Boundary voltage change failed to shrink for three consecutive
    /// iterations; the best-objective iterate was returned instead.
    OscillationFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageTimings {
    pub layer1_s: f64,
    pub layer2_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone)]
pub struct TimestepResult {
    pub wls: WlsSolution,
    pub transformer_voltages: Vec<(NodeId, Complex64)>,
    pub secondary: Vec<SecondaryEstimate>,
    pub iterations: usize,
    pub outcome: StageAOutcome,
    pub timings: StageTimings,
}

impl TimestepResult {
    pub fn boundary_state(&self) -> BoundaryState {
        BoundaryState {
            per_transformer: self.secondary.iter().map(|s| s.boundary).collect(),
        }
    }
}

/// Boundary pseudo-measurements for the primary WLS, with variances
/// inflated by each module's confidence factor and floored.
fn boundary_measurements(
    model: &FeederModel,
    boundary: &BoundaryState,
    modules: &[AcModule],
    kappa: f64,
    variance_floor: f64,
) -> Vec<Measurement> {
    let mut out = Vec::with_capacity(2 * boundary.per_transformer.len());
    for (&(node, circuit), b) in model.transformers().iter().zip(&boundary.per_transformer) {
        let inflation = modules
            .iter()
            .find(|m| m.circuit() == circuit)
            .map_or(1.0, |m| m.variance_inflation(kappa));
        let var_p = (b.var_p * inflation).max(variance_floor);
        let var_q = (b.var_q * inflation).max(variance_floor);
        out.push(Measurement::transformer_p(node, b.p, var_p));
        out.push(Measurement::transformer_q(node, b.q, var_q));
    }
    out
}

struct IterateSnapshot {
    wls: WlsSolution,
    transformer_voltages: Vec<(NodeId, Complex64)>,
    secondary: Vec<SecondaryEstimate>,
    objective: f64,
}

/// One closed-loop estimation pass for a single timestep.
///
/// Iterates: assemble boundary pseudo-measurements, solve the primary
/// WLS, sweep transformer voltages down, let every module re-estimate
/// its circuit (mean mode) and return new boundary injections - until
/// the boundary voltages move less than the tolerance, the injections
/// stop changing, the iteration cap is hit, or oscillation is detected.
pub fn run_timestep(
    model: &FeederModel,
    modules: &mut [AcModule],
    data: &TimestepData,
    prev_boundary: Option<&BoundaryState>,
    config: &HierarchyConfig,
    clock: &dyn Clock,
) -> Result<TimestepResult, CoordError> {
    if data.telemetry.len() != model.secondaries().len() {
        return Err(CoordError::TelemetryShape {
            expected: model.secondaries().len(),
            got: data.telemetry.len(),
        });
    }
    let t_start = clock.now_seconds();
    let tree = model.primary_tree();
    let mut boundary = match prev_boundary {
        Some(b) => b.clone(),
        None => BoundaryState::cold_start(model, data, config.initial_boundary_variance),
    };

    let mut x0 = StateVector::zeros(tree);
    let mut prev_voltages: Option<Vec<Complex64>> = None;
    let mut dv_history: Vec<f64> = Vec::new();
    let mut best: Option<IterateSnapshot> = None;
    let mut layer1_s = 0.0;
    let mut layer2_s = 0.0;
    let mut outcome = StageAOutcome::IterationCapped;
    let mut iterations = 0;

    for iter in 1..=config.max_stage_a_iters {
        iterations = iter;
        let mut measurements = data.primary.clone();
        measurements.extend(boundary_measurements(
            model,
            &boundary,
            modules,
            config.confidence_kappa,
            config.wls.variance_floor,
        ));

        let l1_start = clock.now_seconds();
        let wls = wls_solve(tree, &measurements, &config.wls, &x0)
            .map_err(|source| CoordError::WlsAt { iteration: iter, source })?;
        layer1_s += clock.now_seconds() - l1_start;
        x0 = wls.state.clone();

        let transformer_voltages: Vec<(NodeId, Complex64)> = model
            .transformers()
            .iter()
            .map(|&(node, _)| Ok((node, wls.voltage_at(tree, node)?)))
            .collect::<Result<_, ModelError>>()?;

        // largest boundary-voltage movement since the previous iterate
        let dv = match &prev_voltages {
            Some(prev) => transformer_voltages
                .iter()
                .zip(prev)
                .map(|((_, v), p)| (v - p).norm())
                .fold(0.0f64, f64::max),
            None => f64::INFINITY,
        };
        prev_voltages = Some(transformer_voltages.iter().map(|&(_, v)| v).collect());

        // layer 2: every module re-estimates from its fresh boundary voltage
        let l2_start = clock.now_seconds();
        let mut secondary = Vec::with_capacity(modules.len());
        let mut d_boundary = 0.0f64;
        for module in modules.iter() {
            let circuit = module.circuit();
            let telem = &data.telemetry[circuit.index()];
            let v_n = transformer_voltages
                .iter()
                .find(|(node, _)| {
                    model
                        .transformers()
                        .iter()
                        .any(|&(tn, tc)| tc == circuit && tn == *node)
                })
                .map(|&(_, v)| v)
                .expect("every circuit has a transformer link");
            let input =
                AcInput::assemble(&module.layout, &telem.meter_voltages, &telem.meter_powers, v_n)
                    .map_err(|source| CoordError::Module { circuit: circuit.0, source })?;
            let (states, up) = module
                .estimate(&input)
                .map_err(|source| CoordError::Module { circuit: circuit.0, source })?;
            let slot = model
                .transformers()
                .iter()
                .position(|&(_, tc)| tc == circuit)
                .expect("transformer link exists");
            let old = boundary.per_transformer[slot];
            d_boundary = d_boundary.max((up.p - old.p).abs()).max((up.q - old.q).abs());
            boundary.per_transformer[slot] = up;
            secondary.push(SecondaryEstimate { circuit, states, boundary: up });
        }
        layer2_s += clock.now_seconds() - l2_start;

        let objective = wls.objective;
        let snapshot = IterateSnapshot { wls, transformer_voltages, secondary, objective };
        let replace = best.as_ref().map_or(true, |b| snapshot.objective <= b.objective);
        let last = snapshot;
        if replace {
            best = Some(IterateSnapshot {
                wls: last.wls.clone(),
                transformer_voltages: last.transformer_voltages.clone(),
                secondary: last.secondary.clone(),
                objective: last.objective,
            });
        }

        // convergence: boundary injections settled, or voltages settled
        if d_boundary < 10.0 * config.boundary_voltage_tol
            || (iter >= 2 && dv < config.boundary_voltage_tol)
        {
            outcome = StageAOutcome::Converged;
            let timings = StageTimings {
                layer1_s,
                layer2_s,
                total_s: clock.now_seconds() - t_start,
            };
            return Ok(TimestepResult {
                wls: last.wls,
                transformer_voltages: last.transformer_voltages,
                secondary: last.secondary,
                iterations,
                outcome,
                timings,
            });
        }

        if dv.is_finite() {
            dv_history.push(dv);
            let n = dv_history.len();
            if n >= 3 && dv_history[n - 1] >= dv_history[n - 2] && dv_history[n - 2] >= dv_history[n - 3]
            {
                outcome = StageAOutcome::OscillationFallback;
                break;
            }
        }

        if iter == config.max_stage_a_iters {
            outcome = StageAOutcome::IterationCapped;
        }
    }

    let fallback = best.expect("at least one iterate completed");
    let timings = StageTimings { layer1_s, layer2_s, total_s: clock.now_seconds() - t_start };
    Ok(TimestepResult {
        wls: fallback.wls,
        transformer_voltages: fallback.transformer_voltages,
        secondary: fallback.secondary,
        iterations,
        outcome,
        timings,
    })
}

/// Per-module outcome of one offline training timestep.
#[derive(Debug, Clone)]
pub struct ModuleStepRecord {
    pub circuit: crate::model::CircuitId,
    /// `None` when the step failed (for example, no metered customers);
    /// failures are logged by the caller, never fatal.
    pub report: Option<TrainReport>,
}

#[derive(Debug, Clone)]
pub struct TimestepTrainRecord {
    pub t: usize,
    pub stage_a_iterations: usize,
    pub outcome: StageAOutcome,
    pub modules: Vec<ModuleStepRecord>,
}

/// Runs stage A followed by one training step per module, over a
/// stream of timesteps. The returned records carry every module's
/// realized/predicted residuals for learning-curve analysis.
pub fn run_offline_update(
    model: &FeederModel,
    modules: &mut [AcModule],
    stream: &[TimestepData],
    config: &HierarchyConfig,
    clock: &dyn Clock,
    mut on_step: impl FnMut(&TimestepTrainRecord, &TimestepResult),
) -> Result<Vec<TimestepTrainRecord>, CoordError> {
    let mut records = Vec::with_capacity(stream.len());
    let mut boundary: Option<BoundaryState> = None;
    for (t, data) in stream.iter().enumerate() {
        let result = run_timestep(model, modules, data, boundary.as_ref(), config, clock)?;
        let mut step_records = Vec::with_capacity(modules.len());
        for module in modules.iter_mut() {
            let circuit = module.circuit();
            let telem = &data.telemetry[circuit.index()];
            let v_n = result
                .transformer_voltages
                .iter()
                .zip(model.transformers())
                .find(|(_, &(_, tc))| tc == circuit)
                .map(|(&(_, v), _)| v)
                .expect("transformer link exists");
            let report = AcInput::assemble(
                &module.layout,
                &telem.meter_voltages,
                &telem.meter_powers,
                v_n,
            )
            .and_then(|input| module.train_step(&input))
            .ok();
            step_records.push(ModuleStepRecord { circuit, report });
        }
        let record = TimestepTrainRecord {
            t,
            stage_a_iterations: result.iterations,
            outcome: result.outcome,
            modules: step_records,
        };
        on_step(&record, &result);
        boundary = Some(result.boundary_state());
        records.push(record);
    }
    Ok(records)
}

/// Branch switching operations on the primary feeder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SwitchOp {
    /// Open (remove) a primary branch.
    Open(BranchId),
    /// Close (add) a tie branch between two primary nodes.
    Close { from: NodeId, to: NodeId, r: f64, x: f64 },
}

/// Applies switching ops and revalidates. Branch ids are re-densified;
/// secondary circuits keep their topology (their branch ids are
/// remapped). The estimator Jacobians are structural functions of the
/// model, so the next timestep picks the new topology up automatically;
/// the trained modules are reused as-is.
pub fn apply_topology_change(
    model: &FeederModel,
    ops: &[SwitchOp],
) -> Result<FeederModel, CoordError> {
    // which branches are secondary-owned
    let mut circuit_branch = vec![false; model.branches().len()];
    for c in model.secondaries() {
        for b in &c.branches {
            circuit_branch[b.index()] = true;
        }
    }
    let mut removed = vec![false; model.branches().len()];
    let mut added: Vec<(NodeId, NodeId, f64, f64)> = Vec::new();
    for op in ops {
        match *op {
            SwitchOp::Open(b) => {
                if b.index() >= model.branches().len() {
                    return Err(CoordError::Model(ModelError::UnknownBranch(b.0)));
                }
                if circuit_branch[b.index()] {
                    return Err(CoordError::OpenSecondaryBranch(b.0));
                }
                removed[b.index()] = true;
            }
            SwitchOp::Close { from, to, r, x } => {
                for n in [from, to] {
                    let role = model.node_role(n)?;
                    if !role.is_primary() {
                        return Err(CoordError::CloseOffPrimary(n.0));
                    }
                }
                added.push((from, to, r, x));
            }
        }
    }

    // rebuild with dense ids: survivors in old order, then additions
    let mut id_map = vec![None; model.branches().len()];
    let mut branches = Vec::with_capacity(model.branches().len());
    for b in model.branches() {
        if removed[b.id.index()] {
            continue;
        }
        let new_id = BranchId(branches.len() as u32);
        id_map[b.id.index()] = Some(new_id);
        branches.push(Branch { id: new_id, ..*b });
    }
    for (from, to, r, x) in added {
        let id = BranchId(branches.len() as u32);
        branches.push(Branch { id, from, to, r, x });
    }
    let secondaries: Vec<SecondaryCircuit> = model
        .secondaries()
        .iter()
        .map(|c| SecondaryCircuit {
            id: c.id,
            transformer_node: c.transformer_node,
            nodes: c.nodes.clone(),
            branches: c
                .branches
                .iter()
                .map(|b| id_map[b.index()].expect("secondary branches are never removed"))
                .collect(),
            customers: c.customers.clone(),
        })
        .collect();

    let rebuilt = FeederModel::new(
        model.nodes().to_vec(),
        branches,
        model.transformers().to_vec(),
        secondaries,
        model.base(),
    )?;
    Ok(rebuilt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ac::AcConfig;
    use crate::model::{CircuitId, NodeRole};
    use crate::netgen::{build_feeder, SynthFeederSpec};
    use crate::scenario::{
        generate_profiles, generate_truth, synthesize_measurements, MeterPlan, NoiseSpec,
        ScenarioConfig, SensorClass,
    };

    fn noiseless(cfg: &mut ScenarioConfig) {
        cfg.noise = NoiseSpec {
            scada_power: SensorClass { max_error: 0.0, full_scale: 1.0 },
            scada_voltage: SensorClass { max_error: 0.0, full_scale: 1.0 },
            meter_voltage: SensorClass { max_error: 0.0, full_scale: 1.0 },
            meter_energy: SensorClass { max_error: 0.0, full_scale: 1.0 },
            pseudo_power: SensorClass { max_error: 0.0, full_scale: 1.0 },
            virtual_injection_variance: 1e-10,
        };
    }

    fn zero_load_setup() -> (crate::model::FeederModel, Vec<AcModule>, Vec<TimestepData>) {
        let m = build_feeder(&SynthFeederSpec::small(3)).unwrap();
        let mut cfg = ScenarioConfig { timesteps: 2, pv_penetration: 0.0, ..Default::default() };
        noiseless(&mut cfg);
        let mut profiles = generate_profiles(&m, &cfg);
        for row in profiles.p_load.iter_mut().chain(profiles.q_load.iter_mut()) {
            for v in row.iter_mut() {
                *v = 0.0;
            }
        }
        // hold the substation at exactly 1.0 so the flat profile is exact
        let mut truth = generate_truth(&m, &profiles, &cfg).unwrap();
        for t in 0..truth.timesteps() {
            truth.root_voltage[t] = num_complex::Complex64::new(1.0, 0.0);
            let sol = crate::powerflow::solve_powerflow(
                m.full_tree(),
                &truth.injections[t],
                truth.root_voltage[t],
                1e-12,
                50,
            )
            .unwrap();
            truth.voltages[t] = sol.voltages;
            truth.currents[t] = sol.currents;
        }
        let plan = MeterPlan::from_model(&m);
        let data = synthesize_measurements(&m, &truth, &plan, &cfg);
        let modules: Vec<AcModule> = m
            .secondaries()
            .iter()
            .map(|c| {
                let mut md = AcModule::new(&m, c.id, &AcConfig::default()).unwrap();
                md.zero_networks();
                md
            })
            .collect();
        (m, modules, data)
    }

    #[test]
    fn zero_load_converges_first_iteration_flat() {
        let (m, mut modules, data) = zero_load_setup();
        let cfg = HierarchyConfig::default();
        let result =
            run_timestep(&m, &mut modules, &data[0], None, &cfg, &NoClock).unwrap();
        assert_eq!(result.outcome, StageAOutcome::Converged);
        assert_eq!(result.iterations, 1);
        for (_, v) in &result.transformer_voltages {
            assert!((v - num_complex::Complex64::new(1.0, 0.0)).norm() < 1e-9);
        }
        for s in &result.secondary {
            assert!(s.boundary.p.abs() < 1e-12);
            assert!(s.boundary.q.abs() < 1e-12);
            assert!(s.states.values.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn mean_mode_timestep_is_deterministic() {
        let (m, mut modules, data) = zero_load_setup();
        let cfg = HierarchyConfig::default();
        let a = run_timestep(&m, &mut modules, &data[0], None, &cfg, &NoClock).unwrap();
        let b = run_timestep(&m, &mut modules, &data[0], None, &cfg, &NoClock).unwrap();
        assert_eq!(a.wls.state, b.wls.state);
        assert_eq!(a.iterations, b.iterations);
        for (x, y) in a.secondary.iter().zip(&b.secondary) {
            assert_eq!(x.states, y.states);
        }
    }

    #[test]
    fn huge_boundary_variance_is_floored_not_trusted() {
        let (m, modules, _) = zero_load_setup();
        let boundary = BoundaryState {
            per_transformer: m
                .transformers()
                .iter()
                .map(|_| BoundaryUp { p: 0.5, q: 0.1, var_p: 1e12, var_q: 0.0 })
                .collect(),
        };
        let meas = boundary_measurements(&m, &boundary, &modules, 1.0, 1e-12);
        // huge variance passes through (weight ~ 1e-12), zero variance
        // is floored up to the configured floor
        assert_eq!(meas[0].variance, 1e12);
        assert_eq!(meas[1].variance, 1e-12);
    }

    #[test]
    fn offline_update_with_zero_perturbation_keeps_actor() {
        let (m, mut modules, data) = zero_load_setup();
        for md in modules.iter_mut() {
            md.perturb_halfwidth = 0.0;
            md.perturb_floor = 0.0;
        }
        let before: Vec<_> =
            modules.iter().map(|m| m.policy.mean_net.params_flat()).collect();
        let cfg = HierarchyConfig::default();
        let records =
            run_offline_update(&m, &mut modules, &data, &cfg, &NoClock, |_, _| {}).unwrap();
        assert_eq!(records.len(), data.len());
        for (md, b) in modules.iter().zip(&before) {
            assert_eq!(&md.policy.mean_net.params_flat(), b);
        }
        // every module reported (all circuits metered in the small fixture)
        assert!(records
            .iter()
            .all(|r| r.modules.iter().all(|mr| mr.report.is_some())));
    }

    #[test]
    fn empty_ops_reproduce_the_model() {
        let m = build_feeder(&SynthFeederSpec::small(2)).unwrap();
        let m2 = apply_topology_change(&m, &[]).unwrap();
        assert_eq!(m, m2);
    }

    /// 6-node primary ring candidate: trunk 0-1-2, lateral 1-3, 2-4, 4-5.
    fn six_node_primary() -> crate::model::FeederModel {
        let mut b = crate::model::ModelBuilder::new();
        let n0 = b.node(NodeRole::Substation);
        let n1 = b.node(NodeRole::PrimaryJunction);
        let n2 = b.node(NodeRole::PrimaryJunction);
        let n3 = b.node(NodeRole::PrimaryJunction);
        let n4 = b.node(NodeRole::PrimaryJunction);
        let n5 = b.node(NodeRole::PrimaryJunction);
        b.branch(n0, n1, 0.01, 0.02);
        b.branch(n1, n2, 0.01, 0.02);
        b.branch(n1, n3, 0.01, 0.02);
        b.branch(n2, n4, 0.01, 0.02);
        b.branch(n4, n5, 0.01, 0.02);
        b.build().unwrap()
    }

    #[test]
    fn switch_pair_yields_valid_tree() {
        let m = six_node_primary();
        // move node 4's subtree from node 2 over to node 3
        let ops = [
            SwitchOp::Open(BranchId(3)),
            SwitchOp::Close { from: NodeId(3), to: NodeId(4), r: 0.012, x: 0.022 },
        ];
        let m2 = apply_topology_change(&m, &ops).unwrap();
        // tree-validation oracle: counts and full reachability are
        // enforced by the model constructor; check the new edge exists
        assert_eq!(m2.branches().len(), m2.n_nodes() - 1);
        assert!(m2
            .branches()
            .iter()
            .any(|b| (b.from == NodeId(3) && b.to == NodeId(4)) && (b.r - 0.012).abs() < 1e-15));
        let path = m2.path_to_root(NodeId(5)).unwrap();
        assert_eq!(path.len(), 4); // 0-1, 1-3, 3-4, 4-5
    }

    #[test]
    fn switch_that_splits_the_tree_is_rejected() {
        let m = six_node_primary();
        let err = apply_topology_change(&m, &[SwitchOp::Open(BranchId(4))]).unwrap_err();
        assert!(matches!(err, CoordError::Model(_)), "got {err:?}");
    }

    #[test]
    fn opening_secondary_branch_is_rejected() {
        let m = build_feeder(&SynthFeederSpec::small(2)).unwrap();
        let cid = CircuitId(0);
        let sec_branch = m.circuit(cid).unwrap().branches[0];
        let err = apply_topology_change(&m, &[SwitchOp::Open(sec_branch)]).unwrap_err();
        assert_eq!(err, CoordError::OpenSecondaryBranch(sec_branch.0));
    }
}
