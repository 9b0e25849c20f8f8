//! End-to-end behavior of the two-layer loop on a small feeder:
//! stage-A convergence with warm-started modules, the boundary fixed
//! point, and the online learning curve from a cold start.

use dsse_core::ac::{AcConfig, AcModule};
use dsse_core::coordinator::{
    run_offline_update, run_timestep, HierarchyConfig, NoClock, StageAOutcome,
};
use dsse_core::model::FeederModel;
use dsse_core::netgen::{build_feeder, SynthFeederSpec};
use dsse_core::scenario::{
    build_pretrain_dataset, generate_profiles, generate_truth, synthesize_measurements, MeterPlan,
    ScenarioConfig, TimestepData,
};

struct Setup {
    model: FeederModel,
    data: Vec<TimestepData>,
    truth: dsse_core::scenario::GroundTruth,
    plan: MeterPlan,
}

fn setup(timesteps: usize, seed: u64) -> Setup {
    let model = build_feeder(&SynthFeederSpec::small(4)).unwrap();
    let cfg = ScenarioConfig { timesteps, seed, ..ScenarioConfig::default() };
    let profiles = generate_profiles(&model, &cfg);
    let truth = generate_truth(&model, &profiles, &cfg).unwrap();
    let plan = MeterPlan::from_model(&model);
    let data = synthesize_measurements(&model, &truth, &plan, &cfg);
    Setup { model, data, truth, plan }
}

fn fresh_modules(model: &FeederModel, seed: u64) -> Vec<AcModule> {
    model
        .secondaries()
        .iter()
        .map(|c| AcModule::new(model, c.id, &AcConfig { seed, ..AcConfig::default() }).unwrap())
        .collect()
}

fn pretrained_modules(s: &Setup, n_samples: usize, seed: u64) -> Vec<AcModule> {
    let mut modules = fresh_modules(&s.model, seed);
    for md in modules.iter_mut() {
        let dataset = build_pretrain_dataset(
            &s.model,
            &s.truth,
            &s.data[..n_samples],
            &s.plan,
            md.circuit(),
            &md.layout,
        )
        .unwrap();
        md.pretrain(&dataset, 40).unwrap();
    }
    modules
}

#[test]
fn warm_started_loop_converges_and_is_self_consistent() {
    let s = setup(260, 11);
    let mut modules = pretrained_modules(&s, 200, 5);
    let cfg = HierarchyConfig::default();

    let mut boundary = None;
    let mut converged = 0usize;
    let n_eval = 40;
    for t in 200..200 + n_eval {
        let result =
            run_timestep(&s.model, &mut modules, &s.data[t], boundary.as_ref(), &cfg, &NoClock)
                .unwrap();
        if result.outcome == StageAOutcome::Converged && result.iterations <= 10 {
            converged += 1;
        }

        // fixed point: one extra pass from the returned boundary moves
        // the transformer voltages less than the tolerance and the
        // injections less than ten times the tolerance
        let again = run_timestep(
            &s.model,
            &mut modules,
            &s.data[t],
            Some(&result.boundary_state()),
            &cfg,
            &NoClock,
        )
        .unwrap();
        for ((_, v1), (_, v2)) in
            result.transformer_voltages.iter().zip(&again.transformer_voltages)
        {
            assert!((v1 - v2).norm() < cfg.boundary_voltage_tol, "voltage fixed point violated");
        }
        for (a, b) in result.secondary.iter().zip(&again.secondary) {
            assert!((a.boundary.p - b.boundary.p).abs() < 10.0 * cfg.boundary_voltage_tol);
            assert!((a.boundary.q - b.boundary.q).abs() < 10.0 * cfg.boundary_voltage_tol);
        }

        boundary = Some(result.boundary_state());
    }
    assert!(
        converged as f64 >= 0.95 * n_eval as f64,
        "only {converged}/{n_eval} timesteps converged within 10 iterations"
    );
}

#[test]
fn estimates_track_truth_after_warm_start() {
    let s = setup(260, 13);
    let mut modules = pretrained_modules(&s, 200, 7);
    let cfg = HierarchyConfig::default();
    let full = s.model.full_tree();

    let mut boundary = None;
    let mut err_sum = 0.0;
    let mut err_n = 0usize;
    for t in 200..260 {
        let result =
            run_timestep(&s.model, &mut modules, &s.data[t], boundary.as_ref(), &cfg, &NoClock)
                .unwrap();
        for est in &result.secondary {
            let ctree = s.model.secondary_tree(est.circuit).unwrap();
            let (true_states, _) =
                dsse_core::scenario::truth_for_tree(&s.model, &s.truth, ctree, t).unwrap();
            let v_n = result
                .transformer_voltages
                .iter()
                .zip(s.model.transformers())
                .find(|(_, &(_, tc))| tc == est.circuit)
                .map(|(&(_, v), _)| v)
                .unwrap();
            let swept =
                dsse_core::powerflow::forward_sweep(ctree, v_n, &est.states).unwrap();
            let (_, true_v) =
                dsse_core::scenario::truth_for_tree(&s.model, &s.truth, ctree, t).unwrap();
            for (a, b) in swept.values().iter().zip(true_v.values()) {
                err_sum += (a.norm() - b.norm()).abs() / b.norm();
                err_n += 1;
            }
            let _ = true_states;
        }
        boundary = Some(result.boundary_state());
    }
    let mape = 100.0 * err_sum / err_n as f64;
    assert!(mape < 2.0, "secondary voltage MAPE {mape:.3}% too high");
}

#[test]
fn online_learning_reduces_residuals_from_cold_start() {
    let s = setup(2000, 17);
    let mut modules = fresh_modules(&s.model, 23);
    let cfg = HierarchyConfig::default();

    let records =
        run_offline_update(&s.model, &mut modules, &s.data, &cfg, &NoClock, |_, _| {}).unwrap();

    let n_modules = modules.len();
    let mut improved = 0usize;
    let mut critic_halved = 0usize;
    for mi in 0..n_modules {
        let series: Vec<&dsse_core::ac::TrainReport> = records
            .iter()
            .filter_map(|r| r.modules[mi].report.as_ref())
            .filter(|r| !r.skipped)
            .collect();
        assert!(series.len() > 1500, "module {mi} trained too rarely");
        let first: f64 =
            series[..100].iter().map(|r| r.realized_residual).sum::<f64>() / 100.0;
        let tail = &series[series.len() - 100..];
        let last: f64 = tail.iter().map(|r| r.realized_residual).sum::<f64>() / 100.0;
        if last < 0.1 * first {
            improved += 1;
        }
        let first_err: f64 = series[..100]
            .iter()
            .map(|r| (r.predicted_residual - r.realized_residual).abs())
            .sum::<f64>()
            / 100.0;
        let last_err: f64 = tail
            .iter()
            .map(|r| (r.predicted_residual - r.realized_residual).abs())
            .sum::<f64>()
            / 100.0;
        if last_err <= 0.5 * first_err {
            critic_halved += 1;
        }
        println!(
            "module {mi}: residual {first:.3e} -> {last:.3e} (x{:.1}), critic err {first_err:.3e} -> {last_err:.3e}",
            first / last.max(1e-300),
        );
    }
    assert!(
        improved as f64 >= 0.9 * n_modules as f64,
        "only {improved}/{n_modules} modules reduced residual 10x"
    );
    assert!(
        critic_halved as f64 >= 0.9 * n_modules as f64,
        "only {critic_halved}/{n_modules} critics halved their error"
    );
}
