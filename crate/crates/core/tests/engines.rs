use std::sync::Arc;

use nalgebra::Matrix2;
use qbm_core::backflow::{backflow_integral, default_temperature_grid};
use qbm_core::exact::symplectic_form;
use qbm_core::gip::{channel_lift, evolve_joint, mts_state};
use qbm_core::quadrature::uniform_grid;
use qbm_core::spectral::default_omega_max;
use qbm_core::*;

fn weak_params() -> SpectralParams {
    SpectralParams::new(0.01, 0.25, 1.0).unwrap()
}

#[test]
fn channel_reproduces_single_mode_covariance() {
    let grid = uniform_grid(25.0, 0.01).unwrap();
    let k = Arc::new(coefficient_table(&weak_params(), &grid).unwrap());
    let run = WeakCouplingRun::new(k.clone(), 1.0).unwrap();
    let s0 = run.sigma0;
    for t in [1.0, 5.0, 20.0] {
        let ch = channel_lift(k.as_ref(), t, 1.0).unwrap();
        let out = ch.apply(&(Matrix2::identity() * s0));
        let sigma = run.covariance_at(t).unwrap();
        assert!((out - Matrix2::identity() * sigma).amax() < 1e-9, "t = {t}");
    }
}

#[test]
fn system_marginal_follows_the_channel() {
    let grid = uniform_grid(10.0, 0.01).unwrap();
    let k = coefficient_table(&weak_params(), &grid).unwrap();
    let ch = channel_lift(&k, 7.0, 1.0).unwrap();
    let s = mts_state(0.5, 0.658).unwrap();
    let joint = evolve_joint(&s, &ch);
    assert!((joint.system_block() - ch.apply(&s.system_block())).amax() < 1e-14);
    assert!((joint.ancilla_block() - s.ancilla_block()).amax() == 0.0);
}

#[test]
fn weak_coupling_cross_validation() {
    let p = weak_params();
    let grid = uniform_grid(30.0, 0.05).unwrap();
    let k = Arc::new(coefficient_table(&p, &grid).unwrap());
    let analytic = WeakCouplingRun::new(k, 1.0).unwrap().energy_flow();
    let exact = ExactRun::new(&p, 1.0, 150, default_omega_max(&p))
        .unwrap()
        .energy_flow(&grid);
    let scale = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dev = analytic
        .iter()
        .zip(&exact)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(dev / scale < 0.05, "relative deviation {}", dev / scale);
}

#[test]
fn exact_energy_is_conserved_and_symplectic() {
    let p = SpectralParams::new(0.8, 0.25, 1.0).unwrap();
    let run = ExactRun::new(&p, 1.0, 60, default_omega_max(&p)).unwrap();
    let times: Vec<f64> = (0..=10).map(|i| i as f64 * 3.0).collect();
    let tr = run.trace(&times);
    for (i, t) in times.iter().enumerate() {
        let total = tr.system[i] + tr.environment[i] + tr.interaction[i];
        assert!(total.abs() < 1e-8, "t = {t}: {total}");
    }
    let j = symplectic_form(61);
    let s = run.propagator(4.3).to_matrix();
    assert!((&s * &j * s.transpose() - &j).amax() < 1e-9);
    let composed = run.propagator(1.1).to_matrix() * run.propagator(3.2).to_matrix();
    assert!((composed - s).amax() < 1e-9);
}

#[test]
fn backflow_peaks_at_environment_temperature() {
    let p = weak_params();
    let grid = uniform_grid(50.0, 0.01).unwrap();
    let engine = AnalyticEngine::new(&p, &grid).unwrap();
    let temps = default_temperature_grid(1.0);
    let res = backflow_measure(&engine, &temps, BackflowOptions::default()).unwrap();
    assert!(res.value > 0.0);
    assert_eq!(res.maximizer_temp, 1.0);
    let direct = backflow_integral(&engine.flow(1.0).unwrap());
    assert_eq!(direct, res.value);
}

#[test]
fn fcs_engine_agrees_with_analytic_backflow() {
    let p = weak_params();
    let grid = uniform_grid(30.0, 0.01).unwrap();
    let k = Arc::new(coefficient_table(&p, &grid).unwrap());
    let analytic = AnalyticEngine { kernels: k.clone() }.flow(1.0).unwrap();
    let fcs = FcsEngine {
        kernels: k,
        config: FcsConfig::default(),
    }
    .flow(1.0)
    .unwrap();
    let dev = analytic
        .theta
        .iter()
        .zip(&fcs.theta)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(dev < 1e-4, "{dev}");
}
