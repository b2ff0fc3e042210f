//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{Matrix2, Matrix4, Vector4};
use qbm_cli::{Format, Output, SimulationConfig, SweepAxis, SweepParameter};
use qbm_core::backflow::default_temperature_grid;
use qbm_core::exact::symplectic_form;
use qbm_core::fcs::cgf_trajectory;
use qbm_core::gip::{channel_series, evolve_joint, gip_with, mts_state, sts_state, GipOptions, QfiMethod};
use qbm_core::ode::StepperConfig;
use qbm_core::quadrature::uniform_grid;
use qbm_core::spectral::{correlation_function, dissipation_kernel, noise_kernel, MasterRates};
use qbm_core::{
    backflow_measure, coefficient_table, fcs_first_moment, gip_trajectory, threshold_coupling, AnalyticEngine,
    BackflowOptions, EngineTag, ExactEngine, ExactRun, FcsConfig, SemigroupRates, SpectralParams, ThresholdConfig,
    TwoModeState, WeakCouplingRun,
};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = fn() -> Check;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn num<T>(r: qbm_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn params(lambda: f64, omega_c: f64, temp_env: f64) -> SpectralParams {
    SpectralParams::new(lambda, omega_c, temp_env).unwrap()
}

fn sup_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    sup_abs(a.iter().zip(b).map(|(x, y)| x - y))
}

fn within(start: Instant, limit: Duration) -> Result<Duration, String> {
    let el = start.elapsed();
    if el > limit {
        return Err(format!("took {el:.1?}, limit {limit:?}"));
    }
    Ok(el)
}

fn kernel_correctness() -> Check {
    let start = Instant::now();
    let times: Vec<f64> = (0..=200).map(|i| i as f64 * 0.25).collect();
    let mut worst: f64 = 0.0;
    for lambda in [0.01, 0.1] {
        for omega_c in [0.25, 1.0] {
            for temp in [0.25, 1.0] {
                let p = params(lambda, omega_c, temp);
                for &t in &times {
                    let phi = num(correlation_function(t, &p))?;
                    let d1 = num(noise_kernel(t, &p))?;
                    let d2 = dissipation_kernel(t, &p);
                    worst = worst.max((d1 - 2.0 * phi.re).abs()).max((d2 + 2.0 * phi.im).abs());
                }
            }
        }
    }
    ensure!(worst < 1e-8, "max |closed form - quadrature| = {worst:e}");
    let el = within(start, Duration::from_secs(10))?;
    Ok(format!("max deviation {worst:.2e} over 8 parameter sets, {el:.1?}"))
}

fn exact_vs_analytic(lambda: f64, grid: &[f64]) -> Result<f64, String> {
    let p = params(lambda, 0.25, 1.0);
    let k = Arc::new(num(coefficient_table(&p, grid))?);
    let analytic = num(WeakCouplingRun::new(k, 1.0))?.energy_flow();
    let exact = num(ExactRun::new(&p, 1.0, 150, 8.0))?.energy_flow(grid);
    Ok(sup_diff(&analytic, &exact) / sup_abs(analytic.iter().copied()))
}

fn engine_cross_validation() -> Check {
    let start = Instant::now();
    let grid = num(uniform_grid(30.0, 0.01))?;
    let weak = exact_vs_analytic(0.01, &grid)?;
    let strong = exact_vs_analytic(1.0, &grid)?;
    ensure!(weak < 0.05, "lambda = 0.01: relative deviation {weak:.4}");
    ensure!(strong > 0.2, "lambda = 1: relative deviation only {strong:.4}");
    let el = within(start, Duration::from_secs(120))?;
    Ok(format!(
        "deviation {weak:.4} at lambda = 0.01, {strong:.3} at lambda = 1, {el:.1?}"
    ))
}

fn fcs_self_check() -> Check {
    let p = params(0.01, 0.25, 1.0);
    let grid = num(uniform_grid(30.0, 0.01))?;
    let k = Arc::new(num(coefficient_table(&p, &grid))?);
    let run = num(WeakCouplingRun::new(k, 1.0))?;
    let m = num(fcs_first_moment(&run, FcsConfig::default()))?;
    let dev = sup_diff(&m.theta, &run.energy_flow());
    ensure!(dev < 1e-4, "theta deviation {dev:e}");
    let zero = num(cgf_trajectory(0.0, &run, StepperConfig::default()))?;
    let trace_err = sup_abs(zero.log_psi.iter().map(|z| z.norm()));
    ensure!(trace_err < 1e-9, "eta = 0 trace defect {trace_err:e}");
    Ok(format!(
        "theta deviation {dev:.2e}, eta = 0 trace defect {trace_err:.1e}"
    ))
}

fn conservation() -> Check {
    let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.5).collect();
    let mut worst: f64 = 0.0;
    for lambda in [0.01, 0.8, 1.8] {
        for n in [150, 300] {
            let run = num(ExactRun::new(&params(lambda, 0.25, 1.0), 1.0, n, 8.0))?;
            let tr = run.trace(&times);
            let defect = sup_abs((0..times.len()).map(|i| tr.system[i] + tr.environment[i] + tr.interaction[i]));
            ensure!(defect < 1e-8, "lambda = {lambda}, N = {n}: energy defect {defect:e}");
            worst = worst.max(defect);
        }
    }
    Ok(format!("max energy defect {worst:.1e}"))
}

fn backflow_phenomenology() -> Check {
    let grid = num(uniform_grid(50.0, 0.01))?;
    let temps = default_temperature_grid(1.0);

    let weak = AnalyticEngine::new(&params(0.01, 0.25, 1.0), &grid).map_err(|e| e.to_string())?;
    let a = num(backflow_measure(&weak, &temps, BackflowOptions::default()))?;
    ensure!(a.value > 0.0, "no backflow at lambda = 0.01");
    ensure!(a.maximizer_temp == 1.0, "maximised at T_S = {}", a.maximizer_temp);

    let mut prev = 0.0;
    for i in 1..=10 {
        let lambda = i as f64 / 100.0;
        let e = num(AnalyticEngine::new(&params(lambda, 0.25, 1.0), &grid))?;
        let v = num(backflow_measure(&e, &temps, BackflowOptions::default()))?.value;
        ensure!(
            v >= prev,
            "backflow drops to {v:e} at lambda = {lambda} (from {prev:e})"
        );
        prev = v;
    }

    let strong = num(ExactEngine::new(&params(1.8, 0.25, 1.0), 300, None, &grid))?;
    let c = num(backflow_measure(&strong, &temps, BackflowOptions::default()))?;
    ensure!(c.value < 1e-8, "backflow {:e} at lambda = 1.8", c.value);

    let th = num(threshold_coupling(0.25, 1.0, &ThresholdConfig::default()))?;
    ensure!(
        th.lower > 0.1 && th.upper < 1.8 && th.upper - th.lower <= 0.01 + 1e-12,
        "threshold bracket [{}, {}]",
        th.lower,
        th.upper
    );
    Ok(format!(
        "B(0.01) = {:.3e} at T_S = T_E, B(0.1) = {prev:.3e}, B(1.8) = {:.1e}, lambda* in [{:.4}, {:.4}]",
        a.value, c.value, th.lower, th.upper
    ))
}

fn cooling_effect() -> Check {
    let p = params(0.01, 0.25, 1.0);
    let grid = num(uniform_grid(50.0, 0.01))?;
    let k = Arc::new(num(coefficient_table(&p, &grid))?);
    let run = num(WeakCouplingRun::new(k, 1.0))?;
    let weak = *run.environment_energy().last().unwrap();
    let fcs = *num(fcs_first_moment(&run, FcsConfig::default()))?
        .mean_transfer
        .last()
        .unwrap();
    let exact = num(ExactRun::new(&p, 1.0, 150, 8.0))?.trace(&[0.0, 50.0]).environment[1];
    ensure!(weak < 0.0, "weak-coupling transfer {weak:e} at t = 50");
    ensure!(fcs < 0.0, "counting-field transfer {fcs:e} at t = 50");
    ensure!(exact < 0.0, "exact transfer {exact:e} at t = 50");
    Ok(format!(
        "<dq>(50): weak {weak:.3e}, counting field {fcs:.3e}, exact {exact:.3e}"
    ))
}

fn structural_invariants() -> Check {
    let mut worst_sym: f64 = 0.0;
    let mut worst_margin = f64::INFINITY;
    for lambda in [0.01, 1.0, 1.8] {
        let run = num(ExactRun::new(&params(lambda, 0.25, 1.0), 1.0, 150, 8.0))?;
        let j = symplectic_form(151);
        for (t1, t2) in [(0.7, 2.9), (5.0, 12.5), (20.0, 29.0)] {
            let s = run.propagator(t1 + t2).to_matrix();
            let sym = (&s * &j * s.transpose() - &j).amax();
            let comp = (run.propagator(t1).to_matrix() * run.propagator(t2).to_matrix() - &s).amax();
            worst_sym = worst_sym.max(sym).max(comp);
        }
        for i in 0..=10 {
            worst_margin = worst_margin.min(run.covariance_at(5.0 * i as f64).uncertainty_margin());
        }
    }
    ensure!(worst_sym < 1e-9, "symplectic or composition defect {worst_sym:e}");

    let grid = num(uniform_grid(50.0, 0.01))?;
    let k = Arc::new(num(coefficient_table(&params(0.1, 0.25, 0.25), &grid))?);
    let weak = num(WeakCouplingRun::new(k.clone(), 1.0))?;
    worst_margin = worst_margin.min(
        weak.covariance_trajectory()
            .iter()
            .fold(f64::INFINITY, |m, s| m.min(s - 0.5)),
    );
    let states = [num(mts_state(0.5, 0.658))?, num(sts_state(0.5, 0.658))?];
    for ch in channel_series(k.as_ref(), 1.0).iter().step_by(50) {
        for s in &states {
            worst_margin = worst_margin.min(evolve_joint(s, ch).uncertainty_margin());
        }
    }
    ensure!(
        worst_margin > -1e-9,
        "uncertainty relation violated by {worst_margin:e}"
    );

    let p = params(0.01, 0.25, 1.0);
    let grid = num(uniform_grid(30.0, 0.01))?;
    let coarse = num(ExactRun::new(&p, 1.0, 150, 8.0))?.energy_flow(&grid);
    let fine = num(ExactRun::new(&p, 1.0, 300, 8.0))?.energy_flow(&grid);
    let conv = sup_diff(&coarse, &fine) / sup_abs(fine.iter().copied());
    ensure!(conv < 0.01, "N = 150 vs 300 relative deviation {conv:.4}");
    Ok(format!(
        "symplectic/composition defect {worst_sym:.1e}, min uncertainty margin {worst_margin:.2e}, N-convergence {conv:.2e}"
    ))
}

fn rot(a: f64) -> Matrix2<f64> {
    let (s, c) = a.sin_cos();
    Matrix2::new(c, s, -s, c)
}

fn sq(r: f64) -> Matrix2<f64> {
    Matrix2::new((-r).exp(), 0.0, 0.0, r.exp())
}

fn local(a: Matrix2<f64>, b: Matrix2<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(&a);
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(&b);
    m
}

fn beam_splitter(a: f64) -> Matrix4<f64> {
    let (s, c) = a.sin_cos();
    let mut m = Matrix4::zeros();
    for q in 0..2 {
        m[(q, q)] = c;
        m[(q + 2, q + 2)] = c;
        m[(q, q + 2)] = s;
        m[(q + 2, q)] = -s;
    }
    m
}

/// Thermal product state dressed by local squeezers, rotations and a beam splitter.
fn random_state(rng: &mut ChaCha8Rng) -> Matrix4<f64> {
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let (nu1, nu2) = (u(0.5, 2.0), u(0.5, 2.0));
    let (r1, r2, r3, r4) = (u(-0.6, 0.6), u(-0.6, 0.6), u(-0.6, 0.6), u(-0.6, 0.6));
    let (a1, a2, a3, bs) = (u(0.0, 6.3), u(0.0, 6.3), u(0.0, 6.3), u(0.0, 1.6));
    let s = local(rot(a3) * sq(r3), sq(r4)) * beam_splitter(bs) * local(sq(r1) * rot(a1), rot(a2) * sq(r2));
    s * Matrix4::from_diagonal(&Vector4::new(nu1, nu1, nu2, nu2)) * s.transpose()
}

fn gip_witness() -> Check {
    let start = Instant::now();
    let opts = GipOptions::default();
    let grid = num(uniform_grid(50.0, 0.01))?;
    let mts = num(mts_state(0.5, 0.658))?;
    let sts = num(sts_state(0.5, 0.658))?;

    let free = num(coefficient_table(&params(0.0, 0.25, 1.0), &grid))?;
    let semigroup = num(SemigroupRates::from_params(&params(0.05, 0.25, 1.0), &grid))?;
    for (name, rates) in [("lambda = 0", &free as &dyn MasterRates), ("semigroup", &semigroup)] {
        for s in [&mts, &sts] {
            let n = num(gip_trajectory(s, rates, 1, &opts))?.nonmarkovianity;
            ensure!(n == 0.0, "{name}: witness {n:e} for {}", s.family.as_str());
        }
    }

    let mut summary = Vec::new();
    for temp in [0.25, 1.0] {
        for s in [&mts, &sts] {
            let mut prev = 0.0;
            for lambda in [0.02, 0.05, 0.1] {
                let k = num(coefficient_table(&params(lambda, 0.25, temp), &grid))?;
                let n = num(gip_trajectory(s, &k, 1, &opts))?.nonmarkovianity;
                ensure!(
                    n > prev,
                    "{} at T_E = {temp}: witness {n:e} at lambda = {lambda} not above {prev:e}",
                    s.family.as_str()
                );
                prev = n;
            }
            summary.push(format!("{}(T_E={temp}) {prev:.2e}", s.family.as_str()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x51ab);
    let oracle = GipOptions {
        method: QfiMethod::Fock,
        ..GipOptions::default()
    };
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let s = num(TwoModeState::custom(random_state(&mut rng)))?;
        let fast = num(gip_with(&s, &opts))?.value;
        let slow = num(gip_with(&s, &oracle))?.value;
        ensure!((fast - slow).abs() < 1e-4, "state {i}: fast {fast} vs oracle {slow}");
        worst = worst.max((fast - slow).abs());
    }
    let el = within(start, Duration::from_secs(600))?;
    Ok(format!(
        "witness at lambda = 0.1: {}; oracle deviation {worst:.1e} on 50 states, {el:.1?}",
        summary.join(", ")
    ))
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Check {
    let mut single = SimulationConfig::new(params(0.05, 0.25, 1.0));
    single.t_max = 20.0;
    single.compare = vec![EngineTag::Exact, EngineTag::FcsCheck];
    single.n_modes = 60;
    single.outputs = vec![
        Output::Theta,
        Output::Energies,
        Output::Phi,
        Output::Backflow,
        Output::Gip,
    ];
    single.gip.stride = 10;
    let mut swept = single.clone();
    swept.compare.clear();
    swept.sweep = Some(SweepAxis {
        parameter: SweepParameter::Lambda,
        values: vec![0.0, 0.02, 0.05, 0.1],
    });

    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut reference: Option<BTreeMap<String, Vec<u8>>> = None;
    let mut files = 0;
    for (k, threads) in [1, 4, 4, 2].into_iter().enumerate() {
        let dir = root.path().join(format!("run{k}"));
        for format in [Format::Csv, Format::Json, Format::Svg] {
            let sub = format!("{format:?}");
            qbm_cli::with_threads(Some(threads), || {
                qbm_cli::run_to_dir(&single, &dir.join(&sub).join("single"), format)?;
                qbm_cli::sweep_to_dir(&swept, &dir.join(&sub).join("sweep"), format)
            })
            .and_then(|r| r)
            .map_err(|e| e.to_string())?;
        }
        let tree = read_tree(&dir);
        match &reference {
            None => {
                files = tree.len();
                reference = Some(tree);
            }
            Some(r) => {
                ensure!(r.keys().eq(tree.keys()), "run {k} wrote a different file set");
                if let Some(name) = r.keys().find(|n| r[*n] != tree[*n]) {
                    return Err(format!("{name} differs with {threads} threads"));
                }
            }
        }
    }
    ensure!(files > 0, "no files written");
    Ok(format!(
        "{files} files identical across 4 runs with 1, 4, 4 and 2 threads"
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 9] = [
        ("kernel correctness", kernel_correctness),
        ("engine cross-validation", engine_cross_validation),
        ("counting-field self-check", fcs_self_check),
        ("energy conservation", conservation),
        ("backflow phenomenology", backflow_phenomenology),
        ("cooling effect", cooling_effect),
        ("structural invariants", structural_invariants),
        ("GIP witness", gip_witness),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let el = start.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {id} PASS {name}: {detail} [{el:.1?}]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id} FAIL {name}: {detail} [{el:.1?}]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
