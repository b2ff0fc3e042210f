//! Packaged configurations for the standard figure set.

use qbm_core::{EngineTag, SpectralParams};

use crate::config::{Output, SimulationConfig, SweepAxis, SweepParameter};

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    /// (sub-directory label, configuration); a single entry is written
    /// straight into the output directory.
    pub runs: Vec<(String, SimulationConfig)>,
}

pub const NAMES: [&str; 23] = [
    "fig1a",
    "fig1b",
    "fig2",
    "fig3a",
    "fig3b",
    "fig4a",
    "fig4b",
    "fig4c",
    "fig4d",
    "fig5a",
    "fig5b",
    "fig5c",
    "fig5d",
    "fig5e",
    "fig5f",
    "fig5g",
    "fig5h",
    "fig5i",
    "fig6a",
    "fig6b",
    "fig6c",
    "fig6d",
    "threshold",
];

const TEMPS: [f64; 3] = [0.25, 0.5, 1.0];

/// Bath size for strong-coupling runs; 150 modes on [0, 8] leave a spurious
/// late-time flow at λ = 1.8.
const STRONG_MODES: usize = 300;

fn base(lambda: f64, omega_c: f64, temp_env: f64) -> SimulationConfig {
    SimulationConfig::new(SpectralParams {
        lambda,
        omega_c,
        temp_env,
    })
}

fn axis(parameter: SweepParameter, values: &[f64]) -> Option<SweepAxis> {
    Some(SweepAxis {
        parameter,
        values: values.to_vec(),
    })
}

fn single(c: SimulationConfig) -> Vec<(String, SimulationConfig)> {
    vec![(String::new(), c)]
}

fn weak_lambdas() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 100.0).collect()
}

fn fig1(output: Output) -> Vec<(String, SimulationConfig)> {
    let mut c = base(0.01, 0.25, 1.0);
    c.outputs = vec![output];
    c.sweep = axis(SweepParameter::TempSys, &[1.0, 2.0, 3.0]);
    single(c)
}

fn fig4_flow(lambda: f64) -> Vec<(String, SimulationConfig)> {
    let mut c = base(lambda, 0.25, 1.0);
    c.engine = EngineTag::Exact;
    c.compare = vec![EngineTag::Analytic];
    c.outputs = vec![Output::Theta];
    single(c)
}

fn fig5(lambda: f64) -> Vec<(String, SimulationConfig)> {
    let mut c = base(lambda, 0.25, 1.0);
    c.engine = EngineTag::Exact;
    c.n_modes = STRONG_MODES;
    c.outputs = vec![Output::Theta, Output::Energies];
    single(c)
}

fn fig6_lambda(temp_env: f64) -> Vec<(String, SimulationConfig)> {
    let mut c = base(0.01, 0.25, temp_env);
    c.outputs = vec![Output::Gip];
    let mut values = vec![0.0];
    values.extend(weak_lambdas());
    c.sweep = axis(SweepParameter::Lambda, &values);
    single(c)
}

fn fig6_cutoff(temp_env: f64, r_mts: f64, r_sts: f64) -> Vec<(String, SimulationConfig)> {
    let mut c = base(0.01, 0.25, temp_env);
    c.outputs = vec![Output::Gip];
    c.gip.r_mts = r_mts;
    c.gip.r_sts = r_sts;
    c.sweep = axis(SweepParameter::OmegaC, &[0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0]);
    single(c)
}

pub fn get(name: &str) -> Option<Preset> {
    let (description, runs) = match name {
        "fig1a" => ("energy flow for T_S = 1, 2, 3 (weak coupling)", fig1(Output::Theta)),
        "fig1b" => (
            "system energy rate for T_S = 1, 2, 3 (weak coupling)",
            fig1(Output::Phi),
        ),
        "fig2" => ("transferred heat and system energy change (weak coupling)", {
            let mut c = base(0.01, 0.25, 1.0);
            c.outputs = vec![Output::Theta, Output::Energies];
            single(c)
        }),
        "fig3a" => (
            "backflow against coupling for several cut-offs (weak coupling)",
            [0.25, 0.5, 1.0]
                .iter()
                .map(|&om| {
                    let mut c = base(0.01, om, 1.0);
                    c.outputs = vec![Output::Backflow];
                    c.sweep = axis(SweepParameter::Lambda, &weak_lambdas());
                    (format!("omega_c={om}"), c)
                })
                .collect(),
        ),
        "fig3b" => (
            "backflow against cut-off for several temperatures (weak coupling)",
            TEMPS
                .iter()
                .map(|&te| {
                    let mut c = base(0.01, 0.25, te);
                    c.outputs = vec![Output::Backflow];
                    c.sweep = axis(SweepParameter::OmegaC, &[0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0]);
                    (format!("temp_env={te}"), c)
                })
                .collect(),
        ),
        "fig4a" => ("exact and weak-coupling energy flow at lambda = 0.01", fig4_flow(0.01)),
        "fig4b" => ("exact and weak-coupling energy flow at lambda = 1", fig4_flow(1.0)),
        "fig4c" => (
            "exact backflow against coupling for three temperatures",
            TEMPS
                .iter()
                .map(|&te| {
                    let mut c = base(0.01, 0.25, te);
                    c.engine = EngineTag::Exact;
                    c.n_modes = STRONG_MODES;
                    c.outputs = vec![Output::Backflow];
                    c.sweep = axis(
                        SweepParameter::Lambda,
                        &[0.01, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8],
                    );
                    (format!("temp_env={te}"), c)
                })
                .collect(),
        ),
        "fig4d" => (
            "exact backflow against cut-off at lambda = 1 for three temperatures",
            TEMPS
                .iter()
                .map(|&te| {
                    let mut c = base(1.0, 0.25, te);
                    c.engine = EngineTag::Exact;
                    c.n_modes = STRONG_MODES;
                    c.outputs = vec![Output::Backflow];
                    c.sweep = axis(
                        SweepParameter::OmegaC,
                        &[0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6, 0.7],
                    );
                    (format!("temp_env={te}"), c)
                })
                .collect(),
        ),
        "fig5a" | "fig5b" | "fig5c" => ("exact energy partition at lambda = 0.01", fig5(0.01)),
        "fig5d" | "fig5e" | "fig5f" => ("exact energy partition at lambda = 0.8", fig5(0.8)),
        "fig5g" | "fig5h" | "fig5i" => ("exact energy partition at lambda = 1.8", fig5(1.8)),
        "fig6a" => ("GIP witness against coupling, T_E = 0.25", fig6_lambda(0.25)),
        "fig6b" => ("GIP witness against coupling, T_E = 1", fig6_lambda(1.0)),
        "fig6c" => (
            "GIP witness against cut-off, T_E = 0.25",
            fig6_cutoff(0.25, 0.01, 0.658),
        ),
        "fig6d" => ("GIP witness against cut-off, T_E = 1", fig6_cutoff(1.0, 0.22, 0.22)),
        "threshold" => ("coupling above which the exact backflow vanishes", {
            let mut c = base(0.1, 0.25, 1.0);
            c.engine = EngineTag::Exact;
            c.outputs = vec![Output::Threshold];
            single(c)
        }),
        _ => return None,
    };
    let name = NAMES.iter().find(|n| **n == name)?;
    Some(Preset {
        name,
        description,
        runs,
    })
}
