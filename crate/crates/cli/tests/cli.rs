use std::fs;
use std::path::Path;
use std::process::{Command, Output as ProcessOutput};

use qbm_cli::{read_config_echo, SimulationConfig};

fn qbm(args: &[&str]) -> ProcessOutput {
    Command::new(env!("CARGO_BIN_EXE_qbm")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = r#"
t_max = 10.0
outputs = ["theta", "backflow"]

[spectral]
lambda = 0.02
omega_c = 0.25
temp_env = 1.0
"#;

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn run_writes_tables_and_echo() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    let out = dir.path().join("out");
    let res = qbm(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["theta.csv", "backflow.csv", "metadata.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let echo = read_config_echo(&out).unwrap();
    assert_eq!(echo, SimulationConfig::from_toml(SMALL).unwrap());
    let theta = column(&fs::read_to_string(out.join("theta.csv")).unwrap(), "theta");
    assert_eq!(theta.len(), 1001);
}

#[test]
fn bad_configuration_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), "a.toml", &format!("bogus = 1\n{SMALL}"));
    let empty = write_config(
        dir.path(),
        "b.toml",
        &format!("{SMALL}\n[sweep]\nparameter = \"lambda\"\nvalues = []\n"),
    );
    let negative = write_config(dir.path(), "c.toml", &SMALL.replace("omega_c = 0.25", "omega_c = -1.0"));
    let out = dir.path().join("out");
    for (cmd, cfg) in [("run", &unknown), ("sweep", &empty), ("run", &negative)] {
        let res = qbm(&[cmd, "--config", cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(
            res.status.code(),
            Some(2),
            "{cfg}: {}",
            String::from_utf8_lossy(&res.stderr)
        );
    }
    let res = qbm(&["preset", "fig9z"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn unstable_bath_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
engine = "exact"
t_max = 5.0
n_modes = 40

[spectral]
lambda = 0.72
omega_c = 1.73
temp_env = 1.0
"#;
    let cfg = write_config(dir.path(), "u.toml", text);
    let out = dir.path().join("out");
    let res = qbm(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn missing_config_file_is_reported() {
    let res = qbm(&["run", "--config", "/nonexistent/q.toml"]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("q.toml"));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.toml",
        &format!("{SMALL}\n[sweep]\nparameter = \"temp_env\"\nvalues = [0.25, 0.5, 1.0]\n"),
    );
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("t{threads}"));
        let res = qbm(&[
            "--threads",
            threads,
            "sweep",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        let mut names: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        let files: Vec<_> = names
            .iter()
            .map(|n| (n.clone(), fs::read(out.join(n)).unwrap()))
            .collect();
        outputs.push(files);
    }
    assert!(!outputs[0].is_empty());
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn zero_coupling_gives_zero_flow() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "z.toml", &SMALL.replace("lambda = 0.02", "lambda = 0.0"));
    let out = dir.path().join("out");
    let res = qbm(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(res.status.success());
    let theta = column(&fs::read_to_string(out.join("theta.csv")).unwrap(), "theta");
    assert!(theta.iter().all(|v| *v == 0.0));
    let bf = column(&fs::read_to_string(out.join("backflow.csv")).unwrap(), "backflow");
    assert!(bf.iter().all(|v| *v == 0.0));
}

#[test]
fn preset_list_names_every_preset() {
    let res = qbm(&["preset", "--list"]);
    assert!(res.status.success());
    let text = String::from_utf8_lossy(&res.stdout);
    for name in qbm_cli::presets::NAMES {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}

#[test]
fn json_format_writes_one_results_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    let out = dir.path().join("out");
    let res = qbm(&[
        "--format",
        "json",
        "run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let v: serde_json::Value = serde_json::from_slice(&fs::read(out.join("results.json")).unwrap()).unwrap();
    assert!(v.get("backflow").is_some());
    assert!(!out.join("theta.csv").exists());
}
