//! Result files: CSV tables, a JSON metadata sidecar and optional SVG plots.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use qbm_core::{EnergyTrace, EngineTag};
use serde::{Deserialize, Serialize};

use crate::config::{Output, SimulationConfig, SweepParameter};
use crate::error::{CliError, CliResult};
use crate::run::{Diagnostics, ResultBundle, SweepTable};
use crate::svg::{line_plot, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    /// CSV tables plus the metadata sidecar.
    #[default]
    Csv,
    /// One results.json plus the metadata sidecar.
    Json,
    /// CSV tables, the sidecar and one SVG plot per table.
    Svg,
}

pub const METADATA_FILE: &str = "metadata.json";

/// Shortest representation that parses back to the same f64.
fn num(v: f64) -> String {
    format!("{v:e}")
}

struct Table {
    name: &'static str,
    title: String,
    headers: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Table {
    fn new(name: &'static str, title: impl Into<String>, x: (&str, &[f64])) -> Self {
        Self {
            name,
            title: title.into(),
            headers: vec![x.0.to_string()],
            columns: vec![x.1.to_vec()],
        }
    }

    fn push(&mut self, header: impl Into<String>, col: &[f64]) {
        self.headers.push(header.into());
        self.columns.push(col.to_vec());
    }

    fn rows(&self) -> usize {
        self.columns.iter().map(Vec::len).min().unwrap_or(0)
    }

    fn check_finite(&self) -> CliResult<()> {
        let n = self.rows();
        for (h, c) in self.headers.iter().zip(&self.columns) {
            if let Some(v) = c[..n].iter().find(|v| !v.is_finite()) {
                return Err(CliError::Serialize(format!(
                    "non-finite value {v} in column {h} of {}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn csv_bytes(headers: &[String], rows: impl Iterator<Item = Vec<String>>) -> CliResult<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Serialize(e.to_string());
    w.write_record(headers).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Serialize(e.to_string()))
}

fn write_table(dir: &Path, t: &Table, svg: bool, files: &mut Vec<String>) -> CliResult<()> {
    t.check_finite()?;
    let n = t.rows();
    let rows = (0..n).map(|i| t.columns.iter().map(|c| num(c[i])).collect());
    let name = format!("{}.csv", t.name);
    write_file(&dir.join(&name), &csv_bytes(&t.headers, rows)?)?;
    files.push(name);
    if svg {
        let series: Vec<Series> = t.headers[1..]
            .iter()
            .zip(&t.columns[1..])
            .map(|(h, c)| Series {
                name: h.clone(),
                x: &t.columns[0][..n],
                y: &c[..n],
            })
            .collect();
        let name = format!("{}.svg", t.name);
        write_file(
            &dir.join(&name),
            line_plot(&t.title, &t.headers[0], t.name, &series).as_bytes(),
        )?;
        files.push(name);
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backflow: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maximizer_temp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_transfer: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonmarkovianity_mts: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonmarkovianity_sts: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_bracket: Option<(f64, f64)>,
}

impl Summary {
    pub fn of(b: &ResultBundle) -> Self {
        let final_transfer = b
            .primary()
            .and_then(|t| t.environment.last().copied())
            .filter(|v| v.is_finite());
        Self {
            backflow: b.backflow.as_ref().map(|r| r.value),
            maximizer_temp: b.backflow.as_ref().map(|r| r.maximizer_temp),
            final_transfer,
            nonmarkovianity_mts: b.gip.first().map(|g| g.nonmarkovianity),
            nonmarkovianity_sts: b.gip.get(1).map(|g| g.nonmarkovianity),
            threshold: b.threshold.as_ref().map(|t| t.estimate),
            threshold_bracket: b.threshold.as_ref().map(|t| (t.lower, t.upper)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool: String,
    pub version: String,
    pub config: SimulationConfig,
    pub engine: EngineTag,
    pub diagnostics: Diagnostics,
    pub summary: Summary,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowMetadata {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub tool: String,
    pub version: String,
    pub config: SimulationConfig,
    pub parameter: SweepParameter,
    pub rows: Vec<RowMetadata>,
    pub files: Vec<String>,
}

fn json<T: Serialize>(v: &T) -> CliResult<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v).map_err(|e| CliError::Serialize(e.to_string()))?;
    s.push(b'\n');
    Ok(s)
}

fn theta_header(traces: &[EnergyTrace]) -> impl Fn(&EnergyTrace) -> String + '_ {
    move |tr| {
        if traces.len() == 1 {
            "theta".to_string()
        } else {
            format!("theta_{}", tr.engine)
        }
    }
}

fn run_tables(b: &ResultBundle) -> Vec<Table> {
    let cfg = &b.config;
    let mut tables = Vec::new();
    if let Some(tr) = b.primary() {
        if cfg.wants(Output::Theta) {
            let mut t = Table::new("theta", "energy flow", ("t", &tr.t));
            let header = theta_header(&b.traces);
            for other in &b.traces {
                t.push(header(other), &other.theta);
            }
            tables.push(t);
        }
        if cfg.wants(Output::Energies) && !tr.system.is_empty() {
            let mut t = Table::new("energies", "energy changes", ("t", &tr.t));
            t.push("system", &tr.system);
            t.push("environment", &tr.environment);
            t.push("interaction", &tr.interaction);
            tables.push(t);
        }
        if let Some(phi) = &b.phi {
            let mut t = Table::new("phi", "system energy rate", ("t", &tr.t));
            t.push("phi", phi);
            tables.push(t);
        }
    }
    if let Some(bf) = &b.backflow {
        let temps: Vec<f64> = bf.per_temperature.iter().map(|p| p.0).collect();
        let vals: Vec<f64> = bf.per_temperature.iter().map(|p| p.1).collect();
        let mut t = Table::new("backflow", "energy backflow", ("temp_sys", &temps));
        t.push("backflow", &vals);
        tables.push(t);
    }
    if b.gip.len() == 2 {
        let (m, s) = (&b.gip[0], &b.gip[1]);
        let mut t = Table::new("gip", "interferometric power", ("t", &m.t));
        t.push("gip_mts", &m.gip);
        t.push("gip_sts", &s.gip);
        t.push("derivative_mts", &m.derivative);
        t.push("derivative_sts", &s.derivative);
        tables.push(t);
    }
    if let Some(th) = &b.threshold {
        let lam: Vec<f64> = th.evaluations.iter().map(|e| e.0).collect();
        let val: Vec<f64> = th.evaluations.iter().map(|e| e.1).collect();
        let mut t = Table::new("threshold", "threshold search", ("lambda", &lam));
        t.push("backflow", &val);
        tables.push(t);
    }
    tables
}

fn prepare(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Writes a single run into `dir` and returns the file names written.
pub fn emit_run(b: &ResultBundle, dir: &Path, format: Format) -> CliResult<Vec<PathBuf>> {
    prepare(dir)?;
    let mut files = Vec::new();
    match format {
        Format::Json => {
            write_file(&dir.join("results.json"), &json(b)?)?;
            files.push("results.json".to_string());
        }
        Format::Csv | Format::Svg => {
            for t in run_tables(b) {
                write_table(dir, &t, format == Format::Svg, &mut files)?;
            }
        }
    }
    files.push(METADATA_FILE.to_string());
    let meta = RunMetadata {
        tool: "qbm".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: b.config.clone(),
        engine: b.config.engine,
        diagnostics: b.diagnostics.clone(),
        summary: Summary::of(b),
        files: files.clone(),
    };
    write_file(&dir.join(METADATA_FILE), &json(&meta)?)?;
    Ok(files.into_iter().map(|f| dir.join(f)).collect())
}

fn label(p: SweepParameter, v: f64) -> String {
    format!("{}={}", p.as_str(), v)
}

/// (x, y) of one series extracted from a sweep row.
type SeriesOf = dyn Fn(&ResultBundle) -> Option<(Vec<f64>, Vec<f64>)>;

/// Joins one series per successful row into a wide table when every row
/// shares the same time axis.
fn wide(table: &SweepTable, name: &'static str, title: &str, cols: &[(&str, &SeriesOf)]) -> Option<Table> {
    let ok: Vec<(f64, &ResultBundle)> = table
        .rows
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|b| (r.value, b)))
        .collect();
    let (_, first) = ok.first()?;
    let (x, _) = cols[0].1(first)?;
    let mut t = Table::new(name, title, ("t", &x));
    for (prefix, f) in cols {
        for (v, b) in &ok {
            let (xs, ys) = f(b)?;
            if xs != x {
                return None;
            }
            t.push(format!("{prefix}@{}", label(table.parameter, *v)), &ys);
        }
    }
    Some(t)
}

fn sweep_series_tables(table: &SweepTable) -> Vec<Table> {
    let cfg = &table.config;
    let mut out = Vec::new();
    if cfg.wants(Output::Theta) {
        let f = |b: &ResultBundle| b.primary().map(|t| (t.t.clone(), t.theta.clone()));
        out.extend(wide(table, "theta", "energy flow", &[("theta", &f)]));
    }
    if cfg.wants(Output::Energies) {
        let sys = |b: &ResultBundle| {
            b.primary()
                .filter(|t| !t.system.is_empty())
                .map(|t| (t.t.clone(), t.system.clone()))
        };
        let env = |b: &ResultBundle| {
            b.primary()
                .filter(|t| !t.system.is_empty())
                .map(|t| (t.t.clone(), t.environment.clone()))
        };
        let int = |b: &ResultBundle| {
            b.primary()
                .filter(|t| !t.system.is_empty())
                .map(|t| (t.t.clone(), t.interaction.clone()))
        };
        out.extend(wide(
            table,
            "energies",
            "energy changes",
            &[("system", &sys), ("environment", &env), ("interaction", &int)],
        ));
    }
    if cfg.wants(Output::Phi) {
        let f = |b: &ResultBundle| Some((b.primary()?.t.clone(), b.phi.clone()?));
        out.extend(wide(table, "phi", "system energy rate", &[("phi", &f)]));
    }
    if cfg.wants(Output::Gip) {
        let m = |b: &ResultBundle| b.gip.first().map(|g| (g.t.clone(), g.gip.clone()));
        let s = |b: &ResultBundle| b.gip.get(1).map(|g| (g.t.clone(), g.gip.clone()));
        out.extend(wide(
            table,
            "gip",
            "interferometric power",
            &[("gip_mts", &m), ("gip_sts", &s)],
        ));
    }
    out
}

type ScalarOf = fn(&Summary, &Diagnostics) -> Option<f64>;

fn sweep_columns(cfg: &SimulationConfig) -> Vec<(&'static str, ScalarOf)> {
    let mut cols: Vec<(&'static str, ScalarOf)> = Vec::new();
    if cfg.wants(Output::Backflow) {
        cols.push(("backflow", |s, _| s.backflow));
        cols.push(("maximizer_temp", |s, _| s.maximizer_temp));
        cols.push(("tail_bound", |_, d| d.tail_bound));
    }
    if cfg.wants(Output::Energies) {
        cols.push(("final_transfer", |s, _| s.final_transfer));
    }
    if cfg.wants(Output::Gip) {
        cols.push(("nonmarkovianity_mts", |s, _| s.nonmarkovianity_mts));
        cols.push(("nonmarkovianity_sts", |s, _| s.nonmarkovianity_sts));
    }
    if cfg.wants(Output::Threshold) {
        cols.push(("threshold", |s, _| s.threshold));
    }
    cols
}

/// Writes a sweep into `dir`: `sweep.csv` with one row per axis value, wide
/// series tables and the metadata sidecar.
pub fn emit_sweep(table: &SweepTable, dir: &Path, format: Format) -> CliResult<Vec<PathBuf>> {
    prepare(dir)?;
    let mut files = Vec::new();
    let rows: Vec<RowMetadata> = table
        .rows
        .iter()
        .map(|r| match &r.outcome {
            Ok(b) => RowMetadata {
                value: r.value,
                error: None,
                diagnostics: Some(b.diagnostics.clone()),
                summary: Some(Summary::of(b)),
            },
            Err(e) => RowMetadata {
                value: r.value,
                error: Some(e.clone()),
                diagnostics: None,
                summary: None,
            },
        })
        .collect();
    match format {
        Format::Json => {
            write_file(&dir.join("results.json"), &json(table)?)?;
            files.push("results.json".to_string());
        }
        Format::Csv | Format::Svg => {
            let cols = sweep_columns(&table.config);
            let mut headers = vec![table.parameter.as_str().to_string(), "status".to_string()];
            headers.extend(cols.iter().map(|c| c.0.to_string()));
            headers.push("error".into());
            let mut lines = Vec::new();
            for r in &rows {
                let mut line = vec![num(r.value)];
                match (&r.summary, &r.diagnostics) {
                    (Some(s), Some(d)) => {
                        line.push("ok".into());
                        for (name, f) in &cols {
                            let v = f(s, d);
                            if let Some(v) = v.filter(|v| !v.is_finite()) {
                                return Err(CliError::Serialize(format!("non-finite {name} = {v}")));
                            }
                            line.push(v.map(num).unwrap_or_default());
                        }
                        line.push(String::new());
                    }
                    _ => {
                        line.push("error".into());
                        line.extend(cols.iter().map(|_| String::new()));
                        line.push(r.error.clone().unwrap_or_default());
                    }
                }
                lines.push(line);
            }
            write_file(&dir.join("sweep.csv"), &csv_bytes(&headers, lines.into_iter())?)?;
            files.push("sweep.csv".into());
            let svg = format == Format::Svg;
            if svg && !cols.is_empty() {
                let xs: Vec<f64> = rows.iter().filter(|r| r.error.is_none()).map(|r| r.value).collect();
                let ys: Vec<Vec<f64>> = cols
                    .iter()
                    .map(|(_, f)| {
                        rows.iter()
                            .filter_map(|r| Some(f(r.summary.as_ref()?, r.diagnostics.as_ref()?).unwrap_or(f64::NAN)))
                            .collect()
                    })
                    .collect();
                let series: Vec<Series> = cols
                    .iter()
                    .zip(&ys)
                    .filter(|(c, _)| c.0 != "maximizer_temp" && c.0 != "tail_bound")
                    .map(|(c, y)| Series {
                        name: c.0.to_string(),
                        x: &xs,
                        y,
                    })
                    .collect();
                let doc = line_plot("sweep", table.parameter.as_str(), "value", &series);
                write_file(&dir.join("sweep.svg"), doc.as_bytes())?;
                files.push("sweep.svg".into());
            }
            for t in sweep_series_tables(table) {
                write_table(dir, &t, svg, &mut files)?;
            }
        }
    }
    files.push(METADATA_FILE.to_string());
    let meta = SweepMetadata {
        tool: "qbm".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: table.config.clone(),
        parameter: table.parameter,
        rows,
        files: files.clone(),
    };
    write_file(&dir.join(METADATA_FILE), &json(&meta)?)?;
    Ok(files.into_iter().map(|f| dir.join(f)).collect())
}

/// Reads the configuration echoed into a metadata sidecar.
pub fn read_config_echo(dir: &Path) -> CliResult<SimulationConfig> {
    let path = dir.join(METADATA_FILE);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Serialize(e.to_string()))?;
    serde_json::from_value(v["config"].clone()).map_err(|e| CliError::Serialize(e.to_string()))
}
