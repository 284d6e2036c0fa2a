//! Run configuration, trajectory and loss-history files, comparisons and plots.
//!
//! Configuration documents are TOML:
//!
//! ```toml
//! preset = "euler-single"      # optional; fills every key not given below
//! output_dir = "out/sod"
//! snapshot_times = [0.075, 0.15]
//!
//! [grid]
//! x_min = 0.0
//! x_max = 1.0
//! n_points = 101
//!
//! [model]
//! kind = "euler"               # or "wave"
//!
//! [train]
//! dt = 0.0025
//! t_final = 0.15
//! n_inner = 500
//! architecture = "euler-single-330"
//!
//! [train.loss]
//! kind = "integral"
//! boundary_weight = 1e-4
//!
//! [train.optimizer]
//! kind = "gradient-descent"
//! learning_rate = 7.7e-3
//! ```
//!
//! Without a preset, `model.kind`, `train.dt`, `train.t_final`,
//! `train.n_inner` and `train.architecture` are required; everything else has
//! a default. Unknown keys are rejected.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::losses::LossForm;
use crate::mesh::Grid1D;
use crate::models::{ConservationLaw, ModelKind, ModelSpec, GAMMA};
use crate::optim::OptimizerConfig;
use crate::trainer::{Architecture, InitScheme, LossReport, TrainConfig, Trajectory};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            x_min: 0.0,
            x_max: 1.0,
            n_points: 101,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid1D> {
        Grid1D::new(self.x_min, self.x_max, self.n_points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub output_dir: PathBuf,
    /// Times written to the trajectory file besides `t = 0` and the final time.
    /// Empty means every `train.snapshot_stride`-th step.
    pub snapshot_times: Vec<f64>,
    pub grid: GridConfig,
    pub model: ModelSpec,
    pub train: TrainConfig,
}

pub const PRESETS: &[&str] = &["wave", "euler-single", "euler-multi", "euler-single-100"];

fn euler_train(architecture: Architecture) -> TrainConfig {
    let mut loss = LossForm::integral();
    loss.boundary_weight = 1e-4;
    TrainConfig {
        dt: 0.0025,
        t_final: 0.15,
        n_inner: 500,
        loss,
        optimizer: OptimizerConfig::gradient_descent(7.7e-3),
        architecture,
        init: InitScheme::Identity,
        seed: 0,
        snapshot_stride: 1,
        reset_optimizer: true,
        reinit_each_step: true,
    }
}

/// Named configurations.
///
/// - `wave`: one-way wave on 101 points, `dt = dx = 0.01` to `t = 1`, 3x100 network, Adam
/// - `euler-single`: Sod tube, one 330-unit hidden layer, gradient descent,
///   network rebuilt from the identity at every step
/// - `euler-multi`: as `euler-single` with one 1024-unit sub-network per component
/// - `euler-single-100`: `euler-single` on 100 points spanning `[0, 0.99]`
pub fn preset(name: &str) -> Result<RunConfig> {
    let cfg = match name {
        "wave" => RunConfig {
            preset: Some(name.into()),
            output_dir: PathBuf::from("out/wave"),
            snapshot_times: vec![0.25, 0.5, 0.75, 1.0],
            grid: GridConfig::default(),
            model: ModelSpec::wave(),
            train: TrainConfig {
                dt: 0.01,
                t_final: 1.0,
                n_inner: 500,
                loss: LossForm::integral(),
                optimizer: OptimizerConfig::default(),
                architecture: Architecture::Wave3x100,
                init: InitScheme::Identity,
                seed: 0,
                snapshot_stride: 1,
                reset_optimizer: true,
                reinit_each_step: false,
            },
        },
        "euler-single" | "euler-multi" | "euler-single-100" => RunConfig {
            preset: Some(name.into()),
            output_dir: PathBuf::from(format!("out/{name}")),
            snapshot_times: vec![0.075, 0.15],
            grid: if name == "euler-single-100" {
                GridConfig {
                    x_min: 0.0,
                    x_max: 0.99,
                    n_points: 100,
                }
            } else {
                GridConfig::default()
            },
            model: ModelSpec::sod(),
            train: euler_train(if name == "euler-multi" {
                Architecture::EulerMulti1024
            } else {
                Architecture::EulerSingle330
            }),
        },
        other => {
            return Err(Error::config(format!(
                "unknown preset `{other}` (known: {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        fn section(path: &'static str) -> impl Fn(Error) -> Error {
            move |e| match e {
                Error::Config(msg) => Error::Config(format!("{path}: {msg}")),
                other => Error::Config(format!("{path}: {other}")),
            }
        }
        self.grid.build().map_err(section("grid"))?;
        self.model.validate().map_err(section("model"))?;
        self.train.validate().map_err(section("train"))?;
        if self.train.architecture == Architecture::Wave3x100 && self.model.kind != ModelKind::OneWayWave {
            return Err(Error::config("train.architecture: wave-3x100 expects the wave model"));
        }
        for &t in &self.snapshot_times {
            if !(t >= 0.0 && t <= self.train.t_final) {
                return Err(Error::config(format!(
                    "snapshot_times: {t} lies outside [0, {}]",
                    self.train.t_final
                )));
            }
        }
        Ok(())
    }
}

const REQUIRED: &[&str] = &[
    "model.kind",
    "train.dt",
    "train.t_final",
    "train.n_inner",
    "train.architecture",
];

/// A validated configuration and the key paths that were filled from defaults
/// or from the preset.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub config: RunConfig,
    pub defaulted: Vec<String>,
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with_overrides(text, &[]).map(|p| p.config)
}

/// Parses `text`, then applies `key.path=value` overrides on top of it.
/// Values are read as TOML and fall back to plain strings.
pub fn parse_config_with_overrides(text: &str, overrides: &[String]) -> Result<ParsedConfig> {
    let doc = toml::de::DeTable::parse(text).map_err(|e| {
        let line = e.span().map_or(1, |s| line_of(text, s.start));
        Error::Config(format!("line {line}: {}", e.message().trim()))
    })?;
    let mut user: toml::Table =
        toml::from_str(text).map_err(|e| Error::Config(e.message().trim().to_string()))?;
    for ov in overrides {
        apply_override(&mut user, ov)?;
    }

    let base = match user.get("preset") {
        Some(toml::Value::String(name)) => to_table(&preset(name)?)?,
        Some(_) => return Err(Error::config(format!("preset{}: expected a string", fmt_line(locate(text, &doc, &["preset"]))))),
        None => {
            let missing: Vec<&str> = REQUIRED
                .iter()
                .copied()
                .filter(|path| lookup(&user, path).is_none())
                .collect();
            if !missing.is_empty() {
                return Err(Error::config(format!(
                    "missing required keys: {} (or set `preset`, one of: {})",
                    missing.join(", "),
                    PRESETS.join(", ")
                )));
            }
            default_table(&user)?
        }
    };
    let mut defaulted = Vec::new();
    let merged = merge(base, user, "", &mut defaulted);

    let config: RunConfig = serde_path_to_error::deserialize(toml::Value::Table(merged)).map_err(|e| {
        let segments: Vec<String> = e
            .path()
            .iter()
            .filter_map(|s| match s {
                serde_path_to_error::Segment::Map { key } => Some(key.clone()),
                serde_path_to_error::Segment::Seq { index } => Some(index.to_string()),
                _ => None,
            })
            .collect();
        let refs: Vec<&str> = segments.iter().map(String::as_str).collect();
        let line = locate(text, &doc, &refs);
        Error::Config(format!("{}{}: {}", segments.join("."), fmt_line(line), e.inner().message().trim()))
    })?;
    config.validate().map_err(|e| match e {
        Error::Config(msg) => {
            let key = msg.split(':').next().unwrap_or("").to_string();
            let parts: Vec<&str> = key.split('.').collect();
            match locate(text, &doc, &parts) {
                Some(line) => Error::Config(format!("{key} (line {line}){}", &msg[key.len()..])),
                None => Error::Config(msg),
            }
        }
        other => other,
    })?;
    defaulted.sort();
    Ok(ParsedConfig { config, defaulted })
}

pub fn serialize_config(config: &RunConfig) -> Result<String> {
    toml::to_string_pretty(config).map_err(|e| Error::config(format!("cannot serialize configuration: {e}")))
}

fn to_table<T: Serialize>(value: &T) -> Result<toml::Table> {
    toml::Table::try_from(value).map_err(|e| Error::config(format!("cannot serialize configuration: {e}")))
}

/// Defaults for a document without a preset; the model data follow `model.kind`.
fn default_table(user: &toml::Table) -> Result<toml::Table> {
    let kind = match lookup(user, "model.kind") {
        Some(toml::Value::String(s)) if s == "euler" => ModelSpec::sod(),
        _ => ModelSpec::wave(),
    };
    let train = TrainConfig {
        dt: 0.01,
        t_final: 1.0,
        n_inner: 1,
        loss: LossForm::integral(),
        optimizer: OptimizerConfig::default(),
        architecture: Architecture::Wave3x100,
        init: InitScheme::Identity,
        seed: 0,
        snapshot_stride: 1,
        reset_optimizer: true,
        reinit_each_step: false,
    };
    let mut table = to_table(&RunConfig {
        preset: None,
        output_dir: PathBuf::from("out"),
        snapshot_times: Vec::new(),
        grid: GridConfig::default(),
        model: kind,
        train,
    })?;
    // required keys never come from the defaults
    for path in REQUIRED {
        let (section, key) = path.split_once('.').unwrap();
        if let Some(toml::Value::Table(t)) = table.get_mut(section) {
            t.remove(key);
        }
    }
    Ok(table)
}

fn lookup<'a>(table: &'a toml::Table, path: &str) -> Option<&'a toml::Value> {
    let mut parts = path.split('.');
    let mut cur = table.get(parts.next()?)?;
    for p in parts {
        cur = cur.as_table()?.get(p)?;
    }
    Some(cur)
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::usage(format!("override `{assignment}` is not of the form key=value")))?;
    let path = path.trim();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::usage(format!("override key `{path}` is malformed")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::usage(format!("override `{path}`: `{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn merge(mut base: toml::Table, user: toml::Table, prefix: &str, defaulted: &mut Vec<String>) -> toml::Table {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    for (k, v) in &base {
        if !user.contains_key(k) {
            collect_leaves(v, &join(k), defaulted);
        }
    }
    for (k, uv) in user {
        let path = join(&k);
        let merged = match (base.remove(&k), uv) {
            (Some(toml::Value::Table(bt)), toml::Value::Table(ut)) if same_variant(&bt, &ut) => {
                toml::Value::Table(merge(bt, ut, &path, defaulted))
            }
            (_, uv) => uv,
        };
        base.insert(k, merged);
    }
    base
}

/// Tagged tables (`type = ...`) only merge when the tags agree.
fn same_variant(a: &toml::Table, b: &toml::Table) -> bool {
    match (a.get("type"), b.get("type")) {
        (Some(x), Some(y)) => x == y,
        _ => true,
    }
}

fn collect_leaves(v: &toml::Value, path: &str, out: &mut Vec<String>) {
    match v {
        toml::Value::Table(t) if !t.is_empty() => {
            for (k, v) in t {
                collect_leaves(v, &format!("{path}.{k}"), out);
            }
        }
        _ => out.push(path.to_string()),
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn fmt_line(line: Option<usize>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

/// Line of the deepest key along `path` that appears in the document.
fn locate(text: &str, doc: &toml::Spanned<toml::de::DeTable<'_>>, path: &[&str]) -> Option<usize> {
    use toml::de::DeValue;
    let mut table = doc.get_ref();
    let mut line = None;
    for (depth, seg) in path.iter().enumerate() {
        let (key, value) = table.iter().find(|(k, _)| k.get_ref().as_ref() == *seg)?;
        line = Some(line_of(text, key.span().start));
        match value.get_ref() {
            DeValue::Table(t) => table = t,
            _ => {
                if depth + 1 < path.len() {
                    return line;
                }
            }
        }
    }
    line
}

/// Column names written for a model: primitive variables plus total energy
/// for Euler, the conserved variable otherwise.
pub fn output_columns(law: &dyn ConservationLaw) -> Vec<String> {
    let names = law.component_names();
    if names.len() == 3 {
        vec!["rho".into(), "u".into(), "p".into(), "E".into()]
    } else {
        names
    }
}

fn output_row(m: usize, conserved: &[f64]) -> Vec<f64> {
    if m == 3 {
        let (rho, mom, energy) = (conserved[0], conserved[1], conserved[2]);
        let u = mom / rho;
        let p = (GAMMA - 1.0) * (energy - 0.5 * mom * u);
        vec![rho, u, p, energy]
    } else {
        conserved.to_vec()
    }
}

/// A trajectory as stored on disk: output columns per snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub columns: Vec<String>,
    pub x: Vec<f64>,
    pub times: Vec<f64>,
    /// `data[snapshot][column][point]`
    pub data: Vec<Vec<Vec<f64>>>,
}

impl TrajectoryTable {
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        let m = traj.component_names.len();
        let columns = if m == 3 {
            vec!["rho".into(), "u".into(), "p".into(), "E".into()]
        } else {
            traj.component_names.clone()
        };
        let x = traj.grid().coordinates();
        let n = x.len();
        let data = traj
            .snapshots
            .iter()
            .map(|s| {
                let mut cols = vec![Vec::with_capacity(n); columns.len()];
                for i in 0..n {
                    for (c, v) in output_row(m, &s.point(i)).into_iter().enumerate() {
                        cols[c].push(v);
                    }
                }
                cols
            })
            .collect();
        TrajectoryTable {
            columns,
            x,
            times: traj.times(),
            data,
        }
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns.iter().position(|c| c == name).ok_or_else(|| {
            Error::usage(format!(
                "no column `{name}` (available: {})",
                self.columns.join(", ")
            ))
        })
    }

    pub fn snapshot_index(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        let mut header = vec!["t".to_string(), "x".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for (s, &t) in self.times.iter().enumerate() {
            for (i, &x) in self.x.iter().enumerate() {
                let mut rec = vec![format!("{t:.16e}"), format!("{x:.16e}")];
                rec.extend(self.data[s].iter().map(|col| format!("{:.16e}", col[i])));
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let bad = |msg: String| Error::Usage(format!("{}: {msg}", path.display()));
        let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
        let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        if header.len() < 3 || header[0] != "t" || header[1] != "x" {
            return Err(bad("expected a header `t,x,<components>`".into()));
        }
        let columns = header[2..].to_vec();
        let mut table = TrajectoryTable {
            columns,
            x: Vec::new(),
            times: Vec::new(),
            data: Vec::new(),
        };
        let mut xs: Vec<f64> = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let vals = rec
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("row {}: {e}", row + 2)))?;
            if vals.len() != header.len() {
                return Err(bad(format!("row {} has {} fields", row + 2, vals.len())));
            }
            if table.times.last() != Some(&vals[0]) {
                table.times.push(vals[0]);
                table.data.push(vec![Vec::new(); table.columns.len()]);
                xs.clear();
            }
            xs.push(vals[1]);
            let snap = table.data.last_mut().unwrap();
            for (c, v) in vals[2..].iter().enumerate() {
                snap[c].push(*v);
            }
            if table.times.len() == 1 {
                table.x.push(vals[1]);
            } else if xs.len() > table.x.len() || xs[xs.len() - 1] != table.x[xs.len() - 1] {
                return Err(bad(format!("row {}: snapshots use different grids", row + 2)));
            }
        }
        if table.data.iter().any(|s| s[0].len() != table.x.len()) {
            return Err(bad("snapshots have different lengths".into()));
        }
        Ok(table)
    }
}

pub fn write_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    TrajectoryTable::from_trajectory(traj).write(path)
}

pub fn read_trajectory(path: &Path) -> Result<TrajectoryTable> {
    TrajectoryTable::read(path)
}

/// `step,iteration,interior,boundary,total`, iterations counted from 1.
pub fn write_loss_history(reports: &[LossReport], path: &Path) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["step", "iteration", "interior", "boundary", "total"])
        .map_err(csv_err)?;
    for r in reports {
        for (k, l) in r.iterations.iter().enumerate() {
            w.write_record([
                r.step.to_string(),
                (k + 1).to_string(),
                format!("{:.16e}", l.interior),
                format!("{:.16e}", l.boundary),
                format!("{:.16e}", l.total),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Assumptions built into the solver, recorded with every run.
pub const DECLARED_DECISIONS: &[&str] = &[
    "grid points include both endpoints; dx = (x_max - x_min) / (n_points - 1)",
    "gamma = 2 for the Euler model",
    "Dirichlet penalty applied to the prediction at t + dt",
    "state at t + dt is the output of the last forward pass",
    "differential residual uses a backward flux difference on interior points",
    "network widths follow the grid size; preset hidden widths grow to the input width",
    "multi-network output layers start as shifted identity blocks",
    "ReLU derivative at 0 is 0",
    "trajectory files store rho, u, p and E for the Euler model",
];

#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata<'a> {
    pub command: &'a str,
    pub version: &'a str,
    pub config: &'a RunConfig,
    pub defaulted: &'a [String],
    pub decisions: &'a [&'a str],
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra: Option<serde_json::Value>,
}

pub fn write_metadata(meta: &RunMetadata<'_>, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(meta)
        .map_err(|e| Error::config(format!("cannot serialize metadata: {e}")))?;
    write_text(path, &(text + "\n"))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonEntry {
    pub time: f64,
    pub component: String,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    /// Relative norms; absent when the reference norm is zero.
    pub rel_l1: Option<f64>,
    pub rel_l2: Option<f64>,
    pub rel_linf: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub entries: Vec<ComparisonEntry>,
}

impl ComparisonReport {
    pub fn get(&self, time: f64, component: &str) -> Option<&ComparisonEntry> {
        let tol = 1e-9 * time.abs().max(1.0);
        self.entries
            .iter()
            .find(|e| e.component == component && (e.time - time).abs() <= tol)
    }
}

fn norms(a: &[f64], b: &[f64], dx: f64) -> (f64, f64, f64) {
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    let mut linf: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = (x - y).abs();
        l1 += d * dx;
        l2 += d * d * dx;
        linf = linf.max(d);
    }
    (l1, l2.sqrt(), linf)
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

/// Difference norms of `a` against the reference `b`, per column and time.
pub fn compare_tables(a: &TrajectoryTable, b: &TrajectoryTable, times: &[f64]) -> Result<ComparisonReport> {
    if a.x != b.x {
        return Err(Error::usage("trajectories use different grids"));
    }
    if a.columns != b.columns {
        return Err(Error::usage(format!(
            "trajectories have different columns ({} vs {})",
            a.columns.join(","),
            b.columns.join(",")
        )));
    }
    let dx = if a.x.len() > 1 { a.x[1] - a.x[0] } else { 1.0 };
    let zeros = vec![0.0; a.x.len()];
    let mut entries = Vec::new();
    for &t in times {
        let sa = a
            .snapshot_index(t)
            .ok_or_else(|| Error::usage(format!("first trajectory has no snapshot at t = {t}")))?;
        let sb = b
            .snapshot_index(t)
            .ok_or_else(|| Error::usage(format!("second trajectory has no snapshot at t = {t}")))?;
        for (c, name) in a.columns.iter().enumerate() {
            let (l1, l2, linf) = norms(&a.data[sa][c], &b.data[sb][c], dx);
            let (r1, r2, rinf) = norms(&b.data[sb][c], &zeros, dx);
            entries.push(ComparisonEntry {
                time: t,
                component: name.clone(),
                l1,
                l2,
                linf,
                rel_l1: ratio(l1, r1),
                rel_l2: ratio(l2, r2),
                rel_linf: ratio(linf, rinf),
            });
        }
    }
    Ok(ComparisonReport { entries })
}

/// Compares two in-memory trajectories through their output columns.
pub fn compare(a: &Trajectory, b: &Trajectory, times: &[f64]) -> Result<ComparisonReport> {
    if a.grid() != b.grid() {
        return Err(Error::usage("trajectories use different grids"));
    }
    compare_tables(
        &TrajectoryTable::from_trajectory(a),
        &TrajectoryTable::from_trajectory(b),
        times,
    )
}

const PANEL_W: f64 = 640.0;
const PANEL_H: f64 = 200.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 40.0;

/// SVG with one line chart per snapshot, stacked vertically, sharing the y range.
pub fn render_plot(table: &TrajectoryTable, component: &str) -> Result<String> {
    if table.times.is_empty() || table.x.is_empty() {
        return Err(Error::usage("trajectory has no snapshots to plot"));
    }
    let c = table.column_index(component)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for snap in &table.data {
        for &v in &snap[c] {
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    if !(lo < hi) {
        let mid = if lo.is_finite() { lo } else { 0.0 };
        lo = mid - 0.5;
        hi = mid + 0.5;
    }
    let pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    let x0 = table.x[0];
    let x1 = *table.x.last().unwrap();
    let xspan = if x1 > x0 { x1 - x0 } else { 1.0 };
    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
    let height = PANEL_H * table.times.len() as f64;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" height="{height}" viewBox="0 0 {PANEL_W} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (s, &t) in table.times.iter().enumerate() {
        let top = s as f64 * PANEL_H + MARGIN_T;
        let left = MARGIN_L;
        let bottom = top + plot_h;
        let _ = writeln!(svg, r#"<g>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{component} at t = {t:.4}</text>"#,
            left + plot_w / 2.0,
            top - 10.0
        );
        let _ = writeln!(
            svg,
            r#"<rect x="{left:.2}" y="{top:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
        );
        for (val, y) in [(hi, top), (lo, bottom)] {
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{val:.3}</text>"#,
                left - 6.0,
                y + 4.0
            );
        }
        for (val, x) in [(x0, left), (x1, left + plot_w)] {
            let _ = writeln!(
                svg,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{val:.3}</text>"#,
                bottom + 16.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">x</text>"#,
            left + plot_w / 2.0,
            bottom + 32.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{component}</text>"#,
            top + plot_h / 2.0,
            top + plot_h / 2.0
        );
        let points: Vec<String> = table
            .x
            .iter()
            .zip(&table.data[s][c])
            .filter(|(_, v)| v.is_finite())
            .map(|(&x, &v)| {
                let px = left + (x - x0) / xspan * plot_w;
                let py = bottom - (v - lo) / (hi - lo) * plot_h;
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_plot(table: &TrajectoryTable, component: &str, path: &Path) -> Result<()> {
    let svg = render_plot(table, component)?;
    write_text(path, &svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::StateField;

    #[test]
    fn wave_preset_values() {
        let cfg = parse_config("preset = \"wave\"\n").unwrap();
        assert_eq!(cfg.grid, GridConfig { x_min: 0.0, x_max: 1.0, n_points: 101 });
        assert_eq!(cfg.train.dt, 0.01);
        assert_eq!(cfg.train.t_final, 1.0);
        assert_eq!(cfg.train.architecture, Architecture::Wave3x100);
        assert_eq!(cfg.train.loss.kind, crate::losses::LossKind::Integral);
    }

    #[test]
    fn euler_single_preset() {
        let cfg = parse_config("preset = \"euler-single\"").unwrap();
        assert_eq!(cfg.train.architecture, Architecture::EulerSingle330);
        assert_eq!(cfg.train.init, InitScheme::Identity);
        assert_eq!(cfg.model, ModelSpec::sod());
        let cfg = parse_config("preset = \"euler-single-100\"").unwrap();
        assert_eq!(cfg.grid.build().unwrap().dx(), 0.01);
    }

    #[test]
    fn empty_document_lists_required_keys() {
        let err = parse_config("").unwrap_err().to_string();
        for key in REQUIRED {
            assert!(err.contains(key), "{err}");
        }
    }

    #[test]
    fn unknown_key_reports_path_and_line() {
        let text = "preset = \"wave\"\n\n[train]\ndt = 0.01\nlearning_rat = 3\n";
        let err = parse_config(text).unwrap_err().to_string();
        assert!(err.contains("learning_rat"), "{err}");
        assert!(err.contains("line 5"), "{err}");
    }

    #[test]
    fn type_mismatch_reports_path_and_line() {
        let text = "preset = \"wave\"\n[train]\nn_inner = \"many\"\n";
        let err = parse_config(text).unwrap_err().to_string();
        assert!(err.contains("train.n_inner"), "{err}");
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn invariant_violation_reports_section() {
        let text = "preset = \"wave\"\n[train]\ndt = -1.0\n";
        let err = parse_config(text).unwrap_err().to_string();
        assert!(err.contains("train (line 2)"), "{err}");
        assert!(err.contains("dt"), "{err}");
    }

    #[test]
    fn minimal_document_fills_defaults() {
        let text = "[model]\nkind = \"euler\"\n[train]\ndt = 0.0025\nt_final = 0.01\nn_inner = 3\narchitecture = \"euler-single-330\"\n";
        let parsed = parse_config_with_overrides(text, &[]).unwrap();
        assert_eq!(parsed.config.model, ModelSpec::sod());
        assert!(parsed.defaulted.contains(&"train.seed".to_string()));
        assert!(parsed.defaulted.contains(&"grid.n_points".to_string()));
        assert!(!parsed.defaulted.contains(&"train.dt".to_string()));
    }

    #[test]
    fn overrides_apply() {
        let parsed = parse_config_with_overrides(
            "preset = \"wave\"",
            &["train.seed=7".into(), "train.optimizer.learning_rate=0.01".into(), "output_dir=foo".into()],
        )
        .unwrap();
        assert_eq!(parsed.config.train.seed, 7);
        assert_eq!(parsed.config.train.optimizer.learning_rate, 0.01);
        assert_eq!(parsed.config.output_dir, PathBuf::from("foo"));
        assert!(parse_config_with_overrides("preset = \"wave\"", &["nonsense".into()]).is_err());
    }

    #[test]
    fn presets_round_trip() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            let text = serialize_config(&cfg).unwrap();
            assert_eq!(parse_config(&text).unwrap(), cfg, "{text}");
        }
        let mut cfg = preset("wave").unwrap();
        cfg.preset = None;
        cfg.train.architecture = Architecture::Custom { hidden: vec![7, 5], multi: false };
        let text = serialize_config(&cfg).unwrap();
        assert_eq!(parse_config(&text).unwrap(), cfg, "{text}");
    }

    fn wave_traj(n: usize, times: &[f64]) -> Trajectory {
        let grid = Grid1D::new(0.0, 1.0, n).unwrap();
        let s0 = StateField::new(grid, 1, vec![0.0; n], 0.0).unwrap();
        let mut traj = Trajectory::new(vec!["u".into()], s0.clone());
        for &t in times {
            let vals = grid.coordinates().iter().map(|x| (x * 7.0 + t).sin() / 3.0).collect();
            traj.snapshots.push(s0.successor(vals, t).unwrap());
        }
        traj
    }

    #[test]
    fn trajectory_csv_shape_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        let traj = wave_traj(3, &[]);
        write_trajectory(&traj, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().next().unwrap(), "t,x,u");

        let traj = wave_traj(17, &[0.1, 0.2 + 1e-13, 1.0 / 3.0]);
        write_trajectory(&traj, &path).unwrap();
        let back = read_trajectory(&path).unwrap();
        let table = TrajectoryTable::from_trajectory(&traj);
        assert_eq!(back.times.iter().map(|t| t.to_bits()).collect::<Vec<_>>(), table.times.iter().map(|t| t.to_bits()).collect::<Vec<_>>());
        for (a, b) in back.data.iter().flatten().flatten().zip(table.data.iter().flatten().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back, table);
    }

    #[test]
    fn sod_csv_columns() {
        let grid = Grid1D::new(0.0, 1.0, 11).unwrap();
        let model = ModelSpec::sod();
        let traj = Trajectory::new(model.component_names(), model.initial_state(&grid).unwrap());
        let table = TrajectoryTable::from_trajectory(&traj);
        assert_eq!(table.columns, ["rho", "u", "p", "E"]);
        for i in 0..11 {
            let rho = table.data[0][0][i];
            assert!(rho == 8.0 || rho == 1.0);
            assert_eq!(table.data[0][2][i], rho);
            assert_eq!(table.data[0][1][i], 0.0);
        }
    }

    #[test]
    fn compare_self_and_offset() {
        let traj = wave_traj(11, &[0.5]);
        let rep = compare(&traj, &traj, &[0.0, 0.5]).unwrap();
        for e in &rep.entries {
            assert_eq!((e.l1, e.l2, e.linf), (0.0, 0.0, 0.0));
        }
        // reference is identically zero at t = 0
        assert_eq!(rep.get(0.0, "u").unwrap().rel_l1, None);

        let mut shifted = TrajectoryTable::from_trajectory(&traj);
        let base = shifted.clone();
        let c = 0.25;
        for v in &mut shifted.data[1][0][2..6] {
            *v += c;
        }
        let rep = compare_tables(&shifted, &base, &[0.5]).unwrap();
        let e = rep.get(0.5, "u").unwrap();
        assert!((e.linf - c).abs() < 1e-15);
        assert!((e.l1 - c * 4.0 * 0.1).abs() < 1e-15);
        assert!((e.l2 - (c * c * 4.0 * 0.1_f64).sqrt()).abs() < 1e-15);
        assert!(compare_tables(&shifted, &base, &[0.7]).is_err());
    }

    #[test]
    fn compare_rejects_grid_mismatch() {
        let a = wave_traj(11, &[]);
        let b = wave_traj(12, &[]);
        assert!(matches!(compare(&a, &b, &[0.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn plot_is_deterministic_and_has_panels() {
        let table = TrajectoryTable::from_trajectory(&wave_traj(21, &[0.5, 1.0]));
        let a = render_plot(&table, "u").unwrap();
        let b = render_plot(&table, "u").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.matches("<polyline").count(), 3);
        assert!(render_plot(&table, "rho").is_err());
    }

    #[test]
    fn empty_plot_is_an_error_and_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.svg");
        let table = TrajectoryTable { columns: vec!["u".into()], x: vec![], times: vec![], data: vec![] };
        assert!(emit_plot(&table, "u", &path).is_err());
        assert!(!path.exists());
    }

    #[test]
    fn loss_history_rows() {
        use crate::trainer::IterationLoss;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.csv");
        let it = IterationLoss { interior: 1.0, boundary: 0.5, total: 1.5 };
        let reports = vec![
            LossReport { step: 1, time: 0.1, iterations: vec![it; 3] },
            LossReport { step: 2, time: 0.2, iterations: vec![it; 3] },
        ];
        write_loss_history(&reports, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,iteration,interior,boundary,total");
        assert_eq!(lines.len(), 7);
        assert!(lines[6].starts_with("2,3,"));
    }
}
