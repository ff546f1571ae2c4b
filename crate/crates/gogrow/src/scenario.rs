//! Scenario configs and the batch runner behind the `gogrow` binary.
//!
//! Config files are line-based `key = value` text with four sections —
//! `[model]`, `[grid]`, `[scheme]`, `[output]` — plus the top-level keys
//! `kind` and `name`.  `#` starts a comment.  Unknown keys are rejected,
//! duplicate keys are an error naming both lines, and every key has a
//! documented default, so `kind = wave_table` alone is a valid file.
//!
//! Everything the runner writes is deterministic: no randomness anywhere,
//! CSV bodies byte-identical across invocations, floats at 17 significant
//! digits, LF line endings, and every file opens with a `#`-commented echo
//! of the full resolved configuration plus the artifact version.

use crate::core::{build_grid, CoreError, Field, Frame, Grid1D, ModelParams, State};
use crate::inside::{self, Classification, InsideError};
use crate::kinetic::{self, KineticError};
use crate::pde::{self, PdeError, SchemeConfig};
use crate::speedlab::{self, SpeedError, SweepResult};
use crate::waves::{self, WaveError};
use serde_json::json;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Version stamp embedded in every output header.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Errors from config parsing, validation and scenario execution.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: expected `key = value` or `[section]`, got `{content}`")]
    ParseLine { line: usize, content: String },
    #[error("line {line}: unknown section `[{name}]`")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("duplicate key `{key}` on lines {first} and {second}")]
    DuplicateKey { key: String, first: usize, second: usize },
    #[error("line {line}: key `{key}` expects a number, got `{value}`")]
    BadNumber { line: usize, key: String, value: String },
    #[error("line {line}: key `{key}` must be one of {allowed}, got `{value}`")]
    BadChoice { line: usize, key: String, value: String, allowed: &'static str },
    #[error("config must set `kind` (wave_table | parabolic_run | kinetic_run | inside_run | speed_sweep)")]
    MissingKind,
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read scenario file {path}: {source}")]
    UnreadableScenario { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Kinetic(#[from] KineticError),
    #[error(transparent)]
    Inside(#[from] InsideError),
    #[error(transparent)]
    Speed(#[from] SpeedError),
}

impl ScenarioError {
    /// Distinguishes configuration mistakes (exit code 2) from numerical or
    /// I/O failures during a run (exit code 1).
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            ScenarioError::ParseLine { .. }
                | ScenarioError::UnknownSection { .. }
                | ScenarioError::UnknownKey { .. }
                | ScenarioError::DuplicateKey { .. }
                | ScenarioError::BadNumber { .. }
                | ScenarioError::BadChoice { .. }
                | ScenarioError::MissingKind
                | ScenarioError::Invalid(_)
                | ScenarioError::UnreadableScenario { .. }
        )
    }
}

// ---------------------------------------------------------------------------
// scenario model
// ---------------------------------------------------------------------------

/// The experiment a scenario dispatches to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Closed-form minimal speeds and decay roots over a ladder of biases.
    WaveTable,
    /// Parabolic front simulation with interface tracking.
    ParabolicRun,
    /// Two-velocity kinetic front simulation.
    KineticRun,
    /// Neutral-fraction evolution inside the wave plus the spectral report.
    InsideRun,
    /// Grid-refinement speed study with Richardson extrapolation.
    SpeedSweep,
}

impl ScenarioKind {
    pub fn token(self) -> &'static str {
        match self {
            ScenarioKind::WaveTable => "wave_table",
            ScenarioKind::ParabolicRun => "parabolic_run",
            ScenarioKind::KineticRun => "kinetic_run",
            ScenarioKind::InsideRun => "inside_run",
            ScenarioKind::SpeedSweep => "speed_sweep",
        }
    }

    fn from_token(s: &str) -> Option<Self> {
        match s {
            "wave_table" => Some(ScenarioKind::WaveTable),
            "parabolic_run" => Some(ScenarioKind::ParabolicRun),
            "kinetic_run" => Some(ScenarioKind::KineticRun),
            "inside_run" => Some(ScenarioKind::InsideRun),
            "speed_sweep" => Some(ScenarioKind::SpeedSweep),
            _ => None,
        }
    }
}

/// Initial data of a simulation scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialData {
    /// Compactly supported density with a tanh nutrient ramp.
    Spreading,
    /// The calibrated travelling-wave profile at speed `sigma`.
    Wave,
}

impl InitialData {
    fn token(self) -> &'static str {
        match self {
            InitialData::Spreading => "spreading",
            InitialData::Wave => "wave",
        }
    }
}

/// Which solver a speed sweep refines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepModel {
    Parabolic,
    Kinetic,
}

impl SweepModel {
    fn token(self) -> &'static str {
        match self {
            SweepModel::Parabolic => "parabolic",
            SweepModel::Kinetic => "kinetic",
        }
    }
}

/// Spatial domain of a run.  Defaults depend on the kind: simulation runs
/// use `[-20, 120]` at `dz = 0.05`; inside runs use `[-80, 80]` at
/// `dz = 0.02` (the weighted operator needs wide tails).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub z_min: f64,
    pub z_max: f64,
    pub dz: f64,
}

/// Time stepping and study knobs.  `levels` and `sweep_model` only matter
/// for speed sweeps; `initial` only for parabolic/kinetic runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeSpec {
    pub dt: f64,
    /// Implicitness of the diffusion sub-steps (1 = backward Euler, safe on
    /// discontinuous data; 0.5 = trapezoidal).
    pub theta: f64,
    pub t_max: f64,
    pub levels: usize,
    pub initial: InitialData,
    pub sweep_model: SweepModel,
}

/// Output directory and optional snapshot times.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub snapshots: Vec<f64>,
}

/// A fully resolved scenario: parameters, domain, scheme and outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub params: ModelParams,
    /// Wave speed for wave-seeded runs; `None` selects the minimal speed.
    pub sigma: Option<f64>,
    pub grid: GridSpec,
    pub scheme: SchemeSpec,
    pub output: OutputSpec,
}

// ---------------------------------------------------------------------------
// parsing
// ---------------------------------------------------------------------------

const KNOWN_KEYS: &[(&str, &str)] = &[
    ("", "kind"),
    ("", "name"),
    ("model", "chi"),
    ("model", "diffusion_n"),
    ("model", "n_threshold"),
    ("model", "epsilon"),
    ("model", "sigma"),
    ("grid", "z_min"),
    ("grid", "z_max"),
    ("grid", "dz"),
    ("scheme", "dt"),
    ("scheme", "theta"),
    ("scheme", "t_max"),
    ("scheme", "levels"),
    ("scheme", "initial"),
    ("scheme", "sweep_model"),
    ("output", "dir"),
    ("output", "snapshots"),
];

const KNOWN_SECTIONS: &[&str] = &["model", "grid", "scheme", "output"];

#[derive(Debug, Clone)]
struct RawItem {
    line: usize,
    value: String,
}

fn qualified(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

struct RawConfig {
    items: BTreeMap<(String, String), RawItem>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut items: BTreeMap<(String, String), RawItem> = BTreeMap::new();
        let mut section = String::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                let name = name.trim();
                if !KNOWN_SECTIONS.contains(&name) {
                    return Err(ScenarioError::UnknownSection {
                        line: line_no,
                        name: name.to_string(),
                    });
                }
                section = name.to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ScenarioError::ParseLine {
                    line: line_no,
                    content: line.to_string(),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if !KNOWN_KEYS.iter().any(|&(s, k)| s == section && k == key) {
                return Err(ScenarioError::UnknownKey {
                    line: line_no,
                    key: qualified(&section, &key),
                });
            }
            let map_key = (section.clone(), key.clone());
            if let Some(prev) = items.get(&map_key) {
                return Err(ScenarioError::DuplicateKey {
                    key: qualified(&section, &key),
                    first: prev.line,
                    second: line_no,
                });
            }
            items.insert(map_key, RawItem { line: line_no, value });
        }
        Ok(Self { items })
    }

    fn get(&self, section: &str, key: &str) -> Option<&RawItem> {
        self.items.get(&(section.to_string(), key.to_string()))
    }

    fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64, ScenarioError> {
        match self.get(section, key) {
            None => Ok(default),
            Some(item) => item.value.parse::<f64>().map_err(|_| ScenarioError::BadNumber {
                line: item.line,
                key: qualified(section, key),
                value: item.value.clone(),
            }),
        }
    }

    fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize, ScenarioError> {
        match self.get(section, key) {
            None => Ok(default),
            Some(item) => item.value.parse::<usize>().map_err(|_| ScenarioError::BadNumber {
                line: item.line,
                key: qualified(section, key),
                value: item.value.clone(),
            }),
        }
    }
}

/// Parses config text into a fully resolved, validated [`Scenario`].
pub fn parse_config(text: &str) -> Result<Scenario, ScenarioError> {
    let raw = RawConfig::parse(text)?;

    let kind_item = raw.get("", "kind").ok_or(ScenarioError::MissingKind)?;
    let kind = ScenarioKind::from_token(&kind_item.value).ok_or(ScenarioError::BadChoice {
        line: kind_item.line,
        key: "kind".into(),
        value: kind_item.value.clone(),
        allowed: "wave_table | parabolic_run | kinetic_run | inside_run | speed_sweep",
    })?;
    let name = raw
        .get("", "name")
        .map(|i| i.value.clone())
        .unwrap_or_else(|| kind.token().to_string());

    let chi = raw.f64_or("model", "chi", 2.0)?;
    let diffusion_n = raw.f64_or("model", "diffusion_n", 1.0)?;
    let n_threshold = raw.f64_or("model", "n_threshold", 0.5)?;
    let epsilon = raw.f64_or("model", "epsilon", 0.25)?;
    let sigma = match raw.get("model", "sigma") {
        None => None,
        Some(item) if item.value == "star" => None,
        Some(item) => Some(item.value.parse::<f64>().map_err(|_| ScenarioError::BadNumber {
            line: item.line,
            key: "model.sigma".into(),
            value: item.value.clone(),
        })?),
    };

    // Inside runs need wide tails for the weighted operator; simulation runs
    // need room ahead of the front.
    let (z_min_d, z_max_d, dz_d) = match kind {
        ScenarioKind::InsideRun => (-80.0, 80.0, 0.02),
        _ => (-20.0, 120.0, 0.05),
    };
    let grid = GridSpec {
        z_min: raw.f64_or("grid", "z_min", z_min_d)?,
        z_max: raw.f64_or("grid", "z_max", z_max_d)?,
        dz: raw.f64_or("grid", "dz", dz_d)?,
    };

    let initial = match raw.get("scheme", "initial") {
        None => InitialData::Spreading,
        Some(item) => match item.value.as_str() {
            "spreading" => InitialData::Spreading,
            "wave" => InitialData::Wave,
            _ => {
                return Err(ScenarioError::BadChoice {
                    line: item.line,
                    key: "scheme.initial".into(),
                    value: item.value.clone(),
                    allowed: "spreading | wave",
                })
            }
        },
    };
    let sweep_model = match raw.get("scheme", "sweep_model") {
        None => SweepModel::Parabolic,
        Some(item) => match item.value.as_str() {
            "parabolic" => SweepModel::Parabolic,
            "kinetic" => SweepModel::Kinetic,
            _ => {
                return Err(ScenarioError::BadChoice {
                    line: item.line,
                    key: "scheme.sweep_model".into(),
                    value: item.value.clone(),
                    allowed: "parabolic | kinetic",
                })
            }
        },
    };
    let scheme = SchemeSpec {
        dt: raw.f64_or("scheme", "dt", 0.01)?,
        theta: raw.f64_or("scheme", "theta", 0.5)?,
        t_max: raw.f64_or("scheme", "t_max", 40.0)?,
        levels: raw.usize_or("scheme", "levels", 3)?,
        initial,
        sweep_model,
    };

    let dir = PathBuf::from(
        raw.get("output", "dir").map(|i| i.value.clone()).unwrap_or_else(|| "out".to_string()),
    );
    let mut snapshots = Vec::new();
    if let Some(item) = raw.get("output", "snapshots") {
        for tok in item.value.split(',') {
            let tok = tok.trim();
            if tok.is_empty() {
                continue;
            }
            let t = tok.parse::<f64>().map_err(|_| ScenarioError::BadNumber {
                line: item.line,
                key: "output.snapshots".into(),
                value: tok.to_string(),
            })?;
            snapshots.push(t);
        }
        snapshots.sort_by(|a, b| a.partial_cmp(b).expect("finite snapshot times"));
        snapshots.dedup();
    }

    let params = ModelParams { chi, diffusion_n, n_threshold, epsilon };
    let scenario = Scenario {
        name,
        kind,
        params,
        sigma,
        grid,
        scheme,
        output: OutputSpec { dir, snapshots },
    };
    validate(&scenario)?;
    Ok(scenario)
}

/// Range checks with stable one-line messages (also re-run after CLI flag
/// overrides).
pub fn validate(s: &Scenario) -> Result<(), ScenarioError> {
    let bad = |msg: &str| Err(ScenarioError::Invalid(msg.to_string()));
    let p = &s.params;
    if !(p.chi > 0.0) || !p.chi.is_finite() {
        return bad("chi must be positive");
    }
    if !(p.diffusion_n > 0.0) || !p.diffusion_n.is_finite() {
        return bad("diffusion_n must be positive");
    }
    if !(p.n_threshold > 0.0 && p.n_threshold < 1.0) {
        return bad("n_threshold must lie strictly between 0 and 1");
    }
    if !(p.epsilon > 0.0) || !p.epsilon.is_finite() {
        return bad("epsilon must be positive");
    }
    if let Some(sigma) = s.sigma {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return bad("sigma must be positive (or `star` for the minimal speed)");
        }
    }
    if !(s.grid.dz > 0.0) || !s.grid.dz.is_finite() {
        return bad("dz must be positive");
    }
    if !(s.grid.z_min < s.grid.z_max) || !s.grid.z_min.is_finite() || !s.grid.z_max.is_finite() {
        return bad("z_min must be below z_max");
    }
    if !(s.scheme.dt > 0.0) || !s.scheme.dt.is_finite() {
        return bad("dt must be positive");
    }
    if !(s.scheme.theta >= 0.0 && s.scheme.theta <= 1.0) {
        return bad("theta must lie in [0, 1]");
    }
    if !(s.scheme.t_max > 0.0) || !s.scheme.t_max.is_finite() {
        return bad("t_max must be positive");
    }
    if s.scheme.levels < 2 {
        return bad("levels must be at least 2");
    }
    if s.output.snapshots.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return bad("snapshot times must be finite and nonnegative");
    }
    Ok(())
}

/// Serializes a scenario back to config text; re-parsing the result yields
/// an identical scenario (every key is written explicitly).
pub fn to_config_text(s: &Scenario) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "kind = {}", s.kind.token());
    let _ = writeln!(out, "name = {}", s.name);
    let _ = writeln!(out);
    let _ = writeln!(out, "[model]");
    let _ = writeln!(out, "chi = {}", s.params.chi);
    let _ = writeln!(out, "diffusion_n = {}", s.params.diffusion_n);
    let _ = writeln!(out, "n_threshold = {}", s.params.n_threshold);
    let _ = writeln!(out, "epsilon = {}", s.params.epsilon);
    match s.sigma {
        None => {
            let _ = writeln!(out, "sigma = star");
        }
        Some(v) => {
            let _ = writeln!(out, "sigma = {v}");
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "[grid]");
    let _ = writeln!(out, "z_min = {}", s.grid.z_min);
    let _ = writeln!(out, "z_max = {}", s.grid.z_max);
    let _ = writeln!(out, "dz = {}", s.grid.dz);
    let _ = writeln!(out);
    let _ = writeln!(out, "[scheme]");
    let _ = writeln!(out, "dt = {}", s.scheme.dt);
    let _ = writeln!(out, "theta = {}", s.scheme.theta);
    let _ = writeln!(out, "t_max = {}", s.scheme.t_max);
    let _ = writeln!(out, "levels = {}", s.scheme.levels);
    let _ = writeln!(out, "initial = {}", s.scheme.initial.token());
    let _ = writeln!(out, "sweep_model = {}", s.scheme.sweep_model.token());
    let _ = writeln!(out);
    let _ = writeln!(out, "[output]");
    let _ = writeln!(out, "dir = {}", s.output.dir.display());
    let snaps: Vec<String> = s.output.snapshots.iter().map(|t| t.to_string()).collect();
    let _ = writeln!(out, "snapshots = {}", snaps.join(","));
    out
}

// ---------------------------------------------------------------------------
// output writers
// ---------------------------------------------------------------------------

fn fmt_sig(x: f64) -> String {
    format!("{x:.16e}")
}

fn preamble_text(s: &Scenario) -> String {
    let mut p = format!("artifact-version: {ARTIFACT_VERSION}\n");
    p.push_str(&to_config_text(s));
    p
}

/// Writes a CSV with a `#`-commented preamble, a column-header line and
/// 17-significant-digit float cells.  NaN cells are written empty (used for
/// "not applicable", e.g. the epsilon column of parabolic sweep rows).
fn write_csv(
    path: &Path,
    preamble: &str,
    columns: &[&str],
    rows: &[Vec<f64>],
) -> Result<(), ScenarioError> {
    let mut out = String::new();
    for line in preamble.lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        let cells: Vec<String> =
            row.iter().map(|&x| if x.is_nan() { String::new() } else { fmt_sig(x) }).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn make_grid(g: &GridSpec) -> Result<Grid1D, ScenarioError> {
    let n_cells = ((g.z_max - g.z_min) / g.dz).round().max(2.0) as usize;
    Ok(build_grid(g.z_min, g.z_max, n_cells)?)
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

/// Files written by a scenario plus the path of its JSON summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub summary_path: PathBuf,
}

// ---------------------------------------------------------------------------
// dispatch
// ---------------------------------------------------------------------------

/// Runs a scenario, writing its CSV artifacts and a `summary.json` keyed by
/// the scenario name into the output directory.
pub fn run_scenario(s: &Scenario) -> Result<RunOutcome, ScenarioError> {
    validate(s)?;
    fs::create_dir_all(&s.output.dir)?;
    let dir = s.output.dir.clone();
    let pre = preamble_text(s);

    let mut files: Vec<PathBuf> = Vec::new();
    let cfg_path = dir.join("scenario.cfg");
    fs::write(&cfg_path, to_config_text(s))?;
    files.push(cfg_path);

    let results = match s.kind {
        ScenarioKind::WaveTable => run_wave_table(s, &pre, &dir, &mut files)?,
        ScenarioKind::ParabolicRun => run_parabolic(s, &pre, &dir, &mut files)?,
        ScenarioKind::KineticRun => run_kinetic(s, &pre, &dir, &mut files)?,
        ScenarioKind::InsideRun => run_inside(s, &pre, &dir, &mut files)?,
        ScenarioKind::SpeedSweep => run_sweep(s, &pre, &dir, &mut files)?,
    };

    let file_names: Vec<String> = files
        .iter()
        .map(|f| f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
        .collect();
    let summary = json!({
        s.name.clone(): {
            "kind": s.kind.token(),
            "artifact_version": ARTIFACT_VERSION,
            "results": results,
            "files": file_names,
        }
    });
    let summary_path = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&summary).expect("json serialization");
    text.push('\n');
    fs::write(&summary_path, text)?;
    files.push(summary_path.clone());

    Ok(RunOutcome { files, summary_path })
}

fn run_wave_table(
    _s: &Scenario,
    pre: &str,
    dir: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<serde_json::Value, ScenarioError> {
    let chis = [0.5, 1.0, 1.5, 2.0, 3.0];
    let mut rows = Vec::with_capacity(chis.len());
    for chi in chis {
        let sigma = waves::minimal_speed(chi)?;
        let (mu_minus, mu_plus) = waves::decay_roots(sigma)?;
        rows.push(vec![chi, sigma, mu_minus, mu_plus]);
    }
    let path = dir.join("wave_table.csv");
    write_csv(&path, pre, &["chi", "sigma_star", "mu_minus", "mu_plus"], &rows)?;
    files.push(path);
    Ok(json!({ "rows": rows.len() }))
}

fn trajectory_rows(traj: &[pde::TrajectoryPoint]) -> Vec<Vec<f64>> {
    traj.iter()
        .map(|p| vec![p.time, p.xbar, p.xdot_ode, p.xdot_slope, p.mass_rho, p.dn_min])
        .collect()
}

const TRAJECTORY_COLUMNS: &[&str] =
    &["t", "xbar", "xdot_ode", "xdot_slope", "mass_rho", "dn_min"];

fn record_stride(t_max: f64, dt: f64) -> usize {
    ((t_max / 400.0) / dt).round().max(1.0) as usize
}

fn speed_summary(
    traj: &[pde::TrajectoryPoint],
    predicted: f64,
) -> (serde_json::Value, serde_json::Value, serde_json::Value) {
    match speedlab::estimate_speed(&speedlab::trajectory_pairs(traj), 0.5) {
        Ok(est) => (
            json!(predicted),
            json!(est.slope),
            json!((est.slope - predicted).abs() / predicted),
        ),
        Err(_) => (json!(predicted), serde_json::Value::Null, serde_json::Value::Null),
    }
}

fn run_parabolic(
    s: &Scenario,
    pre: &str,
    dir: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<serde_json::Value, ScenarioError> {
    let grid = make_grid(&s.grid)?;
    let p = &s.params;
    let sigma_star = waves::minimal_speed(p.chi)?;
    let (state, predicted) = match s.scheme.initial {
        InitialData::Spreading => {
            let (rho, n) = pde::spreading_initial_data(p, grid, 1.0);
            (State::new(rho, n, 0.0, Frame::Static)?, sigma_star)
        }
        InitialData::Wave => {
            let sigma = s.sigma.unwrap_or(sigma_star);
            let (state, _, _) = waves::parabolic_wave_state(p, sigma, grid)?;
            (state, sigma)
        }
    };
    let cfg = SchemeConfig::new(s.scheme.dt, s.scheme.theta)?;
    let stride = record_stride(s.scheme.t_max, cfg.dt);
    let run = pde::run_static(state, p, &cfg, s.scheme.t_max, stride, &s.output.snapshots)?;

    let traj_path = dir.join("trajectory.csv");
    write_csv(&traj_path, pre, TRAJECTORY_COLUMNS, &trajectory_rows(&run.trajectory))?;
    files.push(traj_path);

    for (i, snap) in run.snapshots.iter().enumerate() {
        let rows: Vec<Vec<f64>> = snap
            .grid()
            .centers()
            .zip(snap.rho.values.iter().zip(snap.nutrient.values.iter()))
            .map(|(z, (&r, &n))| vec![z, r, n])
            .collect();
        let path = dir.join(format!("snapshot_{i:03}.csv"));
        let snap_pre = format!("{pre}snapshot-time: {}\n", snap.time);
        write_csv(&path, &snap_pre, &["z", "rho", "n"], &rows)?;
        files.push(path);
    }

    let final_rows: Vec<Vec<f64>> = run
        .final_state
        .grid()
        .centers()
        .zip(run.final_state.rho.values.iter().zip(run.final_state.nutrient.values.iter()))
        .map(|(z, (&r, &n))| vec![z, r, n])
        .collect();
    let final_path = dir.join("final_state.csv");
    write_csv(&final_path, pre, &["z", "rho", "n"], &final_rows)?;
    files.push(final_path);

    let (predicted_v, measured_v, rel_v) = speed_summary(&run.trajectory, predicted);
    Ok(json!({
        "predicted_speed": predicted_v,
        "measured_speed": measured_v,
        "rel_error": rel_v,
        "final_time": run.final_state.time,
        "final_mass": pde::discrete_mass(&run.final_state.rho),
    }))
}

fn run_kinetic(
    s: &Scenario,
    pre: &str,
    dir: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<serde_json::Value, ScenarioError> {
    let grid = make_grid(&s.grid)?;
    let p = &s.params;
    let sigma_star = waves::kinetic_minimal_speed(p.chi, p.epsilon)?;
    let (state, predicted) = match s.scheme.initial {
        InitialData::Spreading => (kinetic::kinetic_spreading_state(p, grid)?, sigma_star),
        InitialData::Wave => {
            let sigma = s.sigma.unwrap_or(sigma_star);
            let (state, _, _) = kinetic::kinetic_wave_state(p, sigma, grid)?;
            (state, sigma)
        }
    };
    let cfg = SchemeConfig::new(s.scheme.dt, s.scheme.theta)?;
    let stride = record_stride(s.scheme.t_max, cfg.dt);
    let run = kinetic::run_kinetic(state, p, &cfg, s.scheme.t_max, stride)?;

    let traj_path = dir.join("trajectory.csv");
    write_csv(&traj_path, pre, TRAJECTORY_COLUMNS, &trajectory_rows(&run.trajectory))?;
    files.push(traj_path);

    let fsf = &run.final_state;
    let rho = fsf.rho();
    let final_rows: Vec<Vec<f64>> = fsf
        .grid()
        .centers()
        .enumerate()
        .map(|(i, z)| {
            vec![
                z,
                fsf.f_plus.values[i],
                fsf.f_minus.values[i],
                rho.values[i],
                fsf.nutrient.values[i],
            ]
        })
        .collect();
    let final_path = dir.join("final_state.csv");
    write_csv(&final_path, pre, &["z", "f_plus", "f_minus", "rho", "n"], &final_rows)?;
    files.push(final_path);

    let (predicted_v, measured_v, rel_v) = speed_summary(&run.trajectory, predicted);
    Ok(json!({
        "predicted_speed": predicted_v,
        "measured_speed": measured_v,
        "rel_error": rel_v,
        "final_time": fsf.time,
        "final_mass": pde::discrete_mass(&rho),
    }))
}

fn run_inside(
    s: &Scenario,
    pre: &str,
    dir: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<serde_json::Value, ScenarioError> {
    let grid = make_grid(&s.grid)?;
    let p = &s.params;
    let sigma_star = waves::minimal_speed(p.chi)?;
    let sigma = s.sigma.unwrap_or(sigma_star);
    let profile = waves::parabolic_profile(p.chi, sigma, 1.0)?;
    let drift = inside::build_drift(&profile);

    let nu0 = Field::from_fn(grid, |z| if z <= 0.0 { 1.0 } else { 0.0 });
    let fs0 = inside::FractionState::new(nu0, 0.0, drift)?;
    let cfg = SchemeConfig::new(s.scheme.dt, s.scheme.theta)?;
    let stride = record_stride(s.scheme.t_max, cfg.dt);
    let run = inside::evolve_fraction(fs0, &cfg, s.scheme.t_max, stride)?;

    let pushed = drift.integrable_weight();
    let at_star = (sigma - sigma_star).abs() <= 1e-12 * sigma_star;

    // Decay series; pushed fronts also get the exponential reference curve.
    let mut gamma_used = f64::NAN;
    if pushed && at_star {
        gamma_used = inside::spectral_gap(p.chi, sigma)?;
    }
    let m0 = run.series.first().map(|&(_, m)| m).unwrap_or(0.0);
    let decay_rows: Vec<Vec<f64>> = run
        .series
        .iter()
        .map(|&(t, m)| {
            if gamma_used.is_finite() {
                vec![t, m, m0 * (-gamma_used * t).exp()]
            } else {
                vec![t, m, f64::NAN]
            }
        })
        .collect();
    let decay_path = dir.join("decay.csv");
    write_csv(&decay_path, pre, &["t", "metric", "bound"], &decay_rows)?;
    files.push(decay_path);

    // Spectral report (only defined for the pushed minimal-speed wave).
    let mut gap_json = serde_json::Value::Null;
    if pushed && at_star {
        let gap = inside::discrete_spectrum(&drift, grid, 6)?;
        let eig_rows: Vec<Vec<f64>> =
            gap.eigenvalues.iter().enumerate().map(|(i, &l)| vec![i as f64, l]).collect();
        let eig_path = dir.join("eigenvalues.csv");
        write_csv(&eig_path, pre, &["index", "eigenvalue"], &eig_rows)?;
        files.push(eig_path);
        gap_json = json!({
            "gamma_formula": gap.gamma_formula,
            "lambda0": gap.lambda0,
            "lambda1": gap.lambda1,
            "mean_weight": gap.mean_weight,
            "cosine_half_weight": gap.cosine_half_weight,
        });
    }

    let final_rows: Vec<Vec<f64>> = run
        .final_state
        .nu
        .grid
        .centers()
        .zip(run.final_state.nu.values.iter())
        .map(|(z, &v)| vec![z, v])
        .collect();
    let final_path = dir.join("final_fraction.csv");
    write_csv(&final_path, pre, &["z", "nu"], &final_rows)?;
    files.push(final_path);

    let (label, rate) = match inside::classify(&run.series, &drift)? {
        Classification::Pushed(r) => ("pushed", finite_or_null(r)),
        Classification::Pulled => ("pulled", serde_json::Value::Null),
        Classification::Inconclusive => ("inconclusive", serde_json::Value::Null),
    };
    Ok(json!({
        "sigma": sigma,
        "classification": label,
        "decay_rate": rate,
        "initial_mean": run.mean,
        "gap": gap_json,
    }))
}

fn sweep_rows_json(sweep: &SweepResult) -> serde_json::Value {
    let measured = sweep
        .extrapolated_speed
        .or_else(|| sweep.rows.last().map(|r| r.measured_speed));
    let predicted = sweep.rows.first().map(|r| r.predicted_speed);
    let rel = match (measured, predicted) {
        (Some(m), Some(p)) if p != 0.0 => json!((m - p).abs() / p),
        _ => serde_json::Value::Null,
    };
    json!({
        "predicted_speed": predicted,
        "measured_speed": measured,
        "rel_error": rel,
        "observed_order": sweep.observed_order,
        "levels": sweep.rows.len(),
    })
}

fn run_sweep(
    s: &Scenario,
    pre: &str,
    dir: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<serde_json::Value, ScenarioError> {
    let sweep = match s.scheme.sweep_model {
        SweepModel::Parabolic => speedlab::convergence_study(&s.params, s.scheme.levels)?,
        SweepModel::Kinetic => speedlab::kinetic_convergence_study(&s.params, s.scheme.levels)?,
    };
    let rows: Vec<Vec<f64>> = sweep
        .rows
        .iter()
        .map(|r| {
            vec![
                r.chi,
                r.epsilon.unwrap_or(f64::NAN), // empty cell for parabolic rows
                r.dz,
                r.dt,
                r.measured_speed,
                r.predicted_speed,
                r.rel_error,
            ]
        })
        .collect();
    let path = dir.join("sweep.csv");
    write_csv(
        &path,
        pre,
        &["chi", "epsilon", "dz", "dt", "measured_speed", "predicted_speed", "rel_error"],
        &rows,
    )?;
    files.push(path);
    Ok(sweep_rows_json(&sweep))
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_applies_documented_defaults() {
        let s = parse_config("kind = wave_table").unwrap();
        assert_eq!(s.kind, ScenarioKind::WaveTable);
        assert_eq!(s.name, "wave_table");
        assert_eq!(s.params.chi, 2.0);
        assert_eq!(s.params.diffusion_n, 1.0);
        assert_eq!(s.params.n_threshold, 0.5);
        assert_eq!(s.params.epsilon, 0.25);
        assert_eq!(s.sigma, None);
        assert_eq!(s.grid, GridSpec { z_min: -20.0, z_max: 120.0, dz: 0.05 });
        assert_eq!(s.scheme.dt, 0.01);
        assert_eq!(s.scheme.theta, 0.5);
        assert_eq!(s.scheme.t_max, 40.0);
        assert_eq!(s.scheme.levels, 3);
        assert_eq!(s.scheme.initial, InitialData::Spreading);
        assert_eq!(s.scheme.sweep_model, SweepModel::Parabolic);
        assert_eq!(s.output.dir, PathBuf::from("out"));
        assert!(s.output.snapshots.is_empty());
    }

    #[test]
    fn inside_kind_gets_wide_grid_defaults() {
        let s = parse_config("kind = inside_run").unwrap();
        assert_eq!(s.grid, GridSpec { z_min: -80.0, z_max: 80.0, dz: 0.02 });
    }

    #[test]
    fn values_parse_with_sections_and_comments() {
        let text = "\
# front run at raised bias
kind = parabolic_run
name = biased

[model]
chi = 2.0   # bias
epsilon = 0.1

[grid]
dz = 0.1

[scheme]
t_max = 12.5

[output]
dir = results/biased
snapshots = 5, 1, 5
";
        let s = parse_config(text).unwrap();
        assert_eq!(s.params.chi, 2.0);
        assert_eq!(s.params.epsilon, 0.1);
        assert_eq!(s.grid.dz, 0.1);
        assert_eq!(s.scheme.t_max, 12.5);
        assert_eq!(s.output.dir, PathBuf::from("results/biased"));
        assert_eq!(s.output.snapshots, vec![1.0, 5.0]); // sorted, deduplicated
    }

    #[test]
    fn duplicate_key_error_names_key_and_both_lines() {
        let text = "kind = wave_table\n[model]\nchi = 2\nchi = 3\n";
        let err = parse_config(text).unwrap_err();
        match &err {
            ScenarioError::DuplicateKey { key, first, second } => {
                assert_eq!(key, "model.chi");
                assert_eq!((*first, *second), (3, 4));
            }
            other => panic!("expected DuplicateKey, got {other:?}"),
        }
        let msg = err.to_string();
        assert!(msg.contains("model.chi") && msg.contains('3') && msg.contains('4'), "{msg}");
    }

    #[test]
    fn unknown_keys_sections_and_kinds_are_rejected() {
        assert!(matches!(
            parse_config("kind = wave_table\nchli = 2\n"),
            Err(ScenarioError::UnknownKey { line: 2, .. })
        ));
        assert!(matches!(
            parse_config("kind = wave_table\n[universe]\n"),
            Err(ScenarioError::UnknownSection { line: 2, .. })
        ));
        assert!(matches!(
            parse_config("kind = warp_table\n"),
            Err(ScenarioError::BadChoice { line: 1, .. })
        ));
        assert!(matches!(parse_config("name = x\n"), Err(ScenarioError::MissingKind)));
        assert!(matches!(
            parse_config("kind = wave_table\njust a line\n"),
            Err(ScenarioError::ParseLine { line: 2, .. })
        ));
        assert!(matches!(
            parse_config("kind = wave_table\n[model]\nchi = fast\n"),
            Err(ScenarioError::BadNumber { line: 3, .. })
        ));
    }

    #[test]
    fn negative_chi_message_is_exact_and_config_like() {
        let err = parse_config("kind = wave_table\n[model]\nchi = -1\n").unwrap_err();
        assert_eq!(err.to_string(), "chi must be positive");
        assert!(err.is_config_error());
    }

    #[test]
    fn round_trip_through_config_text_is_identity() {
        let text = "\
kind = kinetic_run
name = kin-demo

[model]
chi = 0.5
epsilon = 0.4
sigma = 2.5

[grid]
z_min = -15
z_max = 55
dz = 0.04

[scheme]
dt = 0.016
theta = 0.5
t_max = 3
initial = wave

[output]
dir = demo/kin
snapshots = 1,2.5
";
        let s = parse_config(text).unwrap();
        let round = parse_config(&to_config_text(&s)).unwrap();
        assert_eq!(s, round);
    }

    #[test]
    fn wave_table_run_is_deterministic_and_matches_the_formula() {
        let tmp = tempfile::tempdir().unwrap();
        let mut s = parse_config("kind = wave_table").unwrap();
        s.output.dir = tmp.path().to_path_buf();
        let outcome = run_scenario(&s).unwrap();
        let table_path = tmp.path().join("wave_table.csv");
        assert!(outcome.files.contains(&table_path));

        let first = fs::read(&table_path).unwrap();
        let summary_first = fs::read(tmp.path().join("summary.json")).unwrap();
        run_scenario(&s).unwrap();
        assert_eq!(first, fs::read(&table_path).unwrap(), "CSV must be byte-identical");
        assert_eq!(summary_first, fs::read(tmp.path().join("summary.json")).unwrap());

        let text = String::from_utf8(first).unwrap();
        assert!(text.starts_with("# artifact-version:"));
        let data: Vec<&str> =
            text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data[0], "chi,sigma_star,mu_minus,mu_plus");
        assert_eq!(data.len(), 1 + 5);
        // chi = 2 row: sigma* = 2.5, roots 0.5 and 2.
        let row: Vec<f64> =
            data[4].split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(row, vec![2.0, 2.5, 0.5, 2.0]);
    }

    #[test]
    fn parabolic_run_writes_trajectory_snapshot_and_summary() {
        let tmp = tempfile::tempdir().unwrap();
        let text = "\
kind = parabolic_run

[grid]
z_min = -10
z_max = 30
dz = 0.1

[scheme]
dt = 0.005
t_max = 1

[output]
snapshots = 0.5
";
        let mut s = parse_config(text).unwrap();
        s.output.dir = tmp.path().to_path_buf();
        run_scenario(&s).unwrap();

        let traj = fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
        let data_lines = traj.lines().filter(|l| !l.starts_with('#')).count();
        assert!(data_lines > 10);
        assert!(traj.contains("t,xbar,xdot_ode,xdot_slope,mass_rho,dn_min"));
        assert!(tmp.path().join("snapshot_000.csv").exists());
        assert!(tmp.path().join("final_state.csv").exists());

        let summary: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap())
                .unwrap();
        let results = &summary["parabolic_run"]["results"];
        assert_eq!(results["predicted_speed"], json!(2.5));
    }

    #[test]
    fn kinetic_run_writes_velocity_resolved_final_state() {
        let tmp = tempfile::tempdir().unwrap();
        let text = "\
kind = kinetic_run

[grid]
z_min = -10
z_max = 30
dz = 0.1

[scheme]
dt = 0.025
t_max = 1
";
        let mut s = parse_config(text).unwrap();
        s.output.dir = tmp.path().to_path_buf();
        run_scenario(&s).unwrap();
        let final_text = fs::read_to_string(tmp.path().join("final_state.csv")).unwrap();
        assert!(final_text.contains("z,f_plus,f_minus,rho,n"));
    }

    #[test]
    fn inside_run_reports_gap_and_classification() {
        let tmp = tempfile::tempdir().unwrap();
        let text = "\
kind = inside_run

[grid]
z_min = -80
z_max = 60
dz = 0.1

[scheme]
dt = 0.02
t_max = 2
";
        let mut s = parse_config(text).unwrap();
        s.output.dir = tmp.path().to_path_buf();
        run_scenario(&s).unwrap();
        assert!(tmp.path().join("decay.csv").exists());
        assert!(tmp.path().join("eigenvalues.csv").exists());
        assert!(tmp.path().join("final_fraction.csv").exists());
        let summary: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap())
                .unwrap();
        let results = &summary["inside_run"]["results"];
        assert!((results["gap"]["gamma_formula"].as_f64().unwrap() - 0.0625).abs() < 1e-15);
        assert!(results["classification"].is_string());
    }

    #[test]
    fn speed_sweep_writes_rows_and_extrapolation() {
        let tmp = tempfile::tempdir().unwrap();
        let text = "\
kind = speed_sweep

[scheme]
levels = 2
";
        let mut s = parse_config(text).unwrap();
        s.output.dir = tmp.path().to_path_buf();
        run_scenario(&s).unwrap();
        let sweep = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
        let data: Vec<&str> = sweep.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data[0], "chi,epsilon,dz,dt,measured_speed,predicted_speed,rel_error");
        assert_eq!(data.len(), 1 + 2);
        // Parabolic rows leave the epsilon cell empty.
        assert!(data[1].splitn(3, ',').nth(1).unwrap().is_empty());

        let summary: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap())
                .unwrap();
        let results = &summary["speed_sweep"]["results"];
        assert!(results["rel_error"].as_f64().unwrap() < 0.05);
    }
}
