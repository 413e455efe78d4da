use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crkernel::barrier::ModelManifold;
use crkernel::ini::{self, ConfigError, Entry, Section};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Verify,
    Scaling,
    Holder,
    Solve,
    Report,
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "verify" => Command::Verify,
            "scaling" => Command::Scaling,
            "holder" => Command::Holder,
            "solve" => Command::Solve,
            "report" => Command::Report,
            _ => return Err(format!("unknown command '{s}' (expected verify, scaling, holder, solve or report)")),
        })
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Verify => "verify",
            Command::Scaling => "scaling",
            Command::Holder => "holder",
            Command::Solve => "solve",
            Command::Report => "report",
        })
    }
}

/// Pass/fail thresholds for the numeric commands.
#[derive(Clone, Debug, PartialEq)]
pub struct Tolerances {
    pub slack_floor: f64,
    pub r_slope: (f64, f64),
    pub e_slope: (f64, f64),
    pub k_slope: (f64, f64),
    pub holder_min: f64,
    pub homotopy_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            slack_floor: -1e-12,
            r_slope: (0.7, 1.3),
            e_slope: (1.6, 2.4),
            k_slope: (0.7, 1.3),
            holder_min: 0.45,
            homotopy_max: 0.2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub model: ModelManifold,
    /// Where the model came from, for the report header.
    pub model_source: String,
    pub command: Option<Command>,
    pub seed: u64,
    pub samples: usize,
    pub shells: usize,
    pub barrier_samples: usize,
    pub m_override: Option<usize>,
    pub trials: usize,
    pub out: Option<PathBuf>,
    /// Probe point in chart coordinates.
    pub point: Option<Vec<f64>>,
    pub epsilon: Vec<f64>,
    pub separations: Vec<f64>,
    pub direction: Option<Vec<f64>>,
    pub radius: f64,
    pub points: usize,
    pub spread: f64,
    pub bump_radius: f64,
    pub step: f64,
    pub tol: Tolerances,
}

/// A config problem, located in a file.
#[derive(Debug, thiserror::Error)]
#[error("{path}:{err}")]
pub struct LocatedError {
    pub path: String,
    pub err: ConfigError,
}

const RUN_KEYS: &[&str] =
    &["command", "model", "seed", "samples", "shells", "barrier_samples", "m_override", "trials", "out"];
const PROBE_KEYS: &[&str] =
    &["point", "epsilon", "separations", "direction", "radius", "points", "spread", "bump_radius", "step"];
const TOL_KEYS: &[&str] = &["slack_floor", "r_slope", "e_slope", "k_slope", "holder_min", "homotopy_max"];

fn number<T: FromStr>(e: &Entry) -> Result<T, ConfigError> {
    e.value
        .parse()
        .map_err(|_| ConfigError::new(e.line, e.col, format!("'{}' has an invalid value '{}'", e.key, e.value)))
}

fn positive<T: FromStr + PartialOrd + Default>(e: &Entry) -> Result<T, ConfigError> {
    let v: T = number(e)?;
    if v <= T::default() {
        return Err(ConfigError::new(e.line, e.col, format!("'{}' must be positive", e.key)));
    }
    Ok(v)
}

fn floats(e: &Entry) -> Result<Vec<f64>, ConfigError> {
    ini::split_list(e)
        .into_iter()
        .map(|(s, col)| {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| ConfigError::new(e.line, col, format!("'{s}' is not a number")))
        })
        .collect()
}

fn positive_list(e: &Entry) -> Result<Vec<f64>, ConfigError> {
    let v = floats(e)?;
    if v.is_empty() || v.iter().any(|x| *x <= 0.0) {
        return Err(ConfigError::new(e.line, e.col, format!("'{}' needs positive entries", e.key)));
    }
    Ok(v)
}

fn window(e: &Entry) -> Result<(f64, f64), ConfigError> {
    match floats(e)?[..] {
        [lo, hi] if lo <= hi => Ok((lo, hi)),
        _ => Err(ConfigError::new(e.line, e.col, format!("'{}' needs 'low, high'", e.key))),
    }
}

/// Unknown keys are errors under `strict` and warnings otherwise.
fn keys(sec: &Section, allowed: &[&str], strict: bool, warnings: &mut Vec<String>) -> Result<(), ConfigError> {
    match sec.check_keys(allowed, &[]) {
        Err(e) if !strict => {
            warnings.push(e.to_string());
            Ok(())
        }
        r => r,
    }
}

fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (count - 1) as f64).exp()).collect()
}

/// Parses a run file. The model is either an inline `[model]` section or a
/// `model = PATH` entry in `[run]`, resolved against the file's directory.
pub fn load_config(path: &Path, strict: bool) -> Result<(RunConfig, Vec<String>), LocatedError> {
    let at = |err: ConfigError| LocatedError { path: path.display().to_string(), err };
    let text = std::fs::read_to_string(path)
        .map_err(|e| at(ConfigError::new(0, 0, format!("cannot read config: {e}"))))?;
    let doc = ini::parse(&text).map_err(at)?;
    let mut warnings = Vec::new();
    for s in &doc.sections {
        if !["run", "model", "probe", "tolerance"].contains(&s.name.as_str()) {
            let e = ConfigError::new(s.line, 1, format!("unknown section [{}]", s.name));
            if strict {
                return Err(at(e));
            }
            warnings.push(e.to_string());
        }
    }
    let empty = Section { name: String::new(), line: 1, entries: Vec::new() };
    let run = doc.section("run").ok_or_else(|| at(ConfigError::new(1, 1, "missing [run] section")))?;
    let probe = doc.section("probe").unwrap_or(&empty);
    let tol_sec = doc.section("tolerance").unwrap_or(&empty);
    keys(run, RUN_KEYS, strict, &mut warnings).map_err(at)?;
    keys(probe, PROBE_KEYS, strict, &mut warnings).map_err(at)?;
    keys(tol_sec, TOL_KEYS, strict, &mut warnings).map_err(at)?;

    let (model, model_source) = match (doc.section("model"), run.get("model")) {
        (Some(_), Some(e)) => {
            return Err(at(ConfigError::new(e.line, 1, "'model' given both inline and as a path")));
        }
        (Some(sec), None) => (ModelManifold::from_section(sec).map_err(|e| at(model_error(e)))?, "inline".to_string()),
        (None, Some(e)) => {
            let file = path.parent().unwrap_or(Path::new(".")).join(&e.value);
            let text = std::fs::read_to_string(&file).map_err(|err| {
                at(ConfigError::new(e.line, e.col, format!("cannot read model file '{}': {err}", file.display())))
            })?;
            let m = ModelManifold::from_text(&text)
                .map_err(|err| LocatedError { path: file.display().to_string(), err: model_error(err) })?;
            (m, e.value.clone())
        }
        (None, None) => return Err(at(ConfigError::new(run.line, 1, "missing 'model' (path or inline [model] section)"))),
    };

    let get = |sec: &Section, key: &str| sec.get(key).cloned();
    let mut cfg = RunConfig {
        model,
        model_source,
        command: None,
        seed: 1,
        samples: 100_000,
        shells: 8,
        barrier_samples: 100_000,
        m_override: None,
        trials: 20,
        out: None,
        point: None,
        epsilon: vec![0.2, 0.1, 0.05, 0.025],
        separations: log_spaced(1e-3, 1e-1, 7),
        direction: None,
        radius: 0.15,
        points: 10,
        spread: 0.04,
        bump_radius: 0.1,
        step: 0.02,
        tol: Tolerances::default(),
    };
    let mut r = || -> Result<(), ConfigError> {
        if let Some(e) = get(run, "command") {
            cfg.command = Some(e.value.parse().map_err(|m| ConfigError::new(e.line, e.col, m))?);
        }
        if let Some(e) = get(run, "seed") {
            cfg.seed = number(&e)?;
        }
        if let Some(e) = get(run, "samples") {
            cfg.samples = positive(&e)?;
        }
        if let Some(e) = get(run, "shells") {
            cfg.shells = positive(&e)?;
        }
        if let Some(e) = get(run, "barrier_samples") {
            cfg.barrier_samples = positive(&e)?;
        }
        if let Some(e) = get(run, "m_override") {
            cfg.m_override = Some(number(&e)?);
        }
        if let Some(e) = get(run, "trials") {
            cfg.trials = positive(&e)?;
        }
        if let Some(e) = get(run, "out") {
            cfg.out = Some(path.parent().unwrap_or(Path::new(".")).join(&e.value));
        }
        let dim = 2 * cfg.model.n - cfg.model.k;
        let vector = |e: &Entry| -> Result<Vec<f64>, ConfigError> {
            let v = floats(e)?;
            if v.len() != dim {
                return Err(ConfigError::new(e.line, e.col, format!("'{}' needs {dim} chart coordinates", e.key)));
            }
            Ok(v)
        };
        if let Some(e) = get(probe, "point") {
            cfg.point = Some(vector(&e)?);
        }
        if let Some(e) = get(probe, "direction") {
            let v = vector(&e)?;
            if v.iter().all(|x| *x == 0.0) {
                return Err(ConfigError::new(e.line, e.col, "'direction' must be nonzero"));
            }
            cfg.direction = Some(v);
        }
        if let Some(e) = get(probe, "epsilon") {
            cfg.epsilon = positive_list(&e)?;
            if cfg.epsilon.len() < 4 || cfg.epsilon.windows(2).any(|w| w[1] >= w[0]) {
                return Err(ConfigError::new(e.line, e.col, "'epsilon' needs at least 4 strictly decreasing radii"));
            }
        }
        if let Some(e) = get(probe, "separations") {
            cfg.separations = positive_list(&e)?;
            if cfg.separations.len() < 2 {
                return Err(ConfigError::new(e.line, e.col, "'separations' needs at least 2 entries"));
            }
        }
        for (key, slot) in [
            ("radius", &mut cfg.radius),
            ("spread", &mut cfg.spread),
            ("bump_radius", &mut cfg.bump_radius),
            ("step", &mut cfg.step),
        ] {
            if let Some(e) = get(probe, key) {
                *slot = positive(&e)?;
            }
        }
        if let Some(e) = get(probe, "points") {
            cfg.points = positive(&e)?;
        }
        let t = &mut cfg.tol;
        if let Some(e) = get(tol_sec, "slack_floor") {
            t.slack_floor = number(&e)?;
        }
        for (key, slot) in [("r_slope", &mut t.r_slope), ("e_slope", &mut t.e_slope), ("k_slope", &mut t.k_slope)] {
            if let Some(e) = get(tol_sec, key) {
                *slot = window(&e)?;
            }
        }
        if let Some(e) = get(tol_sec, "holder_min") {
            t.holder_min = number(&e)?;
        }
        if let Some(e) = get(tol_sec, "homotopy_max") {
            t.homotopy_max = positive(&e)?;
        }
        Ok(())
    };
    r().map_err(at)?;
    Ok((cfg, warnings))
}

fn model_error(e: crkernel::barrier::ModelError) -> ConfigError {
    match e {
        crkernel::barrier::ModelError::Config(c) => c,
        crkernel::barrier::ModelError::Invalid(b) => ConfigError::new(1, 1, format!("invalid model: {b}")),
    }
}
