//! Flat `key = value` configuration with dotted keys.
//!
//! Every key has a built-in default; a preset file and then `KEY=VALUE`
//! overrides are layered on top. The resolved table, rendered by
//! [`Resolved::to_text`], is what run manifests record, so replaying a run
//! only needs that text.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use ris_core::design::{DesignConfig, Provenance};
use ris_core::experiment::{Placement, SceneSpec};
use ris_core::geometry::RadioConstants;
use ris_core::recovery::{RecoveryConfig, Regularization};
use ris_core::{Cx, Point};

use crate::error::ImagerError;

/// `(key, default, description)`.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("tx", "0.2, 0.1, 0.1", "transmitter position [m]"),
    ("rx", "0.0, 0.7, 0.0", "receiver position [m]"),
    ("ris.rows", "20", "RIS rows (along z)"),
    ("ris.cols", "20", "RIS columns (along y)"),
    ("ris.spacing", "0.0075", "RIS element pitch [m]"),
    ("ris.origin", "0.0, 0.0, 0.0", "RIS corner element [m]"),
    ("grid.range_points", "10", "pixels along x"),
    ("grid.crossrange_points", "10", "pixels along y"),
    ("grid.spacing", "0.6", "pixel pitch [m]"),
    ("grid.origin", "2.0, 0.0, 0.0", "first pixel [m]"),
    ("radio.fc", "1e10", "carrier frequency [Hz]"),
    ("radio.c", "3e8", "propagation speed [m/s]"),
    ("radio.eta", "1.0", "power efficiency in (0, 1]"),
    ("radio.pulse_spectrum", "1.0, 0.0", "pulse spectrum at the carrier (re, im)"),
    ("noise.sigma", "0.01", "complex noise standard deviation"),
    ("targets.kind", "points", "points | t_shape"),
    ("targets.positions", "5.6, 0.6, 0.0; 9.2, 2.4, 0.0; 6.2, 4.8, 0.0", "point targets [m], ';' separated"),
    ("targets.amplitudes", "", "complex amplitudes 're, im; ...' (empty: all 1)"),
    ("targets.placement", "nearest", "nearest | exact"),
    ("design.phase_source", "designed", "designed | dft | random"),
    ("design.n_pulses", "12", "pulses N for design/simulate"),
    ("design.step_size_rho", "0.01", "gradient step"),
    ("design.max_iter", "1000", "gradient iterations"),
    ("design.seed", "0", "seed of the random initial phases"),
    ("design.objective_tolerance", "0.0", "relative objective change that stops early (0: off)"),
    ("design.normalize_gradient", "false", "scale the step by 1/|gradient|"),
    ("recovery.lambda_rule", "relative", "relative (lambda * max|D^H y|) | fixed"),
    ("recovery.regularization_lambda", "0.1", "l1 weight or factor"),
    ("recovery.max_iterations", "5000", "solver iteration cap"),
    ("recovery.convergence_tol", "1e-10", "relative objective decrease that counts as converged"),
    ("recovery.sparsity_T", "auto", "support size (auto: number of targets)"),
    ("experiment.phase_sources", "designed, dft", "phase sources compared in a sweep"),
    ("experiment.n_pulses_list", "4, 8, 12, 16, 20, 24", "pulse counts N of a sweep"),
    ("experiment.ris_sizes", "", "RIS sizes 'RxC, ...' of a sweep (empty: ris.rows x ris.cols)"),
    ("experiment.num_realizations", "100", "noise realizations per cell"),
    ("experiment.master_seed", "1", "root of all derived seeds"),
];

/// Problems with configuration text or values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    Syntax { line: usize, message: String },
    UnknownKeys(Vec<String>),
    AmbiguousKey { key: String, candidates: Vec<String> },
    Invalid { key: String, value: String, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax { line, message } => write!(f, "line {line}: {message}"),
            ConfigError::UnknownKeys(keys) => write!(f, "unknown keys: {}", keys.join(", ")),
            ConfigError::AmbiguousKey { key, candidates } => {
                write!(f, "key '{key}' is ambiguous ({})", candidates.join(", "))
            }
            ConfigError::Invalid { key, value, message } => {
                write!(f, "invalid value '{value}' for {key}: {message}")
            }
        }
    }
}

impl std::error::Error for ConfigError {}

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            message: format!("expected 'key = value', got '{line}'"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1, message: "empty key".into() });
        }
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Maps a possibly abbreviated key to its full dotted name. A key without a
/// dot may name the last segment of exactly one known key.
pub fn resolve_key(key: &str) -> Result<&'static str, ConfigError> {
    if let Some((k, _, _)) = KEYS.iter().find(|(k, _, _)| *k == key) {
        return Ok(k);
    }
    if !key.contains('.') {
        let hits: Vec<&'static str> = KEYS
            .iter()
            .map(|(k, _, _)| *k)
            .filter(|k| k.rsplit('.').next() == Some(key))
            .collect();
        match hits.len() {
            1 => return Ok(hits[0]),
            0 => {}
            _ => {
                return Err(ConfigError::AmbiguousKey {
                    key: key.into(),
                    candidates: hits.iter().map(|s| s.to_string()).collect(),
                })
            }
        }
    }
    Err(ConfigError::UnknownKeys(vec![key.to_string()]))
}

/// Fully resolved key table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolved {
    values: BTreeMap<&'static str, String>,
}

impl Default for Resolved {
    fn default() -> Self {
        Self {
            values: KEYS.iter().map(|(k, v, _)| (*k, v.to_string())).collect(),
        }
    }
}

impl Resolved {
    /// Defaults, then `entries`, then `overrides`. Every unknown key across
    /// both layers is reported at once.
    pub fn layered(entries: &[(String, String)], overrides: &[String]) -> Result<Self, ConfigError> {
        let mut pairs: Vec<(String, String)> = entries.to_vec();
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: 0,
                message: format!("override '{o}' is not KEY=VALUE"),
            })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut resolved = Self::default();
        let mut unknown = Vec::new();
        for (k, v) in pairs {
            match resolve_key(&k) {
                Ok(full) => {
                    resolved.values.insert(full, v);
                }
                Err(ConfigError::UnknownKeys(mut keys)) => unknown.append(&mut keys),
                Err(e) => return Err(e),
            }
        }
        if !unknown.is_empty() {
            unknown.sort();
            unknown.dedup();
            return Err(ConfigError::UnknownKeys(unknown));
        }
        Ok(resolved)
    }

    pub fn from_text(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        Self::layered(&parse(text)?, overrides)
    }

    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("'{key}' is not a configuration key"))
    }

    /// Canonical text: one `key = value` line per key, sorted by key.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    fn invalid(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            key: key.into(),
            value: self.get(key).into(),
            message: message.into(),
        }
    }

    fn number<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.get(key).parse().map_err(|e: T::Err| self.invalid(key, e.to_string()))
    }

    fn floats(&self, key: &str, text: &str) -> Result<Vec<f64>, ConfigError> {
        text.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| self.invalid(key, e.to_string())))
            .collect()
    }

    fn point_in(&self, key: &str, text: &str) -> Result<Point, ConfigError> {
        match self.floats(key, text)?.as_slice() {
            [x, y, z] => Ok(Point::new(*x, *y, *z)),
            _ => Err(self.invalid(key, "expected three comma-separated numbers")),
        }
    }

    fn point(&self, key: &str) -> Result<Point, ConfigError> {
        self.point_in(key, self.get(key))
    }

    fn complex_in(&self, key: &str, text: &str) -> Result<Cx, ConfigError> {
        match self.floats(key, text)?.as_slice() {
            [re] => Ok(Cx::new(*re, 0.0)),
            [re, im] => Ok(Cx::new(*re, *im)),
            _ => Err(self.invalid(key, "expected 're' or 're, im'")),
        }
    }

    fn list<'a>(&'a self, key: &str, sep: char) -> impl Iterator<Item = &'a str> {
        self.get(key).split(sep).map(str::trim).filter(|s| !s.is_empty())
    }

    fn boolean(&self, key: &str) -> Result<bool, ConfigError> {
        match self.get(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(self.invalid(key, "expected true or false")),
        }
    }

    fn provenance(&self, key: &str, text: &str) -> Result<Provenance, ConfigError> {
        text.parse().map_err(|_| self.invalid(key, "expected designed, dft or random"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Points,
    TShape,
}

impl TargetKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TargetKind::Points => "points",
            TargetKind::TShape => "t_shape",
        }
    }
}

/// Typed view of a [`Resolved`] table.
#[derive(Debug, Clone)]
pub struct ImagerConfig {
    pub scene: SceneSpec,
    pub sigma: f64,
    pub target_kind: TargetKind,
    pub target_positions: Vec<Point>,
    pub target_amplitudes: Vec<Cx>,
    pub placement: Placement,
    pub phase_source: Provenance,
    pub n_pulses: usize,
    pub design: DesignConfig,
    pub recovery: RecoveryConfig,
    pub sparsity: Option<usize>,
    pub phase_sources: Vec<Provenance>,
    pub n_pulses_list: Vec<usize>,
    pub ris_sizes: Vec<(usize, usize)>,
    pub num_realizations: usize,
    pub master_seed: u64,
}

impl ImagerConfig {
    pub fn from_resolved(r: &Resolved) -> Result<Self, ConfigError> {
        let constants = RadioConstants::new(
            r.number("radio.fc")?,
            r.number("radio.c")?,
            r.number("radio.eta")?,
            r.complex_in("radio.pulse_spectrum", r.get("radio.pulse_spectrum"))?,
        )
        .map_err(|e| r.invalid("radio.fc", e.to_string()))?;
        let scene = SceneSpec {
            tx: r.point("tx")?,
            rx: r.point("rx")?,
            ris_rows: r.number("ris.rows")?,
            ris_cols: r.number("ris.cols")?,
            ris_spacing_m: r.number("ris.spacing")?,
            ris_origin: r.point("ris.origin")?,
            grid_range_points: r.number("grid.range_points")?,
            grid_crossrange_points: r.number("grid.crossrange_points")?,
            grid_spacing_m: r.number("grid.spacing")?,
            grid_origin: r.point("grid.origin")?,
            constants,
        };

        let sigma: f64 = r.number("noise.sigma")?;
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(r.invalid("noise.sigma", "must be finite and nonnegative"));
        }

        let target_kind = match r.get("targets.kind") {
            "points" => TargetKind::Points,
            "t_shape" => TargetKind::TShape,
            _ => return Err(r.invalid("targets.kind", "expected points or t_shape")),
        };
        let target_positions = r
            .list("targets.positions", ';')
            .map(|p| r.point_in("targets.positions", p))
            .collect::<Result<Vec<_>, _>>()?;
        let mut target_amplitudes = r
            .list("targets.amplitudes", ';')
            .map(|a| r.complex_in("targets.amplitudes", a))
            .collect::<Result<Vec<_>, _>>()?;
        if target_amplitudes.is_empty() {
            target_amplitudes = vec![Cx::new(1.0, 0.0); target_positions.len()];
        } else if target_amplitudes.len() != target_positions.len() {
            return Err(r.invalid(
                "targets.amplitudes",
                format!("{} amplitudes for {} positions", target_amplitudes.len(), target_positions.len()),
            ));
        }
        let placement = match r.get("targets.placement") {
            "nearest" => Placement::Nearest,
            "exact" => Placement::Exact,
            _ => return Err(r.invalid("targets.placement", "expected nearest or exact")),
        };

        let design = DesignConfig {
            step_size: r.number("design.step_size_rho")?,
            max_iter: r.number("design.max_iter")?,
            seed: r.number("design.seed")?,
            objective_tolerance: r.number("design.objective_tolerance")?,
            normalize_gradient: r.boolean("design.normalize_gradient")?,
        };
        design.validate().map_err(|e| r.invalid("design.step_size_rho", e.to_string()))?;

        let lambda: f64 = r.number("recovery.regularization_lambda")?;
        let regularization = match r.get("recovery.lambda_rule") {
            "relative" => Regularization::Relative(lambda),
            "fixed" => Regularization::Fixed(lambda),
            _ => return Err(r.invalid("recovery.lambda_rule", "expected relative or fixed")),
        };
        let sparsity = match r.get("recovery.sparsity_T") {
            "auto" => None,
            _ => Some(r.number("recovery.sparsity_T")?),
        };
        let recovery = RecoveryConfig {
            regularization,
            max_iterations: r.number("recovery.max_iterations")?,
            convergence_tol: r.number("recovery.convergence_tol")?,
            sparsity,
        };

        let phase_sources = r
            .list("experiment.phase_sources", ',')
            .map(|s| r.provenance("experiment.phase_sources", s))
            .collect::<Result<Vec<_>, _>>()?;
        let n_pulses_list = r
            .list("experiment.n_pulses_list", ',')
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|e| r.invalid("experiment.n_pulses_list", e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if n_pulses_list.contains(&0) {
            return Err(r.invalid("experiment.n_pulses_list", "pulse counts must be at least 1"));
        }
        let mut ris_sizes = r
            .list("experiment.ris_sizes", ',')
            .map(|s| {
                let parsed = s
                    .split_once(['x', 'X'])
                    .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
                parsed.ok_or_else(|| r.invalid("experiment.ris_sizes", format!("'{s}' is not RxC")))
            })
            .collect::<Result<Vec<(usize, usize)>, _>>()?;
        if ris_sizes.is_empty() {
            ris_sizes.push((scene.ris_rows, scene.ris_cols));
        }

        let num_realizations = r.number("experiment.num_realizations")?;
        if num_realizations == 0 {
            return Err(r.invalid("experiment.num_realizations", "must be at least 1"));
        }

        Ok(Self {
            scene,
            sigma,
            target_kind,
            target_positions,
            target_amplitudes,
            placement,
            phase_source: r.provenance("design.phase_source", r.get("design.phase_source"))?,
            n_pulses: r.number("design.n_pulses")?,
            design,
            recovery,
            sparsity,
            phase_sources,
            n_pulses_list,
            ris_sizes,
            num_realizations,
            master_seed: r.number("experiment.master_seed")?,
        })
    }
}

/// A configuration file, or the `resolved_config` of a run manifest, plus
/// overrides.
pub fn load(path: &Path, overrides: &[String]) -> Result<Resolved, ImagerError> {
    let text = std::fs::read_to_string(path).map_err(|e| ImagerError::io(path, e))?;
    let wrap = |e: ConfigError| ImagerError::Config {
        path: path.display().to_string(),
        source: e,
    };
    if path.extension().is_some_and(|e| e == "json") {
        let manifest: crate::manifest::Manifest =
            serde_json::from_str(&text).map_err(|e| ImagerError::format(path, e.to_string()))?;
        return Resolved::from_text(&manifest.resolved_config, overrides).map_err(wrap);
    }
    Resolved::from_text(&text, overrides).map_err(wrap)
}
