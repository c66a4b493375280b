//! Flat `key = value` experiment configuration.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use curvlab::cones::{ConeId, FrameSearchOptions, Lemma};
use curvlab::torus::MIN_RESOLUTION;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("invalid value {value:?} for {key}: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read {path}: {reason}")]
    Read { path: String, reason: String },
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    ConeAudit,
    ConditionStar,
    Tangency,
    OdeInvariance,
    HeatEstimates,
    Deturck,
    Norms,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Kind::ConeAudit,
        Kind::ConditionStar,
        Kind::Tangency,
        Kind::OdeInvariance,
        Kind::HeatEstimates,
        Kind::Deturck,
        Kind::Norms,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::ConeAudit => "cone-audit",
            Kind::ConditionStar => "condition-star",
            Kind::Tangency => "tangency",
            Kind::OdeInvariance => "ode-invariance",
            Kind::HeatEstimates => "heat-estimates",
            Kind::Deturck => "deturck",
            Kind::Norms => "norms",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SnapshotFormat {
    None,
    Csv,
    Raw,
}

impl FromStr for SnapshotFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(Self::None),
            "csv" => Ok(Self::Csv),
            "raw" => Ok(Self::Raw),
            _ => Err("expected none, csv or raw".into()),
        }
    }
}

/// Every tunable of every experiment. Keys not used by `kind` are still
/// carried so that a rendered config can be fed back verbatim.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Kind,
    pub seed: u64,
    pub n: usize,
    pub cone: ConeId,
    pub lemma: Lemma,
    pub trials: usize,
    /// Random descents per frame minimization.
    pub restarts: usize,
    /// Lattice frames used as extra descent starts.
    pub lattice_starts: usize,
    /// Diagonal samples per dimension for the wedge lemma's exact check.
    pub diagonal_trials: usize,
    pub horizon: f64,
    /// Initial cone margin of `L(0)` for ODE runs.
    pub margin: f64,
    pub u: Vec<f64>,
    pub rtol: f64,
    pub atol: f64,
    pub blowup_norm: f64,
    /// Relative margin and split-consistency tolerance for ODE runs.
    pub tolerance: f64,
    pub d: usize,
    pub resolution: usize,
    pub fields: usize,
    /// Fields (from the start of the random batch) that also get the Hessian
    /// and Hölder checks.
    pub deep_fields: usize,
    pub max_mode: usize,
    pub steps: usize,
    pub alpha: f64,
    pub beta: f64,
    pub amplitude: f64,
    pub fixed_point_tol: f64,
    pub max_iters: usize,
    pub steps_per_unit: usize,
    pub residual_tol: f64,
    pub k_max: usize,
    pub snapshots: SnapshotFormat,
}

impl ExperimentConfig {
    pub fn defaults(kind: Kind) -> Self {
        let mut c = Self {
            experiment: kind,
            seed: 0,
            n: 5,
            cone: ConeId::Nnic,
            lemma: Lemma::Ric4Nonneg,
            trials: 100,
            restarts: FrameSearchOptions::audit().restarts,
            lattice_starts: FrameSearchOptions::audit().lattice_starts,
            diagonal_trials: 100,
            horizon: 1.0,
            margin: 0.5,
            u: vec![0.0, 0.5, 2.0],
            rtol: 1e-9,
            atol: 1e-12,
            blowup_norm: 1e4,
            tolerance: 1e-6,
            d: 2,
            resolution: 16,
            fields: 50,
            deep_fields: 10,
            max_mode: 8,
            steps: 200,
            alpha: 0.6,
            beta: 0.25,
            amplitude: 0.02,
            fixed_point_tol: 1e-8,
            max_iters: 30,
            steps_per_unit: 512,
            residual_tol: 1e-6,
            k_max: 2,
            snapshots: SnapshotFormat::None,
        };
        match kind {
            Kind::ConeAudit => c.trials = 1000,
            Kind::ConditionStar => c.trials = 500,
            Kind::Tangency => c.trials = 200,
            Kind::OdeInvariance => c.horizon = 0.05,
            Kind::HeatEstimates => c.resolution = 64,
            Kind::Deturck | Kind::Norms => {}
        }
        c
    }

    pub fn search(&self) -> FrameSearchOptions {
        FrameSearchOptions {
            restarts: self.restarts,
            lattice_starts: self.lattice_starts,
            ..FrameSearchOptions::default()
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: fmt::Display,
        {
            value.parse::<T>().map_err(|e| ConfigError::Value {
                key: key.into(),
                value: value.into(),
                reason: e.to_string(),
            })
        }
        let v = value.trim();
        match key.trim().replace('-', "_").as_str() {
            "experiment" => self.experiment = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "n" => self.n = parse(key, v)?,
            "cone" => self.cone = parse(key, v)?,
            "lemma" => self.lemma = parse(key, v)?,
            "trials" => self.trials = parse(key, v)?,
            "restarts" => self.restarts = parse(key, v)?,
            "lattice_starts" => self.lattice_starts = parse(key, v)?,
            "diagonal_trials" => self.diagonal_trials = parse(key, v)?,
            "horizon" => self.horizon = parse(key, v)?,
            "margin" => self.margin = parse(key, v)?,
            "u" => {
                self.u = v
                    .split(',')
                    .map(|s| parse::<f64>(key, s.trim()))
                    .collect::<Result<_>>()?
            }
            "rtol" => self.rtol = parse(key, v)?,
            "atol" => self.atol = parse(key, v)?,
            "blowup_norm" => self.blowup_norm = parse(key, v)?,
            "tolerance" => self.tolerance = parse(key, v)?,
            "d" => self.d = parse(key, v)?,
            "resolution" => self.resolution = parse(key, v)?,
            "fields" => self.fields = parse(key, v)?,
            "deep_fields" => self.deep_fields = parse(key, v)?,
            "max_mode" => self.max_mode = parse(key, v)?,
            "steps" => self.steps = parse(key, v)?,
            "alpha" => self.alpha = parse(key, v)?,
            "beta" => self.beta = parse(key, v)?,
            "amplitude" => self.amplitude = parse(key, v)?,
            "fixed_point_tol" => self.fixed_point_tol = parse(key, v)?,
            "max_iters" => self.max_iters = parse(key, v)?,
            "steps_per_unit" => self.steps_per_unit = parse(key, v)?,
            "residual_tol" => self.residual_tol = parse(key, v)?,
            "k_max" => self.k_max = parse(key, v)?,
            "snapshots" => self.snapshots = parse(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: raw.into(),
                });
            };
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        self.apply_text(&text)
    }

    /// Canonical `key = value` rendering; parsing it back gives `self`.
    pub fn render(&self) -> String {
        let v = self.to_value();
        let mut out = String::new();
        for (k, val) in v.as_object().expect("struct") {
            let text = match val {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Array(a) => a.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
                other => other.to_string(),
            };
            out.push_str(&format!("{k} = {text}\n"));
        }
        out
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Hash recorded in reports.
    pub fn hash(&self) -> String {
        crate::report::hash_value(&self.to_value())
    }

    /// Checks every parameter the selected experiment reads.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!("{name} must be positive and finite, got {x}")))
            }
        };
        match self.experiment {
            Kind::ConeAudit | Kind::ConditionStar | Kind::Tangency | Kind::OdeInvariance => {
                if !(4..=8).contains(&self.n) {
                    return bad(format!("n must lie in 4..=8, got {}", self.n));
                }
                if self.trials == 0 {
                    return bad("trials must be ≥ 1".into());
                }
                if self.restarts + self.lattice_starts == 0 {
                    return bad("frame search needs at least one start".into());
                }
            }
            _ => {
                if !(1..=3).contains(&self.d) {
                    return bad(format!("d must be 1, 2 or 3, got {}", self.d));
                }
                if self.resolution < MIN_RESOLUTION || !self.resolution.is_power_of_two() {
                    return bad(format!("resolution must be a power of two ≥ {MIN_RESOLUTION}"));
                }
                positive("horizon", self.horizon)?;
            }
        }
        match self.experiment {
            Kind::ConeAudit => {
                if self.lemma == Lemma::Ric4Nonneg && self.cone != ConeId::Nnic {
                    return bad("the Ricci lemma is stated for NNIC only".into());
                }
            }
            Kind::ConditionStar | Kind::Tangency => {}
            Kind::OdeInvariance => {
                if !(self.margin >= 0.0) {
                    return bad(format!(
                        "initial margin must be ≥ 0 (start inside the cone), got {}",
                        self.margin
                    ));
                }
                if self.u.is_empty() || self.u.iter().any(|&u| !(u >= 0.0)) {
                    return bad("u must be a non-empty list of values ≥ 0".into());
                }
                positive("horizon", self.horizon)?;
                positive("rtol", self.rtol)?;
                positive("atol", self.atol)?;
                positive("blowup_norm", self.blowup_norm)?;
                positive("tolerance", self.tolerance)?;
            }
            Kind::HeatEstimates => {
                if self.fields == 0 || self.steps == 0 {
                    return bad("fields and steps must be ≥ 1".into());
                }
                if self.max_mode == 0 || 3 * self.max_mode > self.resolution {
                    return bad(format!(
                        "max_mode must lie in 1..={} at resolution {}",
                        self.resolution / 3,
                        self.resolution
                    ));
                }
                if !(self.alpha > 0.5 && self.alpha < 1.0) {
                    return bad(format!("alpha must lie in (1/2, 1), got {}", self.alpha));
                }
                if !(self.beta > 0.0 && self.beta < 0.5) {
                    return bad(format!("beta must lie in (0, 1/2), got {}", self.beta));
                }
            }
            Kind::Deturck | Kind::Norms => {
                if self.d < 2 && self.experiment == Kind::Deturck {
                    return bad("the DeTurck experiment needs d ≥ 2".into());
                }
                if !(self.amplitude.abs() <= 0.05) {
                    return bad(format!("amplitude must satisfy |a| ≤ 0.05, got {}", self.amplitude));
                }
                positive("fixed_point_tol", self.fixed_point_tol)?;
                positive("residual_tol", self.residual_tol)?;
                if self.max_iters == 0 || self.steps_per_unit == 0 || self.k_max == 0 {
                    return bad("max_iters, steps_per_unit and k_max must be ≥ 1".into());
                }
                if !(self.beta > 0.0 && self.beta < 0.5) {
                    return bad(format!("beta must lie in (0, 1/2), got {}", self.beta));
                }
            }
        }
        Ok(())
    }
}
