//! Run configuration: JSON in, validated struct out, defaults echoed back.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unknown key `{key}` at line {line}, column {column}")]
    UnknownKey { key: String, line: usize, column: usize },
    #[error("`{field}` = {value}: {requirement}")]
    Range { field: String, value: String, requirement: String },
    #[error("config is for `{config}` but `{invoked}` was invoked")]
    SubcommandMismatch { config: Subcommand, invoked: Subcommand },
}

impl ConfigError {
    pub fn kind(&self) -> &'static str {
        match self {
            ConfigError::Parse { .. } => "ParseError",
            ConfigError::UnknownKey { .. } => "UnknownKey",
            ConfigError::Range { .. } => "RangeError",
            ConfigError::SubcommandMismatch { .. } => "SubcommandMismatch",
        }
    }

    fn range(field: &str, value: impl fmt::Display, requirement: &str) -> Self {
        ConfigError::Range { field: field.into(), value: value.to_string(), requirement: requirement.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Subcommand {
    Simulate,
    Estimate,
    Poisson,
    Origami,
    Report,
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subcommand::Simulate => "simulate",
            Subcommand::Estimate => "estimate",
            Subcommand::Poisson => "poisson",
            Subcommand::Origami => "origami",
            Subcommand::Report => "report",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    Torus,
    #[serde(alias = "h2-three-square")]
    H2,
    #[serde(alias = "eierlegende-wollmilchsau")]
    Ew,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Full,
    #[default]
    Complement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Tautological {},
    /// One of `file` (relative paths resolve against the config file) or `builtin`.
    Origami {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        file: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        builtin: Option<Builtin>,
        #[serde(default)]
        part: Part,
        #[serde(default = "one")]
        k: usize,
    },
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Tautological {}
    }
}

impl ModelSpec {
    pub fn k(&self) -> usize {
        match self {
            ModelSpec::Tautological {} => 1,
            ModelSpec::Origami { k, .. } => *k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DriverSpec {
    /// Fixed `theta`, or a uniform angle per run when absent.
    Geodesic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<f64>,
    },
    Brownian {},
    BrownianStopped {},
}

impl Default for DriverSpec {
    fn default() -> Self {
        DriverSpec::Brownian {}
    }
}

/// A real number or a `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Real(f64),
    Complex([f64; 2]),
}

impl Scalar {
    pub fn to_complex(self) -> num_complex::Complex64 {
        match self {
            Scalar::Real(x) => num_complex::Complex64::new(x, 0.0),
            Scalar::Complex([re, im]) => num_complex::Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesName {
    Principal,
    Complementary,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoissonJob {
    pub series: SeriesName,
    /// Principal: `s = i·y` given as `[0, y]` or `y`; complementary: real `s`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Scalar>,
    /// Discrete series weight.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<cocycle_clt::Side>,
    pub c: f64,
    #[serde(rename = "K")]
    pub k_max: i64,
    /// Basis index -> coefficient.
    pub rhs: BTreeMap<String, Scalar>,
    #[serde(default)]
    pub doubling: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcommand: Option<Subcommand>,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub driver: DriverSpec,
    #[serde(default = "d_n")]
    pub n: usize,
    #[serde(default = "d_t")]
    pub t: f64,
    #[serde(default = "d_dt")]
    pub dt: f64,
    #[serde(default = "d_geodesic_dt")]
    pub geodesic_dt: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_burn_in")]
    pub burn_in: f64,
    #[serde(default = "d_burn_in_dt")]
    pub burn_in_dt: f64,
    #[serde(default = "d_max_horizon_factor")]
    pub max_horizon_factor: f64,
    /// Reference exponent; calibrated on a long geodesic when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default = "d_calibration_t")]
    pub calibration_t: f64,
    #[serde(default = "d_resamples")]
    pub resamples: usize,
    /// Output spacing of `simulate` series, in time units.
    #[serde(default = "d_sample_every")]
    pub sample_every: f64,
    /// Horizon of the Lyapunov spectrum reported by `origami`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum_t: Option<f64>,
    /// Samples CSV read by `report`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poisson: Option<PoissonJob>,
}

fn one() -> usize {
    1
}
fn d_n() -> usize {
    1000
}
fn d_t() -> f64 {
    50.0
}
fn d_dt() -> f64 {
    cocycle_clt::brownian::DEFAULT_DT
}
fn d_geodesic_dt() -> f64 {
    0.05
}
fn d_burn_in() -> f64 {
    200.0
}
fn d_burn_in_dt() -> f64 {
    0.01
}
fn d_max_horizon_factor() -> f64 {
    4.0
}
fn d_calibration_t() -> f64 {
    1000.0
}
fn d_resamples() -> usize {
    cocycle_clt::clt::BOOTSTRAP_RESAMPLES
}
fn d_sample_every() -> f64 {
    1.0
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config("{}").expect("empty config is valid")
    }
}

/// Parse and validate a JSON config.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(classify)?;
    cfg.validate()?;
    Ok(cfg)
}

fn classify(e: serde_json::Error) -> ConfigError {
    let (line, column) = (e.line(), e.column());
    let msg = e.to_string();
    if let Some(rest) = msg.strip_prefix("unknown field `") {
        if let Some(end) = rest.find('`') {
            return ConfigError::UnknownKey { key: rest[..end].to_string(), line, column };
        }
    }
    // serde_json appends " at line L column C"; the fields carry that already
    let message = match msg.rfind(" at line ") {
        Some(p) => msg[..p].to_string(),
        None => msg,
    };
    ConfigError::Parse { line, column, message }
}

fn positive(field: &str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::range(field, x, "must be positive and finite"))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n == 0 {
            return Err(ConfigError::range("n", self.n, "must be at least 1"));
        }
        positive("t", self.t)?;
        positive("dt", self.dt)?;
        if self.dt > self.t {
            return Err(ConfigError::range("dt", self.dt, "must not exceed t"));
        }
        positive("geodesic_dt", self.geodesic_dt)?;
        if !(self.burn_in >= 0.0 && self.burn_in.is_finite()) {
            return Err(ConfigError::range("burn_in", self.burn_in, "must be non-negative and finite"));
        }
        positive("burn_in_dt", self.burn_in_dt)?;
        if !(self.max_horizon_factor >= 1.0 && self.max_horizon_factor.is_finite()) {
            return Err(ConfigError::range("max_horizon_factor", self.max_horizon_factor, "must be at least 1"));
        }
        if let Some(l) = self.lambda {
            if !l.is_finite() {
                return Err(ConfigError::range("lambda", l, "must be finite"));
            }
        }
        if !(self.calibration_t >= 1000.0 && self.calibration_t.is_finite()) {
            return Err(ConfigError::range("calibration_t", self.calibration_t, "must be at least 1000"));
        }
        if self.resamples < 100 {
            return Err(ConfigError::range("resamples", self.resamples, "must be at least 100"));
        }
        positive("sample_every", self.sample_every)?;
        if let Some(h) = self.spectrum_t {
            positive("spectrum_t", h)?;
        }
        if let ModelSpec::Origami { file, builtin, k, .. } = &self.model {
            if file.is_some() == builtin.is_some() {
                return Err(ConfigError::range("model", "origami", "give exactly one of `file` and `builtin`"));
            }
            if *k == 0 {
                return Err(ConfigError::range("model.k", k, "must be at least 1"));
            }
        }
        if let DriverSpec::Geodesic { theta: Some(th) } = self.driver {
            if !th.is_finite() {
                return Err(ConfigError::range("driver.theta", th, "must be finite"));
            }
        }
        if let Some(job) = &self.poisson {
            job.validate()?;
        }
        Ok(())
    }
}

impl PoissonJob {
    fn validate(&self) -> Result<(), ConfigError> {
        if !(self.c >= 1.0 && self.c.is_finite()) {
            return Err(ConfigError::range("poisson.c", self.c, "must be at least 1"));
        }
        if self.k_max < 4 {
            return Err(ConfigError::range("poisson.K", self.k_max, "must be at least 4"));
        }
        for key in self.rhs.keys() {
            if key.trim().parse::<i64>().is_err() {
                return Err(ConfigError::range("poisson.rhs", format!("{key:?}"), "keys must be integers"));
            }
        }
        match self.series {
            SeriesName::Discrete => match self.n {
                Some(n) if n >= 1 => Ok(()),
                _ => Err(ConfigError::range("poisson.n", format!("{:?}", self.n), "discrete series needs n >= 1")),
            },
            _ if self.s.is_none() => Err(ConfigError::range("poisson.s", "null", "required for this series")),
            _ => Ok(()),
        }
    }

    pub fn params(&self) -> cocycle_clt::RepresentationParams {
        use cocycle_clt::RepresentationParams as P;
        match self.series {
            SeriesName::Principal => match self.s.expect("validated") {
                Scalar::Real(y) => P::principal(y),
                Scalar::Complex([re, im]) => P {
                    series: cocycle_clt::Series::Principal,
                    s: num_complex::Complex64::new(re, im),
                },
            },
            SeriesName::Complementary => match self.s.expect("validated") {
                Scalar::Real(s) => P::complementary(s),
                Scalar::Complex([re, im]) => P {
                    series: cocycle_clt::Series::Complementary,
                    s: num_complex::Complex64::new(re, im),
                },
            },
            SeriesName::Discrete => {
                P::discrete(self.n.expect("validated"), self.side.unwrap_or(cocycle_clt::Side::Upper))
            }
        }
    }

    pub fn rhs_map(&self) -> BTreeMap<i64, num_complex::Complex64> {
        self.rhs.iter().map(|(k, v)| (k.trim().parse().expect("validated"), v.to_complex())).collect()
    }
}
