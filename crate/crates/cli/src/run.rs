//! Subcommand execution and artifacts.

use crate::config::{Builtin, ConfigError, DriverSpec, ModelSpec, Part, RunConfig, Subcommand};
use cocycle_clt::clt::{self, DriverTag, VarianceReport};
use cocycle_clt::cocycle::{burn_in, random_frame, sigma_series, Driver};
use cocycle_clt::multilinear::{lyapunov_spectrum, SpectrumConfig};
use cocycle_clt::{
    intlin, monodromy, origami, rng, spectral, CocycleError, MatrixModel, Model, MonodromyRep,
    MultilinearError, OrigamiError, OrigamiFile, PermPair, SampleOptions, SpectralError,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
const GROUP_LIMIT: usize = 200_000;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}, line {line}: {message}")]
    Samples { path: PathBuf, line: usize, message: String },
    #[error(transparent)]
    Origami(#[from] OrigamiError),
    #[error(transparent)]
    Cocycle(#[from] CocycleError),
    #[error(transparent)]
    Multilinear(#[from] MultilinearError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    /// Machine-readable form written to `error.json` and stderr.
    pub fn to_json(&self) -> Value {
        let mut detail = match self {
            CliError::Config(e) => {
                let mut v = json!({ "kind": e.kind() });
                match e {
                    ConfigError::Parse { line, column, .. } => {
                        v["line"] = json!(line);
                        v["column"] = json!(column);
                    }
                    ConfigError::UnknownKey { key, line, column } => {
                        v["key"] = json!(key);
                        v["line"] = json!(line);
                        v["column"] = json!(column);
                    }
                    ConfigError::Range { field, value, .. } => {
                        v["field"] = json!(field);
                        v["value"] = json!(value);
                    }
                    ConfigError::SubcommandMismatch { .. } => {}
                }
                v
            }
            CliError::Io { path, .. } => json!({ "kind": "IoError", "path": path }),
            CliError::Samples { path, line, .. } => json!({ "kind": "SamplesError", "path": path, "line": line }),
            CliError::Origami(_) => json!({ "kind": "OrigamiError" }),
            CliError::Cocycle(_) => json!({ "kind": "CocycleError" }),
            CliError::Multilinear(_) => json!({ "kind": "MultilinearError" }),
            CliError::Spectral(_) => json!({ "kind": "SpectralError" }),
            CliError::Usage(_) => json!({ "kind": "UsageError" }),
        };
        detail["message"] = json!(self.to_string());
        json!({ "error": detail })
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io { path: path.to_path_buf(), message: e.to_string() }
}

/// One fully resolved invocation.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub subcommand: Subcommand,
    pub config: RunConfig,
    /// Directory relative paths in the config resolve against.
    pub base_dir: PathBuf,
    pub out: PathBuf,
    pub threads: Option<usize>,
}

impl Invocation {
    /// Merge a parsed config with command-line overrides.
    pub fn new(
        subcommand: Subcommand,
        mut config: RunConfig,
        base_dir: PathBuf,
        out: Option<PathBuf>,
        seed: Option<u64>,
        threads: Option<usize>,
    ) -> Result<Self, CliError> {
        if let Some(c) = config.subcommand {
            if c != subcommand {
                return Err(ConfigError::SubcommandMismatch { config: c, invoked: subcommand }.into());
            }
        }
        config.subcommand = Some(subcommand);
        if let Some(s) = seed {
            config.seed = s;
        }
        if threads == Some(0) {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        let out = out
            .or_else(|| config.out.as_ref().map(|p| base_dir.join(p)))
            .unwrap_or_else(|| PathBuf::from("cclt-out"));
        Ok(Self { subcommand, config, base_dir, out, threads })
    }
}

/// Files written by a successful run, manifest last.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub artifacts: Vec<PathBuf>,
}

pub fn run(inv: &Invocation) -> Result<Outcome, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = inv.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Usage(e.to_string()))?;
    fs::create_dir_all(&inv.out).map_err(|e| io_err(&inv.out, e))?;
    let files = pool.install(|| match inv.subcommand {
        Subcommand::Simulate => simulate(inv),
        Subcommand::Estimate => estimate(inv),
        Subcommand::Poisson => poisson(inv),
        Subcommand::Origami => origami_summary(inv),
        Subcommand::Report => report(inv),
    })?;
    let mut artifacts: Vec<PathBuf> = files.iter().map(|f| inv.out.join(f)).collect();
    artifacts.push(write_manifest(inv, &files)?);
    Ok(Outcome { artifacts })
}

/// Write the error JSON next to the other artifacts, best effort.
pub fn write_error(out: &Path, err: &CliError) {
    if fs::create_dir_all(out).is_ok() {
        let _ = fs::write(out.join("error.json"), pretty(&err.to_json()));
    }
}

fn pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex(&Sha256::digest(data))
}

/// The config as echoed into metadata: defaults filled, output location dropped.
pub fn echoed_config(cfg: &RunConfig) -> RunConfig {
    RunConfig { out: None, ..cfg.clone() }
}

fn write_file(inv: &Invocation, name: &str, contents: &str) -> Result<String, CliError> {
    let path = inv.out.join(name);
    fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
    Ok(name.to_string())
}

fn write_manifest(inv: &Invocation, files: &[String]) -> Result<PathBuf, CliError> {
    let echo = echoed_config(&inv.config);
    let canonical = serde_json::to_string(&echo).expect("serializable");
    let mut artifacts = Vec::new();
    for f in files {
        let path = inv.out.join(f);
        let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
        artifacts.push(json!({ "file": f, "sha256": sha256_hex(&bytes) }));
    }
    let manifest = json!({
        "version": VERSION,
        "subcommand": inv.subcommand,
        "seed": inv.config.seed,
        "config_sha256": sha256_hex(canonical.as_bytes()),
        "config": echo,
        "artifacts": artifacts,
    });
    let path = inv.out.join("manifest.json");
    fs::write(&path, pretty(&manifest)).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn sample_options(cfg: &RunConfig) -> SampleOptions {
    SampleOptions {
        dt: cfg.dt,
        geodesic_dt: cfg.geodesic_dt,
        burn_in: cfg.burn_in,
        burn_in_dt: cfg.burn_in_dt,
        max_horizon_factor: cfg.max_horizon_factor,
    }
}

fn origami_perms(inv: &Invocation) -> Result<(String, PermPair), CliError> {
    let ModelSpec::Origami { file, builtin, .. } = &inv.config.model else {
        return Err(CliError::Usage("this subcommand needs an origami model".into()));
    };
    if let Some(b) = builtin {
        let (name, p) = match b {
            Builtin::Torus => ("torus", origami::torus()),
            Builtin::H2 => ("h2", origami::h2_three_square()),
            Builtin::Ew => ("ew", origami::eierlegende_wollmilchsau()),
        };
        return Ok((name.to_string(), p));
    }
    let path = inv.base_dir.join(file.as_ref().expect("validated"));
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let parsed: OrigamiFile = serde_json::from_str(&text).map_err(|e| {
        io_err(&path, format!("line {}, column {}: {e}", e.line(), e.column()))
    })?;
    let name = path.file_stem().map_or("origami".into(), |s| s.to_string_lossy().into_owned());
    Ok((name, parsed.to_perms()?))
}

/// Model, cocycle rank `k`.
fn build_model(inv: &Invocation) -> Result<(Model, usize), CliError> {
    let k = inv.config.model.k();
    let model = match &inv.config.model {
        ModelSpec::Tautological {} => Model::Tautological,
        ModelSpec::Origami { part, .. } => {
            let (name, perms) = origami_perms(inv)?;
            let rep = MonodromyRep::build(perms)?;
            match part {
                Part::Full => Model::Matrix(MatrixModel::new(format!("{name}-full"), rep)),
                Part::Complement => {
                    let c = rep.tautological_complement()?;
                    Model::Matrix(MatrixModel::new(format!("{name}-complement"), c.rep))
                }
            }
        }
    };
    if k > model.dim() {
        return Err(ConfigError::Range {
            field: "model.k".into(),
            value: k.to_string(),
            requirement: format!("must not exceed the fiber dimension {}", model.dim()),
        }
        .into());
    }
    Ok((model, k))
}

fn driver_tag(d: &DriverSpec) -> DriverTag {
    match d {
        DriverSpec::Geodesic { .. } => DriverTag::Geodesic,
        DriverSpec::Brownian {} => DriverTag::Brownian,
        DriverSpec::BrownianStopped {} => DriverTag::BrownianStopped,
    }
}

fn simulate(inv: &Invocation) -> Result<Vec<String>, CliError> {
    let cfg = &inv.config;
    let (model, k) = build_model(inv)?;
    let step_dt = match cfg.driver {
        DriverSpec::Geodesic { .. } => cfg.geodesic_dt,
        _ => cfg.dt,
    };
    let stride = ((cfg.sample_every / step_dt).round() as usize).max(1);
    let series: Vec<Vec<(f64, f64)>> = (0..cfg.n as u64)
        .into_par_iter()
        .map(|i| {
            let base = burn_in(&model, cfg.seed, i, cfg.burn_in, cfg.burn_in_dt)?;
            let frame = random_frame(model.dim(), k, cfg.seed, i);
            let driver = match cfg.driver {
                DriverSpec::Geodesic { theta } => Driver::Geodesic {
                    theta: theta.unwrap_or_else(|| rng::uniform_angle(cfg.seed, i)),
                    dt: cfg.geodesic_dt,
                },
                _ => Driver::Brownian { seed: cfg.seed, index: i, dt: cfg.dt },
            };
            sigma_series(&model, base, &driver, frame, cfg.t, stride)
        })
        .collect::<Result<_, CocycleError>>()?;
    let mut csv = header(&[
        ("kind", "sigma-series".into()),
        ("model", model.name().into()),
        ("k", k.to_string()),
        ("driver", driver_tag(&cfg.driver).as_str().into()),
        ("n", cfg.n.to_string()),
        ("t", cfg.t.to_string()),
        ("seed", cfg.seed.to_string()),
    ]);
    csv.push_str("run,time,sigma\n");
    for (i, s) in series.iter().enumerate() {
        for (time, sigma) in s {
            let _ = writeln!(csv, "{i},{time},{sigma}");
        }
    }
    Ok(vec![write_file(inv, "series.csv", &csv)?])
}

fn header(meta: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in meta {
        let _ = writeln!(s, "# {k}={v}");
    }
    s
}

#[derive(Debug, Clone, Serialize)]
struct ReportJson<'a> {
    model: &'a str,
    k: usize,
    driver: &'a str,
    n: usize,
    t: f64,
    seed: u64,
    lambda: f64,
    lambda_se: f64,
    #[serde(rename = "V")]
    v: f64,
    ci: [f64; 2],
    ks: f64,
    mean: f64,
    degenerate: bool,
    not_hit: usize,
}

struct SampleMeta {
    model: String,
    k: usize,
    driver: DriverTag,
    t: f64,
    seed: u64,
    lambda: f64,
    lambda_se: f64,
    not_hit: usize,
}

fn report_json(meta: &SampleMeta, r: &VarianceReport) -> String {
    pretty(&ReportJson {
        model: &meta.model,
        k: meta.k,
        driver: meta.driver.as_str(),
        n: r.n,
        t: meta.t,
        seed: meta.seed,
        lambda: meta.lambda,
        lambda_se: meta.lambda_se,
        v: r.v,
        ci: [r.ci.0, r.ci.1],
        ks: r.ks,
        mean: r.mean,
        degenerate: r.degenerate,
        not_hit: meta.not_hit,
    })
}

fn estimate(inv: &Invocation) -> Result<Vec<String>, CliError> {
    let cfg = &inv.config;
    if cfg.n < 2 {
        return Err(ConfigError::Range { field: "n".into(), value: cfg.n.to_string(), requirement: "estimate needs n >= 2".into() }.into());
    }
    if let DriverSpec::Geodesic { theta: Some(_) } = cfg.driver {
        return Err(ConfigError::Range {
            field: "driver.theta".into(),
            value: "fixed".into(),
            requirement: "estimate draws the angle uniformly; leave it unset".into(),
        }
        .into());
    }
    let (model, k) = build_model(inv)?;
    let opts = sample_options(cfg);
    let (lambda, lambda_se) = match cfg.lambda {
        Some(l) => (l, 0.0),
        None => {
            let c = clt::calibrate_lambda(&model, k, cfg.calibration_t, cfg.seed, &opts)?;
            (c.lambda, c.se)
        }
    };
    let driver = driver_tag(&cfg.driver);
    let samples = clt::clt_samples(&model, driver, cfg.n, cfg.t, lambda, k, cfg.seed, &opts)?;
    let report = clt::variance_estimate(&samples, cfg.resamples, cfg.seed);
    let meta = SampleMeta {
        model: model.name().to_string(),
        k,
        driver,
        t: cfg.t,
        seed: cfg.seed,
        lambda,
        lambda_se,
        not_hit: samples.not_hit,
    };
    let mut csv = header(&[
        ("kind", "clt-samples".into()),
        ("model", meta.model.clone()),
        ("k", k.to_string()),
        ("driver", driver.as_str().into()),
        ("n", samples.n.to_string()),
        ("t", cfg.t.to_string()),
        ("seed", cfg.seed.to_string()),
        ("lambda", lambda.to_string()),
        ("lambda_se", lambda_se.to_string()),
        ("not_hit", samples.not_hit.to_string()),
    ]);
    csv.push_str("index,value\n");
    for (i, v) in samples.values.iter().enumerate() {
        let _ = writeln!(csv, "{i},{v}");
    }
    Ok(vec![
        write_file(inv, "samples.csv", &csv)?,
        write_file(inv, "report.json", &report_json(&meta, &report))?,
    ])
}

/// Read a samples CSV written by `estimate`.
fn read_samples(path: &Path) -> Result<(SampleMeta, Vec<f64>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let bad = |line: usize, message: String| CliError::Samples { path: path.to_path_buf(), line, message };
    let mut kv = std::collections::BTreeMap::new();
    let mut values = Vec::new();
    let mut seen_header = false;
    for (no, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let (k, v) = rest.trim().split_once('=').ok_or_else(|| bad(no, "metadata line without `=`".into()))?;
            kv.insert(k.trim().to_string(), (no, v.trim().to_string()));
            continue;
        }
        if !seen_header {
            if line != "index,value" {
                return Err(bad(no, format!("expected header `index,value`, found `{line}`")));
            }
            seen_header = true;
            continue;
        }
        let (_, v) = line.split_once(',').ok_or_else(|| bad(no, "expected two columns".into()))?;
        values.push(v.trim().parse::<f64>().map_err(|e| bad(no, format!("value: {e}")))?);
    }
    fn get<T: std::str::FromStr>(
        kv: &std::collections::BTreeMap<String, (usize, String)>,
        key: &str,
        bad: &dyn Fn(usize, String) -> CliError,
    ) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let (no, v) = kv.get(key).ok_or_else(|| bad(0, format!("missing metadata `{key}`")))?;
        v.parse().map_err(|e| bad(*no, format!("`{key}`: {e}")))
    }
    let driver = match get::<String>(&kv, "driver", &bad)?.as_str() {
        "geodesic" => DriverTag::Geodesic,
        "brownian" => DriverTag::Brownian,
        "brownian-stopped" => DriverTag::BrownianStopped,
        other => return Err(bad(kv["driver"].0, format!("unknown driver `{other}`"))),
    };
    let meta = SampleMeta {
        model: get(&kv, "model", &bad)?,
        k: get(&kv, "k", &bad)?,
        driver,
        t: get(&kv, "t", &bad)?,
        seed: get(&kv, "seed", &bad)?,
        lambda: get(&kv, "lambda", &bad)?,
        lambda_se: get(&kv, "lambda_se", &bad)?,
        not_hit: get(&kv, "not_hit", &bad)?,
    };
    let n: usize = get(&kv, "n", &bad)?;
    if n != values.len() || n < 2 {
        return Err(bad(0, format!("metadata says n = {n}, found {} values", values.len())));
    }
    Ok((meta, values))
}

fn report(inv: &Invocation) -> Result<Vec<String>, CliError> {
    let cfg = &inv.config;
    let rel = cfg
        .samples
        .as_ref()
        .ok_or_else(|| ConfigError::Range { field: "samples".into(), value: "null".into(), requirement: "report needs a samples CSV".into() })?;
    let (meta, values) = read_samples(&inv.base_dir.join(rel))?;
    let mut set = clt::CltSampleSet::from_values(values, meta.driver, meta.t, meta.lambda, meta.seed);
    set.k = meta.k;
    // the bootstrap stream follows the run seed, so `--seed` picks a fresh resampling
    let r = clt::variance_estimate(&set, cfg.resamples, cfg.seed);
    Ok(vec![write_file(inv, "report.json", &report_json(&meta, &r))?])
}

fn poisson(inv: &Invocation) -> Result<Vec<String>, CliError> {
    let job = inv.config.poisson.as_ref().ok_or_else(|| ConfigError::Range {
        field: "poisson".into(),
        value: "null".into(),
        requirement: "poisson needs a job".into(),
    })?;
    let params = job.params();
    params.validate()?;
    let rhs = job.rhs_map();
    let kappa = spectral::coercivity_constant(&params, job.c, job.k_max)?;
    let sol = spectral::solve_poisson(&params, job.c, &rhs, job.k_max)?;
    let doubling = if job.doubling {
        Some(spectral::doubling_change(&params, job.c, &rhs, job.k_max)?)
    } else {
        None
    };
    let coefficients: Vec<Value> = sol
        .indices
        .iter()
        .zip(&sol.coefficients)
        .map(|(k, z)| json!({ "k": k, "re": z.re, "im": z.im }))
        .collect();
    let mut out = json!({
        "series": job.series,
        "s": [params.s.re, params.s.im],
        "c": job.c,
        "K": job.k_max,
        "kappa": kappa,
        "residual": sol.residual,
        "coefficients": coefficients,
    });
    if let Some(d) = doubling {
        out["doubling_change"] = json!(d);
    }
    Ok(vec![write_file(inv, "poisson.json", &pretty(&out))?])
}

fn origami_summary(inv: &Invocation) -> Result<Vec<String>, CliError> {
    let cfg = &inv.config;
    let (name, perms) = origami_perms(inv)?;
    let o = origami::Origami::build(perms.clone())?;
    let rep = MonodromyRep::build(perms.clone())?;
    let file = OrigamiFile::from_perms(&perms);
    let complement = match rep.tautological_complement() {
        Ok(c) => {
            let group = monodromy::orbit_group_size(&c.rep, GROUP_LIMIT);
            json!({
                "dim": c.rep.dim,
                "invariants": intlin::skew_normal_form(&c.rep.j).invariants,
                "unimodular": c.unimodular,
                "symplectic": c.rep.is_symplectic(),
                "group_order": group,
            })
        }
        Err(OrigamiError::TrivialComplement) => Value::Null,
        Err(e) => return Err(e.into()),
    };
    let mut out = json!({
        "name": name,
        "n": file.n,
        "h": file.h,
        "v": file.v,
        "genus": rep.genus(),
        "stratum": o.stratum(),
        "vertices": o.vertex_count(),
        "orbit_size": rep.orbit_size(),
        "symplectic": rep.is_symplectic(),
        "complement": complement,
    });
    if let Some(h) = cfg.spectrum_t {
        let (model, _) = build_model(inv)?;
        let sc = SpectrumConfig {
            driver: cocycle_clt::multilinear::SpectrumDriver::Geodesic { dt: cfg.geodesic_dt },
            burn_in: cfg.burn_in,
            burn_in_dt: cfg.burn_in_dt,
            ..SpectrumConfig::default()
        };
        let est = lyapunov_spectrum(&model, h, model.dim(), cfg.seed, &sc)?;
        out["lyapunov"] = json!({
            "model": model.name(),
            "horizon": est.horizon,
            "exponents": est.exponents,
            "std_errors": est.std_errors,
        });
    }
    Ok(vec![write_file(inv, "origami.json", &pretty(&out))?])
}
