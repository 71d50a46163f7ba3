//! Monte Carlo harness for the normalized deviations `(σ_k - λT)/√T`.

use crate::brownian::{PathError, PathSpec, DEFAULT_DT};
use crate::cocycle::{
    burn_in, geodesic_sigma, observe_brownian, random_frame, BasePoint, BrownianObservation,
    CocycleError, Model, SigmaTracker,
};
use crate::hyperbolic::GroupElement;
use crate::rng::{child_seed, substream, uniform_angle, Purpose};
use crate::stats;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

pub const DEGENERATE_VARIANCE: f64 = 1e-12;
pub const BOOTSTRAP_RESAMPLES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriverTag {
    Geodesic,
    Brownian,
    BrownianStopped,
}

impl DriverTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            DriverTag::Geodesic => "geodesic",
            DriverTag::Brownian => "brownian",
            DriverTag::BrownianStopped => "brownian-stopped",
        }
    }
}

/// Knobs shared by all sampling routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleOptions {
    pub dt: f64,
    pub geodesic_dt: f64,
    pub burn_in: f64,
    pub burn_in_dt: f64,
    /// Give up on a stopped run beyond `max_horizon_factor · T`.
    pub max_horizon_factor: f64,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            geodesic_dt: 0.05,
            burn_in: 200.0,
            burn_in_dt: 0.01,
            max_horizon_factor: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltSampleSet {
    pub values: Vec<f64>,
    pub driver: DriverTag,
    pub n: usize,
    pub t: f64,
    pub k: usize,
    pub lambda_ref: f64,
    pub seed: u64,
    pub model: String,
    pub not_hit: usize,
}

impl CltSampleSet {
    pub fn from_values(values: Vec<f64>, driver: DriverTag, t: f64, lambda_ref: f64, seed: u64) -> Self {
        Self { n: values.len(), values, driver, t, k: 1, lambda_ref, seed, model: "synthetic".into(), not_hit: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub v: f64,
    pub ci: (f64, f64),
    pub ks: f64,
    pub mean: f64,
    pub n: usize,
    pub t: f64,
    pub degenerate: bool,
}

impl VarianceReport {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci.1 - self.ci.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub lambda: f64,
    pub se: f64,
    pub t_long: f64,
}

/// Long geodesic average of `σ_k / T` with block error bars, in its own seed space.
pub fn calibrate_lambda(
    model: &Model,
    k: usize,
    t_long: f64,
    seed: u64,
    opts: &SampleOptions,
) -> Result<Calibration, CocycleError> {
    if let Model::Tautological = model {
        let s = geodesic_sigma(model, BasePoint::standard(), 0.0, random_frame(2, 1, seed, 0), t_long, opts.geodesic_dt)?;
        return Ok(Calibration { lambda: s / t_long, se: 0.0, t_long });
    }
    let cseed = child_seed(seed, Purpose::Calibration, 0);
    let base = burn_in(model, cseed, 0, opts.burn_in, opts.burn_in_dt)?;
    let theta = substream(cseed, Purpose::Angle, 0).random::<f64>() * TAU;
    let start = BasePoint { f: GroupElement::rotation(theta) * base.f, ..base };
    let mut tr = SigmaTracker::new(model, start, random_frame(model.dim(), k, cseed, 0))?;
    let dt = opts.geodesic_dt;
    let g = GroupElement::geodesic(dt);
    let blocks = 50usize;
    let per_block = ((t_long / blocks as f64) / dt).round() as usize;
    let block_len = per_block as f64 * dt;
    let mut slopes = Vec::with_capacity(blocks);
    let mut prev = tr.sigma();
    for _ in 0..blocks {
        for _ in 0..per_block {
            tr.advance(&g, dt)?;
        }
        let s = tr.sigma();
        slopes.push((s - prev) / block_len);
        prev = s;
    }
    let lambda = stats::mean(&slopes);
    let se = (stats::variance(&slopes) / blocks as f64).sqrt();
    Ok(Calibration { lambda, se, t_long: block_len * blocks as f64 })
}

fn run_base(model: &Model, seed: u64, i: u64, opts: &SampleOptions) -> Result<BasePoint, CocycleError> {
    burn_in(model, seed, i, opts.burn_in, opts.burn_in_dt)
}

pub const MAX_RETRIES: u64 = 16;

/// One Brownian observation per run index, in index order, and the number of
/// paths redrawn because they missed radius `t` within the horizon cap.
pub fn brownian_observations(
    model: &Model,
    n: usize,
    t: f64,
    k: usize,
    seed: u64,
    exit_horizon: Option<f64>,
    opts: &SampleOptions,
) -> Result<(Vec<BrownianObservation>, usize), CocycleError> {
    let runs: Vec<(BrownianObservation, usize)> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let base = run_base(model, seed, i, opts)?;
            let frame = random_frame(model.dim(), k, seed, i);
            let cap = opts.max_horizon_factor * exit_horizon.unwrap_or(t).max(t);
            let mut attempt = 0u64;
            loop {
                // retries use path indices above every first-attempt index
                let index = if attempt == 0 { i } else { i | (attempt << 48) };
                let spec = PathSpec::new(seed, index, t, opts.dt);
                match observe_brownian(model, base, frame.clone(), &spec, t, exit_horizon, cap) {
                    Err(CocycleError::Path(PathError::NotHit { .. })) if attempt < MAX_RETRIES => attempt += 1,
                    r => return r.map(|o| (o, attempt as usize)),
                }
            }
        })
        .collect::<Result<_, _>>()?;
    let not_hit = runs.iter().map(|r| r.1).sum();
    Ok((runs.into_iter().map(|r| r.0).collect(), not_hit))
}

/// Geodesic deviations `(σ(g_T r_θ ω) - λT)/√T` with uniform `θ`.
pub fn geodesic_values(
    model: &Model,
    n: usize,
    t: f64,
    lambda_ref: f64,
    k: usize,
    seed: u64,
    opts: &SampleOptions,
) -> Result<Vec<f64>, CocycleError> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let base = run_base(model, seed, i, opts)?;
            let frame = random_frame(model.dim(), k, seed, i);
            let theta = uniform_angle(seed, i);
            let s = geodesic_sigma(model, base, theta, frame, t, opts.geodesic_dt)?;
            Ok((s - lambda_ref * t) / t.sqrt())
        })
        .collect()
}

/// Normalized deviations from Brownian observations.
pub fn deviations(obs: &[BrownianObservation], t: f64, lambda_ref: f64, driver: DriverTag) -> Vec<f64> {
    let st = t.sqrt();
    obs.iter()
        .map(|o| match driver {
            DriverTag::BrownianStopped => (o.sigma_stop - lambda_ref * t) / st,
            _ => (o.sigma_fixed - lambda_ref * t) / st,
        })
        .collect()
}

pub fn clt_samples(
    model: &Model,
    driver: DriverTag,
    n: usize,
    t: f64,
    lambda_ref: f64,
    k: usize,
    seed: u64,
    opts: &SampleOptions,
) -> Result<CltSampleSet, CocycleError> {
    let (values, not_hit) = match driver {
        DriverTag::Geodesic => (geodesic_values(model, n, t, lambda_ref, k, seed, opts)?, 0),
        _ => {
            let (obs, not_hit) = brownian_observations(model, n, t, k, seed, None, opts)?;
            (deviations(&obs, t, lambda_ref, driver), not_hit)
        }
    };
    Ok(CltSampleSet {
        n: values.len(),
        values,
        driver,
        t,
        k,
        lambda_ref,
        seed,
        model: model.name().to_string(),
        not_hit,
    })
}

/// Sample variance, bootstrap CI, and KS distance to the fitted Gaussian.
pub fn variance_estimate(samples: &CltSampleSet, resamples: usize, seed: u64) -> VarianceReport {
    let xs = &samples.values;
    let v = stats::variance(xs);
    let m = stats::mean(xs);
    if v < DEGENERATE_VARIANCE {
        // mass off the atom; the median sits on it when it carries over half the mass
        let atom = stats::median(xs);
        let off = xs.iter().filter(|&&x| (x - atom).abs() > 1e-12).count() as f64 / xs.len() as f64;
        return VarianceReport { v, ci: (v, v), ks: off, mean: m, n: xs.len(), t: samples.t, degenerate: true };
    }
    let ci = stats::bootstrap_ci(xs, stats::variance, resamples, 0.95, seed);
    let ks = stats::ks_normal(xs, m, v);
    VarianceReport { v, ci, ks, mean: m, n: xs.len(), t: samples.t, degenerate: false }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub residual: f64,
    pub ci: (f64, f64),
    pub violated: bool,
}

/// `V_g - (V_ρ - λ²)` with half-widths combined in quadrature.
pub fn variance_relation(
    report_g: &VarianceReport,
    report_rho: &VarianceReport,
    lambda: f64,
    lambda_se: f64,
) -> Relation {
    let residual = report_g.v - (report_rho.v - lambda * lambda);
    let hl = 1.96 * 2.0 * lambda.abs() * lambda_se;
    let hw = (report_g.half_width().powi(2) + report_rho.half_width().powi(2) + hl * hl).sqrt();
    let ci = (residual - hw, residual + hw);
    Relation { residual, ci, violated: !(ci.0 <= 0.0 && 0.0 <= ci.1) }
}

/// `V_ρ - λ²`, nonnegative in the limit.
pub fn positivity_margin(report_rho: &VarianceReport, lambda: f64) -> f64 {
    report_rho.v - lambda * lambda
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WienerStream {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceResult {
    pub cov: f64,
    pub ci: (f64, f64),
    pub n: usize,
}

/// Covariance of `(σ(ρ_τ) - τλ)/√T` with `-λ W_τ/√T` over stopped observations.
pub fn covariance_from_observations(
    obs: &[BrownianObservation],
    t: f64,
    lambda: f64,
    stream: WienerStream,
    seed: u64,
) -> CovarianceResult {
    let st = t.sqrt();
    let xs: Vec<f64> = obs.iter().map(|o| (o.sigma_stop - o.stop.tau * lambda) / st).collect();
    let ys: Vec<f64> = obs
        .iter()
        .map(|o| {
            let w = match stream {
                WienerStream::First => o.stop.w1,
                WienerStream::Second => o.stop.w2,
            };
            -lambda * w / st
        })
        .collect();
    let cov = stats::covariance(&xs, &ys);
    let ci = stats::bootstrap_cov_ci(&xs, &ys, BOOTSTRAP_RESAMPLES, 0.95, seed);
    CovarianceResult { cov, ci, n: obs.len() }
}

pub fn covariance_check(
    model: &Model,
    n: usize,
    t: f64,
    lambda: f64,
    k: usize,
    seed: u64,
    stream: WienerStream,
    opts: &SampleOptions,
) -> Result<CovarianceResult, CocycleError> {
    let (obs, _) = brownian_observations(model, n, t, k, seed, None, opts)?;
    Ok(covariance_from_observations(&obs, t, lambda, stream, seed))
}

/// Fixed 20-point grid spanning `±3` pooled standard deviations (or `±3` if degenerate).
pub fn discrepancy_grid(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let pooled: Vec<f64> = xs.iter().chain(ys).copied().collect();
    let m = stats::mean(&pooled);
    let sd = stats::variance(&pooled).sqrt();
    let (c, s) = if sd > 1e-9 { (m, sd) } else { (0.0, 1.0) };
    (0..20).map(|i| c + s * (-3.0 + 6.0 * i as f64 / 19.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppedVsFixed {
    pub discrepancy: f64,
    pub geodesic: Vec<f64>,
    pub stopped: Vec<f64>,
}

/// Compare `(σ(g_T r_θ̂ ω) - Tλ)/√T` with `(σ(ρ_τ) - Tλ)/√T`, `θ̂` the run's exit direction.
pub fn stopped_vs_fixed_check(
    model: &Model,
    n: usize,
    t: f64,
    lambda: f64,
    k: usize,
    seed: u64,
    opts: &SampleOptions,
) -> Result<StoppedVsFixed, CocycleError> {
    let exit_h = (1.5 * t).max(t + 20.0);
    let pairs: Vec<(f64, f64)> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let base = run_base(model, seed, i, opts)?;
            let frame = random_frame(model.dim(), k, seed, i);
            let spec = PathSpec::new(seed, i, t, opts.dt);
            let o = observe_brownian(model, base, frame.clone(), &spec, t, Some(exit_h), opts.max_horizon_factor * exit_h)?;
            let theta = o.exit_theta.unwrap_or(0.0);
            let g = geodesic_sigma(model, base, theta, frame, t, opts.geodesic_dt)?;
            let st = t.sqrt();
            Ok(((g - lambda * t) / st, (o.sigma_stop - lambda * t) / st))
        })
        .collect::<Result<_, CocycleError>>()?;
    let (geodesic, stopped): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let grid = discrepancy_grid(&geodesic, &stopped);
    Ok(StoppedVsFixed { discrepancy: stats::interval_discrepancy(&geodesic, &stopped, &grid), geodesic, stopped })
}
