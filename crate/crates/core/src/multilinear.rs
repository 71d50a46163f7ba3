//! Exterior-power log-norms, Lyapunov spectra by QR deflation, unstable subspaces,
//! and the `Φ_k`, `Ψ_k` formula layer for complex symmetric form matrices.

use crate::cocycle::{burn_in, random_frame, BasePoint, CocycleError, Model, SigmaTracker};
use crate::hyperbolic::GroupElement;
use crate::monodromy::Move;
use crate::rng::{child_seed, substream, Purpose};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Relative size below which a diagonal entry of `R` counts as rank loss.
pub const RANK_GUARD: f64 = 1e-13;
pub const DEFAULT_GAP_THRESHOLD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MultilinearError {
    #[error("frame lost rank numerically")]
    Degenerate,
    #[error("spectral gap {gap} at k = {k} below threshold {threshold}")]
    GapTooSmall { k: usize, gap: f64, threshold: f64 },
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Cocycle(#[from] CocycleError),
}

fn qr_logs(v: &DMatrix<f64>) -> Option<(DMatrix<f64>, Vec<f64>)> {
    let k = v.ncols();
    let qr = v.clone().qr();
    let r = qr.r();
    let scale = v.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut logs = Vec::with_capacity(k);
    for i in 0..k {
        let d = r[(i, i)].abs();
        if !(d > RANK_GUARD * scale) || !d.is_finite() {
            return None;
        }
        logs.push(d.ln());
    }
    let mut q = qr.q();
    // make the diagonal of R positive so Q is a continuous choice
    for i in 0..k {
        if r[(i, i)] < 0.0 {
            q.column_mut(i).neg_mut();
        }
    }
    Some((q, logs))
}

/// `½ log det Gram(V)`, or `None` when numerically degenerate.
pub fn frame_log_volume(v: &DMatrix<f64>) -> Option<f64> {
    qr_logs(v).map(|(_, l)| l.iter().sum())
}

/// Replace `V` by its orthonormal factor and return `log |R_ii|` per column.
pub fn qr_renormalize(v: &mut DMatrix<f64>) -> Option<Vec<f64>> {
    let (q, logs) = qr_logs(v)?;
    *v = q;
    Some(logs)
}

/// Linearly independent `k`-frame.
#[derive(Debug, Clone, PartialEq)]
pub struct KFrame {
    pub vectors: DMatrix<f64>,
    pub log_volume: f64,
}

impl KFrame {
    pub fn new(vectors: DMatrix<f64>) -> Result<Self, MultilinearError> {
        let log_volume = frame_log_volume(&vectors).ok_or(MultilinearError::Degenerate)?;
        Ok(Self { vectors, log_volume })
    }

    pub fn k(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn orthonormal(&self) -> DMatrix<f64> {
        qr_logs(&self.vectors).unwrap().0
    }
}

/// `½ (log det Gram(AV) - log det Gram(V))`.
pub fn wedge_lognorm(a: &DMatrix<f64>, v: &KFrame) -> Result<f64, MultilinearError> {
    if a.ncols() != v.vectors.nrows() {
        return Err(MultilinearError::Shape(format!(
            "{}x{} matrix on {}-dimensional frame",
            a.nrows(),
            a.ncols(),
            v.vectors.nrows()
        )));
    }
    let av = a * &v.vectors;
    let l = frame_log_volume(&av).ok_or(MultilinearError::Degenerate)?;
    Ok(l - v.log_volume)
}

/// Largest principal angle between the spans of two frames.
pub fn projective_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = qr_logs(a).expect("degenerate frame").0;
    let qb = qr_logs(b).expect("degenerate frame").0;
    let m = qa.transpose() * qb;
    let s = m.singular_values();
    let smin = s.iter().cloned().fold(f64::INFINITY, f64::min).min(1.0);
    // acos is ill-conditioned near 1; use the complementary sine
    let c = smin;
    (1.0 - c * c).max(0.0).sqrt().asin()
}

/// `max |Vᵀ J V|` for an orthonormalized frame.
pub fn isotropy_residual(v: &DMatrix<f64>, j: &DMatrix<f64>) -> f64 {
    let q = qr_logs(v).expect("degenerate frame").0;
    (q.transpose() * j * &q).amax()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub exponents: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub horizon: f64,
    pub blocks: usize,
    pub qr_steps: u64,
    /// Largest `Im ψ` reached, as a cusp-excursion diagnostic.
    pub max_height: f64,
}

impl LyapunovEstimate {
    /// Sum of the top `k` exponents with a block standard error.
    pub fn top_sum(&self, k: usize) -> f64 {
        self.exponents[..k].iter().sum()
    }
}

/// Driver choice for long-orbit averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpectrumDriver {
    Geodesic { dt: f64 },
    Brownian { dt: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfig {
    pub driver: SpectrumDriver,
    pub burn_in: f64,
    pub burn_in_dt: f64,
    pub blocks: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            driver: SpectrumDriver::Geodesic { dt: 0.05 },
            burn_in: 200.0,
            burn_in_dt: 0.01,
            blocks: 50,
        }
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Benettin QR deflation along one long driver orbit.
pub fn lyapunov_spectrum(
    model: &Model,
    horizon: f64,
    k_max: usize,
    seed: u64,
    cfg: &SpectrumConfig,
) -> Result<LyapunovEstimate, MultilinearError> {
    if let Model::Tautological = model {
        // σ = d(0, ·) along the driver; exponents ±1
        let exps: Vec<f64> = [1.0, -1.0][..k_max.min(2)].to_vec();
        return Ok(LyapunovEstimate {
            std_errors: vec![0.0; exps.len()],
            exponents: exps,
            horizon,
            blocks: cfg.blocks,
            qr_steps: 0,
            max_height: 1.0,
        });
    }
    let base = burn_in(model, seed, 0, cfg.burn_in, cfg.burn_in_dt)?;
    let frame = random_frame(model.dim(), k_max, seed, 0);
    let blocks = cfg.blocks.max(2);
    let block_len = horizon / blocks as f64;
    let mut per_block: Vec<Vec<f64>> = vec![Vec::with_capacity(blocks); k_max];
    let mut qr_steps = 0u64;
    let max_height;
    match cfg.driver {
        SpectrumDriver::Geodesic { dt } => {
            let theta = substream(seed, Purpose::Angle, 0).random::<f64>() * std::f64::consts::TAU;
            let start = BasePoint { f: GroupElement::rotation(theta) * base.f, ..base };
            let mut tr = SigmaTracker::new(model, start, frame)?;
            let g = GroupElement::geodesic(dt);
            let steps_per_block = (block_len / dt).round() as usize;
            for _ in 0..blocks {
                let before = tr.log_r.clone();
                for _ in 0..steps_per_block {
                    tr.advance(&g, dt)?;
                }
                tr.renormalize()?;
                for i in 0..k_max {
                    per_block[i].push((tr.log_r[i] - before[i]) / (steps_per_block as f64 * dt));
                }
                qr_steps += (steps_per_block as f64 * dt).ceil() as u64;
            }
            max_height = tr.max_height;
        }
        SpectrumDriver::Brownian { dt } => {
            // exponents in units of hyperbolic radius: divide by the radial advance
            let spec = crate::brownian::PathSpec::new(child_seed(seed, Purpose::Calibration, 0), 0, horizon, dt);
            let mut stepper = crate::brownian::PolarStepper::new(&spec).map_err(CocycleError::from)?;
            let mut tr = SigmaTracker::new(model, base, frame)?;
            let steps_per_block = (block_len / dt).round() as usize;
            let mut prev = stepper.state;
            for _ in 0..blocks {
                let before = tr.log_r.clone();
                for _ in 0..steps_per_block {
                    let st = stepper.step().map_err(CocycleError::from)?;
                    tr.advance(&crate::brownian::polar_increment(prev.t, prev.theta, st.t, st.theta), dt)?;
                    prev = st;
                }
                tr.renormalize()?;
                for i in 0..k_max {
                    per_block[i].push((tr.log_r[i] - before[i]) / (steps_per_block as f64 * dt));
                }
                qr_steps += (steps_per_block as f64 * dt).ceil() as u64;
            }
            max_height = tr.max_height;
        }
    }
    let (exponents, std_errors) = per_block.iter().map(|b| mean_se(b)).unzip();
    Ok(LyapunovEstimate { exponents, std_errors, horizon, blocks, qr_steps, max_height })
}

/// Push `v0` through a sequence of matrices with periodic QR; returns the final orthonormal frame.
pub fn push_frame<'a>(
    matrices: impl IntoIterator<Item = &'a DMatrix<f64>>,
    v0: DMatrix<f64>,
) -> Result<DMatrix<f64>, MultilinearError> {
    let mut v = v0;
    for (i, m) in matrices.into_iter().enumerate() {
        v = m * v;
        if i % 8 == 7 {
            qr_renormalize(&mut v).ok_or(MultilinearError::Degenerate)?;
        }
    }
    qr_renormalize(&mut v).ok_or(MultilinearError::Degenerate)?;
    Ok(v)
}

/// Top-`k` unstable Oseledets frame at `base`: a random frame transported from the
/// point `T_back` backward along the geodesic through `r_θ · base` up to the base.
pub fn oseledets_unstable(
    model: &Model,
    base: BasePoint,
    theta: f64,
    k: usize,
    t_back: f64,
    spectrum: &LyapunovEstimate,
    threshold: f64,
    seed: u64,
) -> Result<KFrame, MultilinearError> {
    let Model::Matrix(mm) = model else {
        return Err(MultilinearError::Shape("unstable frames need a matrix model".into()));
    };
    if k < spectrum.exponents.len() {
        let gap = spectrum.exponents[k - 1] - spectrum.exponents[k];
        if gap < threshold {
            return Err(MultilinearError::GapTooSmall { k, gap, threshold });
        }
    }
    let dt = 0.05;
    let steps = (t_back / dt).round() as usize;
    let mut f = GroupElement::rotation(theta) * base.f;
    let mut marking = base.marking;
    let back = GroupElement::geodesic(-dt);
    // record (marking before, move) along the backward path
    let mut trail: Vec<(usize, Move)> = Vec::new();
    for i in 0..steps {
        f = back * f;
        let mut moves = Vec::new();
        crate::cocycle::reduce_frame(&mut f, |mv| moves.push(mv)).map_err(MultilinearError::from)?;
        for mv in moves {
            let next = mm.rep.step(marking, mv).1;
            trail.push((marking, mv));
            marking = next;
        }
        if i % 64 == 63 {
            f = f.renormalize();
        }
    }
    // forward again: undo each move from the far end
    let mut v = random_frame(model.dim(), k, seed, 1);
    let mut count = 0usize;
    for &(m_before, mv) in trail.iter().rev() {
        let after = mm.rep.step(m_before, mv).1;
        v = mm.move_matrix(after, mv.inverse()) * v;
        count += 1;
        if count % 8 == 0 {
            qr_renormalize(&mut v).ok_or(MultilinearError::Degenerate)?;
        }
    }
    qr_renormalize(&mut v).ok_or(MultilinearError::Degenerate)?;
    KFrame::new(v)
}

/// Complex symmetric `h x h` matrix `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct FormMatrix {
    pub b: DMatrix<Complex64>,
}

impl FormMatrix {
    pub fn new(b: DMatrix<Complex64>) -> Result<Self, MultilinearError> {
        if b.nrows() != b.ncols() {
            return Err(MultilinearError::Shape("form matrix must be square".into()));
        }
        let asym = (&b - b.transpose()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if asym > 1e-12 {
            return Err(MultilinearError::Shape(format!("not symmetric (defect {asym:e})")));
        }
        Ok(Self { b })
    }

    pub fn from_diagonal(lambdas: &[Complex64]) -> Self {
        Self { b: DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(lambdas)) }
    }

    pub fn h(&self) -> DMatrix<f64> {
        self.h_complex().map(|z| z.re)
    }

    /// `H = B B̄`.
    pub fn h_complex(&self) -> DMatrix<Complex64> {
        &self.b * self.b.map(|z| z.conj())
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }
}

/// `Φ_k = 2 tr H⁽ᵏ⁾ - tr(B⁽ᵏ⁾ B̄⁽ᵏ⁾)`, `Ψ_k = tr B⁽ᵏ⁾` on the span of the orthonormal real frame `p`.
pub fn phi_psi_frame(form: &FormMatrix, p: &DMatrix<f64>) -> (f64, Complex64) {
    let pc = p.map(|x| Complex64::new(x, 0.0));
    let pt = pc.transpose();
    let bk = &pt * &form.b * &pc;
    let hk = &pt * form.h_complex() * &pc;
    let bbk = &bk * bk.map(|z| z.conj());
    let phi = 2.0 * hk.trace().re - bbk.trace().re;
    (phi, bk.trace())
}

/// Same formula on the coordinate subspace spanned by `indices`.
pub fn phi_psi(form: &FormMatrix, indices: &[usize]) -> (f64, Complex64) {
    let h = form.dim();
    let mut p = DMatrix::zeros(h, indices.len());
    for (c, &i) in indices.iter().enumerate() {
        p[(i, c)] = 1.0;
    }
    phi_psi_frame(form, &p)
}
