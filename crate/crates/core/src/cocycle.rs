//! Transport of a locally constant cocycle along SL(2,R) paths by reduction to the
//! standard fundamental domain of SL(2,Z).
//!
//! A frame `f` represents the surface `f·m` for the current marking `m`. The point
//! `ψ(f) = f⁻¹·i` is kept in `{-½ ≤ Re w < ½, |w| ≥ 1}`; replacing `f` by `f γ`
//! moves the marking by `γ⁻¹` and multiplies the accumulated matrix by its action.

use crate::brownian::{group_increment, polar_increment, PathError, PathSpec, PolarStepper, StoppingRecord};
use crate::hyperbolic::{wrap_angle, GroupElement};
use crate::intlin::IntMatrix;
use crate::monodromy::{Move, MonodromyRep};
use crate::multilinear::{frame_log_volume, qr_renormalize};
use crate::rng::{substream, Purpose};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub const MAX_MOVES_PER_STEP: u64 = 1_000_000;
pub const RENORM_MOVES: u64 = 10;
pub const RENORM_TIME: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CocycleError {
    #[error("fundamental-domain reduction exceeded {0} moves in one step")]
    ReductionDiverged(u64),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("degenerate frame: {0}")]
    Degenerate(String),
}

const T_MAT: GroupElement = GroupElement { a: 1.0, b: 1.0, c: 0.0, d: 1.0 };
const T_INV: GroupElement = GroupElement { a: 1.0, b: -1.0, c: 0.0, d: 1.0 };
const S_MAT: GroupElement = GroupElement { a: 0.0, b: -1.0, c: 1.0, d: 0.0 };
const S_INV: GroupElement = GroupElement { a: 0.0, b: 1.0, c: -1.0, d: 0.0 };

/// `f⁻¹ · i` in the upper half-plane.
pub fn psi(f: &GroupElement) -> Complex64 {
    let den = f.a * f.a + f.c * f.c;
    Complex64::new(-(f.a * f.b + f.c * f.d) / den, 1.0 / den)
}

pub fn in_fundamental_domain(w: Complex64) -> bool {
    w.re >= -0.5 && w.re < 0.5 && w.norm_sqr() >= 1.0
}

/// Reduce `f` in place; reports each move. Returns the number of moves.
pub fn reduce_frame(
    f: &mut GroupElement,
    mut on_move: impl FnMut(Move),
) -> Result<u64, CocycleError> {
    let mut w = psi(f);
    let mut moves = 0u64;
    loop {
        let mv = if w.re >= 0.5 {
            *f = *f * T_MAT;
            Move::TInv
        } else if w.re < -0.5 {
            *f = *f * T_INV;
            Move::T
        } else if w.norm_sqr() < 1.0 {
            if w.re < 0.0 {
                *f = *f * S_INV;
                Move::S
            } else {
                *f = *f * S_MAT;
                Move::SInv
            }
        } else {
            return Ok(moves);
        };
        on_move(mv);
        moves += 1;
        if moves > MAX_MOVES_PER_STEP {
            return Err(CocycleError::ReductionDiverged(moves));
        }
        // recompute from f rather than iterating the Möbius map to avoid drift
        w = psi(f);
    }
}

/// Frame, marking, exact accumulated matrix and word length.
#[derive(Debug, Clone, PartialEq)]
pub struct CocycleState {
    pub f: GroupElement,
    pub marking: usize,
    /// `None` once the exact product overflows `i64`.
    pub accumulated: Option<IntMatrix>,
    pub word_len: u64,
}

impl CocycleState {
    pub fn new(rep: &MonodromyRep, f: GroupElement, marking: usize) -> Self {
        Self { f, marking, accumulated: Some(IntMatrix::identity(rep.dim)), word_len: 0 }
    }
}

/// Left-multiply the frame by `increment`, reduce, and accumulate the generator actions.
pub fn reduce_and_accumulate(
    rep: &MonodromyRep,
    state: &CocycleState,
    increment: &GroupElement,
) -> Result<CocycleState, CocycleError> {
    let mut next = state.clone();
    next.f = *increment * state.f;
    let mut moves = Vec::new();
    let count = reduce_frame(&mut next.f, |mv| moves.push(mv))?;
    for mv in moves {
        let (mat, m) = rep.step(next.marking, mv);
        next.accumulated = next.accumulated.and_then(|a| mat.checked_mul(&a));
        next.marking = m;
    }
    next.word_len += count;
    next.f = next.f.renormalize();
    Ok(next)
}

/// Locally constant cocycle with float copies of the move matrices.
#[derive(Debug, Clone)]
pub struct MatrixModel {
    pub name: String,
    pub rep: Arc<MonodromyRep>,
    moves: Vec<[DMatrix<f64>; 4]>,
}

fn move_slot(mv: Move) -> usize {
    match mv {
        Move::S => 0,
        Move::SInv => 1,
        Move::T => 2,
        Move::TInv => 3,
    }
}

impl MatrixModel {
    pub fn new(name: impl Into<String>, rep: MonodromyRep) -> Self {
        let moves = (0..rep.orbit_size())
            .map(|m| {
                [Move::S, Move::SInv, Move::T, Move::TInv].map(|mv| rep.step(m, mv).0.to_f64())
            })
            .collect();
        Self { name: name.into(), rep: Arc::new(rep), moves }
    }

    pub fn dim(&self) -> usize {
        self.rep.dim
    }

    pub fn move_matrix(&self, m: usize, mv: Move) -> &DMatrix<f64> {
        &self.moves[m][move_slot(mv)]
    }
}

/// Cocycle backends.
#[derive(Debug, Clone)]
pub enum Model {
    /// `σ(z) = d(0, z)`, exponent 1.
    Tautological,
    Matrix(MatrixModel),
}

impl Model {
    pub fn tautological() -> Self {
        Model::Tautological
    }

    pub fn name(&self) -> &str {
        match self {
            Model::Tautological => "tautological",
            Model::Matrix(m) => &m.name,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Model::Tautological => 2,
            Model::Matrix(m) => m.dim(),
        }
    }

    /// Closed form for the tautological model.
    pub fn tautological_sigma(point: &crate::hyperbolic::DiskPoint) -> f64 {
        point.t
    }
}

/// Base point of a run: frame and marking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasePoint {
    pub f: GroupElement,
    pub marking: usize,
}

impl BasePoint {
    pub fn standard() -> Self {
        Self { f: GroupElement::IDENTITY, marking: 0 }
    }
}

/// Base point after a group-chart Brownian segment of length `length` from the standard frame.
pub fn burn_in(
    model: &Model,
    seed: u64,
    index: u64,
    length: f64,
    dt: f64,
) -> Result<BasePoint, CocycleError> {
    let mut base = BasePoint::standard();
    let Model::Matrix(mm) = model else { return Ok(base) };
    let mut rng = substream(seed, Purpose::BurnIn, index);
    let steps = (length / dt).round() as u64;
    for i in 0..steps {
        let h = group_increment(rng.sample(StandardNormal), rng.sample(StandardNormal), dt);
        base.f = h * base.f;
        let mut m = base.marking;
        reduce_frame(&mut base.f, |mv| m = mm.rep.step(m, mv).1)?;
        base.marking = m;
        if i % 64 == 63 {
            base.f = base.f.renormalize();
        }
    }
    Ok(base)
}

/// Rotation-invariant random `k`-frame (Gaussian columns).
pub fn random_frame(dim: usize, k: usize, seed: u64, index: u64) -> DMatrix<f64> {
    let mut rng = substream(seed, Purpose::Frame, index);
    DMatrix::from_fn(dim, k, |_, _| rng.sample(StandardNormal))
}

/// Running `σ_k` along a driver: a renormalized frame and its accumulated log-volume.
#[derive(Debug, Clone)]
pub struct SigmaTracker<'a> {
    model: &'a Model,
    pub f: GroupElement,
    pub marking: usize,
    frame: DMatrix<f64>,
    log_volume: f64,
    log_volume0: f64,
    moves_since_qr: u64,
    time_since_qr: f64,
    pub time: f64,
    pub word_len: u64,
    steps: u64,
    /// Tautological model: current radius.
    radius: f64,
    /// Largest `Im ψ` seen, a cusp-excursion diagnostic.
    pub max_height: f64,
    /// Per-column accumulated `log |R_ii|`.
    pub log_r: Vec<f64>,
    scratch: Vec<Move>,
}

impl<'a> SigmaTracker<'a> {
    pub fn new(model: &'a Model, base: BasePoint, frame: DMatrix<f64>) -> Result<Self, CocycleError> {
        let k = frame.ncols();
        let log_volume0 = match model {
            Model::Tautological => 0.0,
            Model::Matrix(_) => frame_log_volume(&frame)
                .ok_or_else(|| CocycleError::Degenerate("initial frame is not independent".into()))?,
        };
        Ok(Self {
            model,
            f: base.f,
            marking: base.marking,
            frame,
            log_volume: 0.0,
            log_volume0,
            moves_since_qr: 0,
            time_since_qr: 0.0,
            time: 0.0,
            word_len: 0,
            steps: 0,
            radius: 0.0,
            max_height: psi(&base.f).im,
            log_r: vec![0.0; k],
            scratch: Vec::new(),
        })
    }

    /// Apply a left increment lasting `dt` of driver time.
    pub fn advance(&mut self, h: &GroupElement, dt: f64) -> Result<(), CocycleError> {
        self.time += dt;
        self.steps += 1;
        let Model::Matrix(mm) = self.model else {
            self.f = *h * self.f;
            return Ok(());
        };
        self.f = *h * self.f;
        let mut moves = std::mem::take(&mut self.scratch);
        moves.clear();
        reduce_frame(&mut self.f, |mv| moves.push(mv))?;
        for &mv in moves.iter() {
            let next = mm.rep.step(self.marking, mv).1;
            self.frame = mm.move_matrix(self.marking, mv) * &self.frame;
            self.marking = next;
            self.moves_since_qr += 1;
            self.word_len += 1;
            if self.moves_since_qr >= RENORM_MOVES {
                self.renormalize()?;
            }
        }
        self.scratch = moves;
        self.time_since_qr += dt;
        if self.time_since_qr >= RENORM_TIME {
            self.renormalize()?;
        }
        if self.steps % 64 == 0 {
            self.f = self.f.renormalize();
        }
        let ht = psi(&self.f).im;
        if ht > self.max_height {
            self.max_height = ht;
        }
        Ok(())
    }

    /// Set the closed-form radius (tautological model).
    pub fn set_radius(&mut self, t: f64) {
        self.radius = t;
    }

    /// Orthonormalize the frame, folding the column stretches into `log_r`.
    pub fn renormalize(&mut self) -> Result<(), CocycleError> {
        if let Model::Tautological = self.model {
            return Ok(());
        }
        let logs = qr_renormalize(&mut self.frame)
            .ok_or_else(|| CocycleError::Degenerate("frame collapsed during transport".into()))?;
        for (acc, l) in self.log_r.iter_mut().zip(&logs) {
            *acc += l;
        }
        self.log_volume += logs.iter().sum::<f64>();
        self.moves_since_qr = 0;
        self.time_since_qr = 0.0;
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        match self.model {
            Model::Tautological => self.radius,
            Model::Matrix(_) => {
                self.log_volume + frame_log_volume(&self.frame).unwrap_or(f64::NEG_INFINITY)
                    - self.log_volume0
            }
        }
    }

    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }
}

/// Driver of the base dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Driver {
    /// `g_t r_θ` with steps of `dt`.
    Geodesic { theta: f64, dt: f64 },
    /// Polar Brownian path.
    Brownian { seed: u64, index: u64, dt: f64 },
}

/// `σ_k` sampled every `stride` driver steps over `[0, horizon]`, as `(time, σ)` pairs.
pub fn sigma_series(
    model: &Model,
    base: BasePoint,
    driver: &Driver,
    frame: DMatrix<f64>,
    horizon: f64,
    stride: usize,
) -> Result<Vec<(f64, f64)>, CocycleError> {
    let stride = stride.max(1);
    let mut out = Vec::new();
    match *driver {
        Driver::Geodesic { theta, dt } => {
            let steps = (horizon / dt).round() as usize;
            let start = BasePoint { f: GroupElement::rotation(theta) * base.f, ..base };
            let mut tr = SigmaTracker::new(model, start, frame)?;
            let g = GroupElement::geodesic(dt);
            out.push((0.0, tr.sigma()));
            for i in 1..=steps {
                tr.advance(&g, dt)?;
                tr.set_radius(i as f64 * dt);
                if i % stride == 0 || i == steps {
                    out.push((i as f64 * dt, tr.sigma()));
                }
            }
        }
        Driver::Brownian { seed, index, dt } => {
            let spec = PathSpec::new(seed, index, horizon, dt);
            let mut stepper = PolarStepper::new(&spec)?;
            let steps = spec.steps();
            let mut tr = SigmaTracker::new(model, base, frame)?;
            out.push((0.0, tr.sigma()));
            let mut prev = stepper.state;
            for i in 1..=steps {
                let st = stepper.step()?;
                tr.advance(&polar_increment(prev.t, prev.theta, st.t, st.theta), dt)?;
                tr.set_radius(st.t);
                prev = st;
                if i % stride == 0 || i == steps {
                    out.push((i as f64 * dt, tr.sigma()));
                }
            }
        }
    }
    Ok(out)
}

/// `σ` at geodesic time `t_end` from `r_θ · base`.
pub fn geodesic_sigma(
    model: &Model,
    base: BasePoint,
    theta: f64,
    frame: DMatrix<f64>,
    t_end: f64,
    dt: f64,
) -> Result<f64, CocycleError> {
    if let Model::Tautological = model {
        return Ok(t_end);
    }
    let steps = (t_end / dt).round() as usize;
    let start = BasePoint { f: GroupElement::rotation(theta) * base.f, ..base };
    let mut tr = SigmaTracker::new(model, start, frame)?;
    let g = GroupElement::geodesic(dt);
    for _ in 0..steps {
        tr.advance(&g, dt)?;
    }
    Ok(tr.sigma())
}

/// Everything one Brownian run contributes to the CLT statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrownianObservation {
    /// `σ` at path time `T`.
    pub sigma_fixed: f64,
    /// `W1` at path time `T`.
    pub w1_fixed: f64,
    pub stop: StoppingRecord,
    /// `σ` at the first time the radius reaches `T`.
    pub sigma_stop: f64,
    /// Circular mean of the trailing 10% of angles, if the run was extended for it.
    pub exit_theta: Option<f64>,
    pub horizon: f64,
}

/// Run one polar Brownian path, transporting `frame`, until both path time `T` and
/// radius `T` are reached (and optionally further, to read off the exit direction).
pub fn observe_brownian(
    model: &Model,
    base: BasePoint,
    frame: DMatrix<f64>,
    spec: &PathSpec,
    t_target: f64,
    exit_horizon: Option<f64>,
    max_horizon: f64,
) -> Result<BrownianObservation, CocycleError> {
    let mut stepper = PolarStepper::new(spec)?;
    let dt = spec.dt;
    let mut tr = SigmaTracker::new(model, base, frame)?;
    tr.set_radius(stepper.state.t);
    let n_fixed = (t_target / dt).round() as usize;
    let n_max = (max_horizon / dt).round() as usize;
    let n_exit = exit_horizon.map(|h| (h / dt).round() as usize);
    let mut prev = stepper.state;
    let mut fixed: Option<(f64, f64)> = None;
    let mut stop: Option<(StoppingRecord, f64)> = None;
    if prev.t >= t_target {
        stop = Some((
            StoppingRecord {
                tau: 0.0,
                index: 0,
                weight: 0.0,
                w1: prev.w1,
                w2: prev.w2,
                eta: prev.eta,
                theta: prev.theta,
            },
            tr.sigma(),
        ));
    }
    let mut trailing: Vec<f64> = Vec::new();
    let mut i = 0usize;
    loop {
        let done_main = fixed.is_some() && stop.is_some();
        let need_exit = n_exit.is_some_and(|n| i < n);
        if done_main && !need_exit {
            break;
        }
        if i >= n_max {
            if stop.is_none() {
                return Err(PathError::NotHit { radius: t_target, horizon: max_horizon }.into());
            }
            break;
        }
        // σ costs a QR; only needed next to the crossing and at the fixed time
        let near = stop.is_none() && prev.t >= t_target - 1.0;
        let sigma_prev = if near { tr.sigma() } else { f64::NAN };
        let st = stepper.step()?;
        tr.advance(&polar_increment(prev.t, prev.theta, st.t, st.theta), dt)?;
        tr.set_radius(st.t);
        i += 1;
        let crossing = stop.is_none() && st.t >= t_target;
        let sigma_now = if crossing || i == n_fixed { tr.sigma() } else { f64::NAN };
        if crossing {
            let sigma_prev = if sigma_prev.is_nan() { sigma_now } else { sigma_prev };
            let w = (t_target - prev.t) / (st.t - prev.t);
            let lerp = |a: f64, b: f64| a + w * (b - a);
            let rec = StoppingRecord {
                tau: ((i - 1) as f64 + w) * dt,
                index: i - 1,
                weight: w,
                w1: lerp(prev.w1, st.w1),
                w2: lerp(prev.w2, st.w2),
                eta: lerp(prev.eta, st.eta),
                theta: wrap_angle(prev.theta + w * crate::hyperbolic::angle_diff(st.theta, prev.theta)),
            };
            stop = Some((rec, lerp(sigma_prev, sigma_now)));
        }
        if i == n_fixed {
            fixed = Some((sigma_now, st.w1));
        }
        if let Some(n) = n_exit {
            if i + n / 10 >= n && i <= n {
                trailing.push(st.theta);
            }
        }
        prev = st;
    }
    let (sigma_fixed, w1_fixed) = fixed.unwrap_or((f64::NAN, f64::NAN));
    let (stop, sigma_stop) = stop.unwrap();
    let exit_theta = if trailing.is_empty() {
        None
    } else {
        let (sx, sy) = trailing.iter().fold((0.0, 0.0), |(x, y), th| (x + th.cos(), y + th.sin()));
        Some(wrap_angle(sy.atan2(sx)))
    };
    Ok(BrownianObservation {
        sigma_fixed,
        w1_fixed,
        stop,
        sigma_stop,
        exit_theta,
        horizon: i as f64 * dt,
    })
}
