//! Operators of an irreducible unitary SL(2,R) representation in the `u_k` basis,
//! the coercivity constant of `L_c`, and truncated Poisson solves.
//!
//! Ladder formulas: `Θ u_k = ik u_k`,
//! `X u_k = a_k u_{k+1} - b_k u_{k-1}`, `Y u_k = i a_k u_{k+1} + i b_k u_{k-1}`,
//! `a_k = (2k+1+s)/4`, `b_k = (2k-1-s)/4`. Everything is assembled in scaled
//! coordinates `f̃_k = f_k ‖u_k‖`, where the representation inner product is `ℓ²`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

type C = Complex64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("inadmissible representation parameters: {0}")]
    InadmissibleParams(String),
    #[error("truncated system is numerically singular")]
    Singular,
    #[error("right-hand side index {0} outside the interior window")]
    OutsideWindow(i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "series", rename_all = "lowercase")]
pub enum Series {
    Principal,
    Complementary,
    Discrete { n: u32, side: Side },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepresentationParams {
    pub series: Series,
    pub s: C,
}

impl RepresentationParams {
    /// `s = i·y`.
    pub fn principal(y: f64) -> Self {
        Self { series: Series::Principal, s: C::new(0.0, y) }
    }

    pub fn complementary(s: f64) -> Self {
        Self { series: Series::Complementary, s: C::new(s, 0.0) }
    }

    /// Lowest weight `n` (`k ≥ n`) or highest weight `-n` (`k ≤ -n`), `s = 2n - 1`.
    pub fn discrete(n: u32, side: Side) -> Self {
        Self { series: Series::Discrete { n, side }, s: C::new(2.0 * n as f64 - 1.0, 0.0) }
    }

    pub fn validate(&self) -> Result<(), SpectralError> {
        let ok = match self.series {
            Series::Principal => self.s.re == 0.0 && self.s.im.is_finite(),
            Series::Complementary => self.s.im == 0.0 && self.s.re.abs() < 1.0,
            Series::Discrete { n, .. } => n >= 1 && self.s == C::new(2.0 * n as f64 - 1.0, 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(SpectralError::InadmissibleParams(format!("{:?} with s = {}", self.series, self.s)))
        }
    }

    pub fn casimir(&self) -> f64 {
        ((C::new(1.0, 0.0) - self.s * self.s) / 4.0).re
    }

    /// Index window `[-K, K] ∩ N`.
    pub fn window(&self, k_max: i64) -> Vec<i64> {
        match self.series {
            Series::Discrete { n, side: Side::Upper } => (n as i64..=k_max).collect(),
            Series::Discrete { n, side: Side::Lower } => (-k_max..=-(n as i64)).collect(),
            _ => (-k_max..=k_max).collect(),
        }
    }

    fn anchor(&self) -> i64 {
        match self.series {
            Series::Discrete { n, .. } => n as i64,
            _ => 0,
        }
    }
}

/// `‖u_k‖²` over the window, normalized to one at the lowest `|k|`.
pub fn basis_weights(params: &RepresentationParams, k_max: i64) -> Result<Vec<f64>, SpectralError> {
    params.validate()?;
    let k0 = params.anchor();
    let s = params.s;
    let mut by_abs = vec![1.0; (k_max + 1) as usize];
    for m in (k0 + 1)..=k_max {
        let num = C::new(2.0 * m as f64 - 1.0, 0.0) - s;
        let den = C::new(2.0 * m as f64 - 1.0, 0.0) + s.conj();
        let ratio = num / den;
        by_abs[m as usize] = by_abs[(m - 1) as usize] * ratio.re;
    }
    let w: Vec<f64> = params.window(k_max).iter().map(|k| by_abs[k.unsigned_abs() as usize]).collect();
    if w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(SpectralError::InadmissibleParams("nonpositive basis weight".into()));
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Which {
    Theta,
    X,
    Y,
    Casimir,
    Lc(f64),
}

/// Operator on the window in scaled coordinates, with its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOperator {
    pub indices: Vec<i64>,
    pub weights: Vec<f64>,
    pub matrix: DMatrix<C>,
}

impl TruncatedOperator {
    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    /// Positions of `|k| ≤ K - 2`.
    pub fn interior(&self) -> Vec<usize> {
        interior_of(&self.indices)
    }

    pub fn bandwidth(&self) -> usize {
        let n = self.dim();
        let mut bw = 0;
        for i in 0..n {
            for j in 0..n {
                if self.matrix[(i, j)] != C::new(0.0, 0.0) {
                    bw = bw.max(i.abs_diff(j));
                }
            }
        }
        bw
    }

    /// Coefficients in the unscaled basis.
    pub fn unscaled(&self) -> DMatrix<C> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.matrix[(i, j)] * (self.weights[j] / self.weights[i]).sqrt())
    }
}

/// Unscaled ladder matrices `X, Y, Θ` on the window. Entries are dyadic for the usual `s`.
fn ladder(params: &RepresentationParams, k_max: i64) -> Result<(Vec<i64>, Vec<f64>, [DMatrix<C>; 3]), SpectralError> {
    let w = basis_weights(params, k_max)?;
    let idx = params.window(k_max);
    let n = idx.len();
    let s = params.s;
    let first = idx[0];
    let pos = |k: i64| (k >= first && k - first < n as i64).then(|| (k - first) as usize);
    let mut x = DMatrix::zeros(n, n);
    let mut y = DMatrix::zeros(n, n);
    let mut th = DMatrix::zeros(n, n);
    let i = C::new(0.0, 1.0);
    for (col, &k) in idx.iter().enumerate() {
        let a = (C::new(2.0 * k as f64 + 1.0, 0.0) + s) / 4.0;
        let b = (C::new(2.0 * k as f64 - 1.0, 0.0) - s) / 4.0;
        th[(col, col)] = C::new(0.0, k as f64);
        if let Some(r) = pos(k + 1) {
            x[(r, col)] = a;
            y[(r, col)] = i * a;
        }
        if let Some(r) = pos(k - 1) {
            x[(r, col)] = -b;
            y[(r, col)] = i * b;
        }
    }
    Ok((idx, w, [x, y, th]))
}

/// `D M D⁻¹` with `D = diag(√w)`.
fn scale(m: &DMatrix<C>, w: &[f64]) -> DMatrix<C> {
    let n = m.nrows();
    DMatrix::from_fn(n, n, |r, c| {
        let z = m[(r, c)];
        if z == C::new(0.0, 0.0) { z } else { z * (w[r] / w[c]).sqrt() }
    })
}

/// Product of banded matrices with half-bandwidths `p` and `q`.
fn band_mul(a: &DMatrix<C>, p: usize, b: &DMatrix<C>, q: usize) -> DMatrix<C> {
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in j.saturating_sub(q)..(j + q + 1).min(n) {
            let bkj = b[(k, j)];
            if bkj == C::new(0.0, 0.0) {
                continue;
            }
            for i in k.saturating_sub(p)..(k + p + 1).min(n) {
                out[(i, j)] += a[(i, k)] * bkj;
            }
        }
    }
    out
}

fn unscaled_operator(x: &DMatrix<C>, y: &DMatrix<C>, th: &DMatrix<C>, which: Which) -> DMatrix<C> {
    match which {
        Which::Theta => th.clone(),
        Which::X => x.clone(),
        Which::Y => y.clone(),
        Which::Casimir => -band_mul(x, 1, x, 1) - band_mul(y, 1, y, 1) + band_mul(th, 0, th, 0),
        Which::Lc(c) => {
            let c2 = C::new(c * c, 0.0);
            let cc = C::new(2.0 * c, 0.0);
            -(band_mul(x, 1, x, 1) + band_mul(y, 1, y, 1) + band_mul(th, 0, th, 0) * c2) - band_mul(y, 1, th, 0) * cc
        }
    }
}

pub fn build_operator(
    params: &RepresentationParams,
    k_max: i64,
    which: Which,
) -> Result<TruncatedOperator, SpectralError> {
    let (indices, weights, [x, y, th]) = ladder(params, k_max)?;
    let matrix = scale(&unscaled_operator(&x, &y, &th, which), &weights);
    Ok(TruncatedOperator { indices, weights, matrix })
}

/// `L_c` assembled as `-X² - (Y + cΘ)² - cX`.
pub fn build_lc_alternate(params: &RepresentationParams, k_max: i64, c: f64) -> Result<TruncatedOperator, SpectralError> {
    let (indices, weights, [x, y, th]) = ladder(params, k_max)?;
    let yc = &y + &th * C::new(c, 0.0);
    let m = -band_mul(&x, 1, &x, 1) - band_mul(&yc, 1, &yc, 1) - &x * C::new(c, 0.0);
    Ok(TruncatedOperator { matrix: scale(&m, &weights), indices, weights })
}

/// Max entry of a matrix over the interior block.
pub fn interior_max(m: &DMatrix<C>, interior: &[usize]) -> f64 {
    let mut worst: f64 = 0.0;
    for &i in interior {
        for &j in interior {
            worst = worst.max(m[(i, j)].norm());
        }
    }
    worst
}

fn interior_of(idx: &[i64]) -> Vec<usize> {
    let k_max = idx.iter().map(|k| k.abs()).max().unwrap_or(0);
    (0..idx.len()).filter(|&i| idx[i].abs() <= k_max - 2).collect()
}

/// Interior difference of the two assemblies of `L_c`.
pub fn lc_identity_check(params: &RepresentationParams, c: f64, k_max: i64) -> Result<f64, SpectralError> {
    let a = build_operator(params, k_max, Which::Lc(c))?;
    let b = build_lc_alternate(params, k_max, c)?;
    Ok(interior_max(&(&a.matrix - &b.matrix), &a.interior()))
}

/// Interior deviation of the Casimir from `(1 - s²)/4`.
pub fn casimir_residual(params: &RepresentationParams, k_max: i64) -> Result<f64, SpectralError> {
    let op = build_operator(params, k_max, Which::Casimir)?;
    let n = op.dim();
    let lam = C::new(params.casimir(), 0.0);
    let d = &op.matrix - DMatrix::from_diagonal_element(n, n, lam);
    Ok(interior_max(&d, &op.interior()))
}

/// Interior residuals of `[Θ,X] - Y`, `[Θ,Y] + X`, `[X,Y] + Θ`.
pub fn commutator_residuals(params: &RepresentationParams, k_max: i64) -> Result<[f64; 3], SpectralError> {
    let (idx, w, [x, y, th]) = ladder(params, k_max)?;
    let int = interior_of(&idx);
    let br = |p: &DMatrix<C>, q: &DMatrix<C>| scale(&(band_mul(p, 1, q, 1) - band_mul(q, 1, p, 1)), &w);
    let (xs, ys, ts) = (scale(&x, &w), scale(&y, &w), scale(&th, &w));
    Ok([
        interior_max(&(br(&th, &x) - &ys), &int),
        interior_max(&(br(&th, &y) + &xs), &int),
        interior_max(&(br(&x, &y) + &ts), &int),
    ])
}

/// Hermitian matrix in lower band storage: `band[j][d] = M[j+d, j]`.
struct Band {
    n: usize,
    p: usize,
    band: Vec<Vec<C>>,
}

impl Band {
    fn from_dense(m: &DMatrix<C>, p: usize) -> Self {
        let n = m.nrows();
        let band = (0..n)
            .map(|j| (0..=p).map(|d| if j + d < n { m[(j + d, j)] } else { C::new(0.0, 0.0) }).collect())
            .collect();
        Self { n, p, band }
    }

    fn get(&self, i: usize, j: usize) -> C {
        self.band[j][i - j]
    }

    /// Whether `A - μB` is positive definite, by an unpivoted banded LDL*.
    fn shifted_pd(a: &Band, b: &Band, mu: f64) -> bool {
        let (n, p) = (a.n, a.p);
        let mut l = vec![vec![C::new(0.0, 0.0); p + 1]; n];
        let mut d = vec![0.0; n];
        let m = |i: usize, j: usize| a.get(i, j) - b.get(i, j) * mu;
        for j in 0..n {
            let lo = j.saturating_sub(p);
            let mut dj = m(j, j).re;
            for k in lo..j {
                dj -= l[k][j - k].norm_sqr() * d[k];
            }
            if !(dj > 0.0) {
                return false;
            }
            d[j] = dj;
            for i in (j + 1)..(j + p + 1).min(n) {
                let mut v = m(i, j);
                for k in i.saturating_sub(p)..j {
                    v -= l[k][i - k] * l[k][j - k].conj() * d[k];
                }
                l[j][i - j] = v / dj;
            }
        }
        true
    }
}

fn bandwidth_of(m: &DMatrix<C>) -> usize {
    let n = m.nrows();
    let mut bw = 0;
    for j in 0..n {
        for i in j..n {
            if m[(i, j)] != C::new(0.0, 0.0) || m[(j, i)] != C::new(0.0, 0.0) {
                bw = bw.max(i - j);
            }
        }
    }
    bw
}

fn check_c(c: f64) -> Result<(), SpectralError> {
    if c >= 1.0 && c.is_finite() {
        Ok(())
    } else {
        Err(SpectralError::InadmissibleParams(format!("c = {c} outside [1, ∞)")))
    }
}

/// Interior blocks `(Herm L̃_c, X̃*X̃ + Ỹ*Ỹ + Θ̃*Θ̃)` of the coercivity quotient.
pub fn coercivity_pencil(
    params: &RepresentationParams,
    c: f64,
    k_max: i64,
) -> Result<(DMatrix<C>, DMatrix<C>), SpectralError> {
    let (idx, w, [x, y, th]) = ladder(params, k_max)?;
    let int = interior_of(&idx);
    let lc = scale(&unscaled_operator(&x, &y, &th, Which::Lc(c)), &w);
    let cols = |m: &DMatrix<C>| {
        let m = scale(m, &w);
        DMatrix::from_fn(m.nrows(), int.len(), |r, cc| m[(r, int[cc])])
    };
    let gram = |m: &DMatrix<C>| {
        let m = cols(m);
        let n = m.ncols();
        DMatrix::from_fn(n, n, |r, cc| {
            let (pr, pc) = (int[r], int[cc]);
            let lo = pr.max(pc).saturating_sub(1);
            let hi = (pr.min(pc) + 2).min(m.nrows());
            (lo..hi).map(|k| m[(k, r)].conj() * m[(k, cc)]).sum::<C>()
        })
    };
    let b = gram(&x) + gram(&y) + gram(&th);
    let l = DMatrix::from_fn(int.len(), int.len(), |r, cc| lc[(int[r], int[cc])]);
    let a = (&l + l.adjoint()) * C::new(0.5, 0.0);
    Ok((a, b))
}

/// Smallest `Re⟨L_c f, f⟩ / (‖Xf‖² + ‖Yf‖² + ‖Θf‖²)` over interior `f`:
/// the largest `μ` with `A - μB` positive definite, by bisection on banded LDL* pivots.
pub fn coercivity_constant(params: &RepresentationParams, c: f64, k_max: i64) -> Result<f64, SpectralError> {
    check_c(c)?;
    let (a, b) = coercivity_pencil(params, c, k_max)?;
    let p = bandwidth_of(&a).max(bandwidth_of(&b));
    let (ab, bb) = (Band::from_dense(&a, p), Band::from_dense(&b, p));
    let mut hi = (0..a.nrows()).map(|i| a[(i, i)].re / b[(i, i)].re).fold(f64::INFINITY, f64::min);
    let mut step = 1.0_f64.max(hi.abs());
    let mut lo = hi - step;
    let mut guard = 0;
    while !Band::shifted_pd(&ab, &bb, lo) {
        hi = lo;
        step *= 2.0;
        lo -= step;
        guard += 1;
        if guard > 200 {
            return Err(SpectralError::Singular);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if Band::shifted_pd(&ab, &bb, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSolution {
    pub indices: Vec<i64>,
    /// Unscaled coefficients of `U` in the `u_k` basis.
    pub coefficients: Vec<C>,
    /// Max weighted residual of `L_c U - F` over the interior, relative to `max(1, ‖F‖)`.
    pub residual: f64,
}

impl SpectralSolution {
    pub fn coefficient(&self, k: i64) -> C {
        self.indices.iter().position(|&j| j == k).map_or(C::new(0.0, 0.0), |p| self.coefficients[p])
    }

    pub fn to_map(&self) -> BTreeMap<i64, C> {
        self.indices.iter().cloned().zip(self.coefficients.iter().cloned()).collect()
    }
}

/// Gaussian elimination with partial pivoting for a matrix of half-bandwidth `p`.
fn band_solve(mut a: DMatrix<C>, mut f: DVector<C>, p: usize) -> Result<DVector<C>, SpectralError> {
    let n = a.nrows();
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for k in 0..n {
        let last = (k + p + 1).min(n);
        let piv = (k..last)
            .max_by(|&i, &j| a[(i, k)].norm().total_cmp(&a[(j, k)].norm()))
            .unwrap();
        if a[(piv, k)].norm() <= f64::EPSILON * scale {
            return Err(SpectralError::Singular);
        }
        let right = (k + 2 * p + 1).min(n);
        if piv != k {
            for j in k..right {
                a.swap((k, j), (piv, j));
            }
            f.swap_rows(k, piv);
        }
        let d = a[(k, k)];
        for i in (k + 1)..last {
            let m = a[(i, k)] / d;
            if m == C::new(0.0, 0.0) {
                continue;
            }
            for j in k..right {
                let v = a[(k, j)];
                a[(i, j)] -= m * v;
            }
            let fk = f[k];
            f[i] -= m * fk;
        }
    }
    let mut u = DVector::zeros(n);
    for k in (0..n).rev() {
        let right = (k + 2 * p + 1).min(n);
        let mut v = f[k];
        for j in (k + 1)..right {
            v -= a[(k, j)] * u[j];
        }
        u[k] = v / a[(k, k)];
    }
    Ok(u)
}

/// Solve `L_c U = F` with `U` supported on the interior window.
pub fn solve_poisson(
    params: &RepresentationParams,
    c: f64,
    rhs: &BTreeMap<i64, C>,
    k_max: i64,
) -> Result<SpectralSolution, SpectralError> {
    check_c(c)?;
    let lc = build_operator(params, k_max, Which::Lc(c))?;
    let int = lc.interior();
    let n = int.len();
    let mut f = DVector::zeros(n);
    for (&k, &v) in rhs {
        let p = int
            .iter()
            .position(|&i| lc.indices[i] == k)
            .ok_or(SpectralError::OutsideWindow(k))?;
        f[p] = v * lc.weights[int[p]].sqrt();
    }
    let a = DMatrix::from_fn(n, n, |r, cc| lc.matrix[(int[r], int[cc])]);
    let u = band_solve(a.clone(), f.clone(), 2)?;
    if u.iter().any(|z| !z.is_finite()) {
        return Err(SpectralError::Singular);
    }
    let res = (&a * &u - &f).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let fmax = f.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let indices: Vec<i64> = int.iter().map(|&i| lc.indices[i]).collect();
    let coefficients = int.iter().zip(u.iter()).map(|(&i, z)| z / lc.weights[i].sqrt()).collect();
    Ok(SpectralSolution { indices, coefficients, residual: res / fmax })
}

/// Weighted norm `‖O U‖` of an operator applied to a solution (unscaled coefficients in).
pub fn operator_norm_of(
    params: &RepresentationParams,
    k_max: i64,
    ops: &[Which],
    sol: &SpectralSolution,
) -> Result<f64, SpectralError> {
    let (idx, w, _) = ladder(params, k_max)?;
    let mut v = DVector::from_fn(idx.len(), |i, _| {
        sol.coefficient(idx[i]) * w[i].sqrt()
    });
    for &op in ops.iter().rev() {
        v = &build_operator(params, k_max, op)?.matrix * v;
    }
    Ok(v.norm())
}

/// Largest change of interior coefficients (representation norm) between windows `K` and `2K`.
pub fn doubling_change(
    params: &RepresentationParams,
    c: f64,
    rhs: &BTreeMap<i64, C>,
    k_max: i64,
) -> Result<f64, SpectralError> {
    let a = solve_poisson(params, c, rhs, k_max)?;
    let b = solve_poisson(params, c, rhs, 2 * k_max)?;
    let w = basis_weights(params, 2 * k_max)?;
    let idx = params.window(2 * k_max);
    Ok(a
        .indices
        .iter()
        .zip(&a.coefficients)
        .map(|(&k, z)| {
            let p = idx.iter().position(|&j| j == k).expect("window contains interior");
            (z - b.coefficient(k)).norm() * w[p].sqrt()
        })
        .fold(0.0, f64::max))
}
