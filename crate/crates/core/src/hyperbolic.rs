//! SL(2,R), the Poincaré disk (curvature -4) and the Cartan decomposition.
//!
//! A disk point is the coset `SO(2)·g`; the group acts on the right, so the
//! polar point `(t, θ)` is `SO(2)·g_t r_θ` and `act_disk(g_t r_θ, 0)` has polar
//! coordinates `(t, θ)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::ops::Mul;

/// Unit-determinant real 2x2 matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl GroupElement {
    pub const IDENTITY: Self = Self { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    /// `g_t = diag(e^t, e^-t)`.
    pub fn geodesic(t: f64) -> Self {
        Self::new(t.exp(), 0.0, 0.0, (-t).exp())
    }

    /// `r_θ`, rotation by the half angle.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = (0.5 * theta).sin_cos();
        Self::new(c, -s, s, c)
    }

    /// `g_t r_θ`, the canonical representative of the polar point `(t, θ)`.
    pub fn polar(t: f64, theta: f64) -> Self {
        Self::geodesic(t) * Self::rotation(theta)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn inverse(&self) -> Self {
        Self::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.a, self.c, self.b, self.d)
    }

    /// Rescale to determinant one.
    pub fn renormalize(&self) -> Self {
        let det = self.det();
        if det <= 0.0 || !det.is_finite() {
            return *self;
        }
        let s = det.sqrt().recip();
        Self::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn max_abs(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    pub fn sub_norm(&self, other: &Self) -> f64 {
        (self.a - other.a)
            .abs()
            .max((self.b - other.b).abs())
            .max((self.c - other.c).abs())
            .max((self.d - other.d).abs())
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    /// Möbius action on the upper half-plane.
    pub fn mobius(&self, w: Complex64) -> Complex64 {
        (w * self.a + self.b) / (w * self.c + self.d)
    }

    pub fn to_array(&self) -> [[f64; 2]; 2] {
        [[self.a, self.b], [self.c, self.d]]
    }
}

impl Mul for GroupElement {
    type Output = GroupElement;

    fn mul(self, o: GroupElement) -> GroupElement {
        GroupElement::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

/// Matrix product renormalized to determinant one.
pub fn compose(g: &GroupElement, h: &GroupElement) -> GroupElement {
    (*g * *h).renormalize()
}

/// Lie algebra generators `X`, `Y`, `Θ` as 2x2 matrices.
pub mod generators {
    pub const X: [[f64; 2]; 2] = [[0.5, 0.0], [0.0, -0.5]];
    pub const Y: [[f64; 2]; 2] = [[0.0, 0.5], [0.5, 0.0]];
    pub const THETA: [[f64; 2]; 2] = [[0.0, -0.5], [0.5, 0.0]];

    pub fn mul(p: &[[f64; 2]; 2], q: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
        let mut r = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = p[i][0] * q[0][j] + p[i][1] * q[1][j];
            }
        }
        r
    }

    pub fn bracket(p: &[[f64; 2]; 2], q: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
        let pq = mul(p, q);
        let qp = mul(q, p);
        let mut r = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = pq[i][j] - qp[i][j];
            }
        }
        r
    }
}

/// Point of the unit disk stored in polar form `(t, θ)`, `t` the hyperbolic radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskPoint {
    pub t: f64,
    pub theta: f64,
}

impl DiskPoint {
    pub const ORIGIN: Self = Self { t: 0.0, theta: 0.0 };

    pub fn polar(t: f64, theta: f64) -> Self {
        if t < 0.0 {
            Self { t: -t, theta: wrap_angle(theta + PI) }
        } else if t == 0.0 {
            Self::ORIGIN
        } else {
            Self { t, theta: wrap_angle(theta) }
        }
    }

    pub fn from_complex(z: Complex64) -> Self {
        let r = z.norm();
        if r == 0.0 {
            return Self::ORIGIN;
        }
        Self::polar(r.atanh(), z.arg())
    }

    /// Euclidean radius `tanh t`.
    pub fn radius(&self) -> f64 {
        self.t.tanh()
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::from_polar(self.t.tanh(), self.theta)
    }

    /// Coset representative `g_t r_θ`.
    pub fn representative(&self) -> GroupElement {
        GroupElement::polar(self.t, self.theta)
    }
}

pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Signed angle difference in `(-π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = a - b;
    // in range already: wrapping would round tiny negative differences to zero
    if d > -PI && d <= PI {
        return d;
    }
    let d = d.rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Upper half-plane to disk.
pub fn cayley(w: Complex64) -> Complex64 {
    let i = Complex64::i();
    (w - i) / (w + i)
}

/// Disk to upper half-plane.
pub fn cayley_inv(z: Complex64) -> Complex64 {
    Complex64::i() * (Complex64::new(1.0, 0.0) + z) / (Complex64::new(1.0, 0.0) - z)
}

/// Right action `SO(2)·h ↦ SO(2)·h·g`.
pub fn act_disk(g: &GroupElement, z: &DiskPoint) -> DiskPoint {
    let h = z.representative() * *g;
    let (_, t, theta2) = cartan(&h);
    // SO(2)·r_θ1 g_t r_θ2 = SO(2)·g_t r_θ2
    DiskPoint::polar(t, theta2)
}

/// Same action through the transpose Möbius map and the Cayley transform.
pub fn act_disk_mobius(g: &GroupElement, z: Complex64) -> Complex64 {
    cayley(g.transpose().mobius(cayley_inv(z)))
}

/// Distance in the curvature -4 metric.
pub fn dist(p: &DiskPoint, q: &DiskPoint) -> f64 {
    let (t1, t2) = (p.t, q.t);
    let half = 0.5 * angle_diff(p.theta, q.theta);
    let s = half.sin().abs();
    if s == 0.0 || t1 == 0.0 || t2 == 0.0 {
        return (t1 - t2).abs();
    }
    // sinh²d = sinh²(t1-t2) + sinh(2t1) sinh(2t2) sin²(Δθ/2)
    let dt = t1 - t2;
    if t1 + t2 < 300.0 {
        let a = dt.sinh();
        let x = a * a + (2.0 * t1).sinh() * (2.0 * t2).sinh() * s * s;
        return x.sqrt().asinh();
    }
    // log domain: sinh(2t) ~ e^{2t}/2
    let la = if dt == 0.0 { f64::NEG_INFINITY } else { 2.0 * log_sinh(dt.abs()) };
    let lb = log_sinh(2.0 * t1) + log_sinh(2.0 * t2) + 2.0 * s.ln();
    let m = la.max(lb);
    let lx = m + ((la - m).exp() + (lb - m).exp()).ln();
    asinh_from_log(0.5 * lx)
}

fn log_sinh(x: f64) -> f64 {
    if x > 20.0 {
        x - std::f64::consts::LN_2 + (-(-2.0 * x).exp()).ln_1p()
    } else {
        x.sinh().ln()
    }
}

/// `asinh(e^l)` without overflow.
fn asinh_from_log(l: f64) -> f64 {
    if l > 20.0 {
        l + std::f64::consts::LN_2 + 0.25 * (-2.0 * l).exp()
    } else {
        l.exp().asinh()
    }
}

/// Distance from the polar point `(t, θ)` to the geodesic ray from the origin at angle `phi`.
pub fn dist_to_ray(p: &DiskPoint, phi: f64) -> f64 {
    let delta = angle_diff(p.theta, phi);
    if delta.abs() >= 0.5 * PI {
        return p.t;
    }
    let s = delta.sin().abs();
    if s == 0.0 {
        return 0.0;
    }
    // sinh(2d) = sinh(2t)|sin δ|
    let l = log_sinh(2.0 * p.t) + s.ln();
    0.5 * asinh_from_log(l)
}

/// Cartan decomposition `g = r_θ1 g_t r_θ2` with `t ≥ 0`, `θ1 ∈ [0, 2π)`, `θ2 ∈ [0, 4π)`.
pub fn cartan(g: &GroupElement) -> (f64, f64, f64) {
    let GroupElement { a, b, c, d } = *g;
    let p = a - d;
    let q = b + c;
    let sh = 0.5 * p.hypot(q);
    let t = sh.asinh();
    let sum = (c - b).atan2(a + d);
    if sh < 1e-15 {
        let full = (2.0 * sum).rem_euclid(2.0 * TAU);
        return if full < TAU { (full, 0.0, 0.0) } else { (full - TAU, 0.0, TAU) };
    }
    let diff = (-q).atan2(p);
    let mut theta1 = sum - diff;
    let mut theta2 = sum + diff;
    // shifting θ1 by 2π flips the sign of r_θ1; compensate in θ2
    let k = (theta1 / TAU).floor();
    theta1 -= k * TAU;
    theta2 += k * TAU;
    theta2 = theta2.rem_euclid(2.0 * TAU);
    if theta1 >= TAU {
        theta1 = 0.0;
    }
    (theta1, t, theta2)
}
