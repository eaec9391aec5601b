//! Quaternion algebra and the double cover `S3 -> SO(3)`.
//!
//! Components are stored scalar-first as `(w, x, y, z)` along `1, i, j, k`
//! with `ij = k`, `jk = i`, `ki = j`. This convention is fixed here and
//! every other module goes through these types.
//!
//! `C2` is identified with `H` via `(z0, z1) -> z0 + z1 j`, so a unit
//! quaternion `u = (u0, u1, u2, u3)` corresponds to `z0 = u0 + u1 i`,
//! `z1 = u2 + u3 i`. The conversion is explicit: see
//! [`Quaternion::from_complex_pair`] and [`Quaternion::to_complex_pair`].

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when a caller claims a quaternion or axis is of unit length.
pub const UNIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    #[inline]
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    #[inline]
    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    #[inline]
    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    /// `(z0, z1) -> z0 + z1 j`.
    pub fn from_complex_pair(z0: Complex64, z1: Complex64) -> Self {
        Self::new(z0.re, z0.im, z1.re, z1.im)
    }

    /// Inverse of [`Quaternion::from_complex_pair`].
    pub fn to_complex_pair(self) -> (Complex64, Complex64) {
        (Complex64::new(self.w, self.x), Complex64::new(self.y, self.z))
    }

    #[inline]
    pub fn conj(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Hamilton product.
    #[inline]
    pub fn mul(self, b: Self) -> Self {
        let a = self;
        Self::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    /// Euclidean inner product on `R4`, equal to `Real(a * conj(b))`.
    #[inline]
    pub fn inner(self, b: Self) -> f64 {
        self.w * b.w + self.x * b.x + self.y * b.y + self.z * b.z
    }

    #[inline]
    pub fn norm_sqr(self) -> f64 {
        self.inner(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    #[inline]
    pub fn scale(self, s: f64) -> Self {
        Self::new(s * self.w, s * self.x, s * self.y, s * self.z)
    }

    #[inline]
    pub fn real(self) -> f64 {
        self.w
    }

    /// Imaginary part as an `R3` vector; the real part is dropped.
    #[inline]
    pub fn imag(self) -> PureImaginary {
        PureImaginary::new(self.x, self.y, self.z)
    }

    pub fn max_abs_diff(self, other: Self) -> f64 {
        let d = self - other;
        d.w.abs().max(d.x.abs()).max(d.y.abs()).max(d.z.abs())
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Quaternion {
    type Output = Self;
    #[inline]
    fn add(self, b: Self) -> Self {
        Self::new(self.w + b.w, self.x + b.x, self.y + b.y, self.z + b.z)
    }
}

impl Sub for Quaternion {
    type Output = Self;
    #[inline]
    fn sub(self, b: Self) -> Self {
        Self::new(self.w - b.w, self.x - b.x, self.y - b.y, self.z - b.z)
    }
}

impl Neg for Quaternion {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.w, -self.x, -self.y, -self.z)
    }
}

impl Mul for Quaternion {
    type Output = Self;
    #[inline]
    fn mul(self, b: Self) -> Self {
        Quaternion::mul(self, b)
    }
}

impl Mul<f64> for Quaternion {
    type Output = Self;
    #[inline]
    fn mul(self, s: f64) -> Self {
        self.scale(s)
    }
}

/// A point of `S3`, kept normalized after every product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Quaternion", into = "Quaternion")]
pub struct UnitQuaternion(Quaternion);

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion(Quaternion::ONE);

    /// Normalizes `q`. Fails on zero or non-finite input.
    pub fn new_normalize(q: Quaternion) -> Result<Self> {
        let n = q.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::Degenerate(format!("cannot normalize quaternion {q:?}")));
        }
        Ok(Self(q.scale(1.0 / n)))
    }

    /// Accepts `q` only if it is already of unit length within [`UNIT_TOLERANCE`];
    /// the stored value is renormalized.
    pub fn new_checked(q: Quaternion) -> Result<Self> {
        let n = q.norm();
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::NotUnit { norm: n });
        }
        Ok(Self(q.scale(1.0 / n)))
    }

    /// Wraps `q` without renormalizing. Callers guarantee `|q| = 1` up to roundoff.
    #[inline]
    pub(crate) fn new_unchecked(q: Quaternion) -> Self {
        Self(q)
    }

    pub fn from_complex_pair(z0: Complex64, z1: Complex64) -> Result<Self> {
        Self::new_normalize(Quaternion::from_complex_pair(z0, z1))
    }

    #[inline]
    pub fn quaternion(self) -> Quaternion {
        self.0
    }

    #[inline]
    pub fn conj(self) -> Self {
        Self(self.0.conj())
    }

    /// Product followed by renormalization.
    #[inline]
    pub fn mul(self, other: Self) -> Self {
        let q = self.0 * other.0;
        Self(q.scale(1.0 / q.norm()))
    }

    /// Left multiplication `l_a(u) = a u`.
    #[inline]
    pub fn left_mul(self, u: Self) -> Self {
        self.mul(u)
    }

    #[inline]
    pub fn neg(self) -> Self {
        Self(-self.0)
    }

    pub fn to_complex_pair(self) -> (Complex64, Complex64) {
        self.0.to_complex_pair()
    }

    /// Unit quaternion `a` with `a p conj(a) = q` for unit pure imaginary `p`, `q`,
    /// choosing the rotation in the plane of `p` and `q`.
    pub fn rotation_between(p: PureImaginary, q: PureImaginary) -> Result<Self> {
        let p = p.normalized()?;
        let q = q.normalized()?;
        let s = 1.0 + p.dot(q);
        if s < 1e-10 {
            // antipodal: rotate by pi about any axis orthogonal to p
            let axis = p.any_orthogonal();
            return Ok(Self(axis.to_quaternion()));
        }
        // a = (1 - q p) / |1 - q p|, and 1 - q p = (1 + p.q) + p x q
        let c = p.cross(q);
        Self::new_normalize(Quaternion::new(s, c.x1, c.x2, c.x3))
    }
}

impl TryFrom<Quaternion> for UnitQuaternion {
    type Error = Error;
    fn try_from(q: Quaternion) -> Result<Self> {
        Self::new_checked(q)
    }
}

impl From<UnitQuaternion> for Quaternion {
    fn from(u: UnitQuaternion) -> Self {
        u.0
    }
}

impl Mul for UnitQuaternion {
    type Output = Self;
    #[inline]
    fn mul(self, b: Self) -> Self {
        UnitQuaternion::mul(self, b)
    }
}

/// A vector of `R3`, read as the pure imaginary quaternion `x1 i + x2 j + x3 k`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PureImaginary {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl PureImaginary {
    pub const I: PureImaginary = PureImaginary::new(1.0, 0.0, 0.0);
    pub const J: PureImaginary = PureImaginary::new(0.0, 1.0, 0.0);
    pub const K: PureImaginary = PureImaginary::new(0.0, 0.0, 1.0);
    pub const ZERO: PureImaginary = PureImaginary::new(0.0, 0.0, 0.0);

    #[inline]
    pub const fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Self { x1, x2, x3 }
    }

    #[inline]
    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    #[inline]
    pub fn to_array(self) -> [f64; 3] {
        [self.x1, self.x2, self.x3]
    }

    /// Embeds with zero real part.
    #[inline]
    pub fn to_quaternion(self) -> Quaternion {
        Quaternion::new(0.0, self.x1, self.x2, self.x3)
    }

    /// Rejects quaternions whose real part exceeds `tol` in magnitude.
    pub fn from_quaternion(q: Quaternion, tol: f64) -> Result<Self> {
        if q.w.abs() > tol {
            return Err(Error::NotPureImaginary { real: q.w });
        }
        Ok(q.imag())
    }

    /// `i cos(theta) + j sin(theta)`.
    pub fn in_ij_plane(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c, s, 0.0)
    }

    #[inline]
    pub fn dot(self, b: Self) -> f64 {
        self.x1 * b.x1 + self.x2 * b.x2 + self.x3 * b.x3
    }

    #[inline]
    pub fn cross(self, b: Self) -> Self {
        Self::new(
            self.x2 * b.x3 - self.x3 * b.x2,
            self.x3 * b.x1 - self.x1 * b.x3,
            self.x1 * b.x2 - self.x2 * b.x1,
        )
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    #[inline]
    pub fn scale(self, s: f64) -> Self {
        Self::new(s * self.x1, s * self.x2, s * self.x3)
    }

    pub fn normalized(self) -> Result<Self> {
        let n = self.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::Degenerate(format!("cannot normalize vector {self:?}")));
        }
        Ok(self.scale(1.0 / n))
    }

    /// Some unit vector orthogonal to `self` (which must be nonzero).
    pub fn any_orthogonal(self) -> Self {
        let trial = if self.x1.abs() < 0.9 { Self::I } else { Self::J };
        let v = self.cross(trial);
        v.scale(1.0 / v.norm())
    }

    pub fn max_abs(self) -> f64 {
        self.x1.abs().max(self.x2.abs()).max(self.x3.abs())
    }
}

impl Add for PureImaginary {
    type Output = Self;
    #[inline]
    fn add(self, b: Self) -> Self {
        Self::new(self.x1 + b.x1, self.x2 + b.x2, self.x3 + b.x3)
    }
}

impl Sub for PureImaginary {
    type Output = Self;
    #[inline]
    fn sub(self, b: Self) -> Self {
        Self::new(self.x1 - b.x1, self.x2 - b.x2, self.x3 - b.x3)
    }
}

impl Neg for PureImaginary {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x1, -self.x2, -self.x3)
    }
}

impl Mul<f64> for PureImaginary {
    type Output = Self;
    #[inline]
    fn mul(self, s: f64) -> Self {
        self.scale(s)
    }
}

#[inline]
pub fn mul(a: Quaternion, b: Quaternion) -> Quaternion {
    a * b
}

#[inline]
pub fn inner(a: Quaternion, b: Quaternion) -> f64 {
    a.inner(b)
}

/// `cos(s) + c sin(s)` for a unit axis `c`.
pub fn exp_pure(c: PureImaginary, s: f64) -> Result<UnitQuaternion> {
    let n = c.norm();
    if (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::NotUnit { norm: n });
    }
    let (sn, cs) = s.sin_cos();
    Ok(UnitQuaternion::new_unchecked(Quaternion::new(
        cs,
        sn * c.x1,
        sn * c.x2,
        sn * c.x3,
    )))
}

/// `f_u(x) = conj(u) x u`. This is the covering map with `f_v . f_u = f_{uv}`.
pub fn rotate(u: UnitQuaternion, x: PureImaginary) -> PureImaginary {
    let q = u.quaternion();
    (q.conj() * x.to_quaternion() * q).imag()
}

/// Max-norm residual of `(xy - yx) - 2 (x cross y)`.
pub fn cross_check(x: PureImaginary, y: PureImaginary) -> f64 {
    let xq = x.to_quaternion();
    let yq = y.to_quaternion();
    let commutator = xq * yq - yq * xq;
    let expected = x.cross(y).scale(2.0).to_quaternion();
    commutator.max_abs_diff(expected)
}

/// Matrix of `f_u` with columns `f_u(i), f_u(j), f_u(k)`.
pub fn rotation_matrix(u: UnitQuaternion) -> [[f64; 3]; 3] {
    let ci = rotate(u, PureImaginary::I);
    let cj = rotate(u, PureImaginary::J);
    let ck = rotate(u, PureImaginary::K);
    [
        [ci.x1, cj.x1, ck.x1],
        [ci.x2, cj.x2, ck.x2],
        [ci.x3, cj.x3, ck.x3],
    ]
}

/// One of the two unit quaternions `u` with `rotation_matrix(u) = m`.
///
/// `m` must be special orthogonal; the result is accurate to the
/// orthogonality of the input.
pub fn from_rotation_matrix(m: [[f64; 3]; 3]) -> UnitQuaternion {
    // f_u(x) = conj(u) x u is the usual q x conj(q) rotation with q = conj(u).
    let trace = m[0][0] + m[1][1] + m[2][2];
    let q = if trace > 0.0 {
        let s = (trace + 1.0).sqrt() * 2.0;
        Quaternion::new(
            0.25 * s,
            (m[2][1] - m[1][2]) / s,
            (m[0][2] - m[2][0]) / s,
            (m[1][0] - m[0][1]) / s,
        )
    } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
        let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
        Quaternion::new(
            (m[2][1] - m[1][2]) / s,
            0.25 * s,
            (m[0][1] + m[1][0]) / s,
            (m[0][2] + m[2][0]) / s,
        )
    } else if m[1][1] > m[2][2] {
        let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
        Quaternion::new(
            (m[0][2] - m[2][0]) / s,
            (m[0][1] + m[1][0]) / s,
            0.25 * s,
            (m[1][2] + m[2][1]) / s,
        )
    } else {
        let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
        Quaternion::new(
            (m[1][0] - m[0][1]) / s,
            (m[0][2] + m[2][0]) / s,
            (m[1][2] + m[2][1]) / s,
            0.25 * s,
        )
    };
    let q = q.scale(1.0 / q.norm());
    UnitQuaternion::new_unchecked(q.conj())
}
