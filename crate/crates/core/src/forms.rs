//! Contact forms on `S3`, the structure forms on `ST*S2`, and exact exterior
//! derivatives for checking structure equations.
//!
//! Every form here has coefficients that are polynomial in the ambient point,
//! so `d` is evaluated in closed form from the ambient extension: for a
//! 1-form `beta_p(v) = a(p) . v` we use `d beta(v, w) = Da(p)[v] . w - Da(p)[w] . v`.
//! No finite differences are involved in the structure equations.

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::{PureImaginary, Quaternion, UnitQuaternion};

/// Deformations are restricted to `[0, MAX_DEFORMATION]`; the weight `2/(1-eps)` blows up at 1.
pub const MAX_DEFORMATION: f64 = 0.99;

/// Tolerance on the tangency and orthonormality constraints of inputs.
pub const TANGENCY_TOLERANCE: f64 = 1e-12;

/// Sign in `alpha = CONNECTION_SIGN * <x cross y, y_dot>` for the connection form on `ST*S2`.
///
/// Pinned to `-1` by `connection_sign_is_forced_by_structure_equations` below:
/// with this sign `d lambda1 = lambda2 ^ alpha`, `d lambda2 = alpha ^ lambda1`
/// and `d alpha = lambda1 ^ lambda2`, and the positive fibre rotation
/// `y -> y cross x` has `alpha = 1`. The opposite sign breaks all three.
pub const CONNECTION_SIGN: f64 = -1.0;

/// One member of the family `alpha_c`, `alpha^theta`, `alpha_{i,eps}`, `alpha^theta_eps`.
///
/// The deformed form for a general axis `c` is the push-forward of
/// `alpha_{i,eps}` under left multiplication by any unit `a` with
/// `a i conj(a) = c`; it does not depend on that choice because
/// `alpha_{i,eps}` is invariant under `l_{exp(i phi)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactFormSpec {
    axis: PureImaginary,
    eps: f64,
}

impl ContactFormSpec {
    pub fn new(axis: PureImaginary, eps: f64) -> Result<Self> {
        let n = axis.norm();
        if (n - 1.0).abs() > crate::quat::UNIT_TOLERANCE {
            return Err(Error::NotUnit { norm: n });
        }
        if !(0.0..=MAX_DEFORMATION).contains(&eps) {
            return Err(Error::DeformationOutOfRange { eps, max: MAX_DEFORMATION });
        }
        Ok(Self { axis, eps })
    }

    /// Undeformed `alpha_c`.
    pub fn standard(axis: PureImaginary) -> Result<Self> {
        Self::new(axis, 0.0)
    }

    /// `alpha^theta_eps` with axis `i cos(theta) + j sin(theta)`.
    pub fn from_angle(theta: f64, eps: f64) -> Result<Self> {
        Self::new(PureImaginary::in_ij_plane(theta), eps)
    }

    pub fn axis(&self) -> PureImaginary {
        self.axis
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Unit `a` with `a i conj(a) = axis`.
    pub fn rotor(&self) -> UnitQuaternion {
        UnitQuaternion::rotation_between(PureImaginary::I, self.axis)
            .expect("axis is a unit vector")
    }

    /// Value of the ambient linear extension at `p` on `v`.
    pub fn ambient(&self, p: Quaternion, v: Quaternion) -> f64 {
        if self.eps == 0.0 {
            return -2.0 * p.inner(self.axis.to_quaternion() * v);
        }
        let a = self.rotor().quaternion().conj();
        deformed_i_form(self.eps, a * p, a * v)
    }

    /// Ambient Reeb field; linear in `p`.
    pub fn reeb_ambient(&self, p: Quaternion) -> Quaternion {
        if self.eps == 0.0 {
            return (self.axis.to_quaternion() * p).scale(0.5);
        }
        let a = self.rotor().quaternion();
        a * deformed_i_reeb(self.eps, a.conj() * p)
    }

    /// `M` with `alpha_p(v) = p^T M v`.
    pub fn coefficient_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        for r in 0..4 {
            for c in 0..4 {
                m[(r, c)] = self.ambient(basis(r), basis(c));
            }
        }
        m
    }
}

fn basis(k: usize) -> Quaternion {
    let mut a = [0.0; 4];
    a[k] = 1.0;
    Quaternion::from_array(a)
}

/// `2/(1+eps) (x0 dy0 - y0 dx0) + 2/(1-eps) (x1 dy1 - y1 dx1)`.
fn deformed_i_form(eps: f64, p: Quaternion, v: Quaternion) -> f64 {
    2.0 / (1.0 + eps) * (p.w * v.x - p.x * v.w) + 2.0 / (1.0 - eps) * (p.y * v.z - p.z * v.y)
}

/// `(1+eps)/2 (x0 d/dy0 - y0 d/dx0) + (1-eps)/2 (x1 d/dy1 - y1 d/dx1)`.
fn deformed_i_reeb(eps: f64, p: Quaternion) -> Quaternion {
    let s0 = 0.5 * (1.0 + eps);
    let s1 = 0.5 * (1.0 - eps);
    Quaternion::new(-s0 * p.x, s0 * p.w, -s1 * p.z, s1 * p.y)
}

/// A tangent vector to `S3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct S3Tangent {
    base: UnitQuaternion,
    v: Quaternion,
}

impl S3Tangent {
    pub fn new(base: UnitQuaternion, v: Quaternion) -> Result<Self> {
        let residual = base.quaternion().inner(v);
        let tol = TANGENCY_TOLERANCE * v.norm().max(1.0);
        if residual.abs() > tol {
            return Err(Error::NotTangent { residual: residual.abs(), tolerance: tol });
        }
        Ok(Self { base, v })
    }

    pub fn base(&self) -> UnitQuaternion {
        self.base
    }

    pub fn vector(&self) -> Quaternion {
        self.v
    }
}

pub fn alpha_eval(spec: &ContactFormSpec, t: &S3Tangent) -> f64 {
    spec.ambient(t.base.quaternion(), t.v)
}

pub fn reeb(spec: &ContactFormSpec, u: UnitQuaternion) -> S3Tangent {
    let v = spec.reeb_ambient(u.quaternion());
    // exactly tangent up to roundoff; skip the check
    S3Tangent { base: u, v }
}

/// `d alpha(v, w)` from the coefficient matrix: `v^T (M - M^T) w`.
pub fn d_alpha_eval(
    spec: &ContactFormSpec,
    u: UnitQuaternion,
    v: &S3Tangent,
    w: &S3Tangent,
) -> Result<f64> {
    if v.base != u || w.base != u {
        return Err(Error::BasePointMismatch);
    }
    Ok(d_alpha_ambient(spec, v.v, w.v))
}

/// Same as [`d_alpha_eval`] without base-point bookkeeping; `d alpha` is constant on `R4`.
pub fn d_alpha_ambient(spec: &ContactFormSpec, v: Quaternion, w: Quaternion) -> f64 {
    if spec.eps == 0.0 {
        return -4.0 * v.inner(spec.axis.to_quaternion() * w);
    }
    let m = spec.coefficient_matrix();
    let vv = nalgebra::Vector4::from(v.to_array());
    let ww = nalgebra::Vector4::from(w.to_array());
    vv.dot(&((m - m.transpose()) * ww))
}

/// `(a ^ b)(v, w) = a(v) b(w) - a(w) b(v)`.
#[inline]
pub fn wedge(av: f64, aw: f64, bv: f64, bw: f64) -> f64 {
    av * bw - aw * bv
}

/// Residuals of `d alpha_i = alpha_j ^ alpha_k`, `d alpha_j = alpha_k ^ alpha_i`,
/// `d alpha_k = alpha_i ^ alpha_j` on the pair `(v, w)`.
pub fn structure_residuals(v: &S3Tangent, w: &S3Tangent) -> Result<[f64; 3]> {
    let u = v.base;
    let forms = [
        ContactFormSpec::standard(PureImaginary::I)?,
        ContactFormSpec::standard(PureImaginary::J)?,
        ContactFormSpec::standard(PureImaginary::K)?,
    ];
    let av: Vec<f64> = forms.iter().map(|f| alpha_eval(f, v)).collect();
    let aw: Vec<f64> = forms.iter().map(|f| alpha_eval(f, w)).collect();
    let mut out = [0.0; 3];
    for (idx, form) in forms.iter().enumerate() {
        let (p, q) = ((idx + 1) % 3, (idx + 2) % 3);
        let lhs = d_alpha_eval(form, u, v, w)?;
        let rhs = wedge(av[p], aw[p], av[q], aw[q]);
        out[idx] = (lhs - rhs).abs();
    }
    Ok(out)
}

/// A point `(x, y)` of `ST*S2 = {|x| = |y| = 1, <x, y> = 0}`; `y` is the covector `<y, .>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct STPoint {
    x: PureImaginary,
    y: PureImaginary,
}

impl STPoint {
    pub fn new(x: PureImaginary, y: PureImaginary) -> Result<Self> {
        let residual = (x.norm() - 1.0)
            .abs()
            .max((y.norm() - 1.0).abs())
            .max(x.dot(y).abs());
        if residual > TANGENCY_TOLERANCE {
            return Err(Error::OffManifold { residual });
        }
        Ok(Self { x, y })
    }

    /// Orthonormalizes `(x, y)` onto `ST*S2`.
    pub fn project(x: PureImaginary, y: PureImaginary) -> Result<Self> {
        let x = x.normalized()?;
        let y = (y - x.scale(x.dot(y))).normalized()?;
        Ok(Self { x, y })
    }

    pub(crate) fn new_unchecked(x: PureImaginary, y: PureImaginary) -> Self {
        Self { x, y }
    }

    pub fn x(&self) -> PureImaginary {
        self.x
    }

    pub fn y(&self) -> PureImaginary {
        self.y
    }

    /// Positive fibre direction at this point: `y_dot = y cross x`.
    pub fn fibre_rotation(&self) -> STTangent {
        STTangent {
            base: *self,
            dx: PureImaginary::ZERO,
            dy: self.y.cross(self.x),
        }
    }

    pub fn distance(&self, other: &STPoint) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx.dot(dx) + dy.dot(dy)).sqrt()
    }
}

/// A tangent vector `(x_dot, y_dot)` to `ST*S2` at `base`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct STTangent {
    base: STPoint,
    dx: PureImaginary,
    dy: PureImaginary,
}

impl STTangent {
    pub fn new(base: STPoint, dx: PureImaginary, dy: PureImaginary) -> Result<Self> {
        let residual = st_tangent_residual(&base, dx, dy);
        let tol = TANGENCY_TOLERANCE * dx.norm().max(dy.norm()).max(1.0);
        if residual > tol {
            return Err(Error::NotTangent { residual, tolerance: tol });
        }
        Ok(Self { base, dx, dy })
    }

    pub(crate) fn new_unchecked(base: STPoint, dx: PureImaginary, dy: PureImaginary) -> Self {
        Self { base, dx, dy }
    }

    pub fn base(&self) -> STPoint {
        self.base
    }

    pub fn dx(&self) -> PureImaginary {
        self.dx
    }

    pub fn dy(&self) -> PureImaginary {
        self.dy
    }
}

/// Max of the three linearized constraints `<x, x_dot>`, `<y, y_dot>`, `<x, y_dot> + <y, x_dot>`.
pub fn st_tangent_residual(base: &STPoint, dx: PureImaginary, dy: PureImaginary) -> f64 {
    base.x
        .dot(dx)
        .abs()
        .max(base.y.dot(dy).abs())
        .max((base.x.dot(dy) + base.y.dot(dx)).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StructureForm {
    Lambda1,
    Lambda2,
    Connection,
}

/// `lambda1 = <y, x_dot>`, `lambda2 = <x cross y, x_dot>`,
/// `alpha = CONNECTION_SIGN <x cross y, y_dot>`.
pub fn liouville_cartan(which: StructureForm, t: &STTangent) -> f64 {
    st_form_ambient(which, t.base.x, t.base.y, t.dx, t.dy)
}

fn st_form_ambient(
    which: StructureForm,
    x: PureImaginary,
    y: PureImaginary,
    dx: PureImaginary,
    dy: PureImaginary,
) -> f64 {
    match which {
        StructureForm::Lambda1 => y.dot(dx),
        StructureForm::Lambda2 => x.cross(y).dot(dx),
        StructureForm::Connection => CONNECTION_SIGN * x.cross(y).dot(dy),
    }
}

/// Exact `d` of the ambient extension on `R6`, evaluated on two tangent vectors at the same base.
pub fn d_liouville_cartan(which: StructureForm, v: &STTangent, w: &STTangent) -> Result<f64> {
    if v.base != w.base {
        return Err(Error::BasePointMismatch);
    }
    let (x, y) = (v.base.x, v.base.y);
    Ok(match which {
        // coefficient (a_x, a_y) = (y, 0)
        StructureForm::Lambda1 => v.dy.dot(w.dx) - w.dy.dot(v.dx),
        // coefficient (x cross y, 0); derivative along (a, b) is a cross y + x cross b
        StructureForm::Lambda2 => {
            let dv = v.dx.cross(y) + x.cross(v.dy);
            let dw = w.dx.cross(y) + x.cross(w.dy);
            dv.dot(w.dx) - dw.dot(v.dx)
        }
        // coefficient (0, s x cross y)
        StructureForm::Connection => {
            let dv = v.dx.cross(y) + x.cross(v.dy);
            let dw = w.dx.cross(y) + x.cross(w.dy);
            CONNECTION_SIGN * (dv.dot(w.dy) - dw.dot(v.dy))
        }
    })
}

/// Residuals of `d lambda1 = lambda2 ^ alpha`, `d lambda2 = alpha ^ lambda1`,
/// `d alpha = lambda1 ^ lambda2`.
pub fn st_structure_residuals(v: &STTangent, w: &STTangent) -> Result<[f64; 3]> {
    use StructureForm::*;
    let ev = |f, t: &STTangent| liouville_cartan(f, t);
    let pairs = [(Lambda1, Lambda2, Connection), (Lambda2, Connection, Lambda1), (Connection, Lambda1, Lambda2)];
    let mut out = [0.0; 3];
    for (idx, (lhs, a, b)) in pairs.into_iter().enumerate() {
        let d = d_liouville_cartan(lhs, v, w)?;
        let rhs = wedge(ev(a, v), ev(a, w), ev(b, v), ev(b, w));
        out[idx] = (d - rhs).abs();
    }
    Ok(out)
}

/// Finite-difference Lie derivative `(L_X beta)(v)` at `p`.
///
/// Evaluates `((phi_h^* beta) - (phi_{-h}^* beta))(v) / 2h`, where the flow `phi`
/// of `field` is integrated with RK4 and its differential along `v` is a
/// central difference with step `1e-5`. Both `form` and `field` act on ambient
/// coordinates; `form(p, v)` is the value of the form at `p` on `v`.
pub fn lie_derivative<Fm, Fd>(form: Fm, field: Fd, p: &[f64], v: &[f64], h: f64) -> Result<f64>
where
    Fm: Fn(&[f64], &[f64]) -> f64,
    Fd: Fn(&[f64]) -> Vec<f64>,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    let scale = p.iter().map(|c| c.abs()).fold(1.0, f64::max);
    if h < 1e-10 * scale {
        return Err(Error::StepUnderflow { step: h });
    }
    if p.len() != v.len() {
        return Err(Error::InvalidParameter("point and vector dimensions differ".into()));
    }
    let vnorm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    if vnorm == 0.0 {
        return Ok(0.0);
    }
    let delta = 1e-5 / vnorm;
    let pulled = |t: f64| {
        let plus: Vec<f64> = p.iter().zip(v).map(|(a, b)| a + delta * b).collect();
        let minus: Vec<f64> = p.iter().zip(v).map(|(a, b)| a - delta * b).collect();
        // difference the displacements, not the endpoints, to keep roundoff out of the push-forward
        let dp = rk4_displacement(&field, &plus, t, 4);
        let dm = rk4_displacement(&field, &minus, t, 4);
        let push: Vec<f64> = v
            .iter()
            .zip(dp.iter().zip(&dm))
            .map(|(vi, (a, b))| vi + (a - b) / (2.0 * delta))
            .collect();
        let moved: Vec<f64> = p.iter().zip(rk4_displacement(&field, p, t, 4)).map(|(a, b)| a + b).collect();
        form(&moved, &push)
    };
    Ok((pulled(h) - pulled(-h)) / (2.0 * h))
}

/// `|(L_X beta)(v)|`, see [`lie_derivative`].
pub fn lie_derivative_residual<Fm, Fd>(form: Fm, field: Fd, p: &[f64], v: &[f64], h: f64) -> Result<f64>
where
    Fm: Fn(&[f64], &[f64]) -> f64,
    Fd: Fn(&[f64]) -> Vec<f64>,
{
    lie_derivative(form, field, p, v, h).map(f64::abs)
}

/// `phi_t(p) - p` for the flow of `field`, by classical RK4 in `steps` equal steps
/// (negative `t` runs backwards).
pub(crate) fn rk4_displacement<F>(field: &F, p: &[f64], t: f64, steps: usize) -> Vec<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let dt = t / steps as f64;
    let mut acc = vec![0.0; p.len()];
    let at = |acc: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        p.iter().zip(acc.iter().zip(k)).map(|(a, (b, c))| a + b + s * c).collect()
    };
    let zero = vec![0.0; p.len()];
    for _ in 0..steps {
        let k1 = field(&at(&acc, &zero, 0.0));
        let k2 = field(&at(&acc, &k1, 0.5 * dt));
        let k3 = field(&at(&acc, &k2, 0.5 * dt));
        let k4 = field(&at(&acc, &k3, dt));
        for i in 0..acc.len() {
            acc[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    acc
}
