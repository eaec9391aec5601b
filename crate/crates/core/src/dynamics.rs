//! Flow engines: closed-form Reeb flows on `S3`, Hamiltonian fields for the
//! magnetic forms on `T*S2` and the quaternionic forms on `R4`, a projected RK4
//! integrator, and periodic-orbit detection.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cover::phi;
use crate::error::{Error, Result};
use crate::forms::{ContactFormSpec, MAX_DEFORMATION};
use crate::quat::{exp_pure, PureImaginary, Quaternion, UnitQuaternion};

/// Orbit of `R_c` through `u0`: `exp(c t/2) u0`.
pub fn reeb_flow_closed(c: PureImaginary, u0: UnitQuaternion, t: f64) -> Result<UnitQuaternion> {
    Ok(exp_pure(c, t / 2.0)? * u0)
}

/// Orbit of `R_{i,eps}` through `u0 = (z0, z1)`: `(e^{i(1+eps)t/2} z0, e^{i(1-eps)t/2} z1)`.
pub fn deformed_flow_closed(eps: f64, u0: UnitQuaternion, t: f64) -> Result<UnitQuaternion> {
    if !(0.0..=MAX_DEFORMATION).contains(&eps) {
        return Err(Error::DeformationOutOfRange { eps, max: MAX_DEFORMATION });
    }
    let (z0, z1) = u0.to_complex_pair();
    let w0 = Complex64::from_polar(1.0, 0.5 * (1.0 + eps) * t) * z0;
    let w1 = Complex64::from_polar(1.0, 0.5 * (1.0 - eps) * t) * z1;
    UnitQuaternion::from_complex_pair(w0, w1)
}

/// Orbit of the Reeb field of `spec` through `u0`.
///
/// Undeformed specs use [`reeb_flow_closed`]; deformed ones conjugate
/// [`deformed_flow_closed`] by the rotor of the axis.
pub fn contact_flow_closed(spec: &ContactFormSpec, u0: UnitQuaternion, t: f64) -> Result<UnitQuaternion> {
    if spec.eps() == 0.0 {
        return reeb_flow_closed(spec.axis(), u0, t);
    }
    let a = spec.rotor();
    Ok(a * deformed_flow_closed(spec.eps(), a.conj() * u0, t)?)
}

/// `F(conj(a) u)` with `a` the rotor of `spec`; preserved by the Reeb flow of every member of the family.
pub fn contact_flow_invariant(spec: &ContactFormSpec, u: Quaternion) -> f64 {
    let q = spec.rotor().quaternion().conj() * u;
    q.w * q.w + q.x * q.x - q.y * q.y - q.z * q.z
}

/// Symplectic forms carried by the flows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SymplecticFormSpec {
    /// `omega^theta = sin(theta) d lambda + cos(theta) d(rho alpha)` on `T*S2` minus the zero section.
    Theta(f64),
    /// `d lambda - s pi^* sigma0` on `T*S2`, magnetic strength `s`.
    Magnetic(f64),
    /// `d alpha^theta` on `R4`, with `alpha^theta` extended by linear coefficients.
    Quaternionic(f64),
}

impl SymplecticFormSpec {
    /// `theta` with `s = -cot(theta)`, in `(0, pi)`.
    pub fn theta_from_strength(s: f64) -> f64 {
        1f64.atan2(-s)
    }

    /// `-cot(theta)`, or `None` when `theta = 0 mod pi`.
    pub fn strength_from_theta(theta: f64) -> Option<f64> {
        let (sn, cs) = theta.sin_cos();
        (sn.abs() > 1e-12).then(|| -cs / sn)
    }

    pub fn dimension(&self) -> usize {
        match self {
            SymplecticFormSpec::Quaternionic(_) => 4,
            _ => 6,
        }
    }

    /// Value on two ambient vectors at `p`.
    pub fn eval(&self, p: &[f64], v: &[f64], w: &[f64]) -> f64 {
        match *self {
            SymplecticFormSpec::Theta(theta) => {
                let (sn, cs) = theta.sin_cos();
                sn * d_lambda(v, w) + cs * d_rho_alpha(p, v, w)
            }
            SymplecticFormSpec::Magnetic(s) => d_lambda(v, w) - s * base_area(p, v, w),
            SymplecticFormSpec::Quaternionic(theta) => {
                let c = PureImaginary::in_ij_plane(theta).to_quaternion();
                -4.0 * quat4(v).inner(c * quat4(w))
            }
        }
    }
}

fn v3(a: &[f64]) -> PureImaginary {
    PureImaginary::new(a[0], a[1], a[2])
}

fn quat4(a: &[f64]) -> Quaternion {
    Quaternion::new(a[0], a[1], a[2], a[3])
}

/// `d lambda(V, W) = <V_p, W_x> - <W_p, V_x>` on `T*S2 in R6`.
fn d_lambda(v: &[f64], w: &[f64]) -> f64 {
    v3(&v[3..]).dot(v3(&w[..3])) - v3(&w[3..]).dot(v3(&v[..3]))
}

/// `pi^* sigma0(V, W) = <x, V_x cross W_x>`.
fn base_area(p: &[f64], v: &[f64], w: &[f64]) -> f64 {
    v3(&p[..3]).dot(v3(&v[..3]).cross(v3(&w[..3])))
}

/// Exact `d` of `rho alpha = -<x cross p, p_dot> / |p|`.
fn d_rho_alpha(p: &[f64], v: &[f64], w: &[f64]) -> f64 {
    let (x, q) = (v3(&p[..3]), v3(&p[3..]));
    let r = q.norm();
    // derivative of the p-coefficient a_p = -(x cross p)/|p| along V
    let da = |t: &[f64]| {
        let (tx, tp) = (v3(&t[..3]), v3(&t[3..]));
        -(tx.cross(q) + x.cross(tp)).scale(1.0 / r) + x.cross(q).scale(q.dot(tp) / (r * r * r))
    };
    da(v).dot(v3(&w[3..])) - da(w).dot(v3(&v[3..]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianKind {
    /// `|p|^2 / 2` on `T*S2`.
    Kinetic,
    /// `|z0|^2 + |z1|^2` on `R4`.
    H0,
    /// `|z0|^2 - |z1|^2` on `R4`.
    F,
    /// `H0 + eps F`.
    HEps,
    /// `H_eps` composed with left multiplication by `conj(a)`, `a = (1 + k)/sqrt 2`.
    KEps,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub kind: HamiltonianKind,
    pub eps: f64,
    /// Use `H^2 / 2` in place of `H`.
    pub half_square: bool,
}

impl HamiltonianSpec {
    pub fn new(kind: HamiltonianKind, eps: f64) -> Self {
        Self { kind, eps, half_square: false }
    }

    pub fn kinetic() -> Self {
        Self::new(HamiltonianKind::Kinetic, 0.0)
    }

    pub fn half_squared(self) -> Self {
        Self { half_square: true, ..self }
    }

    pub fn dimension(&self) -> usize {
        match self.kind {
            HamiltonianKind::Kinetic => 6,
            _ => 4,
        }
    }

    fn base_value(&self, p: &[f64]) -> f64 {
        let f = |p: &[f64]| p[0] * p[0] + p[1] * p[1] - p[2] * p[2] - p[3] * p[3];
        let h0 = |p: &[f64]| p[..4].iter().map(|c| c * c).sum::<f64>();
        match self.kind {
            HamiltonianKind::Kinetic => 0.5 * p[3..6].iter().map(|c| c * c).sum::<f64>(),
            HamiltonianKind::H0 => h0(p),
            HamiltonianKind::F => f(p),
            HamiltonianKind::HEps => h0(p) + self.eps * f(p),
            HamiltonianKind::KEps => h0(p) + 2.0 * self.eps * (p[0] * p[3] + p[1] * p[2]),
        }
    }

    fn base_gradient(&self, p: &[f64]) -> Vec<f64> {
        let e = self.eps;
        match self.kind {
            HamiltonianKind::Kinetic => vec![0.0, 0.0, 0.0, p[3], p[4], p[5]],
            HamiltonianKind::H0 => p[..4].iter().map(|c| 2.0 * c).collect(),
            HamiltonianKind::F => vec![2.0 * p[0], 2.0 * p[1], -2.0 * p[2], -2.0 * p[3]],
            HamiltonianKind::HEps => vec![
                2.0 * (1.0 + e) * p[0],
                2.0 * (1.0 + e) * p[1],
                2.0 * (1.0 - e) * p[2],
                2.0 * (1.0 - e) * p[3],
            ],
            HamiltonianKind::KEps => vec![
                2.0 * p[0] + 2.0 * e * p[3],
                2.0 * p[1] + 2.0 * e * p[2],
                2.0 * p[2] + 2.0 * e * p[1],
                2.0 * p[3] + 2.0 * e * p[0],
            ],
        }
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        let h = self.base_value(p);
        if self.half_square {
            0.5 * h * h
        } else {
            h
        }
    }

    /// Ambient gradient, so `dH(v) = <gradient, v>`.
    pub fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let g = self.base_gradient(p);
        if self.half_square {
            let h = self.base_value(p);
            g.into_iter().map(|c| c * h).collect()
        } else {
            g
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal basis of the tangent space at `p`: all of `R4`, or the
/// four-dimensional tangent space of `T*S2` at `(x, p)`.
pub fn tangent_basis(p: &[f64]) -> Result<Vec<Vec<f64>>> {
    if p.len() == 4 {
        return Ok((0..4).map(|k| (0..4).map(|j| if j == k { 1.0 } else { 0.0 }).collect()).collect());
    }
    let (x, q) = (v3(&p[..3]), v3(&p[3..6]));
    let r = q.norm();
    if r < 1e-12 {
        return Err(Error::SingularSystem { pivot: r });
    }
    let y = q.scale(1.0 / r);
    let xy = x.cross(y);
    let z = PureImaginary::ZERO;
    let raw = [(z, y), (z, xy), (y, -x.scale(r)), (xy, z)];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(4);
    for (a, b) in raw {
        let mut v: Vec<f64> = a.to_array().into_iter().chain(b.to_array()).collect();
        for e in &basis {
            let c = dot(&v, e);
            v.iter_mut().zip(e).for_each(|(vi, ei)| *vi -= c * ei);
        }
        let n = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|vi| *vi /= n);
        basis.push(v);
    }
    Ok(basis)
}

fn check_dimensions(omega: &SymplecticFormSpec, h: &HamiltonianSpec, p: &[f64]) -> Result<()> {
    if omega.dimension() != h.dimension() || p.len() != omega.dimension() {
        return Err(Error::InvalidParameter(format!(
            "form acts on R{}, Hamiltonian on R{}, point has {} coordinates",
            omega.dimension(),
            h.dimension(),
            p.len()
        )));
    }
    Ok(())
}

/// Solves `omega(X, .) = -dH` on an orthonormal tangent basis at `p`.
pub fn hamiltonian_field(omega: &SymplecticFormSpec, h: &HamiltonianSpec, p: &[f64]) -> Result<Vec<f64>> {
    check_dimensions(omega, h, p)?;
    let basis = tangent_basis(p)?;
    let n = basis.len();
    let grad = h.gradient(p);
    let m = DMatrix::from_fn(n, n, |b, a| omega.eval(p, &basis[a], &basis[b]));
    let rhs = DVector::from_iterator(n, basis.iter().map(|e| -dot(&grad, e)));
    let sv = m.singular_values();
    let smallest = sv.min();
    if smallest < 1e-12 * sv.max().max(1.0) {
        return Err(Error::SingularSystem { pivot: smallest });
    }
    let c = m.lu().solve(&rhs).ok_or(Error::SingularSystem { pivot: smallest })?;
    let mut x = vec![0.0; p.len()];
    for (ca, e) in c.iter().zip(&basis) {
        x.iter_mut().zip(e).for_each(|(xi, ei)| *xi += ca * ei);
    }
    Ok(x)
}

/// `max_b |omega(X, e_b) + dH(e_b)|` over the tangent basis at `p`.
pub fn field_residual(omega: &SymplecticFormSpec, h: &HamiltonianSpec, p: &[f64], x: &[f64]) -> Result<f64> {
    check_dimensions(omega, h, p)?;
    let grad = h.gradient(p);
    Ok(tangent_basis(p)?
        .iter()
        .map(|e| (omega.eval(p, x, e) + dot(&grad, e)).abs())
        .fold(0.0, f64::max))
}

/// Constraint set an integration is projected back onto after every step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Manifold {
    Euclidean,
    /// Unit sphere in `R4`.
    S3,
    /// `{(x, p) : |x| = 1, <x, p> = 0}` in `R6`.
    CotangentS2,
    /// `{(x, y) : |x| = |y| = 1, <x, y> = 0}` in `R6`.
    UnitCotangentS2,
}

impl Manifold {
    pub fn residual(&self, p: &[f64]) -> f64 {
        match self {
            Manifold::Euclidean => 0.0,
            Manifold::S3 => (dot(p, p).sqrt() - 1.0).abs(),
            Manifold::CotangentS2 => {
                let (x, q) = (v3(&p[..3]), v3(&p[3..]));
                (x.norm() - 1.0).abs().max(x.dot(q).abs())
            }
            Manifold::UnitCotangentS2 => {
                let (x, y) = (v3(&p[..3]), v3(&p[3..]));
                (x.norm() - 1.0).abs().max((y.norm() - 1.0).abs()).max(x.dot(y).abs())
            }
        }
    }

    pub fn project(&self, p: &mut [f64]) {
        match self {
            Manifold::Euclidean => {}
            Manifold::S3 => {
                let n = dot(p, p).sqrt();
                p.iter_mut().for_each(|c| *c /= n);
            }
            Manifold::CotangentS2 | Manifold::UnitCotangentS2 => {
                let x = v3(&p[..3]);
                let x = x.scale(1.0 / x.norm());
                let q = v3(&p[3..]);
                let mut q = q - x.scale(x.dot(q));
                if *self == Manifold::UnitCotangentS2 {
                    q = q.scale(1.0 / q.norm());
                }
                p[..3].copy_from_slice(&x.to_array());
                p[3..].copy_from_slice(&q.to_array());
            }
        }
    }
}

/// States sampled along a run, with per-step audits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub flow: String,
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Constraint residual before projection.
    pub constraint_drift: Vec<f64>,
    /// `|E(state) - E(state_0)|` for the supplied conserved quantity, zero if none.
    pub energy_drift: Vec<f64>,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectories hold at least the initial state")
    }

    pub fn max_constraint_drift(&self) -> f64 {
        self.constraint_drift.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_energy_drift(&self) -> f64 {
        self.energy_drift.iter().copied().fold(0.0, f64::max)
    }
}

/// Post-projection residual above which a step is rejected.
pub const PROJECTION_TOLERANCE: f64 = 1e-9;
/// Pre-projection residual beyond which the state has left the tubular neighbourhood.
pub const TUBE_RADIUS: f64 = 1e-2;

/// Options for [`integrate`].
pub struct IntegrationOptions<'a> {
    pub flow: String,
    pub manifold: Manifold,
    pub energy: Option<&'a (dyn Fn(&[f64]) -> f64 + Sync)>,
}

/// Fixed-step RK4 over `[0, t_end]` with projection after every step.
///
/// The step count is `round(t_end / dt)` and the step is adjusted to land exactly on `t_end`.
pub fn integrate<F>(field: F, p0: &[f64], t_end: f64, dt: f64, opts: &IntegrationOptions) -> Result<Trajectory>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("step must be positive, got {dt}")));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!("end time must be nonnegative, got {t_end}")));
    }
    let steps = ((t_end / dt).round() as usize).max(if t_end > 0.0 { 1 } else { 0 });
    let h = if steps == 0 { dt } else { t_end / steps as f64 };
    let energy0 = opts.energy.map(|e| e(p0));
    let mut traj = Trajectory {
        flow: opts.flow.clone(),
        dt: h,
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        constraint_drift: Vec::with_capacity(steps + 1),
        energy_drift: Vec::with_capacity(steps + 1),
    };
    traj.times.push(0.0);
    traj.states.push(p0.to_vec());
    traj.constraint_drift.push(opts.manifold.residual(p0));
    traj.energy_drift.push(0.0);

    let axpy = |y: &[f64], k: &[f64], s: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    let mut y = p0.to_vec();
    for n in 1..=steps {
        let t = n as f64 * h;
        let fail = |y: &[f64], drift: f64| Error::ProjectionFailure { t, drift, last_good: y.to_vec() };
        let k1 = field(&y)?;
        let k2 = field(&axpy(&y, &k1, 0.5 * h))?;
        let k3 = field(&axpy(&y, &k2, 0.5 * h))?;
        let k4 = field(&axpy(&y, &k3, h))?;
        let mut next: Vec<f64> = (0..y.len())
            .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        let drift = opts.manifold.residual(&next);
        if !drift.is_finite() || drift > TUBE_RADIUS {
            return Err(fail(&y, drift));
        }
        opts.manifold.project(&mut next);
        let after = opts.manifold.residual(&next);
        if !(after <= PROJECTION_TOLERANCE) {
            return Err(fail(&y, after));
        }
        y = next;
        traj.times.push(t);
        traj.constraint_drift.push(drift);
        traj.energy_drift.push(match (opts.energy, energy0) {
            (Some(e), Some(e0)) => (e(&y) - e0).abs(),
            _ => 0.0,
        });
        traj.states.push(y.clone());
    }
    Ok(traj)
}

/// Hamiltonian flow of `|p|^2/2` for `omega^theta`, started at `Phi(u0)` with `|p| = 1`.
pub fn magnetic_trajectory(theta: f64, start: &[f64], t_end: f64, dt: f64) -> Result<Trajectory> {
    let omega = SymplecticFormSpec::Theta(theta);
    let h = HamiltonianSpec::kinetic();
    let energy = |p: &[f64]| h.value(p);
    let opts = IntegrationOptions {
        flow: format!("magnetic theta={theta}"),
        manifold: Manifold::CotangentS2,
        energy: Some(&energy),
    };
    integrate(|p| hamiltonian_field(&omega, &h, p), start, t_end, dt, &opts)
}

/// Hamiltonian flow of `|p|^2/2` for `d lambda - s pi^* sigma0` on `T*S2`.
pub fn magnetic_strength_trajectory(s: f64, start: &[f64], t_end: f64, dt: f64) -> Result<Trajectory> {
    let omega = SymplecticFormSpec::Magnetic(s);
    let h = HamiltonianSpec::kinetic();
    let energy = |p: &[f64]| h.value(p);
    let opts = IntegrationOptions {
        flow: format!("magnetic s={s}"),
        manifold: Manifold::CotangentS2,
        energy: Some(&energy),
    };
    integrate(|p| hamiltonian_field(&omega, &h, p), start, t_end, dt, &opts)
}

/// RK4 run of a Reeb field, audited against its closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactRun {
    pub trajectory: Trajectory,
    /// `|u(t_end) - closed form at t_end|`.
    pub closed_form_distance: f64,
    /// `|u(t_end) - u0|`.
    pub return_distance: f64,
}

/// Integrates the Reeb field of `spec` from `u0`; the energy column tracks [`contact_flow_invariant`].
pub fn contact_trajectory(spec: &ContactFormSpec, u0: UnitQuaternion, t_end: f64, dt: f64) -> Result<ContactRun> {
    let energy = |p: &[f64]| contact_flow_invariant(spec, Quaternion::new(p[0], p[1], p[2], p[3]));
    let c = spec.axis();
    let opts = IntegrationOptions {
        flow: format!("contact axis=({},{},{}) eps={}", c.x1, c.x2, c.x3, spec.eps()),
        manifold: Manifold::S3,
        energy: Some(&energy),
    };
    let field = |p: &[f64]| {
        let u = UnitQuaternion::new_normalize(Quaternion::new(p[0], p[1], p[2], p[3]))?;
        Ok(spec.reeb_ambient(u.quaternion()).to_array().to_vec())
    };
    let start = u0.quaternion().to_array();
    let trajectory = integrate(field, &start, t_end, dt, &opts)?;
    let end = Quaternion::from_array(trajectory.last().try_into().expect("four components"));
    let exact = contact_flow_closed(spec, u0, t_end)?.quaternion();
    Ok(ContactRun {
        closed_form_distance: (end - exact).norm(),
        return_distance: (end - u0.quaternion()).norm(),
        trajectory,
    })
}

/// Result of matching the Reeb flow of `alpha^theta` against the magnetic flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub theta: f64,
    /// Time scale with `Phi(reeb(lambda t)) ~ magnetic(t)`.
    pub lambda: f64,
    /// Sup-distance in `R6` after rescaling.
    pub mismatch: f64,
    /// Sup-distance at `lambda = 1`.
    pub mismatch_at_unit_scale: f64,
    /// True when `theta = 0 mod pi` and the magnetic side is the exact fibre rotation.
    pub fibre_limit: bool,
    pub samples: usize,
    pub energy_drift: f64,
}

/// Step used by [`correspondence_check`] for the magnetic side.
pub const CORRESPONDENCE_DT: f64 = 1e-3;

/// Fits `lambda` minimizing `sup_t |Phi(reeb_flow(theta, u0, lambda t)) - magnetic(t)|` over `[0, t_end]`.
pub fn correspondence_check(theta: f64, u0: UnitQuaternion, t_end: f64) -> Result<Correspondence> {
    if !(t_end > 0.0) {
        return Err(Error::InvalidParameter("end time must be positive".into()));
    }
    let axis = PureImaginary::in_ij_plane(theta);
    let p0 = phi(u0);
    let (x0, y0) = (p0.x(), p0.y());
    let fibre_limit = theta.sin().abs() < 1e-12;

    let (times, states, energy_drift): (Vec<f64>, Vec<[f64; 6]>, f64) = if fibre_limit {
        let sign = theta.cos().signum();
        let n = ((t_end / 0.01).round() as usize).max(1);
        let times: Vec<f64> = (0..=n).map(|k| t_end * k as f64 / n as f64).collect();
        let states = times
            .iter()
            .map(|&t| {
                let y = y0.scale(t.cos()) + y0.cross(x0).scale(sign * t.sin());
                [x0.x1, x0.x2, x0.x3, y.x1, y.x2, y.x3]
            })
            .collect();
        (times, states, 0.0)
    } else {
        let start: Vec<f64> = x0.to_array().into_iter().chain(y0.to_array()).collect();
        let traj = magnetic_trajectory(theta, &start, t_end, CORRESPONDENCE_DT)?;
        let stride = ((0.01 / traj.dt).round() as usize).max(1);
        let mut times = Vec::new();
        let mut states = Vec::new();
        for k in (0..traj.times.len()).step_by(stride) {
            let s = &traj.states[k];
            let q = v3(&s[3..]);
            let y = q.scale(1.0 / q.norm());
            times.push(traj.times[k]);
            states.push([s[0], s[1], s[2], y.x1, y.x2, y.x3]);
        }
        (times, states, traj.max_energy_drift())
    };

    let mismatch = |lambda: f64| -> f64 {
        times
            .iter()
            .zip(&states)
            .map(|(&t, s)| {
                let p = phi(reeb_flow_closed(axis, u0, lambda * t).expect("unit axis"));
                let r: [f64; 6] = {
                    let (x, y) = (p.x(), p.y());
                    [x.x1, x.x2, x.x3, y.x1, y.x2, y.x3]
                };
                r.iter().zip(s).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    };

    // coarse scan, then golden section around the best grid point
    let grid: Vec<f64> = (0..=600).map(|k| -3.0 + 0.01 * k as f64).collect();
    let values: Vec<f64> = grid.par_iter().map(|&l| mismatch(l)).collect();
    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("nonempty grid");
    let (lo, hi) = (grid[best.saturating_sub(1)], grid[(best + 1).min(grid.len() - 1)]);
    let lambda = golden_section(&mismatch, lo, hi, 1e-13);
    Ok(Correspondence {
        theta,
        lambda,
        mismatch: mismatch(lambda),
        mismatch_at_unit_scale: mismatch(1.0),
        fibre_limit,
        samples: times.len(),
        energy_drift,
    })
}

/// Minimizer of a unimodal `f` on `[a, b]`.
pub fn golden_section<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        c
    } else {
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub description: String,
    pub period: f64,
    /// Seeds assigned to this orbit, or `1` for analytic orbits.
    pub multiplicity: usize,
    /// A point on the orbit, when one is known.
    pub representative: Option<[f64; 4]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "count", rename_all = "snake_case")]
pub enum Verdict {
    Finite(usize),
    ResonantFamily,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionParameters {
    pub method: String,
    pub tolerance: f64,
    pub max_denominator: Option<u64>,
    pub seeds: Option<usize>,
    pub t_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitCensus {
    pub orbits: Vec<PeriodicOrbit>,
    pub detection: DetectionParameters,
    pub verdict: Verdict,
    /// Seeds (or weights) found on closed orbits.
    pub periodic_seeds: usize,
}

/// Operational irrationality: no `p/q` with `q <= MAX_DENOMINATOR` and
/// `|q x - p| <= RATIONAL_TOLERANCE`, allowing a few ulps of rounding in `x`.
///
/// The error is measured as `|q x - p|` because every irrational has convergents
/// with `|x - p/q| < 1/q^2`, which drops below `1e-12` before `q` reaches `10^6`.
pub const RATIONAL_TOLERANCE: f64 = 1e-12;
pub const MAX_DENOMINATOR: u64 = 1_000_000;
pub const CONTINUED_FRACTION_DEPTH: usize = 20;

/// Best rational approximation `p/q` of `x > 0` among the continued-fraction
/// convergents within tolerance, if any.
pub fn rational_approximation(x: f64) -> Option<(u64, u64)> {
    if !(x > 0.0) || !x.is_finite() {
        return None;
    }
    let (mut h0, mut h1) = (0u128, 1u128);
    let (mut k0, mut k1) = (1u128, 0u128);
    let mut r = x;
    for _ in 0..CONTINUED_FRACTION_DEPTH {
        let a = r.floor();
        if a > 1e12 {
            break;
        }
        let a_int = a as u128;
        let (h2, k2) = (a_int * h1 + h0, a_int * k1 + k0);
        if k2 > MAX_DENOMINATOR as u128 {
            break;
        }
        let tol = RATIONAL_TOLERANCE / k2 as f64 + 4.0 * f64::EPSILON * x;
        if (x - h2 as f64 / k2 as f64).abs() <= tol {
            return Some((h2 as u64, k2 as u64));
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a;
        if frac <= 0.0 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Closed Reeb orbits of the ellipsoid `sum a_i |z_i|^2 = 1`.
///
/// Weights are angular frequencies: the coordinate circle `z_i` has period `2 pi / a_i`.
pub fn periodic_census_ellipsoid(weights: &[f64]) -> Result<OrbitCensus> {
    if weights.is_empty() || weights.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
        return Err(Error::InvalidParameter("ellipsoid weights must be positive".into()));
    }
    let n = weights.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if rational_approximation(weights[j] / weights[i]).is_some() {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        match classes.iter_mut().find(|c| roots[c[0]] == roots[i]) {
            Some(c) => c.push(i),
            None => classes.push(vec![i]),
        }
    }
    let mut orbits = Vec::new();
    let mut resonant = false;
    for class in &classes {
        if class.len() == 1 {
            let i = class[0];
            let mut rep = [0.0; 4];
            if i < 2 {
                rep[2 * i] = 1.0 / weights[i].sqrt();
            }
            orbits.push(PeriodicOrbit {
                description: format!("coordinate circle z{i}"),
                period: TAU / weights[i],
                multiplicity: 1,
                representative: (i < 2).then_some(rep),
            });
        } else {
            resonant = true;
            let base = weights[class[0]];
            let lcm = class[1..].iter().fold(1u64, |l, &j| {
                let (_, q) = rational_approximation(weights[j] / base).expect("class members are rationally related");
                l / gcd(l, q) * q
            });
            let names: Vec<String> = class.iter().map(|i| format!("z{i}")).collect();
            orbits.push(PeriodicOrbit {
                description: format!("resonant family spanned by {}", names.join(", ")),
                period: TAU * lcm as f64 / base,
                multiplicity: class.len(),
                representative: None,
            });
        }
    }
    let verdict = if resonant { Verdict::ResonantFamily } else { Verdict::Finite(n) };
    Ok(OrbitCensus {
        periodic_seeds: n,
        orbits,
        detection: DetectionParameters {
            method: "continued fractions".into(),
            tolerance: RATIONAL_TOLERANCE,
            max_denominator: Some(MAX_DENOMINATOR),
            seeds: None,
            t_max: None,
        },
        verdict,
    })
}

/// Parameters for [`return_map_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// Total seeds; must be a perfect cube `m^3`, spread over the torus grid
    /// `(cos(eta) e^{i phi0}, sin(eta) e^{i phi1})`.
    pub seeds: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub delta: f64,
    pub sample_dt: f64,
    /// More clusters than this means a resonant family.
    pub max_isolated: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { seeds: 1000, t_min: 0.5, t_max: 200.0, delta: 1e-6, sample_dt: 0.01, max_isolated: 8 }
    }
}

/// Torus-grid seeds with `eta` spanning `[0, pi/2]` inclusive, so both coordinate circles are hit.
pub fn torus_seeds(per_axis: usize) -> Vec<UnitQuaternion> {
    let mut out = Vec::with_capacity(per_axis.pow(3));
    for a in 0..per_axis {
        let eta = if per_axis > 1 { 0.5 * PI * a as f64 / (per_axis - 1) as f64 } else { 0.0 };
        for b in 0..per_axis {
            let p0 = TAU * b as f64 / per_axis as f64;
            for c in 0..per_axis {
                let p1 = TAU * c as f64 / per_axis as f64;
                let z0 = Complex64::from_polar(eta.cos(), p0);
                let z1 = Complex64::from_polar(eta.sin(), p1);
                out.push(UnitQuaternion::from_complex_pair(z0, z1).expect("unit by construction"));
            }
        }
    }
    out
}

fn distance(a: UnitQuaternion, b: UnitQuaternion) -> f64 {
    (a.quaternion() - b.quaternion()).norm()
}

/// Smallest `t` in `[t_min, t_max]` with `|flow(u, t) - target| < delta`, refined by golden section.
fn first_approach<F>(flow: &F, u: UnitQuaternion, target: UnitQuaternion, cfg: &ScanConfig, t_min: f64) -> Option<(f64, f64)>
where
    F: Fn(UnitQuaternion, f64) -> UnitQuaternion,
{
    let d = |t: f64| distance(flow(u, t), target);
    let steps = ((cfg.t_max - t_min) / cfg.sample_dt).ceil() as usize;
    let at = |k: usize| t_min + k as f64 * cfg.sample_dt;
    let (mut d_prev, mut d_cur) = (d(at(0)), d(at(1)));
    if d_prev < cfg.delta {
        return Some((at(0), d_prev));
    }
    for k in 1..steps {
        let d_next = d(at(k + 1));
        // only minima that could dip below delta between samples are refined
        if d_cur <= d_prev && d_cur <= d_next && d_cur < 2.0 * cfg.sample_dt {
            let t = golden_section(&d, at(k - 1), at(k + 1), 1e-14);
            let v = d(t);
            if v < cfg.delta {
                return Some((t, v));
            }
        }
        d_prev = d_cur;
        d_cur = d_next;
    }
    None
}

/// Scans torus-grid seeds for closed orbits of `flow` and clusters them.
pub fn return_map_scan<F>(flow: F, cfg: &ScanConfig) -> Result<OrbitCensus>
where
    F: Fn(UnitQuaternion, f64) -> UnitQuaternion + Sync,
{
    let per_axis = (cfg.seeds as f64).cbrt().round() as usize;
    if per_axis.pow(3) != cfg.seeds || per_axis == 0 {
        return Err(Error::InvalidParameter(format!("seed count {} is not a perfect cube", cfg.seeds)));
    }
    if !(cfg.delta > 0.0 && cfg.sample_dt > 0.0 && cfg.t_max > cfg.t_min && cfg.t_min > 0.0) {
        return Err(Error::InvalidParameter("scan window and tolerances must be positive".into()));
    }
    let seeds = torus_seeds(per_axis);
    let periods: Vec<Option<f64>> = seeds
        .par_iter()
        .map(|&u| first_approach(&flow, u, u, cfg, cfg.t_min).map(|(t, _)| t))
        .collect();

    let mut clusters: Vec<PeriodicOrbit> = Vec::new();
    let mut reps: Vec<UnitQuaternion> = Vec::new();
    let mut periodic = 0;
    let mut overflow = false;
    for (u, period) in seeds.iter().zip(&periods) {
        let Some(period) = *period else { continue };
        periodic += 1;
        if overflow {
            continue;
        }
        let member = reps.iter().zip(&clusters).position(|(r, c)| {
            distance(*r, *u) < cfg.delta || {
                let orbit_cfg = ScanConfig { t_max: c.period + cfg.sample_dt, ..*cfg };
                first_approach(&flow, *r, *u, &orbit_cfg, cfg.sample_dt * 1e-3).is_some()
            }
        });
        match member {
            Some(i) => clusters[i].multiplicity += 1,
            None => {
                if clusters.len() == cfg.max_isolated {
                    overflow = true;
                    continue;
                }
                let (z0, z1) = u.to_complex_pair();
                clusters.push(PeriodicOrbit {
                    description: format!("closed orbit through |z0| = {:.6}, |z1| = {:.6}", z0.norm(), z1.norm()),
                    period,
                    multiplicity: 1,
                    representative: Some(u.quaternion().to_array()),
                });
                reps.push(*u);
            }
        }
    }
    let verdict = if overflow { Verdict::ResonantFamily } else { Verdict::Finite(clusters.len()) };
    Ok(OrbitCensus {
        orbits: clusters,
        detection: DetectionParameters {
            method: "return map scan".into(),
            tolerance: cfg.delta,
            max_denominator: None,
            seeds: Some(cfg.seeds),
            t_max: Some(cfg.t_max),
        },
        verdict,
        periodic_seeds: periodic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::reeb;
    use crate::quat::rotate;
    use crate::sampling::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn q4(u: UnitQuaternion) -> Vec<f64> {
        u.quaternion().to_array().to_vec()
    }

    #[test]
    fn reeb_flow_examples() {
        let u = UnitQuaternion::IDENTITY;
        assert_eq!(reeb_flow_closed(PureImaginary::I, u, 0.0).unwrap(), u);
        let back = reeb_flow_closed(PureImaginary::I, u, 4.0 * PI).unwrap();
        assert!(back.quaternion().max_abs_diff(Quaternion::ONE) < 1e-15);
        let half = reeb_flow_closed(PureImaginary::I, u, 2.0 * PI).unwrap();
        assert!(half.quaternion().max_abs_diff(-Quaternion::ONE) < 1e-15);
    }

    #[test]
    fn deformed_flow_examples() {
        let mut rng = rng_from_seed(30);
        for _ in 0..20 {
            let u = random_unit_quaternion(&mut rng);
            let t = 3.7;
            let a = deformed_flow_closed(0.0, u, t).unwrap();
            let b = reeb_flow_closed(PureImaginary::I, u, t).unwrap();
            assert!(distance(a, b) < 1e-15);
        }
        let eps = 0.4;
        let u = UnitQuaternion::IDENTITY;
        let t = 4.0 * PI / (1.0 + eps);
        assert!(distance(deformed_flow_closed(eps, u, t).unwrap(), u) < 1e-14);
        assert!(deformed_flow_closed(1.0, u, 1.0).is_err());
    }

    #[test]
    fn generic_deformed_orbit_does_not_close() {
        // phases (1 +- eps) t / 2 never agree mod 2 pi for irrational slope
        let eps = FRAC_1_SQRT_2;
        let u = UnitQuaternion::new_normalize(Quaternion::new(0.6, 0.0, 0.8, 0.0)).unwrap();
        let cfg = ScanConfig { t_max: 1000.0, ..ScanConfig::default() };
        let flow = |u, t| deformed_flow_closed(eps, u, t).unwrap();
        assert!(first_approach(&flow, u, u, &cfg, cfg.t_min).is_none());
    }

    #[test]
    fn deformed_flow_matches_reeb_field_numerically() {
        let eps = 0.3;
        let spec = ContactFormSpec::new(PureImaginary::I, eps).unwrap();
        let u0 = random_unit_quaternion(&mut rng_from_seed(31));
        let opts = IntegrationOptions { flow: "deformed".into(), manifold: Manifold::S3, energy: None };
        let field = |p: &[f64]| Ok(reeb(&spec, UnitQuaternion::new_normalize(quat4(p)).unwrap()).vector().to_array().to_vec());
        let traj = integrate(field, &q4(u0), 4.0 * PI, 1e-3, &opts).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states).step_by(97) {
            let exact = deformed_flow_closed(eps, u0, *t).unwrap();
            assert!(quat4(s).max_abs_diff(exact.quaternion()) < 1e-9);
        }
    }

    #[test]
    fn left_translation_conjugates_reeb_flows() {
        let mut rng = rng_from_seed(32);
        for _ in 0..20 {
            let a = random_unit_quaternion(&mut rng);
            let c = random_unit_vector(&mut rng);
            let u = random_unit_quaternion(&mut rng);
            let c2 = rotate(a.conj(), c);
            for k in 0..50 {
                let t = 4.0 * PI * k as f64 / 49.0;
                let lhs = a * reeb_flow_closed(c, u, t).unwrap();
                let rhs = reeb_flow_closed(c2, a * u, t).unwrap();
                assert!(distance(lhs, rhs) < 1e-10);
            }
        }
    }

    #[test]
    fn deformed_flow_commutes_with_antipode() {
        let mut rng = rng_from_seed(33);
        for _ in 0..20 {
            let u = random_unit_quaternion(&mut rng);
            let a = deformed_flow_closed(0.6, u.neg(), 2.3).unwrap();
            let b = deformed_flow_closed(0.6, u, 2.3).unwrap().neg();
            assert!(distance(a, b) < 1e-15);
        }
    }

    #[test]
    fn contact_flow_of_zero_deformation_is_reeb_flow() {
        let spec = ContactFormSpec::from_angle(0.0, 0.0).unwrap();
        let u = random_unit_quaternion(&mut rng_from_seed(34));
        assert_eq!(
            contact_flow_closed(&spec, u, 1.234).unwrap(),
            reeb_flow_closed(PureImaginary::I, u, 1.234).unwrap()
        );
    }

    #[test]
    fn contact_flow_preserves_invariant() {
        let mut rng = rng_from_seed(35);
        let spec = ContactFormSpec::from_angle(1.1, 0.45).unwrap();
        let u = random_unit_quaternion(&mut rng);
        let f0 = contact_flow_invariant(&spec, u.quaternion());
        for k in 0..20 {
            let v = contact_flow_closed(&spec, u, 0.7 * k as f64).unwrap();
            assert!((contact_flow_invariant(&spec, v.quaternion()) - f0).abs() < 1e-14);
        }
        let h = 1e-6;
        let g = |t| contact_flow_closed(&spec, u, t).unwrap().quaternion();
        let deriv = (g(0.5 + h) - g(0.5 - h)).scale(0.5 / h);
        let r = reeb(&spec, contact_flow_closed(&spec, u, 0.5).unwrap()).vector();
        assert!(deriv.max_abs_diff(r) < 1e-9);
    }

    #[test]
    fn strength_conversion_round_trips() {
        for theta in [0.2, PI / 4.0, PI / 2.0, 2.5] {
            let s = SymplecticFormSpec::strength_from_theta(theta).unwrap();
            assert!((SymplecticFormSpec::theta_from_strength(s) - theta).abs() < 1e-14);
        }
        assert_eq!(SymplecticFormSpec::strength_from_theta(0.0), None);
        assert!((SymplecticFormSpec::strength_from_theta(PI / 4.0).unwrap() + 1.0).abs() < 1e-15);
    }

    fn st_start(u: UnitQuaternion) -> Vec<f64> {
        let p = phi(u);
        p.x().to_array().into_iter().chain(p.y().to_array()).collect()
    }

    #[test]
    fn geodesic_field_at_right_angle() {
        let mut rng = rng_from_seed(36);
        let omega = SymplecticFormSpec::Theta(PI / 2.0);
        let h = HamiltonianSpec::kinetic();
        for _ in 0..50 {
            let p = st_start(random_unit_quaternion(&mut rng));
            let x = hamiltonian_field(&omega, &h, &p).unwrap();
            // x_dot = p, p_dot = -|p|^2 x
            let expected = [p[3], p[4], p[5], -p[0], -p[1], -p[2]];
            assert!(x.iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-12));
            assert!(dot(&h.gradient(&p), &x).abs() < 1e-12);
            assert!(field_residual(&omega, &h, &p, &x).unwrap() < 1e-11);
            assert!(omega.eval(&p, &x, &x).abs() < 1e-15);
        }
    }

    #[test]
    fn quaternionic_fields_match_closed_forms() {
        let mut rng = rng_from_seed(37);
        for _ in 0..50 {
            let u = random_quaternion(&mut rng);
            let p = u.to_array();
            let eps = 0.37;
            let x = hamiltonian_field(&SymplecticFormSpec::Quaternionic(0.0), &HamiltonianSpec::new(HamiltonianKind::HEps, eps), &p)
                .unwrap();
            let s0 = 0.5 * (1.0 + eps);
            let s1 = 0.5 * (1.0 - eps);
            let expected = [-s0 * p[1], s0 * p[0], -s1 * p[3], s1 * p[2]];
            assert!(x.iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-12));
            let theta = 0.9;
            let c = PureImaginary::in_ij_plane(theta).to_quaternion();
            let y = hamiltonian_field(&SymplecticFormSpec::Quaternionic(theta), &HamiltonianSpec::new(HamiltonianKind::H0, 0.0), &p)
                .unwrap();
            assert!(quat4(&y).max_abs_diff((c * u).scale(0.5)) < 1e-12);
        }
    }

    #[test]
    fn magnetic_forms_agree_on_unit_level() {
        // on tangent vectors of {|p| = 1}, omega^theta = sin(theta) omega_s with s = -cot(theta)
        let mut rng = rng_from_seed(38);
        let theta = 0.8;
        let s = SymplecticFormSpec::strength_from_theta(theta).unwrap();
        for _ in 0..50 {
            let u = random_unit_quaternion(&mut rng);
            let p = st_start(u);
            let v = random_st_tangent(&mut rng, phi(u));
            let w = random_st_tangent(&mut rng, phi(u));
            let vv: Vec<f64> = v.dx().to_array().into_iter().chain(v.dy().to_array()).collect();
            let ww: Vec<f64> = w.dx().to_array().into_iter().chain(w.dy().to_array()).collect();
            let a = SymplecticFormSpec::Theta(theta).eval(&p, &vv, &ww);
            let b = SymplecticFormSpec::Magnetic(s).eval(&p, &vv, &ww);
            assert!((a - theta.sin() * b).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_and_mismatched_inputs() {
        let h = HamiltonianSpec::kinetic();
        let zero_section = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!(matches!(
            hamiltonian_field(&SymplecticFormSpec::Theta(0.0), &h, &zero_section),
            Err(Error::SingularSystem { .. })
        ));
        assert!(hamiltonian_field(&SymplecticFormSpec::Quaternionic(0.0), &h, &[1.0; 4]).is_err());
    }

    #[test]
    fn integrate_zero_field_is_constant() {
        let opts = IntegrationOptions { flow: "zero".into(), manifold: Manifold::Euclidean, energy: None };
        let traj = integrate(|p| Ok(vec![0.0; p.len()]), &[1.0, 2.0], 1.0, 0.1, &opts).unwrap();
        assert_eq!(traj.states.len(), 11);
        assert!(traj.states.iter().all(|s| s == &[1.0, 2.0]));
        assert!(integrate(|p| Ok(p.to_vec()), &[1.0], 1.0, 0.0, &opts).is_err());
    }

    #[test]
    fn integrate_reports_projection_failure() {
        let opts = IntegrationOptions { flow: "radial".into(), manifold: Manifold::S3, energy: None };
        let err = integrate(|p| Ok(p.iter().map(|c| 10.0 * c).collect()), &[1.0, 0.0, 0.0, 0.0], 1.0, 0.1, &opts)
            .unwrap_err();
        match err {
            Error::ProjectionFailure { last_good, .. } => assert_eq!(last_good, vec![1.0, 0.0, 0.0, 0.0]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rk4_error_is_fourth_order() {
        let u0 = random_unit_quaternion(&mut rng_from_seed(39));
        let spec = ContactFormSpec::new(PureImaginary::I, 0.5).unwrap();
        let err = |dt: f64| {
            let opts = IntegrationOptions { flow: "deformed".into(), manifold: Manifold::Euclidean, energy: None };
            let field = |p: &[f64]| Ok(spec.reeb_ambient(quat4(p)).to_array().to_vec());
            let traj = integrate(field, &q4(u0), 10.0, dt, &opts).unwrap();
            quat4(traj.last()).max_abs_diff(deformed_flow_closed(0.5, u0, 10.0).unwrap().quaternion())
        };
        let ratio = err(0.2) / err(0.1);
        assert!((12.0..20.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn magnetic_energy_is_conserved() {
        let s = 1.0;
        let theta = SymplecticFormSpec::theta_from_strength(s);
        let start = st_start(random_unit_quaternion(&mut rng_from_seed(40)));
        let traj = magnetic_trajectory(theta, &start, 20.0, 1e-2).unwrap();
        assert!(traj.max_energy_drift() < 1e-8);
        assert!(traj.max_constraint_drift() < 1e-9);
    }

    #[test]
    fn correspondence_in_the_fibre_limit() {
        let u = random_unit_quaternion(&mut rng_from_seed(41));
        for theta in [0.0, PI] {
            let c = correspondence_check(theta, u, TAU).unwrap();
            assert!(c.fibre_limit);
            assert!((c.lambda - 1.0).abs() < 1e-9, "{c:?}");
            assert!(c.mismatch < 1e-12);
        }
    }

    #[test]
    fn correspondence_with_unit_time_scale() {
        let u = random_unit_quaternion(&mut rng_from_seed(42));
        for theta in [PI / 4.0, PI / 2.0, 3.0 * PI / 4.0] {
            let c = correspondence_check(theta, u, TAU).unwrap();
            assert!(!c.fibre_limit);
            assert!((c.lambda - 1.0).abs() < 1e-6, "{c:?}");
            assert!(c.mismatch < 1e-5, "{c:?}");
        }
    }

    #[test]
    fn contact_run_audits() {
        let spec = ContactFormSpec::from_angle(0.4, 0.3).unwrap();
        let u = random_unit_quaternion(&mut rng_from_seed(43));
        let run = contact_trajectory(&spec, u, 4.0 * PI / 0.7, 1e-3).unwrap();
        assert!(run.closed_form_distance < 1e-9);
        assert!(run.trajectory.max_energy_drift() < 1e-12);
        assert_eq!(run.trajectory.states.len(), run.trajectory.times.len());
    }

    #[test]
    fn magnetic_strength_run_conserves_energy() {
        let p = phi(random_unit_quaternion(&mut rng_from_seed(44)));
        let start: Vec<f64> = p.x().to_array().into_iter().chain(p.y().to_array()).collect();
        let traj = magnetic_strength_trajectory(0.8, &start, 5.0, 1e-3).unwrap();
        assert!(traj.max_energy_drift() < 1e-10);
        assert!(traj.max_constraint_drift() < 1e-9);
    }

    #[test]
    fn rational_detection() {
        assert_eq!(rational_approximation(1.5), Some((3, 2)));
        assert_eq!(rational_approximation(1.0), Some((1, 1)));
        assert_eq!(rational_approximation(2f64.sqrt()), None);
        assert_eq!(rational_approximation(PI), None);
        assert_eq!(rational_approximation(355.0 / 113.0), Some((355, 113)));
        assert_eq!(rational_approximation(999_999.0 / 1_000_000.0), Some((999_999, 1_000_000)));
        let roots = [1.0, 2f64, 3.0, 5.0, 7.0, 11.0, 13.0].map(f64::sqrt);
        for (i, a) in roots.iter().enumerate() {
            for b in &roots[i + 1..] {
                assert_eq!(rational_approximation(b / a), None, "{b}/{a}");
            }
        }
    }

    #[test]
    fn ellipsoid_census_examples() {
        let c = periodic_census_ellipsoid(&[1.0, 2f64.sqrt()]).unwrap();
        assert_eq!(c.verdict, Verdict::Finite(2));
        assert!((c.orbits[1].period - TAU / 2f64.sqrt()).abs() < 1e-15);
        let c = periodic_census_ellipsoid(&[1.0, 1.0]).unwrap();
        assert_eq!(c.verdict, Verdict::ResonantFamily);
        assert!((c.orbits[0].period - TAU).abs() < 1e-15);
        let c = periodic_census_ellipsoid(&[2.0, 3.0]).unwrap();
        assert_eq!(c.verdict, Verdict::ResonantFamily);
        assert!((c.orbits[0].period - TAU).abs() < 1e-15);
        let c = periodic_census_ellipsoid(&[1.0, 1.0, 2f64.sqrt()]).unwrap();
        assert_eq!(c.verdict, Verdict::ResonantFamily);
        assert_eq!(c.orbits.len(), 2);
        assert!(periodic_census_ellipsoid(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn seeds_cover_both_coordinate_circles() {
        let seeds = torus_seeds(10);
        assert_eq!(seeds.len(), 1000);
        let on_z0 = seeds.iter().filter(|u| u.to_complex_pair().1.norm() < 1e-15).count();
        let on_z1 = seeds.iter().filter(|u| u.to_complex_pair().0.norm() < 1e-15).count();
        assert_eq!((on_z0, on_z1), (100, 100));
    }

    #[test]
    fn small_scan_finds_two_circles() {
        let eps = FRAC_1_SQRT_2;
        let cfg = ScanConfig { seeds: 64, t_max: 60.0, ..ScanConfig::default() };
        let census = return_map_scan(|u, t| deformed_flow_closed(eps, u, t).unwrap(), &cfg).unwrap();
        assert_eq!(census.verdict, Verdict::Finite(2));
        let mut periods: Vec<f64> = census.orbits.iter().map(|o| o.period).collect();
        periods.sort_by(f64::total_cmp);
        assert!((periods[0] - 4.0 * PI / (1.0 + eps)).abs() < 1e-9);
        assert!((periods[1] - 4.0 * PI / (1.0 - eps)).abs() < 1e-9);
        assert!(return_map_scan(|u, _| u, &ScanConfig { seeds: 10, ..cfg }).is_err());
    }
}
