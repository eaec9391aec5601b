//! The double cover `Phi: S3 -> ST*S2`, the Hopf projection to `S2`,
//! latitude fitting and holonomy of loops on `S2`.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{
    alpha_eval, liouville_cartan, ContactFormSpec, S3Tangent, STPoint, STTangent, StructureForm,
};
use crate::quat::{exp_pure, rotate, PureImaginary, UnitQuaternion};

/// `Phi(u) = (conj(u) i u, conj(u) k u)`.
pub fn phi(u: UnitQuaternion) -> STPoint {
    STPoint::new_unchecked(rotate(u, PureImaginary::I), rotate(u, PureImaginary::K))
}

/// `dPhi_u(v) = (conj(v) i u + conj(u) i v, conj(v) k u + conj(u) k v)`.
pub fn d_phi(u: UnitQuaternion, v: &S3Tangent) -> Result<STTangent> {
    if v.base() != u {
        return Err(Error::BasePointMismatch);
    }
    let (p, w) = (u.quaternion(), v.vector());
    let part = |c: PureImaginary| {
        let c = c.to_quaternion();
        (w.conj() * c * p + p.conj() * c * w).imag()
    };
    Ok(STTangent::new_unchecked(phi(u), part(PureImaginary::I), part(PureImaginary::K)))
}

/// Which pull-back identity to test: `Phi^* lambda1 = alpha_j`,
/// `Phi^* lambda2 = alpha_k`, `Phi^* alpha = alpha_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pullback {
    Lambda1ToJ,
    Lambda2ToK,
    ConnectionToI,
}

impl Pullback {
    pub const ALL: [Pullback; 3] = [Pullback::Lambda1ToJ, Pullback::Lambda2ToK, Pullback::ConnectionToI];

    fn forms(self) -> (StructureForm, PureImaginary) {
        match self {
            Pullback::Lambda1ToJ => (StructureForm::Lambda1, PureImaginary::J),
            Pullback::Lambda2ToK => (StructureForm::Lambda2, PureImaginary::K),
            Pullback::ConnectionToI => (StructureForm::Connection, PureImaginary::I),
        }
    }
}

pub fn pullback_residual(which: Pullback, u: UnitQuaternion, v: &S3Tangent) -> Result<f64> {
    let (st, axis) = which.forms();
    let pushed = d_phi(u, v)?;
    let lhs = liouville_cartan(st, &pushed);
    let rhs = alpha_eval(&ContactFormSpec::standard(axis)?, v);
    Ok((lhs - rhs).abs())
}

/// Image of `u` on `S2` in the cartesian convention `conj(u) i u = x3 i - x2 j + x1 k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfPoint {
    pub cartesian: [f64; 3],
    /// `(x1 + i x2) / (1 + x3)`; `None` at the pole `x3 = -1`.
    pub stereographic: Option<Complex64>,
}

pub fn hopf_project(u: UnitQuaternion) -> HopfPoint {
    let x = rotate(u, PureImaginary::I);
    let cartesian = [x.x3, -x.x2, x.x1];
    let denom = 1.0 + cartesian[2];
    let stereographic = if denom > f64::EPSILON {
        Some(Complex64::new(cartesian[0], cartesian[1]) / denom)
    } else {
        None
    };
    HopfPoint { cartesian, stereographic }
}

/// `[z0 : z1]` as `z1 / z0`, or `None` when `z0 = 0`.
pub fn affine_chart(u: UnitQuaternion) -> Option<Complex64> {
    let (z0, z1) = u.to_complex_pair();
    (z0.norm() > 0.0).then(|| z1 / z0)
}

/// Result of fitting a circle of latitude to points on `S2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatitudeFit {
    pub axis: [f64; 3],
    /// Angular radius of the circle, measured from `axis`.
    pub angle: f64,
    pub rms: f64,
    /// Number of full turns, unsigned.
    pub winding: u32,
    /// `1` if the points turn counterclockwise about `axis`, `-1` if clockwise, `0` if they do not move.
    pub direction: i8,
}

fn to_vec(p: [f64; 3]) -> Vector3<f64> {
    Vector3::new(p[0], p[1], p[2])
}

/// Total-least-squares plane through `points`: returns (unit normal, offset along it).
fn fit_plane(points: &[Vector3<f64>]) -> (Vector3<f64>, f64) {
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let idx = eig.eigenvalues.imin();
    let normal = eig.eigenvectors.column(idx).into_owned().normalize();
    (normal, normal.dot(&centroid))
}

/// Fits a circle of latitude to `points` on `S2`.
///
/// The plane normal is oriented towards `pole` when given, otherwise so that
/// the first sample lies on its nonnegative side.
pub fn latitude_fit(points: &[[f64; 3]], pole: Option<[f64; 3]>) -> Result<LatitudeFit> {
    if points.len() < 8 {
        return Err(Error::InvalidParameter(format!(
            "latitude fit needs at least 8 points, got {}",
            points.len()
        )));
    }
    let pts: Vec<Vector3<f64>> = points.iter().map(|&p| to_vec(p)).collect();
    let spread = pts.iter().map(|p| (p - pts[0]).norm()).fold(0.0, f64::max);
    if spread < 1e-12 {
        return Ok(LatitudeFit { axis: points[0], angle: 0.0, rms: 0.0, winding: 0, direction: 0 });
    }
    let (mut normal, mut offset) = fit_plane(&pts);
    let flip = match pole {
        Some(q) => normal.dot(&to_vec(q)) < 0.0,
        None => normal.dot(&pts[0]) < 0.0,
    };
    if flip {
        normal = -normal;
        offset = -offset;
    }
    let rms = (pts.iter().map(|p| (normal.dot(p) - offset).powi(2)).sum::<f64>() / pts.len() as f64).sqrt();
    let angle = offset.clamp(-1.0, 1.0).acos();

    let e1 = {
        let seed = if normal.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        (seed - normal * normal.dot(&seed)).normalize()
    };
    let e2 = normal.cross(&e1);
    let mut total = 0.0;
    let mut prev = e2.dot(&pts[0]).atan2(e1.dot(&pts[0]));
    for p in &pts[1..] {
        let a = e2.dot(p).atan2(e1.dot(p));
        let mut d = a - prev;
        if d > PI {
            d -= TAU;
        } else if d < -PI {
            d += TAU;
        }
        total += d;
        prev = a;
    }
    let winding = (total.abs() / TAU).round() as u32;
    let direction = if total.abs() < 1e-12 { 0 } else { total.signum() as i8 };
    Ok(LatitudeFit { axis: [normal.x, normal.y, normal.z], angle, rms, winding, direction })
}

/// A closed curve `beta: [0, 2 pi] -> S2`, with a nominal sample count.
#[derive(Clone)]
pub struct LoopOnS2 {
    curve: Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>,
    samples: usize,
}

impl std::fmt::Debug for LoopOnS2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LoopOnS2").field("samples", &self.samples).finish_non_exhaustive()
    }
}

impl LoopOnS2 {
    pub const CLOSURE_TOLERANCE: f64 = 1e-10;

    pub fn new<F>(curve: F, samples: usize) -> Result<Self>
    where
        F: Fn(f64) -> [f64; 3] + Send + Sync + 'static,
    {
        if samples < 3 {
            return Err(Error::InvalidParameter("a loop needs at least 3 samples".into()));
        }
        let (a, b) = (to_vec(curve(0.0)), to_vec(curve(TAU)));
        let gap = (a - b).norm();
        if gap > Self::CLOSURE_TOLERANCE {
            return Err(Error::InvalidParameter(format!("loop is not closed: gap {gap:e}")));
        }
        for k in 0..samples {
            let r = to_vec(curve(TAU * k as f64 / samples as f64)).norm();
            if (r - 1.0).abs() > 1e-10 {
                return Err(Error::OffManifold { residual: (r - 1.0).abs() });
            }
        }
        Ok(Self { curve: Arc::new(curve), samples })
    }

    pub fn constant(p: [f64; 3]) -> Result<Self> {
        Self::new(move |_| p, 64)
    }

    /// Circle at angular distance `colatitude` from `pole`, counterclockwise about `pole`.
    pub fn latitude(pole: [f64; 3], colatitude: f64, samples: usize) -> Result<Self> {
        let n = to_vec(pole);
        if (n.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::NotUnit { norm: n.norm() });
        }
        let seed = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let e1 = (seed - n * n.dot(&seed)).normalize();
        let e2 = n.cross(&e1);
        let (s, c) = colatitude.sin_cos();
        Self::new(
            move |t| {
                let p = n * c + (e1 * t.cos() + e2 * t.sin()) * s;
                [p.x, p.y, p.z]
            },
            samples,
        )
    }

    pub fn eval(&self, t: f64) -> [f64; 3] {
        (self.curve)(t)
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn sample_points(&self) -> Vec<[f64; 3]> {
        (0..self.samples).map(|k| self.eval(TAU * k as f64 / self.samples as f64)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolonomyReport {
    /// Fibre displacement of the horizontal lift after one circuit, in `[0, 2 pi)`.
    pub displacement: f64,
    /// Signed area of the cone over the loop from its spherical centroid.
    pub cone_area: f64,
    /// `-cone_area` reduced to `[0, 2 pi)`.
    pub predicted: f64,
    /// Distance between `displacement` and `predicted` on the circle.
    pub mismatch: f64,
    pub steps: usize,
}

const HOLONOMY_TOLERANCE: f64 = 1e-9;
const MAX_HOLONOMY_STEPS: usize = 1 << 20;

/// Distance between two angles on `R / 2 pi Z`.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn transport(beta: &LoopOnS2, y0: Vector3<f64>, steps: usize) -> Vector3<f64> {
    let h = TAU / steps as f64;
    let fd = 1e-5;
    let point = |t: f64| to_vec(beta.eval(t));
    let velocity = |t: f64| (point(t + fd) - point(t - fd)) / (2.0 * fd);
    // y' = -<y, beta'> beta keeps y a unit covector at beta with alpha(lift) = 0
    let rhs = |t: f64, y: &Vector3<f64>| -point(t) * y.dot(&velocity(t));
    let mut y = y0;
    for n in 0..steps {
        let t = n as f64 * h;
        let k1 = rhs(t, &y);
        let k2 = rhs(t + 0.5 * h, &(y + k1 * (0.5 * h)));
        let k3 = rhs(t + 0.5 * h, &(y + k2 * (0.5 * h)));
        let k4 = rhs(t + h, &(y + k3 * h));
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        let x = point(t + h);
        y = (y - x * x.dot(&y)).normalize();
    }
    y
}

/// Holonomy of the connection `alpha` around `beta`, starting at `base` over `beta(0)`.
pub fn holonomy(beta: &LoopOnS2, base: &STPoint) -> Result<HolonomyReport> {
    let x0 = to_vec(base.x().to_array());
    if (x0 - to_vec(beta.eval(0.0))).norm() > 1e-10 {
        return Err(Error::BasePointMismatch);
    }
    let y0 = to_vec(base.y().to_array());
    let frame = y0.cross(&x0);
    let angle = |y: Vector3<f64>| frame.dot(&y).atan2(y0.dot(&y)).rem_euclid(TAU);

    let mut steps = beta.samples.max(16);
    let mut prev = angle(transport(beta, y0, steps));
    let displacement = loop {
        steps *= 2;
        if steps > MAX_HOLONOMY_STEPS {
            return Err(Error::Convergence(format!(
                "horizontal lift did not settle within {MAX_HOLONOMY_STEPS} steps"
            )));
        }
        let next = angle(transport(beta, y0, steps));
        if angle_distance(next, prev) < HOLONOMY_TOLERANCE {
            break next;
        }
        prev = next;
    };
    let cone_area = cone_area(beta)?;
    let predicted = (-cone_area).rem_euclid(TAU);
    let displacement = if TAU - displacement < 1e-12 { 0.0 } else { displacement };
    Ok(HolonomyReport {
        displacement,
        cone_area,
        predicted,
        mismatch: angle_distance(displacement, predicted),
        steps,
    })
}

fn cone_area_at(beta: &LoopOnS2, apex: Vector3<f64>, n: usize) -> f64 {
    let pts: Vec<Vector3<f64>> = (0..n).map(|k| to_vec(beta.eval(TAU * k as f64 / n as f64))).collect();
    (0..n)
        .map(|k| {
            let (a, b) = (pts[k], pts[(k + 1) % n]);
            let num = apex.dot(&a.cross(&b));
            let den = 1.0 + apex.dot(&a) + a.dot(&b) + b.dot(&apex);
            2.0 * num.atan2(den)
        })
        .sum()
}

/// Signed area of the geodesic cone over `beta` from its spherical centroid,
/// refined until successive doublings agree to `1e-11`.
pub fn cone_area(beta: &LoopOnS2) -> Result<f64> {
    let pts: Vec<Vector3<f64>> = beta.sample_points().iter().map(|&p| to_vec(p)).collect();
    let sum = pts.iter().fold(Vector3::zeros(), |a, p| a + p);
    let apex = if sum.norm() > 1e-8 * pts.len() as f64 {
        sum.normalize()
    } else {
        let (normal, _) = fit_plane(&pts);
        normal
    };
    // chord areas have an even error expansion in 1/n; Romberg on doublings
    let mut n = beta.samples.max(16);
    let mut row = vec![cone_area_at(beta, apex, n)];
    loop {
        n *= 2;
        if n > MAX_HOLONOMY_STEPS {
            return Err(Error::Convergence("cone area did not settle".into()));
        }
        let mut next = vec![cone_area_at(beta, apex, n)];
        let mut factor = 4.0;
        for prev in &row {
            let last = *next.last().expect("nonempty");
            next.push(last + (last - prev) / (factor - 1.0));
            factor *= 4.0;
        }
        let best = *next.last().expect("nonempty");
        let before = *row.last().expect("nonempty");
        if (best - before).abs() < 1e-11 {
            return Ok(best);
        }
        row = next;
    }
}

/// Holonomy of the latitude circle at `colatitude` about `pole`, from a base covector orthogonal to the start.
pub fn latitude_holonomy(pole: [f64; 3], colatitude: f64, samples: usize) -> Result<HolonomyReport> {
    let beta = LoopOnS2::latitude(pole, colatitude, samples)?;
    let x = PureImaginary::from_array(beta.eval(0.0));
    let base = STPoint::project(x, x.any_orthogonal())?;
    holonomy(&beta, &base)
}

/// Hopf image of the `alpha^theta` Reeb orbit through the rotor of `alpha^theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitProjection {
    pub theta: f64,
    pub fit: LatitudeFit,
    /// `max |stereographic radius - tan(theta/2)|` over the samples.
    pub radius_error: f64,
    pub expected_radius: f64,
}

/// Samples the period-`4 pi` orbit and fits its latitude about the north pole.
pub fn project_reeb_orbit(theta: f64, samples: usize) -> Result<OrbitProjection> {
    let spec = ContactFormSpec::from_angle(theta, 0.0)?;
    let a = spec.rotor();
    let orbit: Vec<UnitQuaternion> = (0..samples)
        .map(|k| exp_pure(spec.axis(), TAU * k as f64 / samples as f64).map(|e| e * a))
        .collect::<Result<_>>()?;
    let pts: Vec<[f64; 3]> = orbit.iter().map(|&u| hopf_project(u).cartesian).collect();
    let fit = latitude_fit(&pts, Some([0.0, 0.0, 1.0]))?;
    let expected_radius = (theta / 2.0).tan();
    let radius_error = orbit
        .iter()
        .map(|&u| hopf_project(u).stereographic.map_or(f64::INFINITY, |z| (z.norm() - expected_radius).abs()))
        .fold(0.0, f64::max);
    Ok(OrbitProjection { theta, fit, radius_error, expected_radius })
}
