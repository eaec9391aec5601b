//! Boothby-Wang lifts on the Hopf bundle, `CP^n` moment maps, and the
//! orbit-count arithmetic for Reeb flows and hypersurfaces.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate, return_map_scan, IntegrationOptions, Manifold, OrbitCensus, ScanConfig};
use crate::error::{Error, Result};
use crate::forms::{alpha_eval, lie_derivative_residual, ContactFormSpec, S3Tangent};
use crate::quat::{rotate, PureImaginary, Quaternion, UnitQuaternion};
use crate::sampling::{random_s3_tangent, random_unit_quaternion, rng_from_seed};

/// `H(x) = h0 + h1 <x, axis>` on `S2`; generates rotation about `axis`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseHamiltonian {
    pub h0: f64,
    pub h1: f64,
    pub axis: PureImaginary,
}

impl BaseHamiltonian {
    pub fn new(h0: f64, h1: f64) -> Self {
        Self { h0, h1, axis: PureImaginary::I }
    }

    pub fn about(h0: f64, h1: f64, axis: PureImaginary) -> Result<Self> {
        let n = axis.norm();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::NotUnit { norm: n });
        }
        Ok(Self { h0, h1, axis })
    }

    pub fn value(&self, x: PureImaginary) -> f64 {
        self.h0 + self.h1 * x.dot(self.axis)
    }

    pub fn min_value(&self) -> f64 {
        self.h0 - self.h1.abs()
    }

    /// `X` with `iota_X sigma0 = -dH`: `x cross grad H`.
    pub fn field(&self, x: PureImaginary) -> PureImaginary {
        x.cross(self.axis.scale(self.h1))
    }

    /// Period of the base rotation, `None` for `h1 = 0`.
    pub fn period(&self) -> Option<f64> {
        (self.h1 != 0.0).then(|| TAU / self.h1.abs())
    }
}

/// `X~ = H~ R_i + X_h` on `S3`, with `H~ = (H + shift) o pi` and `pi(u) = conj(u) i u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftedField {
    pub base: BaseHamiltonian,
    pub shift: f64,
}

pub fn build_lift(base: BaseHamiltonian, shift: f64) -> Result<LiftedField> {
    let lower_bound = base.min_value() + shift;
    if !(lower_bound > 0.0) {
        return Err(Error::NonPositiveHamiltonian { lower_bound });
    }
    Ok(LiftedField { base, shift })
}

fn q4(p: &[f64]) -> Quaternion {
    Quaternion::new(p[0], p[1], p[2], p[3])
}

impl LiftedField {
    pub fn base_point(&self, u: UnitQuaternion) -> PureImaginary {
        rotate(u, PureImaginary::I)
    }

    pub fn h_tilde(&self, u: UnitQuaternion) -> f64 {
        self.base.value(self.base_point(u)) + self.shift
    }

    /// Horizontal lift `c u`, `c = -(1/2) i cross (u X conj(u))`; `alpha_i(c u) = 0` and `dpi(c u) = X`.
    pub fn horizontal(&self, u: UnitQuaternion) -> Quaternion {
        let p = u.quaternion();
        let x = self.base.field(self.base_point(u));
        let moved = (p * x.to_quaternion() * p.conj()).imag();
        let c = PureImaginary::I.cross(moved).scale(-0.5);
        c.to_quaternion() * p
    }

    pub fn reeb(&self, u: UnitQuaternion) -> Quaternion {
        (Quaternion::I * u.quaternion()).scale(0.5)
    }

    pub fn field(&self, u: UnitQuaternion) -> Quaternion {
        self.reeb(u).scale(self.h_tilde(u)) + self.horizontal(u)
    }

    /// Degree-one homogeneous extension of a field on `S3` to `R4 minus 0`.
    fn extend(p: &[f64], f: impl Fn(UnitQuaternion) -> Quaternion) -> Vec<f64> {
        let q = q4(p);
        let r = q.norm();
        let u = UnitQuaternion::new_normalize(q).expect("nonzero point");
        f(u).scale(r).to_array().to_vec()
    }

    pub fn ambient_field(&self, p: &[f64]) -> Vec<f64> {
        Self::extend(p, |u| self.field(u))
    }

    pub fn ambient_horizontal(&self, p: &[f64]) -> Vec<f64> {
        Self::extend(p, |u| self.horizontal(u))
    }

    /// Exact flow of `X~ + extra R_i` through `u0`.
    ///
    /// In coordinates adapted to the axis the flow is the torus rotation
    /// `(e^{i w+ t} z0, e^{i w- t} z1)` with `w+- = (h0 + shift + extra +- h1)/2`.
    pub fn flow_closed(&self, u0: UnitQuaternion, t: f64, extra: f64) -> UnitQuaternion {
        let b = UnitQuaternion::rotation_between(PureImaginary::I, self.base.axis)
            .expect("unit axis")
            .conj();
        let (z0, z1) = (u0 * b.conj()).to_complex_pair();
        let level = self.base.h0 + self.shift + extra;
        let w0 = Complex64::from_polar(1.0, 0.5 * (level + self.base.h1) * t) * z0;
        let w1 = Complex64::from_polar(1.0, 0.5 * (level - self.base.h1) * t) * z1;
        UnitQuaternion::from_complex_pair(w0, w1).expect("unit") * b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosureCheck {
    /// Closing time on `S3`.
    pub s3_period: f64,
    pub s3_distance: f64,
    /// Closing time of the image in `ST*S2`.
    pub st_period: f64,
    pub st_distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusActionCheck {
    pub samples: usize,
    pub step: f64,
    /// `max |(L_{X~} alpha_i)(v)|`.
    pub lie_x_tilde: f64,
    /// `max |(L_R alpha_i)(v)|`.
    pub lie_reeb: f64,
    /// `max |[R_i, X_h]|`.
    pub bracket: f64,
    /// `max |alpha_i(X~) - H~|`.
    pub alpha_x_tilde: f64,
    /// `max |alpha_i(X_h)|`.
    pub alpha_horizontal: f64,
    pub closure: Option<ClosureCheck>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusCheckConfig {
    pub samples: usize,
    pub seed: u64,
    pub step: f64,
    pub dt: f64,
}

impl Default for TorusCheckConfig {
    fn default() -> Self {
        Self { samples: 1000, seed: 0, step: 1e-4, dt: 1e-3 }
    }
}

/// `[A, B] = DB . A - DA . B` with central-difference directional derivatives.
pub fn lie_bracket<A, B>(a: A, b: B, p: &[f64]) -> Vec<f64>
where
    A: Fn(&[f64]) -> Vec<f64>,
    B: Fn(&[f64]) -> Vec<f64>,
{
    let directional = |f: &dyn Fn(&[f64]) -> Vec<f64>, v: &[f64]| -> Vec<f64> {
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n == 0.0 {
            return vec![0.0; p.len()];
        }
        let d = 1e-6 / n;
        let plus: Vec<f64> = p.iter().zip(v).map(|(x, y)| x + d * y).collect();
        let minus: Vec<f64> = p.iter().zip(v).map(|(x, y)| x - d * y).collect();
        f(&plus).iter().zip(f(&minus)).map(|(x, y)| (x - y) / (2.0 * d)).collect()
    };
    let (va, vb) = (a(p), b(p));
    let db_a = directional(&b, &va);
    let da_b = directional(&a, &vb);
    db_a.iter().zip(da_b).map(|(x, y)| x - y).collect()
}

fn integer(x: f64) -> Option<i64> {
    ((x - x.round()).abs() < 1e-12).then(|| x.round() as i64)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Closing times when `h0 + shift +- h1` are integers `m+-`:
/// the `S3` orbit closes at `4 pi / gcd(m+, m-)`, its image in `ST*S2` at half that when both quotients are odd.
fn closure_times(lift: &LiftedField) -> Option<(f64, f64)> {
    let level = lift.base.h0 + lift.shift;
    let (mp, mm) = (integer(level + lift.base.h1)?, integer(level - lift.base.h1)?);
    let g = gcd(mp.unsigned_abs(), mm.unsigned_abs());
    if g == 0 {
        return None;
    }
    let s3 = 2.0 * TAU / g as f64;
    let odd = (mp / g as i64) % 2 != 0 && (mm / g as i64) % 2 != 0;
    Some((s3, if odd { s3 / 2.0 } else { s3 }))
}

fn alpha_i() -> ContactFormSpec {
    ContactFormSpec::standard(PureImaginary::I).expect("unit axis")
}

pub fn verify_torus_action(lift: &LiftedField, cfg: &TorusCheckConfig) -> Result<TorusActionCheck> {
    let mut rng = rng_from_seed(cfg.seed);
    let points: Vec<(UnitQuaternion, S3Tangent)> = (0..cfg.samples)
        .map(|_| {
            let u = random_unit_quaternion(&mut rng);
            (u, random_s3_tangent(&mut rng, u))
        })
        .collect();
    let alpha = alpha_i();
    let form = |p: &[f64], v: &[f64]| alpha.ambient(q4(p), q4(v));
    let reeb = |p: &[f64]| (Quaternion::I * q4(p)).scale(0.5).to_array().to_vec();

    let rows: Vec<[f64; 5]> = points
        .par_iter()
        .map(|(u, v)| -> Result<[f64; 5]> {
            let p = u.quaternion().to_array();
            let w = v.vector().to_array();
            let lx = lie_derivative_residual(form, |q| lift.ambient_field(q), &p, &w, cfg.step)?;
            let lr = lie_derivative_residual(form, reeb, &p, &w, cfg.step)?;
            let br = lie_bracket(reeb, |q| lift.ambient_horizontal(q), &p);
            let br = br.iter().map(|c| c * c).sum::<f64>().sqrt();
            let ax = (alpha_eval(&alpha, &S3Tangent::new(*u, lift.field(*u))?) - lift.h_tilde(*u)).abs();
            let ah = alpha_eval(&alpha, &S3Tangent::new(*u, lift.horizontal(*u))?).abs();
            Ok([lx, lr, br, ax, ah])
        })
        .collect::<Result<_>>()?;
    let max = |k: usize| rows.iter().map(|r| r[k]).fold(0.0, f64::max);

    let closure = match closure_times(lift) {
        Some((s3_period, st_period)) => {
            let u0 = random_unit_quaternion(&mut rng);
            let opts = IntegrationOptions { flow: "lifted".into(), manifold: Manifold::S3, energy: None };
            let field = |p: &[f64]| {
                let u = UnitQuaternion::new_normalize(q4(p))?;
                Ok(lift.field(u).to_array().to_vec())
            };
            let start = u0.quaternion().to_array();
            let full = integrate(field, &start, s3_period, cfg.dt, &opts)?;
            let half = integrate(field, &start, st_period, cfg.dt, &opts)?;
            let end = UnitQuaternion::new_normalize(q4(full.last()))?;
            let mid = UnitQuaternion::new_normalize(q4(half.last()))?;
            let (a, b) = (crate::cover::phi(mid), crate::cover::phi(u0));
            Some(ClosureCheck {
                s3_period,
                s3_distance: (end.quaternion() - u0.quaternion()).norm(),
                st_period,
                st_distance: a.distance(&b),
            })
        }
        None => None,
    };
    Ok(TorusActionCheck {
        samples: cfg.samples,
        step: cfg.step,
        lie_x_tilde: max(0),
        lie_reeb: max(1),
        bracket: max(2),
        alpha_x_tilde: max(3),
        alpha_horizontal: max(4),
        closure,
    })
}

/// Closed orbits of `X~ + eps R_i`, and whether each lies over a fixed point `+-axis` of the base rotation.
pub fn perturbed_census(lift: &LiftedField, eps: f64, cfg: &ScanConfig) -> Result<(OrbitCensus, bool)> {
    let census = return_map_scan(|u, t| lift.flow_closed(u, t, eps), cfg)?;
    let over_fixed = census.orbits.iter().all(|o| match o.representative {
        Some(r) => {
            let u = UnitQuaternion::new_normalize(Quaternion::from_array(r)).expect("unit representative");
            lift.base_point(u).cross(lift.base.axis).norm() < 1e-9
        }
        None => false,
    });
    Ok((census, over_fixed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftHolonomy {
    pub base_period: f64,
    /// Fibre displacement of the horizontal lift after one base period, in `[0, 2 pi)`.
    pub displacement: f64,
    /// `-base_period * H(q)` reduced to `[0, 2 pi)`.
    pub predicted: f64,
    pub mismatch: f64,
    /// Distance between the base points at the start and end.
    pub base_closure: f64,
}

/// Integrates `X_h` from `u0` over one period of the base rotation and reads off the fibre shift.
pub fn lift_holonomy(lift: &LiftedField, u0: UnitQuaternion, dt: f64) -> Result<LiftHolonomy> {
    let base_period = lift
        .base
        .period()
        .ok_or_else(|| Error::Degenerate("the base Hamiltonian is constant".into()))?;
    let opts = IntegrationOptions { flow: "horizontal".into(), manifold: Manifold::S3, energy: None };
    let field = |p: &[f64]| {
        let u = UnitQuaternion::new_normalize(q4(p))?;
        Ok(lift.horizontal(u).to_array().to_vec())
    };
    let traj = integrate(field, &u0.quaternion().to_array(), base_period, dt, &opts)?;
    let end = UnitQuaternion::new_normalize(q4(traj.last()))?;
    let shift = end.quaternion() * u0.quaternion().conj();
    let displacement = (2.0 * shift.x.atan2(shift.w)).rem_euclid(TAU);
    let q = lift.base_point(u0);
    let predicted = (-base_period * lift.base.value(q)).rem_euclid(TAU);
    Ok(LiftHolonomy {
        base_period,
        displacement,
        predicted,
        mismatch: crate::cover::angle_distance(displacement, predicted),
        base_closure: (lift.base_point(end) - q).norm(),
    })
}

/// Integer weights of a circle action on `CP^n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightVector(Vec<i64>);

impl WeightVector {
    /// Rejects zero, repeated, or non-coprime weights.
    pub fn new(w: Vec<i64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidParameter("need at least one weight".into()));
        }
        if w.contains(&0) {
            return Err(Error::InvalidParameter("weights must be nonzero".into()));
        }
        let mut sorted = w.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|p| p[0] == p[1]) {
            return Err(Error::InvalidParameter("weights must be pairwise distinct".into()));
        }
        if w.iter().fold(0u64, |g, x| gcd(g, x.unsigned_abs())) != 1 {
            return Err(Error::InvalidParameter("weights must have gcd 1".into()));
        }
        Ok(Self(w))
    }

    pub fn weights(&self) -> &[i64] {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }
}

/// `H([z0 : ... : zn]) = (1/2) sum_k w_k |z_k|^2 / sum_k |z_k|^2`.
///
/// Weights are converted to `f64`; the result loses relative precision once
/// `|w|` exceeds `2^40` but never overflows.
pub fn moment_value(w: &WeightVector, z: &[Complex64]) -> Result<f64> {
    if z.len() != w.n() + 1 {
        return Err(Error::InvalidParameter(format!(
            "expected {} homogeneous coordinates, got {}",
            w.n() + 1,
            z.len()
        )));
    }
    let den: f64 = z.iter().map(|c| c.norm_sqr()).sum();
    if den == 0.0 {
        return Err(Error::Degenerate("the zero vector is not a point of CP^n".into()));
    }
    let num: f64 = w.0.iter().zip(&z[1..]).map(|(&wk, c)| wk as f64 * c.norm_sqr()).sum();
    Ok(0.5 * num / den)
}

/// `n + 1 + a (n - 1)`.
pub fn fixed_point_count(n: u64, a: u64) -> u64 {
    n + 1 + a * (n - 1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ReebRealization {
    Feasible { a: u64, fixed_points: u64 },
    Infeasible { reason: String },
}

/// Smallest `a` with `n + 1 + a (n - 1) = k`.
pub fn realize_reeb(n: u64, k: u64) -> Result<ReebRealization> {
    if n < 2 {
        return Err(Error::InvalidParameter("realize_reeb needs n >= 2".into()));
    }
    let base = n + 1;
    if k < base {
        return Ok(ReebRealization::Infeasible { reason: format!("k = {k} is below the base count n + 1 = {base}") });
    }
    let step = n - 1;
    if !(k - base).is_multiple_of(step) {
        return Ok(ReebRealization::Infeasible {
            reason: format!("k - (n + 1) = {} is not a multiple of n - 1 = {step}", k - base),
        });
    }
    let a = (k - base) / step;
    Ok(ReebRealization::Feasible { a, fixed_points: fixed_point_count(n, a) })
}

/// Increments allowed for one step of a hypersurface plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStep {
    /// Laudenbach surgery through one existing orbit: `+ (4n - 1)`.
    SurgeryB,
    /// Laudenbach surgery away from closed orbits: `+ 4n`.
    SurgeryC,
    /// Hamiltonian plug: `-1` for `n >= 2`, `+1` for `n = 1`.
    Plug,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealizabilityPlan {
    pub n: u64,
    pub k: i64,
    pub base: i64,
    pub b: u64,
    pub c: u64,
    pub plugs: u64,
    pub feasible: bool,
    /// Orbit count after the base and after every step.
    pub trace: Vec<i64>,
    pub reason: Option<String>,
}

impl RealizabilityPlan {
    fn infeasible(n: u64, k: i64, reason: String) -> Self {
        Self { n, k, base: n as i64 + 1, b: 0, c: 0, plugs: 0, feasible: false, trace: Vec::new(), reason: Some(reason) }
    }

    pub fn steps(&self) -> Vec<PlanStep> {
        let mut s = vec![PlanStep::SurgeryB; self.b as usize];
        s.extend(std::iter::repeat_n(PlanStep::SurgeryC, self.c as usize));
        s.extend(std::iter::repeat_n(PlanStep::Plug, self.plugs as usize));
        s
    }

    /// Replays the steps and checks every count is attainable and the last equals `k`.
    pub fn verify(&self) -> bool {
        if !self.feasible {
            return true;
        }
        let n = self.n as i64;
        let mut count = n + 1;
        let mut trace = vec![count];
        for step in self.steps() {
            match step {
                PlanStep::SurgeryB => count += 4 * n - 1,
                PlanStep::SurgeryC => count += 4 * n,
                PlanStep::Plug if n == 1 => count += 1,
                PlanStep::Plug => {
                    // a plug destroys an existing isolated orbit
                    if count < 1 {
                        return false;
                    }
                    count -= 1;
                }
            }
            trace.push(count);
        }
        count == self.k && trace == self.trace
    }
}

/// `(b, c)` with `b (4n - 1) + c 4n = m`, fewest surgeries first, then smaller `b`.
fn surgeries(n: u64, m: u64) -> Option<(u64, u64)> {
    let (p, q) = (4 * n - 1, 4 * n);
    (0..=m / p)
        .filter(|b| (m - b * p).is_multiple_of(q))
        .map(|b| (b, (m - b * p) / q))
        .min_by_key(|&(b, c)| (b + c, b))
}

/// A plan for `k` closed characteristics on a hypersurface in `R^{2n+2}`.
///
/// Minimizes plugs, then surgeries, then `b`.
pub fn realize_hypersurface(n: u64, k: i64) -> Result<RealizabilityPlan> {
    if n < 1 {
        return Err(Error::InvalidParameter("realize_hypersurface needs n >= 1".into()));
    }
    let base = n as i64 + 1;
    if k < 0 {
        return Ok(RealizabilityPlan::infeasible(n, k, "negative orbit count".into()));
    }
    let (b, c, plugs) = if n == 1 {
        if k < 2 {
            return Ok(RealizabilityPlan::infeasible(n, k, "in dimension 3 every plan keeps at least n + 1 = 2 orbits".into()));
        }
        let target = (k - base) as u64;
        (0..=target)
            .find_map(|d| surgeries(n, target - d).map(|(b, c)| (b, c, d)))
            .expect("d = target always works")
    } else if k <= base {
        (0, 0, (base - k) as u64)
    } else {
        let target = (k - base) as u64;
        (0..)
            .find_map(|d| surgeries(n, target + d).map(|(b, c)| (b, c, d)))
            .expect("the semigroup has finite complement")
    };
    let mut plan = RealizabilityPlan { n, k, base, b, c, plugs, feasible: true, trace: Vec::new(), reason: None };
    let mut count = base;
    plan.trace.push(count);
    for step in plan.steps() {
        count += match step {
            PlanStep::SurgeryB => 4 * n as i64 - 1,
            PlanStep::SurgeryC => 4 * n as i64,
            PlanStep::Plug if n == 1 => 1,
            PlanStep::Plug => -1,
        };
        plan.trace.push(count);
    }
    debug_assert!(plan.verify());
    Ok(plan)
}

/// `16 n^2 - 11 n + 3`: from here on every count is reached without plugs.
pub fn threshold(n: u64) -> Result<u64> {
    if n < 2 {
        return Err(Error::InvalidParameter("threshold needs n >= 2".into()));
    }
    Ok(16 * n * n - 11 * n + 3)
}

/// Smallest `N` such that every integer `>= N` is `n + 1` plus an element of `<4n - 1, 4n>`, by sieving.
pub fn semigroup_onset(n: u64) -> u64 {
    let (p, q) = ((4 * n - 1) as usize, (4 * n) as usize);
    let limit = 2 * p * q + 2;
    let mut hit = vec![false; limit];
    hit[0] = true;
    for m in 1..limit {
        hit[m] = (m >= p && hit[m - p]) || (m >= q && hit[m - q]);
    }
    let last_gap = (0..limit).rev().find(|&m| !hit[m]);
    n + 1 + last_gap.map_or(0, |g| g as u64 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::phi;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn anti_diagonal(u: Quaternion) -> Quaternion {
        Quaternion::new(-u.x, u.w, u.z, -u.y).scale(0.5)
    }

    #[test]
    fn constant_hamiltonian_lifts_to_reeb_field() {
        let lift = build_lift(BaseHamiltonian::new(1.0, 0.0), 0.0).unwrap();
        let u = random_unit_quaternion(&mut rng_from_seed(60));
        assert!(lift.field(u).max_abs_diff(lift.reeb(u)) < 1e-16);
    }

    #[test]
    fn affine_hamiltonian_lifts_to_torus_generator() {
        let lift = build_lift(BaseHamiltonian::new(2.0, 1.0), 0.0).unwrap();
        let mut rng = rng_from_seed(61);
        for _ in 0..100 {
            let u = random_unit_quaternion(&mut rng);
            let expected = lift.reeb(u).scale(2.0) + anti_diagonal(u.quaternion());
            assert!(lift.field(u).max_abs_diff(expected) < 1e-15);
            let x = lift.base_point(u);
            let d = crate::cover::d_phi(u, &S3Tangent::new(u, lift.horizontal(u)).unwrap()).unwrap();
            assert!((d.dx() - lift.base.field(x)).max_abs() < 1e-14);
        }
    }

    #[test]
    fn lift_rejects_nonpositive_hamiltonian() {
        assert_eq!(
            build_lift(BaseHamiltonian::new(0.5, 1.0), 0.0),
            Err(Error::NonPositiveHamiltonian { lower_bound: -0.5 })
        );
        assert!(build_lift(BaseHamiltonian::new(0.5, 1.0), 1.0).is_ok());
    }

    #[test]
    fn closed_flow_matches_integration() {
        let axis = PureImaginary::new(0.3, -0.4, 0.5).normalized().unwrap();
        let lift = build_lift(BaseHamiltonian::about(1.7, 0.6, axis).unwrap(), 0.2).unwrap();
        let u0 = random_unit_quaternion(&mut rng_from_seed(62));
        let opts = IntegrationOptions { flow: "lifted".into(), manifold: Manifold::S3, energy: None };
        let extra = 0.3;
        let field = |p: &[f64]| {
            let u = UnitQuaternion::new_normalize(q4(p)).unwrap();
            Ok((lift.field(u) + lift.reeb(u).scale(extra)).to_array().to_vec())
        };
        let traj = integrate(field, &u0.quaternion().to_array(), 5.0, 1e-3, &opts).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states).step_by(250) {
            assert!(q4(s).max_abs_diff(lift.flow_closed(u0, *t, extra).quaternion()) < 1e-10);
        }
    }

    #[test]
    fn torus_action_small_sample() {
        let lift = build_lift(BaseHamiltonian::new(2.0, 1.0), 0.0).unwrap();
        let check = verify_torus_action(&lift, &TorusCheckConfig { samples: 50, ..Default::default() }).unwrap();
        assert!(check.lie_x_tilde < 1e-6, "{check:?}");
        assert!(check.lie_reeb < 1e-8);
        assert!(check.bracket < 1e-8);
        assert!(check.alpha_x_tilde < 1e-12 && check.alpha_horizontal < 1e-12);
        let closure = check.closure.unwrap();
        assert!((closure.s3_period - 4.0 * PI).abs() < 1e-15);
        assert!((closure.st_period - 2.0 * PI).abs() < 1e-15);
        assert!(closure.s3_distance < 1e-9 && closure.st_distance < 1e-9);
    }

    #[test]
    fn nonzero_bracket_is_detected() {
        let lift = build_lift(BaseHamiltonian::new(2.0, 1.0), 0.0).unwrap();
        let rj = |p: &[f64]| (Quaternion::J * q4(p)).scale(0.5).to_array().to_vec();
        let p = random_unit_quaternion(&mut rng_from_seed(63)).quaternion().to_array();
        let b = lie_bracket(rj, |q| lift.ambient_horizontal(q), &p);
        assert!(b.iter().map(|c| c.abs()).fold(0.0, f64::max) > 1e-3);
    }

    #[test]
    fn holonomy_matches_moment() {
        let lift = build_lift(BaseHamiltonian::new(2.0, 1.0), 0.0).unwrap();
        let mut rng = rng_from_seed(64);
        for _ in 0..5 {
            let u = random_unit_quaternion(&mut rng);
            let h = lift_holonomy(&lift, u, 1e-3).unwrap();
            assert!(h.mismatch < 1e-4, "{h:?}");
            assert!(h.base_closure < 1e-9);
        }
    }

    #[test]
    fn perturbed_flow_keeps_only_fixed_fibres() {
        let lift = build_lift(BaseHamiltonian::new(2.0, 1.0), 0.0).unwrap();
        let cfg = ScanConfig { seeds: 64, t_max: 40.0, ..ScanConfig::default() };
        let (census, over_fixed) = perturbed_census(&lift, FRAC_1_SQRT_2, &cfg).unwrap();
        assert_eq!(census.verdict, crate::dynamics::Verdict::Finite(2));
        assert!(over_fixed);
        let u = random_unit_quaternion(&mut rng_from_seed(65));
        let a = phi(lift.flow_closed(u, 2.0 * PI, 0.0));
        assert!(a.distance(&phi(u)) < 1e-12);
    }

    #[test]
    fn moment_examples() {
        let w = WeightVector::new(vec![1, 2]).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        assert_eq!(moment_value(&w, &[one, zero, zero]).unwrap(), 0.0);
        assert_eq!(moment_value(&w, &[zero, zero, one]).unwrap(), 1.0);
        let z = [Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.5), Complex64::new(0.7, -0.4)];
        let z2: Vec<Complex64> = z.iter().map(|c| c * 2.0).collect();
        assert!((moment_value(&w, &z).unwrap() - moment_value(&w, &z2).unwrap()).abs() < 1e-15);
        assert!(moment_value(&w, &[zero, zero, zero]).is_err());
        assert!(WeightVector::new(vec![2, 4]).is_err());
        assert!(WeightVector::new(vec![1, 1]).is_err());
        assert!(WeightVector::new(vec![0, 1]).is_err());
    }

    #[test]
    fn fixed_points_of_the_circle_action() {
        // critical points of H are the coordinate points
        let w = WeightVector::new(vec![1, -3, 2]).unwrap();
        for k in 0..4 {
            let mut z = vec![Complex64::new(0.0, 0.0); 4];
            z[k] = Complex64::new(1.0, 0.0);
            let h0 = moment_value(&w, &z).unwrap();
            for j in 0..4 {
                for dir in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
                    let mut zp = z.clone();
                    zp[j] += dir * 1e-4;
                    assert!((moment_value(&w, &zp).unwrap() - h0).abs() < 1e-7);
                }
            }
        }
        assert_eq!(fixed_point_count(2, 0), 3);
        assert_eq!(fixed_point_count(2, 4), 7);
        assert_eq!(fixed_point_count(1, 9), 2);
    }

    #[test]
    fn reeb_realization_examples() {
        assert_eq!(realize_reeb(2, 3).unwrap(), ReebRealization::Feasible { a: 0, fixed_points: 3 });
        assert_eq!(realize_reeb(2, 100).unwrap(), ReebRealization::Feasible { a: 97, fixed_points: 100 });
        assert_eq!(realize_reeb(3, 6).unwrap(), ReebRealization::Feasible { a: 1, fixed_points: 6 });
        assert!(matches!(realize_reeb(3, 5).unwrap(), ReebRealization::Infeasible { .. }));
        assert!(matches!(realize_reeb(2, 2).unwrap(), ReebRealization::Infeasible { .. }));
        assert!(realize_reeb(1, 5).is_err());
    }

    #[test]
    fn hypersurface_examples() {
        let p = realize_hypersurface(2, 3).unwrap();
        assert_eq!((p.b, p.c, p.plugs), (0, 0, 0));
        let p = realize_hypersurface(2, 45).unwrap();
        assert_eq!((p.b, p.c, p.plugs), (6, 0, 0));
        let p = realize_hypersurface(2, 0).unwrap();
        assert_eq!((p.b, p.c, p.plugs, p.trace.clone()), (0, 0, 3, vec![3, 2, 1, 0]));
        assert!(p.verify());
        assert!(!realize_hypersurface(1, 1).unwrap().feasible);
        assert!(!realize_hypersurface(2, -1).unwrap().feasible);
        let p = realize_hypersurface(1, 7).unwrap();
        assert_eq!((p.b, p.c, p.plugs), (0, 1, 1));
        assert!(p.verify());
    }

    #[test]
    fn plan_verification_catches_tampering() {
        let mut p = realize_hypersurface(3, 50).unwrap();
        assert!(p.verify());
        p.plugs += 1;
        assert!(!p.verify());
    }

    #[test]
    fn threshold_matches_semigroup() {
        assert_eq!(threshold(2).unwrap(), 45);
        assert_eq!(threshold(3).unwrap(), 114);
        for n in 2..=20 {
            let t = threshold(n).unwrap();
            assert_eq!(t, n + 1 + (4 * n - 2) * (4 * n - 1));
            assert_eq!(t, semigroup_onset(n));
        }
        assert!(threshold(1).is_err());
    }

    #[test]
    fn consecutive_surgery_counts() {
        for n in 1..=5u64 {
            let counts: Vec<u64> = (0..=4 * n - 2).map(|c| n + 1 + (4 * n - 2 - c) * (4 * n - 1) + c * 4 * n).collect();
            assert!(counts.windows(2).all(|w| w[1] == w[0] + 1));
            assert_eq!(counts[0], 16 * n * n - 11 * n + 3);
        }
    }
}
