//! The transformed Hamiltonian `K_eps`, homogeneity, fibrewise convexity and
//! the Randers form of the perturbation.

use nalgebra::Matrix2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::{from_rotation_matrix, rotate, PureImaginary, Quaternion, UnitQuaternion};
use crate::sampling::{random_st_point, random_unit_quaternion, rng_from_seed, RNG_NAME};

/// `H_eps(conj(a) p)` for `a = (1 + k)/sqrt 2`: `H0 + 2 eps (x0 y1 + y0 x1)`.
pub fn k_eps(eps: f64, p: [f64; 4]) -> f64 {
    let h0: f64 = p.iter().map(|c| c * c).sum();
    h0 + 2.0 * eps * (p[0] * p[3] + p[1] * p[2])
}

/// `H0 + eps F` on `R4`.
pub fn h_eps(eps: f64, p: [f64; 4]) -> f64 {
    let z0 = p[0] * p[0] + p[1] * p[1];
    let z1 = p[2] * p[2] + p[3] * p[3];
    z0 + z1 + eps * (z0 - z1)
}

/// The rotor `(1 + k)/sqrt 2` taking `i` to `j`.
pub fn right_angle_rotor() -> UnitQuaternion {
    UnitQuaternion::new_normalize(Quaternion::new(1.0, 0.0, 0.0, 1.0)).expect("nonzero")
}

/// Degree `d` with `f(s p) = s^d f(p)`, by least squares on `log |f(s p)|` against `log s` for `s` in `[0.5, 2]`.
pub fn homogeneity_degree<F: Fn(&[f64]) -> f64>(f: F, p: &[f64]) -> Result<f64> {
    let n = 33;
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let f0 = f(p);
    for k in 0..n {
        let ls = (0.5f64).ln() + (4.0f64).ln() * k as f64 / (n - 1) as f64;
        let s = ls.exp();
        let q: Vec<f64> = p.iter().map(|c| s * c).collect();
        let v = f(&q);
        if v == 0.0 || !v.is_finite() || v.signum() != f0.signum() {
            return Err(Error::Degenerate(format!("function vanishes or changes sign along the ray at s = {s}")));
        }
        xs.push(ls);
        ys.push(v.abs().ln());
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// A unit quaternion with `Phi(u) = (x, y)`.
pub fn phi_inverse(x: PureImaginary, y: PureImaginary) -> UnitQuaternion {
    let z = y.cross(x);
    from_rotation_matrix([[x.x1, z.x1, y.x1], [x.x2, z.x2, y.x2], [x.x3, z.x3, y.x3]])
}

/// `K_eps` as a function on `T*S2`: `|p| K_eps(u)` with `Phi(u) = (x, p/|p|)`.
///
/// Homogeneous of degree one in `p`; this is the dual Finsler norm.
pub fn cotangent_hamiltonian(eps: f64, x: PureImaginary, p: PureImaginary) -> f64 {
    let r = p.norm();
    if r == 0.0 {
        return 0.0;
    }
    let u = phi_inverse(x, p.scale(1.0 / r));
    r * k_eps(eps, u.quaternion().to_array())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinslerCheckConfig {
    pub eps: f64,
    pub fibres: usize,
    /// Covector directions sampled per fibre.
    pub directions: usize,
    pub floor: f64,
    pub seed: u64,
}

impl FinslerCheckConfig {
    pub fn new(eps: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::DeformationOutOfRange { eps, max: 1.0 });
        }
        Ok(Self { eps, fibres: 100, directions: 32, floor: 1e-8, seed: 0 })
    }
}

/// Step of the central-difference Hessian.
pub const HESSIAN_STEP: f64 = 1e-5;

/// Smallest Hessian eigenvalue of `G^2` on the cotangent plane at `x`, over unit covectors in `directions` directions.
pub fn fibre_min_eigenvalue(eps: f64, x: PureImaginary, directions: usize) -> f64 {
    let e1 = x.any_orthogonal();
    let e2 = x.cross(e1);
    let g2 = |a: f64, b: f64| {
        let g = cotangent_hamiltonian(eps, x, e1.scale(a) + e2.scale(b));
        g * g
    };
    let h = HESSIAN_STEP;
    (0..directions)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / directions as f64;
            let (a, b) = (t.cos(), t.sin());
            let f0 = g2(a, b);
            let faa = (g2(a + h, b) - 2.0 * f0 + g2(a - h, b)) / (h * h);
            let fbb = (g2(a, b + h) - 2.0 * f0 + g2(a, b - h)) / (h * h);
            let fab = (g2(a + h, b + h) - g2(a + h, b - h) - g2(a - h, b + h) + g2(a - h, b - h)) / (4.0 * h * h);
            Matrix2::new(faa, fab, fab, fbb).symmetric_eigenvalues().min()
        })
        .fold(f64::INFINITY, f64::min)
}

fn sample_fibres(cfg: &FinslerCheckConfig) -> Vec<PureImaginary> {
    let mut rng = rng_from_seed(cfg.seed);
    (0..cfg.fibres).map(|_| random_st_point(&mut rng).x()).collect()
}

fn min_over_fibres(eps: f64, fibres: &[PureImaginary], directions: usize) -> f64 {
    fibres
        .par_iter()
        .map(|&x| fibre_min_eigenvalue(eps, x, directions))
        .reduce(|| f64::INFINITY, f64::min)
}

/// Upper end of the bisection bracket; `H_eps` is indefinite beyond `eps = 1`.
pub const CONVEXITY_BRACKET: f64 = 1.5;

/// Largest `eps` (to `1e-6`) at which `G^2` passes the eigenvalue floor on every sampled fibre.
pub fn fibre_convexity_threshold(cfg: &FinslerCheckConfig) -> Result<f64> {
    let fibres = sample_fibres(cfg);
    let passes = |e: f64| min_over_fibres(e, &fibres, cfg.directions) >= cfg.floor;
    if !passes(0.0) {
        return Err(Error::Degenerate("sampled fibres are not convex at eps = 0".into()));
    }
    if passes(CONVEXITY_BRACKET) {
        return Err(Error::Convergence(format!("convexity still holds at eps = {CONVEXITY_BRACKET}")));
    }
    let (mut lo, mut hi) = (0.0, CONVEXITY_BRACKET);
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if passes(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `(x1, x2, x3)` with `v = x3 i - x2 j + x1 k`.
pub fn cartesian(v: PureImaginary) -> [f64; 3] {
    [v.x3, -v.x2, v.x1]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandersCheck {
    /// `|-2(u0 u3 + u1 u2) - (x1 y2 - x2 y1)|` in cartesian coordinates.
    pub identity: f64,
    /// `|-(1/2) <y, (0, -x3, x2)> - (u0 u3 + u1 u2)|` with components along `i, j, k`.
    pub covector: f64,
}

pub fn randers_identity(u: UnitQuaternion) -> RandersCheck {
    let q = u.quaternion();
    let cross = q.w * q.z + q.x * q.y;
    let (x, y) = (rotate(u, PureImaginary::I), rotate(u, PureImaginary::K));
    let (xc, yc) = (cartesian(x), cartesian(y));
    let identity = (-2.0 * cross - (xc[0] * yc[1] - xc[1] * yc[0])).abs();
    let covector = (-0.5 * y.dot(PureImaginary::new(0.0, -x.x3, x.x2)) - cross).abs();
    RandersCheck { identity, covector }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinslerReport {
    pub eps: f64,
    pub seed: u64,
    pub rng: String,
    pub homogeneity_degree: f64,
    pub k_eps_identity_residual: f64,
    pub randers_identity_residual: f64,
    pub randers_covector_residual: f64,
    /// Per-fibre minimal Hessian eigenvalue of `G^2` at `eps`.
    pub min_eigenvalues: Vec<f64>,
    pub convex: bool,
    pub eps_star: f64,
}

/// Runs every check at `cfg.eps` with `samples` random points for the identities.
pub fn finsler_report(cfg: &FinslerCheckConfig, samples: usize) -> Result<FinslerReport> {
    let mut rng = rng_from_seed(cfg.seed);
    let a_bar = right_angle_rotor().conj();
    let mut degree_err: f64 = 0.0;
    let mut degree = 2.0;
    let mut k_res: f64 = 0.0;
    let mut r_id: f64 = 0.0;
    let mut r_cov: f64 = 0.0;
    for n in 0..samples {
        let u = random_unit_quaternion(&mut rng);
        let scale: f64 = rng.random_range(0.5..2.0);
        let p = u.quaternion().scale(scale);
        let lhs = k_eps(cfg.eps, p.to_array());
        let rhs = h_eps(cfg.eps, (a_bar.quaternion() * p).to_array());
        k_res = k_res.max((lhs - rhs).abs());
        let check = randers_identity(u);
        r_id = r_id.max(check.identity);
        r_cov = r_cov.max(check.covector);
        if n < 100 {
            let d = homogeneity_degree(|q| k_eps(cfg.eps, [q[0], q[1], q[2], q[3]]), &p.to_array())?;
            if (d - 2.0).abs() >= degree_err {
                degree_err = (d - 2.0).abs();
                degree = d;
            }
        }
    }
    let fibres = sample_fibres(cfg);
    let min_eigenvalues: Vec<f64> = fibres.par_iter().map(|&x| fibre_min_eigenvalue(cfg.eps, x, cfg.directions)).collect();
    let convex = min_eigenvalues.iter().all(|&m| m >= cfg.floor);
    Ok(FinslerReport {
        eps: cfg.eps,
        seed: cfg.seed,
        rng: RNG_NAME.into(),
        homogeneity_degree: degree,
        k_eps_identity_residual: k_res,
        randers_identity_residual: r_id,
        randers_covector_residual: r_cov,
        min_eigenvalues,
        convex,
        eps_star: fibre_convexity_threshold(cfg)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::{hopf_project, latitude_fit, phi};
    use crate::dynamics::{hamiltonian_field, HamiltonianKind, HamiltonianSpec, SymplecticFormSpec};
    use crate::quat::exp_pure;
    use crate::sampling::random_quaternion;
    use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

    #[test]
    fn k_eps_examples() {
        let mut rng = rng_from_seed(50);
        let p = random_quaternion(&mut rng).to_array();
        assert_eq!(k_eps(0.0, p), p.iter().map(|c| c * c).sum::<f64>());
        assert_eq!(k_eps(0.3, [1.0, 0.0, 0.0, 0.0]), 1.0);
        let a_bar = right_angle_rotor().conj().quaternion();
        for _ in 0..1000 {
            let q = random_quaternion(&mut rng);
            let e = 0.4;
            assert!((k_eps(e, q.to_array()) - h_eps(e, (a_bar * q).to_array())).abs() < 1e-13 * q.norm_sqr().max(1.0));
        }
    }

    #[test]
    fn printed_cross_term_is_half_the_transformed_one() {
        // H_eps(conj(a) p) - H0(p) = 2 eps (x0 y1 + y0 x1), not eps (x0 y1 + y0 x1)
        let p = [0.5, -0.3, 0.7, 0.2];
        let a_bar = right_angle_rotor().conj().quaternion();
        let transformed = h_eps(1.0, (a_bar * Quaternion::from_array(p)).to_array()) - k_eps(0.0, p);
        let printed = p[0] * p[3] + p[1] * p[2];
        assert!((transformed - 2.0 * printed).abs() < 1e-15);
    }

    #[test]
    fn homogeneity_examples() {
        let p = [0.3, -0.2, 0.9, 0.1];
        let h0 = |q: &[f64]| q.iter().map(|c| c * c).sum::<f64>();
        assert!((homogeneity_degree(h0, &p).unwrap() - 2.0).abs() < 1e-12);
        let norm = |q: &[f64]| q.iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!((homogeneity_degree(norm, &p).unwrap() - 1.0).abs() < 1e-12);
        let k = |q: &[f64]| k_eps(0.4, [q[0], q[1], q[2], q[3]]);
        assert!((homogeneity_degree(k, &p).unwrap() - 2.0).abs() < 1e-9);
        assert!(homogeneity_degree(|_| 0.0, &p).is_err());
    }

    #[test]
    fn cotangent_hamiltonian_is_fibrewise_linear() {
        let mut rng = rng_from_seed(51);
        for _ in 0..50 {
            let pt = random_st_point(&mut rng);
            let (x, y) = (pt.x(), pt.y());
            assert!((phi(phi_inverse(x, y)).x() - x).max_abs() < 1e-13);
            assert!((phi(phi_inverse(x, y)).y() - y).max_abs() < 1e-13);
            let g1 = cotangent_hamiltonian(0.3, x, y.scale(1.3));
            let g2 = cotangent_hamiltonian(0.3, x, y.scale(2.6));
            assert!((g2 - 2.0 * g1).abs() < 1e-12);
        }
    }

    #[test]
    fn convexity_at_small_eps() {
        let fibres = sample_fibres(&FinslerCheckConfig::new(0.0).unwrap());
        assert!(min_over_fibres(0.0, &fibres, 16) > 0.1);
        assert!(min_over_fibres(0.05, &fibres, 16) > 1e-8);
        assert!(min_over_fibres(1.2, &fibres, 16) < 0.0);
    }

    #[test]
    fn randers_examples() {
        let c = randers_identity(UnitQuaternion::IDENTITY);
        assert_eq!((c.identity, c.covector), (0.0, 0.0));
        let u = UnitQuaternion::new_normalize(Quaternion::new(1.0, 1.0, 0.0, 0.0)).unwrap();
        let c = randers_identity(u);
        assert!(c.identity < 1e-15 && c.covector < 1e-15);
        let mut rng = rng_from_seed(52);
        for _ in 0..1000 {
            let c = randers_identity(random_unit_quaternion(&mut rng));
            assert!(c.identity < 1e-13 && c.covector < 1e-13);
        }
    }

    #[test]
    fn half_square_field_scales_by_h0() {
        let mut rng = rng_from_seed(53);
        for theta in [0.0, PI / 2.0] {
            let omega = SymplecticFormSpec::Quaternionic(theta);
            let h = HamiltonianSpec::new(HamiltonianKind::H0, 0.0);
            for _ in 0..20 {
                let p = random_quaternion(&mut rng).to_array();
                let h0 = h.value(&p);
                let x = hamiltonian_field(&omega, &h, &p).unwrap();
                let y = hamiltonian_field(&omega, &h.half_squared(), &p).unwrap();
                assert!(x.iter().zip(&y).all(|(a, b)| (h0 * a - b).abs() < 1e-11 * h0.max(1.0).powi(2)));
                if (h0 - 1.0).abs() > 0.1 {
                    assert!(x.iter().zip(&y).any(|(a, b)| (a / h0 - b).abs() > 1e-3));
                }
            }
        }
    }

    #[test]
    fn k_eps_fields_parallel_on_level_set() {
        let mut rng = rng_from_seed(54);
        let omega = SymplecticFormSpec::Quaternionic(PI / 2.0);
        let k = HamiltonianSpec::new(HamiltonianKind::KEps, 0.3);
        for _ in 0..20 {
            let q = random_quaternion(&mut rng);
            let p = q.scale(1.0 / k.value(&q.to_array()).sqrt()).to_array();
            let x = hamiltonian_field(&omega, &k, &p).unwrap();
            let y = hamiltonian_field(&omega, &k.half_squared(), &p).unwrap();
            assert!(x.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn surviving_orbits_traverse_one_great_circle_oppositely() {
        let a = right_angle_rotor();
        let eps = FRAC_1_SQRT_2;
        let circle = |start: UnitQuaternion, speed: f64| -> Vec<[f64; 3]> {
            (0..200)
                .map(|n| {
                    let t = 2.0 * TAU * n as f64 / 200.0;
                    let g = exp_pure(PureImaginary::I, speed * t / 2.0).unwrap() * start;
                    hopf_project(a * g).cartesian
                })
                .collect()
        };
        let j = UnitQuaternion::new_checked(Quaternion::J).unwrap();
        let f0 = latitude_fit(&circle(UnitQuaternion::IDENTITY, 1.0 + eps), Some([0.0, 0.0, 1.0])).unwrap();
        let f1 = latitude_fit(&circle(j, 1.0 - eps), Some([0.0, 0.0, 1.0])).unwrap();
        assert!((f0.angle - PI / 2.0).abs() < 1e-12 && (f1.angle - PI / 2.0).abs() < 1e-12);
        assert_eq!(f0.direction, -f1.direction);
    }
}
